"""Photon-pair measurement bases and the repeat-until-success gate loop.

The two-qubit phase gate is driven by measuring a freshly generated
photon pair in a basis that is mutually unbiased with respect to the
computational photon basis {|x_i y_j>}. Detecting an entangled basis
state completes the gate (success); detecting a product basis state
leaves the sources in their input state up to known local phase gates
(insurance), so the attempt can be repeated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import cos, pi, sin, sqrt
from typing import Sequence

import numpy as np

from . import qcore
from .qcore import PureState, apply, cz_matrix, pure, z_phase

MUB_TOL = 1e-10
SOURCE_LABELS = (("0", "1"), ("0", "1"))
PHOTON_LABELS = (("x0", "x1"), ("y0", "y1"))


class Branch(Enum):
    SUCCESS = "success"
    INSURANCE = "insurance"

    def __str__(self):
        return self.value


class CorrectionError(ValueError):
    """No local-phase/CZ recipe reproduces the conditioned outcome map."""


def canonical_angle(phi: float) -> float:
    """Representative of phi mod 2*pi in (-pi, pi]."""
    out = (phi + pi) % (2 * pi) - pi
    return pi if out == -pi else out


@dataclass(frozen=True)
class AngleSet:
    """Parameterization of two orthonormal single-photon state pairs.

    All six angles are unconstrained reals (radians).
    """

    theta1: float
    theta2: float
    vartheta1: float
    vartheta2: float
    xi1: float
    xi2: float

    @classmethod
    def reference(cls) -> "AngleSet":
        """The standard choice: theta_i = pi/4, xi2 = -pi/2, rest zero."""
        return cls(pi / 4, pi / 4, 0.0, 0.0, 0.0, -pi / 2)

    def as_tuple(self) -> tuple[float, ...]:
        return (self.theta1, self.theta2, self.vartheta1, self.vartheta2,
                self.xi1, self.xi2)


@dataclass(frozen=True)
class PhotonBasis:
    """Orthonormal single-photon pairs (a1, a2) for photon 1 and (b1, b2) for photon 2."""

    a1: PureState
    a2: PureState
    b1: PureState
    b2: PureState

    def __post_init__(self):
        for u, v in ((self.a1, self.a2), (self.b1, self.b2)):
            if abs(u.overlap(v)) > 1e-12:
                raise ValueError("photon basis pairs must be orthogonal")


def photon_basis_from_angles(angles: AngleSet) -> PhotonBasis:
    """Build the single-photon measurement states from the angle set."""
    t1, t2, v1, v2, x1, x2 = angles.as_tuple()
    c1, s1, c2, s2 = cos(t1), sin(t1), cos(t2), sin(t2)
    a1 = pure((2,), [c1, np.exp(1j * v1) * s1], (PHOTON_LABELS[0],))
    a2 = pure((2,), np.exp(-1j * x1) * np.array(
        [np.exp(-1j * v1) * s1, -c1]), (PHOTON_LABELS[0],))
    b1 = pure((2,), [c2, np.exp(1j * v2) * s2], (PHOTON_LABELS[1],))
    b2 = pure((2,), np.exp(-1j * x2) * np.array(
        [np.exp(-1j * v2) * s2, -c2]), (PHOTON_LABELS[1],))
    return PhotonBasis(a1, a2, b1, b2)


@dataclass(frozen=True)
class Correction:
    """Recipe mapping a conditioned outcome back to the reference circuit.

    The conditioned two-qubit state equals
    ``global_phase * Z1(phi1) Z2(phi2) * CZ^apply_cz |psi_in>``.
    """

    global_phase: complex
    phi1: float
    phi2: float
    apply_cz: bool

    def matrix(self) -> np.ndarray:
        m = np.kron(z_phase(self.phi1), z_phase(self.phi2))
        if self.apply_cz:
            m = m @ cz_matrix()
        return self.global_phase * m

    def undo_local(self, s: PureState) -> PureState:
        """Strip the global phase and local Z gates, leaving CZ^apply_cz |psi_in>."""
        inv = np.kron(z_phase(-self.phi1), z_phase(-self.phi2)) / self.global_phase
        return apply(inv, s, [0, 1])


@dataclass(frozen=True)
class PairBasis:
    """Four orthonormal two-photon measurement states with branch tags.

    ``corrections`` is None when the basis is not mutually unbiased (no
    local recipe exists); such bases are still usable for probability
    experiments.
    """

    states: tuple[PureState, PureState, PureState, PureState]
    branch: tuple[Branch, Branch, Branch, Branch]
    corrections: tuple[Correction, ...] | None = None

    def __post_init__(self):
        gram = np.array([[si.overlap(sj) for sj in self.states] for si in self.states])
        if np.max(np.abs(gram - np.eye(4))) > MUB_TOL:
            raise ValueError("pair basis is not orthonormal")

    def correction_for(self, outcome_index: int) -> Correction:
        if self.corrections is None:
            raise CorrectionError(
                "basis is not mutually unbiased; no correction table exists"
            )
        return self.corrections[outcome_index - 1]

    def success_indices(self) -> tuple[int, ...]:
        return tuple(k + 1 for k, b in enumerate(self.branch) if b is Branch.SUCCESS)


@dataclass(frozen=True)
class UnbiasedForm:
    """Phase triple of a state 1/2 [ |x0y0> + e^{i p1}|x0y1> + e^{i p2}|x1y0> + e^{i p3}|x1y1> ]."""

    phi1: float
    phi2: float
    phi3: float
    valid: bool

    def reconstruct(self) -> PureState:
        return unbiased_state(self.phi1, self.phi2, self.phi3)

    def is_maximally_entangling(self, tol: float = 1e-9) -> bool:
        """Phase criterion for unit concurrence: p3 = p1 + p2 + pi (mod 2 pi)."""
        return abs(canonical_angle(self.phi3 - self.phi1 - self.phi2 - pi)) <= tol

    def is_locally_trivial(self, tol: float = 1e-9) -> bool:
        """Phase criterion for a product state: p3 = p1 + p2 (mod 2 pi)."""
        return abs(canonical_angle(self.phi3 - self.phi1 - self.phi2)) <= tol


def unbiased_state(phi1: float, phi2: float, phi3: float) -> PureState:
    amps = 0.5 * np.array(
        [1.0, np.exp(1j * phi1), np.exp(1j * phi2), np.exp(1j * phi3)])
    return pure((2, 2), amps, PHOTON_LABELS)


def unbiased_form(state: PureState, tol: float = MUB_TOL) -> UnbiasedForm:
    """Extract the phase triple of a two-photon state, flagging non-unbiased ones."""
    if state.dims != (2, 2):
        raise qcore.DimensionMismatchError("unbiased form needs a two-photon state")
    a = state.amps
    valid = bool(np.max(np.abs(np.abs(a) - 0.5)) <= tol)
    if not valid:
        return UnbiasedForm(0.0, 0.0, 0.0, False)
    ref = a[0] / abs(a[0])
    phases = np.angle(a / ref)
    return UnbiasedForm(float(phases[1]), float(phases[2]), float(phases[3]), True)


def is_maximally_entangling(state: PureState, tol: float = 1e-9) -> bool:
    """True iff an unbiased-form two-photon state detects a maximally entangling outcome."""
    form = unbiased_form(state)
    return form.valid and form.is_maximally_entangling(tol)


# ---------------------------------------------------------------------------
# pair-basis constructors

def _pair(u: PureState, v: PureState) -> np.ndarray:
    return np.kron(u.amps, v.amps)


def _bell_states(pb: PhotonBasis) -> list[np.ndarray]:
    a1b1, a2b2 = _pair(pb.a1, pb.b1), _pair(pb.a2, pb.b2)
    a1b2, a2b1 = _pair(pb.a1, pb.b2), _pair(pb.a2, pb.b1)
    return [
        (a1b1 + a2b2) / sqrt(2),
        (a1b1 - a2b2) / sqrt(2),
        (a1b2 + a2b1) / sqrt(2),
        (a1b2 - a2b1) / sqrt(2),
    ]


def _finish_basis(amp_list, branch) -> PairBasis:
    states = tuple(pure((2, 2), a, PHOTON_LABELS) for a in amp_list)
    corrections = None
    if all(np.max(np.abs(np.abs(s.amps) - 0.5)) <= MUB_TOL for s in states):
        corrections = derive_correction_table(states)
    return PairBasis(states, branch, corrections)


def bell_pair_basis(pb: PhotonBasis) -> PairBasis:
    """Complete Bell basis built on the photon pairs; every outcome entangles."""
    return _finish_basis(_bell_states(pb), (Branch.SUCCESS,) * 4)


def rus_pair_basis(pb: PhotonBasis) -> PairBasis:
    """Two product states (insurance) plus two Bell states (success)."""
    bell = _bell_states(pb)
    amp_list = [_pair(pb.a1, pb.b1), _pair(pb.a2, pb.b2), bell[2], bell[3]]
    return _finish_basis(
        amp_list,
        (Branch.INSURANCE, Branch.INSURANCE, Branch.SUCCESS, Branch.SUCCESS),
    )


def is_mutually_unbiased(basis: PairBasis, tol: float = MUB_TOL) -> bool:
    """Direct check: every amplitude modulus is 1/2 in the computational photon basis."""
    return all(np.max(np.abs(np.abs(s.amps) - 0.5)) <= tol for s in basis.states)


def mub_constraint_holds(angles: AngleSet, tol: float = MUB_TOL) -> bool:
    """Closed-form criterion on the angles for mutual unbiasedness.

    Requires cos(2 theta1) cos(2 theta2) = 0 together with vanishing of
    the two phase cosines cos(vt1 +- vt2 + xi1 +- xi2). The phase
    conditions only bite when both sin(2 theta_i) are nonzero; with
    either pair of photon states lying on the computational axes the
    interference terms vanish and the phases are unconstrained.
    """
    t1, t2, v1, v2, x1, x2 = angles.as_tuple()
    if abs(cos(2 * t1) * cos(2 * t2)) > tol:
        return False
    if abs(sin(2 * t1) * sin(2 * t2)) <= tol:
        return True
    return (abs(cos(v1 + v2 + x1 + x2)) <= tol
            and abs(cos(v1 - v2 + x1 - x2)) <= tol)


# ---------------------------------------------------------------------------
# encoding, measurement, corrections

def encode(src: PureState) -> PureState:
    """Copy each source qubit's basis value onto a fresh photon: |ij> -> |ij, x_i y_j>."""
    if src.dims != (2, 2):
        raise qcore.DimensionMismatchError("encode expects a two-qubit source state")
    amps = np.zeros((2, 2, 2, 2), dtype=np.complex128)
    c = src.amps.reshape(2, 2)
    for i in range(2):
        for j in range(2):
            amps[i, j, i, j] = c[i, j]
    return pure((2, 2, 2, 2), amps.reshape(-1), SOURCE_LABELS + PHOTON_LABELS)


def derive_correction_table(states: Sequence[PureState]) -> tuple[Correction, ...]:
    """Solve for the local recipe of every outcome of an unbiased basis.

    Projecting outcome state k out of an encoded input acts diagonally on
    the sources with phases 2*conj(amps_k); matching that diagonal against
    ``lambda Z1(phi_a) Z2(phi_b) CZ^c`` fixes the recipe, which is then
    verified against random inputs.
    """
    table = []
    for st in states:
        d = 2.0 * st.amps.conj()
        if np.max(np.abs(np.abs(d) - 1.0)) > MUB_TOL:
            raise CorrectionError(
                "no local-equivalence solution: outcome is not mutually unbiased"
            )
        lam = d[0]
        phi2 = canonical_angle(-float(np.angle(d[1] / lam)))
        phi1 = canonical_angle(-float(np.angle(d[2] / lam)))
        q = d[3] / (lam * np.exp(-1j * (phi1 + phi2)))
        if abs(q - 1.0) <= MUB_TOL:
            cz = False
        elif abs(q + 1.0) <= MUB_TOL:
            cz = True
        else:
            raise CorrectionError(
                f"no local-equivalence solution: residual phase factor {q:.6f}"
            )
        table.append(Correction(complex(lam), phi1, phi2, cz))
    _verify_correction_table(states, table)
    return tuple(table)


def _verify_correction_table(states, table, n_inputs: int = 20, tol: float = 1e-10):
    rng = np.random.default_rng(20240117)
    for _ in range(n_inputs):
        src = qcore.random_state((2, 2), rng)
        enc = encode(src)
        for st, corr in zip(states, table):
            out = qcore.project(enc, [2, 3], st).require_state()
            ref = pure((2, 2), corr.matrix() @ src.amps)
            if not qcore.equal_up_to_global_phase(out, ref, tol):
                raise CorrectionError("correction table failed verification")


@dataclass(frozen=True)
class OutcomeRecord:
    """One measurement (or full gate run) outcome on the two source qubits."""

    outcome_index: int
    branch: Branch
    rounds_used: int
    post_state: PureState
    timed_out: bool = False


def measure_pair(encoded: PureState, basis: PairBasis, rng) -> OutcomeRecord:
    """Sample a pair-measurement outcome and collapse the photons away.

    The returned state carries no corrections; apply the basis recipe to
    recover the reference gate action.
    """
    if encoded.dims != (2, 2, 2, 2):
        raise qcore.DimensionMismatchError("expected a 16-dim encoded state")
    stack = np.stack([s.amps.conj().reshape(2, 2) for s in basis.states])
    # residual[k, i, j]: source amplitudes conditioned on outcome k
    residual = np.einsum("ijxy,kxy->kij", encoded.tensor_view(), stack)
    probs = np.einsum("kij,kij->k", residual, residual.conj()).real
    k = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum()))
    k = min(k, 3)
    post = pure((2, 2), residual[k].reshape(-1) / sqrt(probs[k]), SOURCE_LABELS)
    return OutcomeRecord(k + 1, basis.branch[k], 1, post)


def rus_execute(src: PureState, basis: PairBasis, rng,
                max_rounds: int = 64) -> OutcomeRecord:
    """Repeat encode/measure/correct until a success outcome lands.

    Success returns the corrected state CZ|src> (up to global phase).
    Insurance outcomes are undone with their recipe and retried. If
    ``max_rounds`` insurance outcomes occur in a row, a timeout record is
    returned whose state is still the (restored) input.

    The encoded pair measurement acts diagonally on the source
    amplitudes (each |ij> keeps exactly its own photon ket), so the loop
    runs on bare 4-vectors; one uniform draw is consumed per round, as
    in :func:`measure_pair`.
    """
    if not basis.success_indices():
        raise ValueError("basis has no success-tagged outcome")
    if src.dims != (2, 2):
        raise qcore.DimensionMismatchError("gate loop expects a two-qubit source")
    collapse = np.stack([2.0 * s.amps.conj() for s in basis.states])
    undo = np.stack([
        np.array([1, np.exp(1j * c.phi2), np.exp(1j * c.phi1),
                  np.exp(1j * (c.phi1 + c.phi2))]) / c.global_phase
        for c in (basis.correction_for(k) for k in range(1, 5))])
    amps = src.amps
    k = 0
    for rounds in range(1, max_rounds + 1):
        conditioned = collapse * amps[np.newaxis, :]
        probs = np.einsum("ki,ki->k", conditioned, conditioned.conj()).real
        k = min(int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum())), 3)
        amps = conditioned[k] / sqrt(probs[k]) * undo[k]
        if basis.branch[k] is Branch.SUCCESS:
            return OutcomeRecord(k + 1, Branch.SUCCESS, rounds,
                                 pure((2, 2), amps, SOURCE_LABELS))
    return OutcomeRecord(k + 1, basis.branch[k], max_rounds,
                         pure((2, 2), amps, SOURCE_LABELS), timed_out=True)


def reference_gate_output(src: PureState) -> PureState:
    """The target state CZ|src> computed by a direct circuit, as an oracle."""
    return apply(cz_matrix(), src, [0, 1])
