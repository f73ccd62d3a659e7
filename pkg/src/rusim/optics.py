"""Linear-optics measurement apparatuses for the photon-pair protocol.

Two physical realizations of the pair measurement are simulated in
second quantization: a polarizing 50:50 beam-splitter setup and a
balanced 4x4 multiport interferometer. Both are checked against the
abstract projective measurement, and a heralded loss model converts
undetected photons into explicit failure outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import factorial, sqrt
from typing import Mapping

import numpy as np

from . import rusgate
from .qcore import PureState, UnitaryOp

FOCK_TOL = 1e-12
PRUNE_TOL = 1e-15


class ImpossiblePatternError(ValueError):
    """Detection pattern that the apparatus assigns zero amplitude (simulation bug)."""


class Outcome(Enum):
    PHI1 = 1
    PHI2 = 2
    PHI3 = 3
    PHI4 = 4
    FAILURE = 0

    def __str__(self):
        return "failure" if self is Outcome.FAILURE else f"phi{self.value}"


@dataclass(frozen=True)
class FockState:
    """Bosonic state over M optical modes, at most two photons total.

    ``terms`` maps occupation vectors to amplitudes in the normalized
    number basis; a doubly occupied mode therefore stands for
    (b+)^2/sqrt(2) acting on vacuum.
    """

    modes: int
    terms: Mapping[tuple[int, ...], complex] = field(repr=False)

    def __post_init__(self):
        clean = {}
        for occ, amp in self.terms.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != self.modes or any(n < 0 for n in occ):
                raise ValueError(f"bad occupation vector {occ} for {self.modes} modes")
            if sum(occ) > 2:
                raise ValueError("states with more than two photons are unsupported")
            if abs(amp) > PRUNE_TOL:
                clean[occ] = clean.get(occ, 0j) + complex(amp)
        norm = sqrt(sum(abs(a) ** 2 for a in clean.values()))
        if abs(norm - 1.0) > FOCK_TOL:
            if norm < 1e-9:
                raise ValueError("Fock state is numerically zero")
            clean = {o: a / norm for o, a in clean.items()}
        object.__setattr__(self, "terms", clean)

    def amplitude(self, occ: tuple[int, ...]) -> complex:
        return self.terms.get(tuple(occ), 0j)

    def norm(self) -> float:
        return sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def occupations(self) -> list[tuple[int, ...]]:
        return sorted(self.terms)


def vacuum(modes: int) -> FockState:
    return FockState(modes, {(0,) * modes: 1.0})


def from_creation_ops(modes: int, ops: list[int], amp: complex = 1.0) -> FockState:
    """Normalized state from a product of creation operators on vacuum."""
    occ = [0] * modes
    for m in ops:
        occ[m] += 1
    weight = sqrt(float(np.prod([factorial(n) for n in occ])))
    return FockState(modes, {tuple(occ): amp * weight})


class ModeUnitary(UnitaryOp):
    """Unitary mode transformation of a linear-optics network."""


def dft4() -> ModeUnitary:
    """Balanced 4x4 multiport: U[m, n] = (1/2) i^{m n} (0-indexed).

    Every incoming photon is redirected to each output port with equal
    probability, erasing which-way information.
    """
    m, n = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    return ModeUnitary(4, 0.5 * (1j) ** (m * n))


def scatter(f: FockState, u: ModeUnitary) -> FockState:
    """Substitute every input creation operator a_n -> sum_m U[m, n] b_m."""
    mat = u.matrix
    if mat.shape[0] != f.modes:
        raise ValueError(f"mode unitary is {mat.shape[0]}x, state has {f.modes} modes")
    out: dict[tuple[int, ...], complex] = {}
    for occ, amp in f.terms.items():
        ops = [m for m, n in enumerate(occ) for _ in range(n)]
        pref = amp / sqrt(float(np.prod([factorial(n) for n in occ])))
        if not ops:
            out[occ] = out.get(occ, 0j) + amp
        elif len(ops) == 1:
            col = mat[:, ops[0]]
            for m in range(f.modes):
                if col[m] == 0:
                    continue
                tgt = tuple(1 if i == m else 0 for i in range(f.modes))
                out[tgt] = out.get(tgt, 0j) + pref * col[m]
        else:
            c1, c2 = mat[:, ops[0]], mat[:, ops[1]]
            for m1 in range(f.modes):
                for m2 in range(f.modes):
                    coeff = c1[m1] * c2[m2]
                    if coeff == 0:
                        continue
                    occ_out = [0] * f.modes
                    occ_out[m1] += 1
                    occ_out[m2] += 1
                    weight = sqrt(2.0) if m1 == m2 else 1.0
                    tgt = tuple(occ_out)
                    out[tgt] = out.get(tgt, 0j) + pref * coeff * weight
    return FockState(f.modes, out)


# ---------------------------------------------------------------------------
# dual-rail multiport pipeline

@dataclass(frozen=True)
class PortAssignment:
    """Input port (1-based) fed by each photonic basis label."""

    x0: int = 1
    y0: int = 2
    x1: int = 3
    y1: int = 4

    def __post_init__(self):
        if sorted((self.x0, self.y0, self.x1, self.y1)) != [1, 2, 3, 4]:
            raise ValueError("port assignment must be a bijection onto {1..4}")

    def mode_pair(self, i: int, j: int) -> tuple[int, int]:
        """0-based modes hit by the photon pair |x_i y_j>."""
        x = (self.x0, self.x1)[i] - 1
        y = (self.y0, self.y1)[j] - 1
        return x, y


DEFAULT_PORTS = PortAssignment()


def dualrail_input(pair_state: PureState, pa: PortAssignment = DEFAULT_PORTS) -> FockState:
    """Convert a two-photon state into four spatial modes, one per basis label."""
    if pair_state.dims != (2, 2):
        raise ValueError("dual-rail conversion expects a two-photon state")
    c = pair_state.amps.reshape(2, 2)
    out: dict[tuple[int, ...], complex] = {}
    for i in range(2):
        for j in range(2):
            if c[i, j] == 0:
                continue
            x, y = pa.mode_pair(i, j)
            occ = [0, 0, 0, 0]
            occ[x] += 1
            occ[y] += 1
            tgt = tuple(occ)
            out[tgt] = out.get(tgt, 0j) + c[i, j]
    return FockState(4, out)


@dataclass(frozen=True)
class LossModel:
    """Per-photon end-to-end survival probability (generation x collection x detection)."""

    eta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"survival probability must be in [0, 1], got {self.eta}")


@dataclass(frozen=True)
class DetectionPattern:
    """Per-detector counts (number-resolving) or clicks (threshold)."""

    counts: tuple[int, ...]
    resolving: bool = True

    def __post_init__(self):
        if sum(self.counts) > 2:
            raise ValueError("detection pattern exceeds the two-photon sector")

    @property
    def total(self) -> int:
        return sum(self.counts)

    def hit_modes(self) -> tuple[int, ...]:
        """Detector indices, repeated by count."""
        return tuple(m for m, c in enumerate(self.counts) for _ in range(c))


def sample_detection(f: FockState, loss: LossModel, resolving: bool, rng) -> DetectionPattern:
    """Born-sample an occupation, then thin each photon independently."""
    occs = list(f.terms)
    probs = np.array([abs(f.terms[o]) ** 2 for o in occs])
    k = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum()))
    occ = occs[min(k, len(occs) - 1)]
    counts = tuple(int(rng.binomial(n, loss.eta)) if n else 0 for n in occ)
    if not resolving:
        counts = tuple(min(1, c) for c in counts)
    return DetectionPattern(counts, resolving)


_MULTIPORT_PAIRS = {
    (0, 0): Outcome.PHI1, (2, 2): Outcome.PHI1,
    (1, 1): Outcome.PHI2, (3, 3): Outcome.PHI2,
    (0, 3): Outcome.PHI3, (1, 2): Outcome.PHI3,
    (0, 1): Outcome.PHI4, (2, 3): Outcome.PHI4,
}


def classify_multiport(pattern: DetectionPattern) -> Outcome:
    """Map a multiport detection pattern to a measurement outcome.

    Two photons in port 1 or 3 herald outcome 1, in port 2 or 4 outcome 2;
    the coincidences {1,4}/{2,3} herald outcome 3 and {1,2}/{3,4} outcome 4.
    The remaining coincidences carry zero amplitude, so seeing one means
    the simulation itself is broken.
    """
    if pattern.total < 2:
        return Outcome.FAILURE
    pair = tuple(sorted(pattern.hit_modes()))
    try:
        return _MULTIPORT_PAIRS[pair]
    except KeyError:
        raise ImpossiblePatternError(
            f"multiport coincidence in ports {tuple(p + 1 for p in pair)} "
            "has zero amplitude"
        ) from None


# ---------------------------------------------------------------------------
# polarizing beam-splitter pipeline
#
# Mode order: (port1, h), (port1, v), (port2, h), (port2, v).

def bs_rotations(pb: rusgate.PhotonBasis) -> tuple[np.ndarray, np.ndarray]:
    """Single-photon rotations |h><a1| + |v><a2| and |h><b1| + |v><b2|."""
    u1 = np.vstack([pb.a1.amps.conj(), pb.a2.amps.conj()])
    u2 = np.vstack([pb.b1.amps.conj(), pb.b2.amps.conj()])
    return u1, u2


def _mixer() -> ModeUnitary:
    """Polarization-preserving 50:50 mixer of the two spatial ports."""
    h = 1 / sqrt(2)
    m = np.zeros((4, 4), dtype=np.complex128)
    for pol in range(2):
        m[pol, pol] = h
        m[2 + pol, pol] = h
        m[pol, 2 + pol] = h
        m[2 + pol, 2 + pol] = -h
    return ModeUnitary(4, m)


def beamsplitter_apparatus(pair_state: PureState,
                           u1: np.ndarray | None = None,
                           u2: np.ndarray | None = None) -> FockState:
    """Rotate each photon's polarization, then mix the two spatial ports.

    Defaults to the rotations that measure the reference-angle basis.
    """
    if pair_state.dims != (2, 2):
        raise ValueError("beam-splitter apparatus expects a two-photon state")
    if u1 is None or u2 is None:
        d1, d2 = bs_rotations(
            rusgate.photon_basis_from_angles(rusgate.AngleSet.reference()))
        u1 = d1 if u1 is None else u1
        u2 = d2 if u2 is None else u2
    c = pair_state.amps.reshape(2, 2)
    d = np.asarray(u1, np.complex128) @ c @ np.asarray(u2, np.complex128).T
    terms: dict[tuple[int, ...], complex] = {}
    for p in range(2):
        for q in range(2):
            if d[p, q] == 0:
                continue
            occ = [0, 0, 0, 0]
            occ[p] += 1       # photon 1 enters spatial port 1
            occ[2 + q] += 1   # photon 2 enters spatial port 2
            terms[tuple(occ)] = terms.get(tuple(occ), 0j) + d[p, q]
    return scatter(FockState(4, terms), _mixer())


_BS_TABLE: dict[tuple[int, ...], Outcome] | None = None


def _bs_pattern_table() -> dict[tuple[int, ...], Outcome]:
    """Detector-pattern table derived by routing each reference basis state.

    The mapping is computed from the simulated apparatus rather than
    hard-coded, so a different mixer sign convention merely relabels it.
    """
    global _BS_TABLE
    if _BS_TABLE is None:
        basis = rusgate.rus_pair_basis(
            rusgate.photon_basis_from_angles(rusgate.AngleSet.reference()))
        table: dict[tuple[int, ...], Outcome] = {}
        for k, st in enumerate(basis.states, start=1):
            for occ, amp in beamsplitter_apparatus(st).terms.items():
                if abs(amp) ** 2 < 1e-12:
                    continue
                prev = table.get(occ)
                if prev is not None and prev is not Outcome(k):
                    raise ImpossiblePatternError(
                        f"pattern {occ} is shared by outcomes {prev} and {k}")
                table[occ] = Outcome(k)
        _BS_TABLE = table
    return _BS_TABLE


def classify_bs(pattern: DetectionPattern) -> Outcome:
    """Map a beam-splitter detection pattern to a measurement outcome.

    Two h photons herald outcome 1 and two v photons outcome 2; mixed
    polarization in the same spatial port heralds outcome 3, in different
    ports outcome 4 (assignment derived from the simulated mapping).
    """
    if pattern.total < 2:
        return Outcome.FAILURE
    occ = pattern.counts
    if not pattern.resolving:
        # two clicks fix the occupied modes uniquely in the 2-photon sector
        occ = tuple(min(1, c) for c in occ)
    try:
        return _bs_pattern_table()[tuple(occ)]
    except KeyError:
        raise ImpossiblePatternError(
            f"beam-splitter pattern {occ} has zero amplitude") from None


# ---------------------------------------------------------------------------
# loss bookkeeping and joint source/photon pipelines

def effective_probabilities(loss: LossModel):
    """Outcome probabilities of one gate attempt through a lossy apparatus.

    With an unbiased two-branch basis, the two-photon events split evenly
    between success and insurance, so (p_s, p_i, p_f) =
    (eta^2/2, eta^2/2, 1 - eta^2), kept exact in rational arithmetic.
    """
    from fractions import Fraction

    from .growth import GateProbabilities

    e2 = Fraction(loss.eta) ** 2
    return GateProbabilities(e2 / 2, e2 / 2, 1 - e2)


def multiport_conditionals(encoded: PureState,
                           pa: PortAssignment = DEFAULT_PORTS,
                           u: ModeUnitary | None = None
                           ) -> dict[tuple[int, ...], np.ndarray]:
    """Unnormalized source amplitudes conditioned on every mode occupation.

    The encoded 16-dim state is pushed through the dual-rail conversion
    and the multiport; the squared norm of each returned vector is the
    occupation's Born probability.
    """
    if encoded.dims != (2, 2, 2, 2):
        raise ValueError("expected a 16-dim encoded state")
    u = dft4() if u is None else u
    c = encoded.tensor_view()
    out: dict[tuple[int, ...], np.ndarray] = {}
    for i in range(2):
        for j in range(2):
            ket = np.zeros(4)
            ket[2 * i + j] = 1.0
            photon = PureState((2, 2), ket)
            fock = scatter(dualrail_input(photon, pa), u)
            for occ, amp in fock.terms.items():
                vec = out.setdefault(occ, np.zeros((2, 2), dtype=np.complex128))
                vec += c[:, :, i, j] * amp
    return {occ: v for occ, v in out.items() if np.linalg.norm(v) > PRUNE_TOL}


def bs_conditionals(encoded: PureState,
                    u1: np.ndarray | None = None,
                    u2: np.ndarray | None = None
                    ) -> dict[tuple[int, ...], np.ndarray]:
    """Beam-splitter analogue of :func:`multiport_conditionals`."""
    if encoded.dims != (2, 2, 2, 2):
        raise ValueError("expected a 16-dim encoded state")
    c = encoded.tensor_view()
    out: dict[tuple[int, ...], np.ndarray] = {}
    for i in range(2):
        for j in range(2):
            ket = np.zeros(4)
            ket[2 * i + j] = 1.0
            photon = PureState((2, 2), ket)
            fock = beamsplitter_apparatus(photon, u1, u2)
            for occ, amp in fock.terms.items():
                vec = out.setdefault(occ, np.zeros((2, 2), dtype=np.complex128))
                vec += c[:, :, i, j] * amp
    return {occ: v for occ, v in out.items() if np.linalg.norm(v) > PRUNE_TOL}
