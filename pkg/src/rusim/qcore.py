"""Dense state-vector engine for small multi-qubit / multi-qudit systems.

Pure states are immutable value objects; every operation returns a new
state. Subsystems are ordered big-endian: the first subsystem is the
most significant index of the flat amplitude vector (numpy C order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12
UNITARY_TOL = 1e-12
ZERO_PROB = 1e-14


class DimensionMismatchError(ValueError):
    """Operands act on incompatible subsystem dimensions (caller bug)."""


class ImpossibleOutcomeError(ValueError):
    """A projection outcome with (numerically) zero probability was requested."""


def _as_amps(amps) -> np.ndarray:
    arr = np.asarray(amps, dtype=np.complex128)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    return arr


@dataclass(frozen=True)
class PureState:
    """Normalized amplitude vector over an ordered list of subsystems.

    ``labels`` optionally names the basis kets of each subsystem, e.g.
    ``(("x0", "x1"), ("y0", "y1"))`` for a two-photon register.
    """

    dims: tuple[int, ...]
    amps: np.ndarray = field(repr=False)
    labels: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if any(d <= 0 for d in dims):
            raise ValueError(f"subsystem dims must be positive, got {dims}")
        amps = _as_amps(self.amps)
        expected = int(np.prod(dims)) if dims else 1
        if amps.size != expected:
            raise DimensionMismatchError(
                f"amplitude vector has length {amps.size}, dims {dims} need {expected}"
            )
        norm = float(np.linalg.norm(amps))
        if not np.isfinite(norm) or norm < 1e-9:
            raise ValueError("state vector is (numerically) zero or non-finite")
        if abs(norm - 1.0) > NORM_TOL:
            amps = amps / norm
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amps", amps)
        if self.labels is not None:
            labels = tuple(tuple(l) for l in self.labels)
            if len(labels) != len(dims) or any(
                len(l) != d for l, d in zip(labels, dims)
            ):
                raise ValueError("labels must name every basis ket of every subsystem")
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.amps.size

    def tensor_view(self) -> np.ndarray:
        return self.amps.reshape(self.dims)

    def overlap(self, other: "PureState") -> complex:
        if self.dims != other.dims:
            raise DimensionMismatchError(f"{self.dims} vs {other.dims}")
        return complex(np.vdot(self.amps, other.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def marginal_probabilities(self, subsystem: int) -> np.ndarray:
        """Born probabilities of one subsystem, others traced out."""
        p = self.probabilities().reshape(self.dims)
        axes = tuple(i for i in range(len(self.dims)) if i != subsystem)
        return p.sum(axis=axes)

    def __repr__(self):
        return f"PureState(dims={self.dims}, dim={self.dim})"


@dataclass(frozen=True)
class UnitaryOp:
    """A dim x dim unitary, validated at construction."""

    dim: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (self.dim, self.dim):
            raise DimensionMismatchError(f"matrix shape {m.shape} != ({self.dim},)*2")
        if np.max(np.abs(m.conj().T @ m - np.eye(self.dim))) > UNITARY_TOL:
            raise ValueError("matrix is not unitary within tolerance")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, matrix) -> "UnitaryOp":
        m = np.asarray(matrix, dtype=np.complex128)
        return cls(m.shape[0], m)


@dataclass(frozen=True)
class ProjectionOutcome:
    """Result of a rank-1 projective measurement on some subsystems.

    ``post_state`` is None when the outcome probability falls below the
    zero threshold; use :meth:`require_state` to insist on a collapse.
    """

    probability: float
    post_state: PureState | None

    @property
    def possible(self) -> bool:
        return self.post_state is not None

    def require_state(self) -> PureState:
        if self.post_state is None:
            raise ImpossibleOutcomeError(
                f"outcome has probability {self.probability:.3e} (< {ZERO_PROB})"
            )
        return self.post_state


# ---------------------------------------------------------------------------
# constructors

def pure(dims: Sequence[int], amps, labels=None) -> PureState:
    return PureState(tuple(dims), _as_amps(amps), labels)


def basis_state(dims: Sequence[int], index: Sequence[int], labels=None) -> PureState:
    dims = tuple(dims)
    amps = np.zeros(int(np.prod(dims)), dtype=np.complex128)
    amps[np.ravel_multi_index(tuple(index), dims)] = 1.0
    return PureState(dims, amps, labels)


def qubit(a0: complex, a1: complex, labels=None) -> PureState:
    return pure((2,), [a0, a1], labels)


def plus_state() -> PureState:
    return qubit(1 / sqrt(2), 1 / sqrt(2))


def random_state(dims: Sequence[int], seed) -> PureState:
    """Haar-like random state, reproducible for a given seed or Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = int(np.prod(tuple(dims)))
    amps = rng.normal(size=n) + 1j * rng.normal(size=n)
    return PureState(tuple(dims), amps)


# ---------------------------------------------------------------------------
# standard gates

SQRT2_INV = 1 / sqrt(2)

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) * SQRT2_INV
S_GATE = np.array([[1, 0], [0, 1j]], dtype=np.complex128)


def z_phase(phi: float) -> np.ndarray:
    """Local phase gate diag(1, e^{-i phi}) (sign convention of the protocol)."""
    return np.array([[1, 0], [0, np.exp(-1j * phi)]], dtype=np.complex128)


def cz_matrix() -> np.ndarray:
    return np.diag([1, 1, 1, -1]).astype(np.complex128)


def hadamard_op() -> UnitaryOp:
    return UnitaryOp.from_matrix(HADAMARD)


def cz_op() -> UnitaryOp:
    return UnitaryOp.from_matrix(cz_matrix())


def z_phase_op(phi: float) -> UnitaryOp:
    return UnitaryOp.from_matrix(z_phase(phi))


# ---------------------------------------------------------------------------
# operations

def tensor(a: PureState, b: PureState) -> PureState:
    labels = None
    if a.labels is not None and b.labels is not None:
        labels = a.labels + b.labels
    return PureState(a.dims + b.dims, np.kron(a.amps, b.amps), labels)


def apply(u: UnitaryOp | np.ndarray, s: PureState, targets: Sequence[int]) -> PureState:
    """Apply ``u`` on the listed subsystems (identity elsewhere)."""
    matrix = u.matrix if isinstance(u, UnitaryOp) else np.asarray(u, np.complex128)
    targets = list(targets)
    tdim = int(np.prod([s.dims[t] for t in targets]))
    if matrix.shape != (tdim, tdim):
        raise DimensionMismatchError(
            f"unitary of dim {matrix.shape[0]} cannot act on subsystems "
            f"{targets} with total dim {tdim}"
        )
    n = len(s.dims)
    rest = [i for i in range(n) if i not in targets]
    t = s.tensor_view().transpose(targets + rest).reshape(tdim, -1)
    out = (matrix @ t).reshape([s.dims[i] for i in targets + rest])
    inverse = np.argsort(targets + rest)
    out = out.transpose(inverse).reshape(-1)
    return PureState(s.dims, out, s.labels)


def project(s: PureState, targets: Sequence[int], outcome: PureState) -> ProjectionOutcome:
    """Project the target subsystems onto ``outcome`` and drop them.

    The outcome state must live on exactly the target subsystems (same
    dims, same order). Probability below the zero threshold marks the
    outcome impossible and leaves the post state undefined.
    """
    targets = list(targets)
    tdims = tuple(s.dims[t] for t in targets)
    if outcome.dims != tdims:
        raise DimensionMismatchError(
            f"outcome dims {outcome.dims} != target dims {tdims}"
        )
    n = len(s.dims)
    rest = [i for i in range(n) if i not in targets]
    t = s.tensor_view().transpose(targets + rest).reshape(outcome.dim, -1)
    residual = outcome.amps.conj() @ t  # amplitude vector on the kept subsystems
    prob = float(np.real(np.vdot(residual, residual)))
    if prob < ZERO_PROB:
        return ProjectionOutcome(prob, None)
    kept_dims = tuple(s.dims[i] for i in rest)
    kept_labels = tuple(s.labels[i] for i in rest) if s.labels is not None else None
    if not kept_dims:
        kept_dims, residual = (1,), residual.reshape(1)
        kept_labels = None
    post = PureState(kept_dims, residual / sqrt(prob), kept_labels)
    return ProjectionOutcome(prob, post)


def equal_up_to_global_phase(a: PureState, b: PureState, tol: float = 1e-10) -> bool:
    """True iff a = lambda * b for some unit-modulus lambda, within tol.

    The phase is read off at b's largest-magnitude amplitude, which keeps
    the division well conditioned.
    """
    if a.dims != b.dims:
        return False
    k = int(np.argmax(np.abs(b.amps)))
    if abs(a.amps[k]) < ZERO_PROB:
        lam = 1.0 + 0j
    else:
        lam = a.amps[k] / b.amps[k]
        lam = lam / abs(lam)
    return bool(np.linalg.norm(a.amps - lam * b.amps) <= tol)


def global_phase_factor(a: PureState, b: PureState) -> complex:
    """The unit-modulus lambda with a ~ lambda*b (undefined if not equal)."""
    k = int(np.argmax(np.abs(b.amps)))
    lam = a.amps[k] / b.amps[k]
    return lam / abs(lam)


def pauli_eigenstate(pauli: str, outcome: int) -> PureState:
    """Single-qubit eigenstate of X, Y, or Z with eigenvalue +-1."""
    if pauli == "Z":
        return basis_state((2,), (0 if outcome > 0 else 1,))
    if pauli == "X":
        return qubit(SQRT2_INV, SQRT2_INV if outcome > 0 else -SQRT2_INV)
    if pauli == "Y":
        return qubit(SQRT2_INV, 1j * SQRT2_INV if outcome > 0 else -1j * SQRT2_INV)
    raise ValueError(f"unknown Pauli {pauli!r}")


def concurrence(s: PureState) -> float:
    """Entanglement monotone for a pure two-qubit state: 2|a00 a11 - a01 a10|."""
    if s.dims != (2, 2):
        raise DimensionMismatchError(f"concurrence needs dims (2, 2), got {s.dims}")
    a = s.amps
    return float(min(1.0, 2.0 * abs(a[0] * a[3] - a[1] * a[2])))
