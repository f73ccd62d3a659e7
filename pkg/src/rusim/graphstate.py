"""Graph-state tracker with Pauli measurement rules and bond operations.

A tracked state is a graph (vertices bonded by CZ edges, each prepared
in |+>) together with a per-vertex local correction frame. The frame
holds the single-qubit Clifford byproducts that measurement rules leave
behind; ``to_statevector`` realizes the tracked state exactly and serves
as the verification oracle.

Measurement outcomes are canonicalized to the +1 branch; the -1 branch
is available through the ``outcome`` argument and differs only by the
recorded frame corrections.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import sqrt

import numpy as np

from . import qcore
from .qcore import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, HADAMARD, PureState

FRAME_TOL = 1e-9

# square roots of +-iY and -+iZ, the byproducts of X and Y measurement rules
SQRT_IY = np.array([[1, 1], [-1, 1]], dtype=np.complex128) / sqrt(2)    # = ZH
SQRT_MIY = np.array([[1, -1], [1, 1]], dtype=np.complex128) / sqrt(2)   # = HZ
SQRT_MIZ = np.diag([np.exp(-0.25j * np.pi), np.exp(0.25j * np.pi)])
SQRT_IZ = np.diag([np.exp(0.25j * np.pi), np.exp(-0.25j * np.pi)])

_PAULIS = {"X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


class FrameError(ValueError):
    """A vertex carries a local correction the requested operation cannot absorb."""


class DepletedError(ValueError):
    """A chain ran out of qubits before the procedure could finish."""


class BondResult(Enum):
    SUCCESS = "success"
    INSURANCE = "insurance"
    FAILURE = "failure"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class BondOutcome:
    """Definite result of a bond attempt, counting insurance repeats."""

    result: BondResult
    attempts: int


@dataclass(frozen=True)
class VerticalBondCost:
    """Resource count of one vertical-bond procedure."""

    steps: int                # definite cherry-bond attempts (success or failure)
    consumed_per_chain: int   # qubits burnt per chain, link qubit included
    entangling_ops: int       # CZ attempts, insurance repeats included
    depleted: bool = False


class GraphState:
    """Vertex set, symmetric adjacency, and per-vertex correction frames."""

    __slots__ = ("_adj", "_frames")

    def __init__(self, adj=None, frames=None):
        self._adj: dict[int, set[int]] = adj if adj is not None else {}
        self._frames: dict[int, np.ndarray] = frames if frames is not None else {}

    # -- construction -----------------------------------------------------

    @classmethod
    def from_edges(cls, vertices, edges, frames=None) -> "GraphState":
        g = cls({int(v): set() for v in vertices})
        for u, v in edges:
            g._add_edge(int(u), int(v))
        if frames:
            for v, m in frames.items():
                g._frames[int(v)] = np.asarray(m, dtype=np.complex128)
        return g

    def copy(self) -> "GraphState":
        return GraphState({v: set(nb) for v, nb in self._adj.items()},
                          dict(self._frames))

    # -- accessors ---------------------------------------------------------

    def vertices(self) -> list[int]:
        return sorted(self._adj)

    def neighbors(self, v: int) -> set[int]:
        return set(self._adj[v])

    def has_vertex(self, v: int) -> bool:
        return v in self._adj

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj.get(u, ())

    def edges(self) -> set[tuple[int, int]]:
        return {(u, v) for u, nb in self._adj.items() for v in nb if u < v}

    def frame(self, v: int) -> np.ndarray:
        return self._frames.get(v, PAULI_I)

    def __len__(self):
        return len(self._adj)

    def __repr__(self):
        return (f"GraphState({len(self._adj)} vertices, {len(self.edges())} edges, "
                f"{len(self._frames)} frames)")

    # -- internal mutators (callers own the copy) ---------------------------

    def _add_vertex(self, v: int):
        self._adj.setdefault(v, set())

    def _add_edge(self, u: int, v: int):
        if u == v:
            raise ValueError("self-loops are not allowed")
        self._adj[u].add(v)
        self._adj[v].add(u)

    def _toggle_edge(self, u: int, v: int):
        if v in self._adj[u]:
            self._adj[u].discard(v)
            self._adj[v].discard(u)
        else:
            self._add_edge(u, v)

    def _delete_vertex(self, v: int):
        for w in self._adj.pop(v):
            self._adj[w].discard(v)
        self._frames.pop(v, None)

    def _local_complement(self, v: int):
        nb = sorted(self._adj[v])
        for i, a in enumerate(nb):
            for b in nb[i + 1:]:
                self._toggle_edge(a, b)

    def _compose_frame_left(self, v: int, m: np.ndarray):
        """Record a physical operation applied after everything tracked so far."""
        self._frames[v] = _matmul(np.asarray(m, np.complex128), self.frame(v))
        self._prune_frame(v)

    def _compose_frame_right(self, v: int, m: np.ndarray):
        """Record a correction acting directly on the bare graph state."""
        self._frames[v] = _matmul(self.frame(v), np.asarray(m, np.complex128))
        self._prune_frame(v)

    def _prune_frame(self, v: int):
        m = self._frames.get(v)
        if m is not None and abs(m[0, 0] - 1) < 1e-14 and abs(m[1, 1] - 1) < 1e-14 \
                and abs(m[0, 1]) < 1e-14 and abs(m[1, 0]) < 1e-14:
            del self._frames[v]

    # -- measurement rules on the bare graph --------------------------------

    def _rule_z(self, v: int, outcome: int):
        if outcome < 0:
            for b in self._adj[v]:
                self._compose_frame_right(b, PAULI_Z)
        self._delete_vertex(v)

    def _rule_y(self, v: int, outcome: int):
        corr = SQRT_MIZ if outcome > 0 else SQRT_IZ
        nb = sorted(self._adj[v])
        self._local_complement(v)
        for b in nb:
            self._compose_frame_right(b, corr)
        self._delete_vertex(v)

    def _rule_x(self, v: int, outcome: int, special: int | None):
        nb_v = self.neighbors(v)
        if not nb_v:
            # isolated |+> vertex: X outcome +1 is deterministic
            if outcome < 0:
                raise qcore.ImpossibleOutcomeError(
                    "isolated vertex cannot give the -1 branch of an X measurement")
            self._delete_vertex(v)
            return
        b0 = min(nb_v) if special is None else special
        if b0 not in nb_v:
            raise ValueError(f"special neighbor {b0} is not adjacent to {v}")
        nb_b0 = self.neighbors(b0)
        if outcome > 0:
            self._compose_frame_right(b0, SQRT_IY)
            zs = nb_v - nb_b0 - {b0}
        else:
            self._compose_frame_right(b0, SQRT_MIY)
            zs = nb_b0 - nb_v - {v}
        for b in zs:
            self._compose_frame_right(b, PAULI_Z)
        self._local_complement(b0)
        self._local_complement(v)
        self._local_complement(b0)
        self._delete_vertex(v)

    def _measure_pauli(self, v: int, pauli: str, outcome: int, special: int | None):
        sign, bare = _conjugate_pauli(self.frame(v), _PAULIS[pauli])
        self._frames.pop(v, None)
        eff = outcome * sign
        if bare == "Z":
            self._rule_z(v, eff)
        elif bare == "Y":
            self._rule_y(v, eff)
        else:
            self._rule_x(v, eff, special)

    # -- frame normalization for bonding ------------------------------------

    def _reduce_frame_diagonal(self, v: int):
        """Rewrite a Pauli frame so only a diagonal correction remains on v.

        Uses the stabilizer X_v = prod_{w in N(v)} Z_w of the bare graph
        state; Hadamard-like frames cannot be absorbed this way.
        """
        m = self.frame(v)
        residual = _diagonal_reduction(m)
        if residual is _NO_REDUCTION:
            return
        if residual is None:
            raise FrameError(
                f"vertex {v} carries a non-diagonal local correction; apply its "
                "pending rotation before bonding")
        self._frames.pop(v, None)
        if residual is not PAULI_I:
            self._frames[v] = residual
        for w in self._adj[v]:
            self._compose_frame_right(w, PAULI_Z)


# small closed sets of frame matrices circulate, so the 2x2 algebra is memoized
_MATMUL_CACHE: dict[tuple[bytes, bytes], np.ndarray] = {}
_CONJ_CACHE: dict[tuple[bytes, str], tuple[int, str]] = {}
_REDUCE_CACHE: dict[bytes, object] = {}
_NO_REDUCTION = object()


def _frozen(m: np.ndarray) -> np.ndarray:
    m.flags.writeable = False
    return m


def _matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    key = (a.tobytes(), b.tobytes())
    out = _MATMUL_CACHE.get(key)
    if out is None:
        if len(_MATMUL_CACHE) > 4096:
            _MATMUL_CACHE.clear()
        out = _MATMUL_CACHE[key] = _frozen(a @ b)
    return out


def _diagonal_reduction(m: np.ndarray):
    """Residual diagonal frame left on a vertex after absorbing the X part,
    _NO_REDUCTION when already diagonal, or None when it is not a Pauli."""
    key = m.tobytes()
    if key in _REDUCE_CACHE:
        return _REDUCE_CACHE[key]
    if len(_REDUCE_CACHE) > 4096:
        _REDUCE_CACHE.clear()
    if abs(m[0, 1]) < FRAME_TOL and abs(m[1, 0]) < FRAME_TOL:
        out = _NO_REDUCTION
    else:
        out = None
        for p, residual in ((PAULI_X, PAULI_I), (PAULI_X @ PAULI_Z, -PAULI_Z)):
            c = np.trace(p.conj().T @ m) / 2
            if abs(abs(c) - 1.0) < FRAME_TOL and np.allclose(m, c * p, atol=FRAME_TOL):
                out = PAULI_I if abs(c - 1) < 1e-14 and residual is PAULI_I \
                    else _frozen(residual * c)
                break
    _REDUCE_CACHE[key] = out
    return out


def _conjugate_pauli(u: np.ndarray, p: np.ndarray) -> tuple[int, str]:
    """Express u^dagger p u as +-(X|Y|Z); requires a Clifford frame."""
    pname = "X" if p is PAULI_X else ("Y" if p is PAULI_Y else "Z")
    key = (u.tobytes(), pname)
    hit = _CONJ_CACHE.get(key)
    if hit is not None:
        return hit
    m = u.conj().T @ p @ u
    for name, q in _PAULIS.items():
        s = np.trace(m @ q) / 2
        if abs(s.imag) < FRAME_TOL and abs(abs(s.real) - 1.0) < FRAME_TOL:
            if np.allclose(m, s.real * q, atol=FRAME_TOL):
                if len(_CONJ_CACHE) > 4096:
                    _CONJ_CACHE.clear()
                out = (1 if s.real > 0 else -1), name
                _CONJ_CACHE[key] = out
                return out
    raise FrameError("frame does not map the measured Pauli to a Pauli")


# ---------------------------------------------------------------------------
# public, value-semantics operations

def new_plus_chain(n: int, start: int = 1) -> GraphState:
    """Linear cluster: n vertices in |+>, CZ bonds along the path."""
    if n < 1:
        raise ValueError("a chain needs at least one vertex")
    ids = range(start, start + n)
    return GraphState.from_edges(ids, zip(ids, list(ids)[1:]))


def merge(a: GraphState, b: GraphState) -> GraphState:
    """Disjoint union of two tracked states."""
    if set(a.vertices()) & set(b.vertices()):
        raise ValueError("graphs to merge must have disjoint vertex ids")
    out = a.copy()
    bc = b.copy()
    out._adj.update(bc._adj)
    out._frames.update(bc._frames)
    return out


def apply_local(g: GraphState, v: int, matrix: np.ndarray) -> GraphState:
    """Apply a single-qubit unitary to vertex v (composed into its frame)."""
    out = g.copy()
    out._compose_frame_left(v, matrix)
    return out


def apply_hadamard(g: GraphState, v: int) -> GraphState:
    return apply_local(g, v, HADAMARD)


def measure_z(g: GraphState, v: int, outcome: int = 1) -> GraphState:
    """Computational-basis measurement: delete v, Z corrections on the -1 branch."""
    out = g.copy()
    out._measure_pauli(v, "Z", outcome, None)
    return out


def measure_y(g: GraphState, v: int, outcome: int = 1) -> GraphState:
    """Y measurement: local complementation at v, then deletion."""
    out = g.copy()
    out._measure_pauli(v, "Y", outcome, None)
    return out


def measure_x(g: GraphState, v: int, special_neighbor: int | None = None,
              outcome: int = 1) -> GraphState:
    """X measurement with the usual special-neighbor rule.

    Defaults to the lowest-id neighbor; an isolated vertex reduces to
    plain deletion.
    """
    out = g.copy()
    out._measure_pauli(v, "X", outcome, special_neighbor)
    return out


def repair_after_failure(g: GraphState, u: int, v: int,
                         outcomes: tuple[int, int] = (1, 1)) -> GraphState:
    """Recover from a heralded gate failure on qubits u and v.

    Both qubits are measured in the computational basis and removed; the
    rest of the graph survives with outcome-dependent Z corrections on
    the former neighbors.
    """
    out = g.copy()
    out._measure_pauli(u, "Z", outcomes[0], None)
    out._measure_pauli(v, "Z", outcomes[1], None)
    return out


def _probs_triple(probs) -> tuple[float, float, float]:
    if hasattr(probs, "ps"):
        return float(probs.ps), float(probs.pi), float(probs.pf)
    ps, pi, pf = probs
    return float(ps), float(pi), float(pf)


def _attempt_bond_inplace(g: GraphState, u: int, v: int, ps: float, pi: float,
                          rng) -> BondOutcome:
    attempts = 0
    while True:
        attempts += 1
        r = rng.random()
        if r < ps:
            g._reduce_frame_diagonal(u)
            g._reduce_frame_diagonal(v)
            g._toggle_edge(u, v)
            return BondOutcome(BondResult.SUCCESS, attempts)
        if r >= ps + pi:
            g._measure_pauli(u, "Z", 1, None)
            g._measure_pauli(v, "Z", 1, None)
            return BondOutcome(BondResult.FAILURE, attempts)


def attempt_bond(g: GraphState, u: int, v: int, probs, rng
                 ) -> tuple[GraphState, BondOutcome]:
    """Attempt a CZ bond until a definite outcome lands.

    Insurance outcomes leave the state untouched and are retried
    internally; success toggles the edge, failure triggers repair (with
    canonical +1 measurement outcomes).
    """
    if u == v or not (g.has_vertex(u) and g.has_vertex(v)):
        raise ValueError("bond endpoints must be two distinct present vertices")
    ps, pi, _pf = _probs_triple(probs)
    out = g.copy()
    outcome = _attempt_bond_inplace(out, u, v, ps, pi, rng)
    return out, outcome


def _right_pair(g: GraphState, u: int) -> tuple[int, int] | None:
    """The next two chain qubits to the right of u (ascending ids)."""
    right = [w for w in g.neighbors(u) if w > u]
    if not right:
        return None
    r1 = min(right)
    right2 = [w for w in g.neighbors(r1) if w > r1]
    if not right2:
        return None
    return r1, min(right2)


def _fig4_inplace(g: GraphState, ua: int, ub: int, ps: float, pi: float,
                  rng, prune: bool) -> VerticalBondCost:
    steps = 0
    entangling_ops = 0
    while True:
        pa, pb = _right_pair(g, ua), _right_pair(g, ub)
        if pa is None or pb is None:
            return VerticalBondCost(steps, 2 * steps, entangling_ops, depleted=True)
        (r1a, r2a), (r1b, r2b) = pa, pb
        g._measure_pauli(r1a, "X", 1, r2a)
        g._measure_pauli(r1b, "X", 1, r2b)
        g._compose_frame_left(r2a, HADAMARD)
        g._compose_frame_left(r2b, HADAMARD)
        bond = _attempt_bond_inplace(g, r2a, r2b, ps, pi, rng)
        steps += 1
        entangling_ops += bond.attempts
        if bond.result is BondResult.SUCCESS:
            g._measure_pauli(r2b, "X", 1, r2a)
            if prune:
                # the leftover cherry carries a Hadamard-like frame, so a
                # physical sigma_x here acts as a clean leaf deletion
                g._measure_pauli(r2a, "X", 1, None)
            return VerticalBondCost(steps, 2 * steps + 1, entangling_ops)


def fig4_vertical_bond(ga: GraphState, gb: GraphState, ua: int, ub: int,
                       probs, rng, prune: bool = True
                       ) -> tuple[GraphState, VerticalBondCost]:
    """Forge a vertical bond between two chains via dangling cherries.

    Each round burns the two qubits right of the bond targets: the first
    is measured in X, the next gets a Hadamard, leaving a cherry on each
    target. The cherries are then bonded; a failure destroys only the
    cherries (both chains shorten by two) and the round repeats. On
    success one link qubit is removed by another X measurement and the
    leftover redundant cherry is pruned away.

    Chains are expected in ascending-id path order (as built by
    :func:`new_plus_chain`) with the free ends to the right of ua/ub.
    """
    g = merge(ga, gb)
    ps, pi, _pf = _probs_triple(probs)
    cost = _fig4_inplace(g, ua, ub, ps, pi, rng, prune)
    return g, cost


# ---------------------------------------------------------------------------
# state-vector oracle

def to_statevector(g: GraphState, order: list[int] | None = None) -> PureState:
    """Realize the tracked state exactly (|+>^n, CZ per edge, frames).

    Subsystem order defaults to ascending vertex id; refuses above 12
    vertices.
    """
    verts = g.vertices() if order is None else list(order)
    if order is not None and sorted(order) != g.vertices():
        raise ValueError("order must be a permutation of the vertex set")
    n = len(verts)
    if n > 12:
        raise ValueError(f"statevector oracle refuses {n} > 12 vertices")
    if n == 0:
        return PureState((1,), np.array([1.0 + 0j]))
    pos = {v: i for i, v in enumerate(verts)}
    amps = np.full([2] * n, 2.0 ** (-n / 2), dtype=np.complex128)
    for u, v in g.edges():
        idx = [slice(None)] * n
        idx[pos[u]] = 1
        idx[pos[v]] = 1
        amps[tuple(idx)] *= -1
    state = PureState((2,) * n, amps.reshape(-1))
    for v in verts:
        if v in g._frames:
            state = qcore.apply(g._frames[v], state, [pos[v]])
    return state


# ---------------------------------------------------------------------------
# serialization (edge list + frame section)

def serialize(g: GraphState) -> str:
    """Plain-text form: one `u v` line per edge, a #vertices line, and a
    #frame section with row-major re/im entries for non-identity frames."""
    lines = [f"{u} {v}" for u, v in sorted(g.edges())]
    lines.append("#vertices " + " ".join(str(v) for v in g.vertices()))
    for v in sorted(g._frames):
        m = g._frames[v]
        entries = " ".join(
            f"{float(m[i, j].real)!r} {float(m[i, j].imag)!r}"
            for i in range(2) for j in range(2))
        lines.append(f"#frame {v} {entries}")
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> GraphState:
    edges: list[tuple[int, int]] = []
    vertices: set[int] = set()
    frames: dict[int, np.ndarray] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#vertices"):
            vertices.update(int(t) for t in line.split()[1:])
        elif line.startswith("#frame"):
            toks = line.split()
            v = int(toks[1])
            vals = [float(t) for t in toks[2:]]
            if len(vals) != 8:
                raise ValueError(f"frame line needs 8 entries: {line}")
            m = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
            frames[v] = m.reshape(2, 2)
        elif line.startswith("#"):
            continue
        else:
            u, v = (int(t) for t in line.split())
            edges.append((u, v))
            vertices.update((u, v))
    return GraphState.from_edges(vertices, edges, frames)
