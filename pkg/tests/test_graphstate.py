"""Tracker rules versus the exact state-vector oracle."""

import itertools

import numpy as np
import pytest

from rusim import graphstate as gs
from rusim import qcore
from rusim.graphstate import (
    BondResult, DepletedError, FrameError, GraphState, attempt_bond,
    deserialize, fig4_vertical_bond, measure_x, measure_y, measure_z, merge,
    new_plus_chain, repair_after_failure, serialize, to_statevector,
)


from _helpers import (
    DEFAULT_FRAME_POOL, assert_rule_matches_oracle, oracle_measure,
    random_graph, replay_fig4_on_statevector,
)


class TestConstruction:
    def test_single_vertex(self):
        g = new_plus_chain(1)
        assert g.vertices() == [1] and not g.edges()

    def test_three_chain_edges(self):
        assert new_plus_chain(3).edges() == {(1, 2), (2, 3)}

    def test_two_chain_statevector_is_bonded_plus_pair(self):
        got = to_statevector(new_plus_chain(2))
        plus2 = qcore.tensor(qcore.plus_state(), qcore.plus_state())
        ref = qcore.apply(qcore.cz_matrix(), plus2, [0, 1])
        assert qcore.equal_up_to_global_phase(got, ref, 1e-12)

    def test_three_chain_stabilizers(self):
        state = to_statevector(new_plus_chain(3))
        x, z, i = qcore.PAULI_X, qcore.PAULI_Z, qcore.PAULI_I
        for ops in ([x, z, i], [z, x, z], [i, z, x]):
            m = np.kron(np.kron(ops[0], ops[1]), ops[2])
            np.testing.assert_allclose(m @ state.amps, state.amps, atol=1e-10)

    def test_empty_graph_scalar(self):
        g = GraphState.from_edges([], [])
        np.testing.assert_allclose(to_statevector(g).amps, [1.0])

    def test_statevector_size_guard(self):
        with pytest.raises(ValueError):
            to_statevector(new_plus_chain(13))

    def test_no_self_loops(self):
        with pytest.raises(ValueError):
            GraphState.from_edges([1], [(1, 1)])


class TestMeasurementRulesExhaustive:
    def test_chains_all_rules_all_branches(self):
        for n in range(2, 6):
            g = new_plus_chain(n)
            for v in g.vertices():
                for outcome in (1, -1):
                    assert_rule_matches_oracle(g, v, "Z", outcome)
                    assert_rule_matches_oracle(g, v, "Y", outcome)
                    for sp in sorted(g.neighbors(v)):
                        assert_rule_matches_oracle(g, v, "X", outcome, sp)

    def test_fifty_random_graphs_with_frames(self):
        rng = np.random.default_rng(101)
        pool = DEFAULT_FRAME_POOL
        done = 0
        while done < 50:
            g = random_graph(rng, 7, pool)
            v = g.vertices()[int(rng.integers(len(g)))]
            pauli = "XYZ"[int(rng.integers(3))]
            outcome = 1 if rng.random() < 0.5 else -1
            sp = None
            if pauli == "X" and g.neighbors(v):
                nbs = sorted(g.neighbors(v))
                sp = nbs[int(rng.integers(len(nbs)))]
            try:
                assert_rule_matches_oracle(g, v, pauli, outcome, sp)
            except qcore.ImpossibleOutcomeError:
                continue
            done += 1

    def test_x_on_isolated_vertex_is_deletion(self):
        g = GraphState.from_edges([1, 2, 3], [(2, 3)])
        out = measure_x(g, 1)
        assert out.vertices() == [2, 3] and out.edges() == {(2, 3)}

    def test_x_minus_branch_impossible_on_isolated(self):
        g = GraphState.from_edges([1], [])
        with pytest.raises(qcore.ImpossibleOutcomeError):
            measure_x(g, 1, outcome=-1)

    def test_z_middle_of_three_chain_disconnects(self):
        out = measure_z(new_plus_chain(3), 2)
        assert out.vertices() == [1, 3] and not out.edges()

    def test_y_middle_of_three_chain_contracts(self):
        out = measure_y(new_plus_chain(3), 2)
        assert out.edges() == {(1, 3)}

    def test_x_second_of_four_chain_makes_cherry(self):
        out = measure_x(new_plus_chain(4), 2, special_neighbor=3)
        # two leaves hanging off a common vertex
        assert out.edges() == {(1, 3), (1, 4)}

    def test_special_neighbor_default_is_lowest_id(self):
        a = measure_x(new_plus_chain(4), 2)
        b = measure_x(new_plus_chain(4), 2, special_neighbor=1)
        assert a.edges() == b.edges()

    def test_special_neighbor_must_be_adjacent(self):
        with pytest.raises(ValueError):
            measure_x(new_plus_chain(4), 2, special_neighbor=4)


class TestRepair:
    def test_end_failure_keeps_three_chain(self):
        g = merge(new_plus_chain(4), new_plus_chain(1, start=10))
        out = repair_after_failure(g, 4, 10)
        assert out.vertices() == [1, 2, 3]
        assert out.edges() == {(1, 2), (2, 3)}

    def test_isolated_pair_empties(self):
        g = GraphState.from_edges([1, 2], [])
        assert len(repair_after_failure(g, 1, 2)) == 0

    def test_matches_statevector_oracle(self):
        rng = np.random.default_rng(103)
        for _ in range(20):
            g = random_graph(rng, 6)
            verts = g.vertices()
            u, v = rng.choice(verts, size=2, replace=False)
            for ou in (1, -1):
                for ov in (1, -1):
                    state = to_statevector(g)
                    r1 = qcore.project(state, [verts.index(u)],
                                       qcore.pauli_eigenstate("Z", ou))
                    remaining = [w for w in verts if w != u]
                    r2 = qcore.project(r1.require_state(),
                                       [remaining.index(v)],
                                       qcore.pauli_eigenstate("Z", ov))
                    tracked = repair_after_failure(g, int(u), int(v), (ou, ov))
                    assert qcore.equal_up_to_global_phase(
                        to_statevector(tracked), r2.require_state(), 1e-9)

    def test_repair_locality(self):
        # vertices at distance >= 2 from the failed pair keep adjacency/frames
        g = new_plus_chain(8)
        out = repair_after_failure(g, 4, 5)
        for v in (1, 2, 7, 8):
            assert out.neighbors(v) == (g.neighbors(v) - {4, 5})
            np.testing.assert_array_equal(out.frame(v), g.frame(v))


class TestAttemptBond:
    def test_deterministic_success(self):
        g = GraphState.from_edges([1, 2], [])
        out, rec = attempt_bond(g, 1, 2, (1.0, 0.0, 0.0), np.random.default_rng(0))
        assert rec.result is BondResult.SUCCESS and rec.attempts == 1
        assert out.edges() == {(1, 2)}

    def test_deterministic_failure_removes_both(self):
        g = GraphState.from_edges([1, 2], [])
        out, rec = attempt_bond(g, 1, 2, (0.0, 0.0, 1.0), np.random.default_rng(0))
        assert rec.result is BondResult.FAILURE
        assert len(out) == 0

    def test_success_matches_cz_oracle(self):
        g = new_plus_chain(3)
        out, _ = attempt_bond(g, 1, 3, (1.0, 0.0, 0.0), np.random.default_rng(0))
        ref = qcore.apply(qcore.cz_matrix(), to_statevector(g), [0, 2])
        assert qcore.equal_up_to_global_phase(to_statevector(out), ref, 1e-10)

    def test_attempts_geometric(self):
        rng = np.random.default_rng(107)
        probs = (0.3, 0.4, 0.3)
        n = 20_000
        samples = np.array([
            attempt_bond(GraphState.from_edges([1, 2], []), 1, 2, probs, rng)[1].attempts
            for _ in range(n)])
        mean = samples.mean()
        expect = 1 / (1 - 0.4)
        var = 0.4 / (1 - 0.4) ** 2
        assert abs(mean - expect) < 3 * np.sqrt(var / n)

    def test_definite_split_after_insurance_absorption(self):
        rng = np.random.default_rng(109)
        ps, pi, pf = 0.2, 0.2, 0.6
        n = 20_000
        wins = sum(
            attempt_bond(GraphState.from_edges([1, 2], []), 1, 2,
                         (ps, pi, pf), rng)[1].result is BondResult.SUCCESS
            for _ in range(n))
        total_ps = ps / (1 - pi)
        sigma = np.sqrt(n * total_ps * (1 - total_ps))
        assert abs(wins - n * total_ps) < 3 * sigma

    def test_hadamard_frame_blocks_bond(self):
        g = gs.apply_hadamard(new_plus_chain(2), 1)
        with pytest.raises(FrameError):
            attempt_bond(g, 1, 2, (1.0, 0.0, 0.0), np.random.default_rng(0))

    def test_pauli_frame_reduced_and_bond_correct(self):
        g = gs.apply_local(new_plus_chain(3), 2, qcore.PAULI_X)
        out, _ = attempt_bond(g, 2, 3, (1.0, 0.0, 0.0), np.random.default_rng(0))
        ref = qcore.apply(qcore.cz_matrix(), to_statevector(g), [1, 2])
        assert qcore.equal_up_to_global_phase(to_statevector(out), ref, 1e-10)


class _ScriptedRng:
    """Yields preset uniforms, then defers to a real generator."""

    def __init__(self, values):
        self._values = list(values)
        self._rng = np.random.default_rng(0)

    def random(self):
        return self._values.pop(0) if self._values else self._rng.random()


class TestVerticalBond:
    def test_immediate_success_structure_and_cost(self):
        ga, gb = new_plus_chain(4), new_plus_chain(4, start=11)
        merged, cost = fig4_vertical_bond(ga, gb, 1, 11, (1.0, 0.0, 0.0),
                                          np.random.default_rng(0))
        assert cost.steps == 1 and cost.consumed_per_chain == 3
        assert cost.entangling_ops == 1 and not cost.depleted
        assert merged.edges() == {(1, 4), (1, 11), (11, 14)}

    def test_success_state_matches_oracle(self):
        ga, gb = new_plus_chain(4), new_plus_chain(4, start=11)
        merged, _ = fig4_vertical_bond(ga, gb, 1, 11, (1.0, 0.0, 0.0),
                                       np.random.default_rng(0))
        ref, verts = replay_fig4_on_statevector(ga, gb, 1, 11, [True])
        assert merged.vertices() == verts
        assert qcore.equal_up_to_global_phase(to_statevector(merged), ref, 1e-9)

    def test_failure_then_success_matches_oracle(self):
        ga, gb = new_plus_chain(5), new_plus_chain(5, start=11)
        # scripted: first definite outcome fails, second succeeds
        rng = _ScriptedRng([0.99, 0.01])
        merged, cost = fig4_vertical_bond(ga, gb, 1, 11, (0.5, 0.0, 0.5), rng)
        assert cost.steps == 2 and cost.consumed_per_chain == 5
        ref, verts = replay_fig4_on_statevector(ga, gb, 1, 11, [False, True])
        assert merged.vertices() == verts
        assert qcore.equal_up_to_global_phase(to_statevector(merged), ref, 1e-9)

    def test_insurance_retries_counted(self):
        ga, gb = new_plus_chain(4), new_plus_chain(4, start=11)
        rng = _ScriptedRng([0.4, 0.4, 0.01])  # two insurance draws, then success
        merged, cost = fig4_vertical_bond(ga, gb, 1, 11, (0.25, 0.5, 0.25), rng)
        assert cost.steps == 1 and cost.entangling_ops == 3
        assert (1, 11) in merged.edges()

    def test_depletion_signalled(self):
        ga, gb = new_plus_chain(3), new_plus_chain(3, start=11)
        merged, cost = fig4_vertical_bond(ga, gb, 1, 11, (0.0, 0.0, 1.0),
                                          np.random.default_rng(0))
        assert cost.depleted
        assert cost.steps == 1 and cost.consumed_per_chain == 2

    def test_unpruned_leftover_cherry(self):
        ga, gb = new_plus_chain(4), new_plus_chain(4, start=11)
        merged, _ = fig4_vertical_bond(ga, gb, 1, 11, (1.0, 0.0, 0.0),
                                       np.random.default_rng(0), prune=False)
        assert (3, 11) in merged.edges() and (1, 11) in merged.edges()


class TestSerialization:
    def test_roundtrip_with_frames_and_isolated_vertex(self):
        g = GraphState.from_edges(
            [1, 2, 3, 7], [(1, 2), (2, 3)],
            frames={2: gs.SQRT_IY, 7: qcore.PAULI_Z})
        back = deserialize(serialize(g))
        assert back.vertices() == g.vertices()
        assert back.edges() == g.edges()
        for v in g.vertices():
            np.testing.assert_allclose(back.frame(v), g.frame(v), atol=0)

    def test_statevector_preserved(self):
        g = gs.apply_hadamard(new_plus_chain(3), 2)
        back = deserialize(serialize(g))
        assert qcore.equal_up_to_global_phase(
            to_statevector(back), to_statevector(g), 1e-12)


class TestMergeAndValues:
    def test_merge_requires_disjoint_ids(self):
        with pytest.raises(ValueError):
            merge(new_plus_chain(2), new_plus_chain(2))

    def test_operations_do_not_mutate_inputs(self):
        g = new_plus_chain(4)
        before = (g.edges(), g.vertices())
        measure_x(g, 2)
        measure_y(g, 2)
        measure_z(g, 2)
        attempt_bond(g, 1, 4, (0.0, 0.0, 1.0), np.random.default_rng(0))
        assert (g.edges(), g.vertices()) == before
