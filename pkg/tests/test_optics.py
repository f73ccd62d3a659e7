"""Apparatus simulations: mode scattering, classification, loss."""

from fractions import Fraction
from math import sqrt

import numpy as np
import pytest

from rusim import optics, qcore, rusgate
from rusim.optics import (
    DetectionPattern, FockState, ImpossiblePatternError, LossModel, Outcome,
    PortAssignment, beamsplitter_apparatus, bs_conditionals, classify_bs,
    classify_multiport, dft4, dualrail_input, effective_probabilities,
    from_creation_ops, multiport_conditionals, sample_detection, scatter,
    vacuum,
)

REF_BASIS = rusgate.rus_pair_basis(
    rusgate.photon_basis_from_angles(rusgate.AngleSet.reference()))

# expected mode images of the four reference basis states: mapping from
# occupation vector to amplitude in the normalized number basis
R2 = 1 / sqrt(2)
EXPECTED_MODE_IMAGES = [
    {(2, 0, 0, 0): 0.5 * sqrt(2), (0, 0, 2, 0): -0.5 * sqrt(2)},
    {(0, 2, 0, 0): -0.5 * sqrt(2), (0, 0, 0, 2): 0.5 * sqrt(2)},
    {(1, 0, 0, 1): R2, (0, 1, 1, 0): -R2},
    {(1, 1, 0, 0): -R2, (0, 0, 1, 1): R2},
]


class TestFockState:
    def test_normalization(self):
        f = FockState(2, {(1, 0): 3.0, (0, 1): 4.0})
        assert f.norm() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_three_photons(self):
        with pytest.raises(ValueError):
            FockState(2, {(2, 1): 1.0})

    def test_double_occupation_normalization(self):
        # (b+)^2 on vacuum has norm sqrt(2); the normalized ket carries it
        f = from_creation_ops(3, [1, 1])
        assert f.amplitude((0, 2, 0)) == pytest.approx(sqrt(2) / sqrt(2))
        assert f.norm() == pytest.approx(1.0)


class TestMultiportUnitary:
    def test_unitary_and_balanced(self):
        u = dft4().matrix
        np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)
        np.testing.assert_allclose(np.abs(u), 0.25 * np.ones((4, 4)) * 2, atol=1e-12)

    def test_corner_entry(self):
        assert dft4().matrix[0, 0] == pytest.approx(0.5)

    def test_real_exponent_variant_is_not_unitary(self):
        # the +-1/2 matrix with entries (1/2) e^{i pi (m n)} repeats rows
        m, n = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
        bad = 0.5 * np.exp(1j * np.pi * m * n)
        np.testing.assert_allclose(bad[0], bad[2], atol=1e-12)
        assert np.max(np.abs(bad.conj().T @ bad - np.eye(4))) > 1e-3


class TestScatter:
    def test_identity(self):
        f = from_creation_ops(4, [0, 3])
        out = scatter(f, optics.ModeUnitary(4, np.eye(4)))
        assert out.terms == f.terms

    def test_norm_preserved(self):
        rng = np.random.default_rng(5)
        f = FockState(4, {(1, 1, 0, 0): 0.3 + 0.1j, (0, 0, 1, 1): 0.5,
                          (2, 0, 0, 0): -0.2j, (0, 1, 0, 1): 0.7})
        out = scatter(f, dft4())
        assert out.norm() == pytest.approx(1.0, abs=1e-10)

    def test_two_photon_input_contains_expected_pair_term(self):
        out = scatter(from_creation_ops(4, [2, 3]), dft4())
        # the ports-3,4 coincidence of a3+ a4+ flows entirely through the
        # fourth measurement channel, whose image weights it by 1/sqrt(2)
        overlap = REF_BASIS.states[3].amps[3].conjugate()
        assert out.amplitude((0, 0, 1, 1)) == pytest.approx(
            overlap * R2, abs=1e-12)
        assert abs(out.amplitude((0, 0, 1, 1))) == pytest.approx(
            0.5 * R2, abs=1e-12)

    def test_mode_mapping_of_reference_states(self):
        for st, expected in zip(REF_BASIS.states, EXPECTED_MODE_IMAGES):
            out = scatter(dualrail_input(st), dft4())
            assert set(out.terms) == set(expected)
            for occ, amp in expected.items():
                assert out.amplitude(occ) == pytest.approx(amp, abs=1e-10)


class TestDualRail:
    def test_basis_conversions(self):
        ket = qcore.basis_state((2, 2), (0, 0), rusgate.PHOTON_LABELS)
        assert dualrail_input(ket).terms == {(1, 1, 0, 0): 1.0}
        ket = qcore.basis_state((2, 2), (1, 1), rusgate.PHOTON_LABELS)
        assert dualrail_input(ket).terms == {(0, 0, 1, 1): 1.0}

    def test_superposition_norm(self):
        st = rusgate.unbiased_state(0.2, 1.3, -0.7)
        assert dualrail_input(st).norm() == pytest.approx(1.0, abs=1e-12)

    def test_port_assignment_bijection(self):
        with pytest.raises(ValueError):
            PortAssignment(x0=1, y0=1, x1=3, y1=4)


class TestClassifyMultiport:
    def test_same_port_pairs(self):
        assert classify_multiport(DetectionPattern((2, 0, 0, 0))) is Outcome.PHI1
        assert classify_multiport(DetectionPattern((0, 0, 2, 0))) is Outcome.PHI1
        assert classify_multiport(DetectionPattern((0, 2, 0, 0))) is Outcome.PHI2

    def test_coincidence_pairs(self):
        assert classify_multiport(DetectionPattern((1, 0, 0, 1))) is Outcome.PHI3
        assert classify_multiport(DetectionPattern((0, 1, 1, 0))) is Outcome.PHI3
        assert classify_multiport(DetectionPattern((1, 1, 0, 0))) is Outcome.PHI4
        assert classify_multiport(DetectionPattern((0, 0, 1, 1))) is Outcome.PHI4

    def test_lost_photon_is_failure(self):
        assert classify_multiport(DetectionPattern((1, 0, 0, 0))) is Outcome.FAILURE
        assert classify_multiport(DetectionPattern((0, 0, 0, 0))) is Outcome.FAILURE

    def test_impossible_patterns_raise(self):
        for occ in ((1, 0, 1, 0), (0, 1, 0, 1)):
            with pytest.raises(ImpossiblePatternError):
                classify_multiport(DetectionPattern(occ))

    def test_impossible_patterns_have_zero_amplitude(self):
        for st in REF_BASIS.states:
            out = scatter(dualrail_input(st), dft4())
            assert abs(out.amplitude((1, 0, 1, 0))) < 1e-12
            assert abs(out.amplitude((0, 1, 0, 1))) < 1e-12


class TestBeamsplitter:
    def test_insurance_states_bunch_with_fixed_polarization(self):
        # first basis state -> two h photons, second -> two v photons
        out = beamsplitter_apparatus(REF_BASIS.states[0])
        assert set(out.terms) <= {(2, 0, 0, 0), (0, 0, 2, 0)}
        out = beamsplitter_apparatus(REF_BASIS.states[1])
        assert set(out.terms) <= {(0, 2, 0, 0), (0, 0, 0, 2)}

    def test_triplet_bunches_mixed_polarization(self):
        out = beamsplitter_apparatus(REF_BASIS.states[2])
        assert set(out.terms) <= {(1, 1, 0, 0), (0, 0, 1, 1)}

    def test_singlet_antibunches(self):
        out = beamsplitter_apparatus(REF_BASIS.states[3])
        assert set(out.terms) <= {(1, 0, 0, 1), (0, 1, 1, 0)}

    def test_norm_preserved(self):
        st = rusgate.unbiased_state(0.9, -0.4, 2.2)
        assert beamsplitter_apparatus(st).norm() == pytest.approx(1.0, abs=1e-10)

    def test_classifier_matches_polarization_rule(self):
        # two h -> 1, two v -> 2, mixed same port -> 3, mixed split -> 4
        assert classify_bs(DetectionPattern((2, 0, 0, 0))) is Outcome.PHI1
        assert classify_bs(DetectionPattern((0, 0, 2, 0))) is Outcome.PHI1
        assert classify_bs(DetectionPattern((0, 2, 0, 0))) is Outcome.PHI2
        assert classify_bs(DetectionPattern((0, 0, 0, 2))) is Outcome.PHI2
        assert classify_bs(DetectionPattern((1, 1, 0, 0))) is Outcome.PHI3
        assert classify_bs(DetectionPattern((0, 0, 1, 1))) is Outcome.PHI3
        assert classify_bs(DetectionPattern((1, 0, 0, 1))) is Outcome.PHI4
        assert classify_bs(DetectionPattern((0, 1, 1, 0))) is Outcome.PHI4

    def test_split_equal_polarization_is_unreachable(self):
        # two h photons always bunch after the mixer, so an h/h coincidence
        # across ports signals a simulation bug
        with pytest.raises(ImpossiblePatternError):
            classify_bs(DetectionPattern((1, 0, 1, 0)))
        with pytest.raises(ImpossiblePatternError):
            classify_bs(DetectionPattern((0, 1, 0, 1)))

    def test_empty_pattern_is_failure(self):
        assert classify_bs(DetectionPattern((0, 0, 0, 0))) is Outcome.FAILURE
        assert classify_bs(DetectionPattern((1, 0, 0, 0))) is Outcome.FAILURE


class TestSampleDetection:
    def test_lossless_insurance_outcome_split(self):
        rng = np.random.default_rng(11)
        fock = scatter(dualrail_input(REF_BASIS.states[0]), dft4())
        counts = {Outcome.PHI1: 0}
        port1 = 0
        n = 4000
        for _ in range(n):
            pat = sample_detection(fock, LossModel(1.0), True, rng)
            outcome = classify_multiport(pat)
            assert outcome is Outcome.PHI1
            counts[Outcome.PHI1] += 1
            if pat.counts[0] == 2:
                port1 += 1
        sigma = sqrt(n * 0.25)
        assert abs(port1 - n / 2) < 3 * sigma

    def test_total_loss(self):
        rng = np.random.default_rng(13)
        fock = scatter(dualrail_input(REF_BASIS.states[2]), dft4())
        for _ in range(50):
            pat = sample_detection(fock, LossModel(0.0), True, rng)
            assert pat.total == 0

    def test_partial_loss_survival_rate(self):
        rng = np.random.default_rng(17)
        fock = scatter(dualrail_input(REF_BASIS.states[2]), dft4())
        n = 20_000
        survived = sum(
            sample_detection(fock, LossModel(0.8), True, rng).total == 2
            for _ in range(n))
        sigma = sqrt(n * 0.64 * 0.36)
        assert abs(survived - 0.64 * n) < 3 * sigma

    def test_threshold_mode_collapses_bunched_counts(self):
        rng = np.random.default_rng(19)
        fock = scatter(dualrail_input(REF_BASIS.states[0]), dft4())
        pat = sample_detection(fock, LossModel(1.0), False, rng)
        assert max(pat.counts) == 1
        assert classify_multiport(pat) is Outcome.FAILURE


class TestEffectiveProbabilities:
    def test_lossless(self):
        p = effective_probabilities(LossModel(1.0))
        assert (p.ps, p.pi, p.pf) == (Fraction(1, 2), Fraction(1, 2), Fraction(0))

    def test_total_loss(self):
        p = effective_probabilities(LossModel(0.0))
        assert (p.ps, p.pi, p.pf) == (0, 0, 1)

    def test_partial_loss_matches_published_row(self):
        p = effective_probabilities(LossModel(sqrt(0.8)))
        assert float(p.pf) == pytest.approx(0.2, abs=1e-12)
        assert float(p.ps) == pytest.approx(0.4, abs=1e-12)
        assert p.ps + p.pi + p.pf == 1

    def test_eta_range_validated(self):
        with pytest.raises(ValueError):
            LossModel(1.2)


class TestEndToEndEquivalence:
    def test_multiport_conditionals_match_projective_measurement(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            enc = rusgate.encode(qcore.random_state((2, 2), rng))
            reference = {
                k: qcore.project(enc, [2, 3], st).require_state()
                for k, st in enumerate(REF_BASIS.states, start=1)
            }
            probs_sum = 0.0
            for occ, vec in multiport_conditionals(enc).items():
                outcome = classify_multiport(DetectionPattern(occ))
                probs_sum += float(np.linalg.norm(vec) ** 2)
                post = qcore.pure((2, 2), vec.reshape(-1))
                assert qcore.equal_up_to_global_phase(
                    post, reference[outcome.value], 1e-9)
            assert probs_sum == pytest.approx(1.0, abs=1e-10)

    def test_both_apparatuses_agree_outcome_for_outcome(self):
        rng = np.random.default_rng(29)
        for _ in range(30):
            enc = rusgate.encode(qcore.random_state((2, 2), rng))
            mp = {}
            for occ, vec in multiport_conditionals(enc).items():
                k = classify_multiport(DetectionPattern(occ)).value
                mp[k] = qcore.pure((2, 2), vec.reshape(-1))
            for occ, vec in bs_conditionals(enc).items():
                k = classify_bs(DetectionPattern(occ)).value
                post = qcore.pure((2, 2), vec.reshape(-1))
                assert qcore.equal_up_to_global_phase(post, mp[k], 1e-9)

    def test_interferometric_stability(self):
        # fixed path phases per source change conditionals only globally
        rng = np.random.default_rng(31)
        enc = rusgate.encode(qcore.random_state((2, 2), rng))
        base = multiport_conditionals(enc)
        d1, d2 = 0.83, -1.91
        phased = optics.ModeUnitary(
            4, dft4().matrix @ np.diag([np.exp(1j * d1), np.exp(1j * d2),
                                        np.exp(1j * d1), np.exp(1j * d2)]))
        shifted = multiport_conditionals(enc, u=phased)
        for occ, vec in shifted.items():
            a = qcore.pure((2, 2), vec.reshape(-1))
            b = qcore.pure((2, 2), base[occ].reshape(-1))
            assert qcore.equal_up_to_global_phase(a, b, 1e-9)
            # and the overall factor is the same common phase for every term
            np.testing.assert_allclose(
                vec, np.exp(1j * (d1 + d2)) * base[occ], atol=1e-10)

    def test_interferometric_stability_beamsplitter(self):
        rng = np.random.default_rng(37)
        enc = rusgate.encode(qcore.random_state((2, 2), rng))
        base = bs_conditionals(enc)
        u1, u2 = optics.bs_rotations(rusgate.photon_basis_from_angles(
            rusgate.AngleSet.reference()))
        d1, d2 = 1.37, -0.55
        shifted = bs_conditionals(enc, np.exp(1j * d1) * u1, np.exp(1j * d2) * u2)
        for occ, vec in shifted.items():
            np.testing.assert_allclose(
                vec, np.exp(1j * (d1 + d2)) * base[occ], atol=1e-10)
