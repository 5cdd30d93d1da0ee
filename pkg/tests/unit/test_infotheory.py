import math

import pytest
from hypothesis import given, settings, strategies as st

from awgnbandit.infotheory import (
    RECURSION_CEILING,
    DiscreteDistribution,
    RecursionCertificateError,
    awgn_capacity,
    awgn_capacity_nats,
    b_recursion,
    b_squared_sequence,
    binary_input_mi,
    binary_kl,
    capacity_lower_bound,
    chi_square,
    contraction_offset,
    hard_gap,
    integer_ceiling,
    kl_divergence,
    lower_bound_report,
    max_density_ratio,
    minimax_lower_bound,
    sub_phase_count,
    total_variation,
    two_point_regret_floor,
    ucb0_bound,
    ucb_lemma_bound,
    ue_ucb_bound,
    ue_ucb_pp_bound,
)

E = math.e


def dist(*probs):
    return DiscreteDistribution(probs=probs)


@st.composite
def distribution_pairs(draw):
    size = draw(st.integers(min_value=2, max_value=8))
    weights = st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=size, max_size=size)
    return DiscreteDistribution.from_weights(draw(weights)), DiscreteDistribution.from_weights(draw(weights))


class TestIntegerHelpers:
    """Ceiling with slack and sub-phase counts"""

    def test_ceiling_absorbs_rounding(self):
        assert integer_ceiling(17.0 + 1e-12) == 17
        assert integer_ceiling(17.01) == 18
        assert integer_ceiling(2.0) == 2

    def test_sub_phase_count(self):
        assert sub_phase_count(1.0) == 0
        assert sub_phase_count(2.0) == 2
        assert sub_phase_count(4.0) == 4
        assert sub_phase_count(3.0) == 4

    def test_sub_phase_count_rejects_small_bound(self):
        with pytest.raises(ValueError):
            sub_phase_count(0.5)


class TestUpperBounds:
    """Closed-form regret upper bounds"""

    def test_lemma_bound(self):
        assert ucb_lemma_bound(1.0, 1, E, 1.0) == pytest.approx(8 * math.sqrt(E) + 6)
        assert ucb_lemma_bound(4.0, 1, E, 1.0) == pytest.approx(16 * math.sqrt(E) + 6)
        assert ucb_lemma_bound(1.0, 4, E, 2.0) == pytest.approx(16 * math.sqrt(E) + 48)

    def test_lemma_rejects_short_horizon(self):
        with pytest.raises(ValueError):
            ucb_lemma_bound(1.0, 1, 1.5, 1.0)

    def test_ucb0_small(self):
        report = ucb0_bound(1, E, 1.0, 1.0)
        assert report.value == pytest.approx(8 * math.sqrt(2 * E) + 6)
        assert report.term("forced_pulls") == 6.0

    def test_ucb0_acceptance_oracle(self):
        expected = 8 * math.sqrt(17 * 5 * 1e4 * math.log(1e4)) + 120
        assert ucb0_bound(5, 1e4, 4.0, 1.0).value == pytest.approx(expected, rel=1e-12)

    def test_ucb0_noiseless_limit(self):
        report = ucb0_bound(3, 1000, 1.0, 1e12)
        noiseless = 8 * math.sqrt(3 * 1000 * math.log(1000)) + 18
        assert report.value == pytest.approx(noiseless, rel=1e-9)

    def test_ue_ucb_terms(self):
        report = ue_ucb_bound(1, E, 1.0, 1.0)
        assert report.term("exploration") == pytest.approx(2.0)
        assert report.term("forced_pulls") == pytest.approx(8.0)
        assert report.term("confidence") == pytest.approx(8 * math.sqrt(3 * E))

    def test_ue_ucb_cubic_term(self):
        assert ue_ucb_bound(5, 1e4, 32.0, 1.0).term("exploration") == pytest.approx(327680.0)

    def test_ue_ucb_pp_terms(self):
        report = ue_ucb_pp_bound(5, E, 4.0, 1.0)
        assert report.term("exploration") == pytest.approx(320.0)
        assert report.term("forced_pulls") == pytest.approx(120.0)
        assert report.term("confidence") == pytest.approx(8 * math.sqrt(5 * 5 * E))
        assert report.warnings == ()

    @pytest.mark.parametrize("snr,expected", [(0.5, 128.0), (10.0, 64.0)])
    def test_ue_ucb_pp_snr_saturation(self, snr, expected):
        assert ue_ucb_pp_bound(1, 100, 4.0, snr).term("exploration") == pytest.approx(expected)

    def test_ue_ucb_pp_degenerate_bound_warns(self, caplog):
        report = ue_ucb_pp_bound(2, 100, 1.0, 1.0)
        assert report.term("exploration") == 0.0
        assert len(report.warnings) == 1
        assert "B = 1 < 2" in report.warnings[0]
        assert "degenerate" in caplog.text

    def test_ue_ucb_pp_bound_below_two_names_explored_sub_phases(self, caplog):
        report = ue_ucb_pp_bound(2, 100, 1.5, 1.0)
        assert report.term("exploration") == 0.0
        assert len(report.warnings) == 1
        assert "still explores 2 sub-phases" in report.warnings[0]
        assert "degenerate" not in caplog.text

    def test_unknown_term(self):
        with pytest.raises(KeyError):
            ucb0_bound(1, 10, 1.0, 1.0).term("exploration")

    @pytest.mark.parametrize("fn", [ucb0_bound, ue_ucb_bound, ue_ucb_pp_bound])
    def test_bounds_monotone(self, fn):
        base = fn(3, 1000, 4.0, 1.0).value
        assert fn(4, 1000, 4.0, 1.0).value > base
        assert fn(3, 2000, 4.0, 1.0).value > base
        assert fn(3, 1000, 8.0, 1.0).value > base
        assert fn(3, 1000, 4.0, 0.5).value > base

    @pytest.mark.parametrize("args", [(0, 10, 1.0, 1.0), (1, 1, 1.0, 1.0), (1, 10, 0.5, 1.0), (1, 10, 1.0, 0.0)])
    def test_invalid_arguments(self, args):
        with pytest.raises(ValueError):
            ucb0_bound(*args)


class TestLowerBounds:
    """Minimax and capacity-based lower bounds"""

    def test_minimax_example(self):
        assert minimax_lower_bound(4, 1e4, 1.0, 1.0, c1=1.0) == pytest.approx(204.0)

    def test_minimax_snr_saturates(self):
        assert minimax_lower_bound(4, 1e4, 1.0, 100.0) == pytest.approx(minimax_lower_bound(4, 1e4, 1.0, 1.0))

    def test_minimax_default_constant(self):
        assert minimax_lower_bound(4, 1e4, 1.0, 1.0) == pytest.approx(204.0 / 20.0)

    def test_report_terms(self):
        report = lower_bound_report(4, 1e4, 1.0, 1.0, c1=1.0)
        assert report.term("statistical") == pytest.approx(200.0)
        assert report.term("forced_pulls") == pytest.approx(4.0)
        assert report.value == pytest.approx(204.0)
        assert report.warnings == ()

    def test_short_horizon_warning(self, caplog):
        report = lower_bound_report(10, 5, 1.0, 0.01)
        assert len(report.warnings) == 1
        assert "below it" in report.warnings[0]
        assert "c2*K" in caplog.text

    def test_capacity_lower_bound_at_unit_rate(self):
        # capacity(3) = 1 bit so the rate term saturates at 1
        value = capacity_lower_bound(4, 1e4, 1.0, 3.0, c1=1.0)
        assert value == pytest.approx(200.0 + 4.0)

    def test_capacity_lower_bound_grows_as_snr_falls(self):
        assert capacity_lower_bound(4, 1e4, 1.0, 0.1) > capacity_lower_bound(4, 1e4, 1.0, 1.0)

    def test_capacity_lower_bound_cap_by_horizon(self):
        value = capacity_lower_bound(2, 10, 1.0, 1e-6, c1=1.0, c2=1.0)
        assert value == pytest.approx(10.0 + 2.0)


class TestHardGap:
    """Two-point construction helpers"""

    def test_value(self):
        expected = math.sqrt(1 / (16 * math.log(2) * 1e4 * 0.5))
        assert hard_gap(2, 1e4, 1.0) == pytest.approx(expected)

    def test_too_short_horizon(self):
        with pytest.raises(ValueError, match=r"\(0, 1/4\)"):
            hard_gap(10, 5, 1.0)

    def test_needs_two_arms(self):
        with pytest.raises(ValueError):
            hard_gap(1, 1e4, 1.0)

    def test_regret_floor(self):
        assert two_point_regret_floor(100, 0.2, 0.0) == pytest.approx(10.0)
        assert two_point_regret_floor(100, 0.2, 2.0) == 0.0
        assert two_point_regret_floor(100, 0.2, 50.0) == 0.0

    def test_regret_floor_rejects_negative_divergence(self):
        with pytest.raises(ValueError):
            two_point_regret_floor(100, 0.2, -0.1)


class TestBRecursion:
    """The B^2 sub-phase recursion and its ceiling"""

    def test_reference_sequence(self):
        assert b_recursion(4.0, 1.0) == (16.0, 9.5, 6.25, 4.625, 3.8125)

    def test_short_sequence(self):
        assert b_recursion(2.0, 1.0) == (4.0, 3.5, 3.25)

    def test_bound_below_two_rejected(self):
        with pytest.raises(ValueError):
            b_recursion(1.5, 1.0)

    def test_unit_bound_sequence_is_single_entry(self):
        assert b_squared_sequence(1.0, 1.0) == (1.0,)

    def test_infinite_snr_rejected(self):
        with pytest.raises(ValueError):
            b_squared_sequence(4.0, math.inf)

    @pytest.mark.parametrize("bound", [2.0**k for k in range(1, 11)])
    @pytest.mark.parametrize("snr", [0.01, 0.1, 1.0, 10.0, 100.0])
    def test_grid_ends_below_four(self, bound, snr):
        seq = b_recursion(bound, snr)
        assert seq[-1] <= RECURSION_CEILING
        assert len(seq) == sub_phase_count(bound) + 1

    @pytest.mark.parametrize("snr", [0.01, 1.0, 100.0])
    def test_contraction(self, snr):
        offset = contraction_offset(snr)
        seq = b_recursion(256.0, snr)
        for cur, nxt in zip(seq, seq[1:]):
            assert nxt - offset <= (cur - offset) / 2 + 1e-12 * cur

    def test_certificate_error_when_ceiling_exceeded(self, mocker):
        mocker.patch("awgnbandit.infotheory.b_squared_sequence", return_value=(16.0, 5.0))
        with pytest.raises(RecursionCertificateError, match="exceeds 4"):
            b_recursion(4.0, 1.0)


class TestDivergences:
    """KL, chi-square and total variation on finite alphabets"""

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            dist(0.5, 0.6)

    def test_negative_probability_rejected(self):
        with pytest.raises(ValueError):
            dist(1.5, -0.5)

    def test_alphabet_mismatch(self):
        with pytest.raises(ValueError, match="alphabet mismatch"):
            kl_divergence(dist(0.5, 0.5), dist(0.25, 0.25, 0.5))

    def test_kl_examples(self):
        p = dist(0.3, 0.7)
        assert kl_divergence(p, p) == 0.0
        assert binary_kl(0.75, 0.25) == pytest.approx(0.5 * math.log(3))
        assert kl_divergence(dist(1.0, 0.0), dist(0.5, 0.5)) == pytest.approx(math.log(2))

    def test_kl_infinite_on_missing_atom(self):
        assert kl_divergence(dist(0.5, 0.5), dist(1.0, 0.0)) == math.inf

    def test_chi_square_examples(self):
        p = dist(0.3, 0.7)
        assert chi_square(p, p) == 0.0
        assert chi_square(dist(0.75, 0.25), dist(0.25, 0.75)) == pytest.approx(4.0 / 3.0)
        assert chi_square(dist(1.0, 0.0), dist(0.5, 0.5)) == pytest.approx(1.0)
        assert chi_square(dist(0.5, 0.5), dist(1.0, 0.0)) == math.inf

    def test_total_variation_examples(self):
        p = dist(0.3, 0.7)
        assert total_variation(p, p) == 0.0
        assert total_variation(dist(0.75, 0.25), dist(0.25, 0.75)) == pytest.approx(0.5)
        assert total_variation(dist(1.0, 0.0), dist(0.0, 1.0)) == 1.0

    def test_max_density_ratio(self):
        assert max_density_ratio(dist(0.75, 0.25), dist(0.25, 0.75)) == pytest.approx(3.0)
        assert max_density_ratio(dist(0.5, 0.5), dist(1.0, 0.0)) == math.inf

    def test_binary_kl_range(self):
        with pytest.raises(ValueError):
            binary_kl(1.2, 0.5)

    @settings(max_examples=200, deadline=None)
    @given(pair=distribution_pairs())
    def test_kl_below_chi_square(self, pair):
        p, q = pair
        assert kl_divergence(p, q) <= chi_square(p, q) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(pair=distribution_pairs())
    def test_chi_square_below_twice_ratio_kl(self, pair):
        p, q = pair
        assert chi_square(p, q) <= 2.0 * max_density_ratio(p, q) * kl_divergence(p, q) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(pair=distribution_pairs())
    def test_pinsker(self, pair):
        p, q = pair
        assert total_variation(p, q) <= math.sqrt(kl_divergence(p, q) / 2.0) + 1e-12

    def test_chi_square_can_exceed_ratio_kl_without_factor_two(self):
        # near-identical pairs have chi2 ~ 2*KL while the ratio c is close to 1
        p, q = dist(0.51, 0.49), dist(0.5, 0.5)
        c = max_density_ratio(p, q)
        assert chi_square(p, q) > c * kl_divergence(p, q)


class TestCapacity:
    """AWGN capacity and binary-input mutual information"""

    @pytest.mark.parametrize("snr,bits", [(0.0, 0.0), (1.0, 0.5), (3.0, 1.0)])
    def test_capacity_spots(self, snr, bits):
        assert awgn_capacity(snr) == bits

    def test_nats(self):
        assert awgn_capacity_nats(1.0) == pytest.approx(0.5 * math.log(2))

    def test_negative_snr(self):
        with pytest.raises(ValueError):
            awgn_capacity(-1.0)

    def test_zero_amplitude(self):
        assert binary_input_mi(0.0, 1.0) == 0.0

    def test_high_amplitude_reaches_one_bit(self):
        assert binary_input_mi(100.0, 1.0) == pytest.approx(1.0, abs=1e-6)

    def test_unit_snr_below_capacity(self):
        mi = binary_input_mi(1.0, 1.0)
        assert 0.0 < mi <= 0.5

    @pytest.mark.parametrize("snr", [0.1, 0.5, 1.0, 2.0, 4.0, 10.0])
    def test_never_exceeds_capacity(self, snr):
        assert binary_input_mi(1.0, 1.0 / snr) <= min(1.0, awgn_capacity(snr)) + 1e-6

    def test_monotone_in_amplitude(self):
        values = [binary_input_mi(a, 1.0) for a in (0.25, 0.5, 1.0, 2.0)]
        assert values == sorted(values)

    def test_too_few_nodes(self):
        with pytest.raises(ValueError, match="at least"):
            binary_input_mi(1.0, 1.0, nodes=10)
