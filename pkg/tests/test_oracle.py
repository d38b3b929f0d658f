"""Exact-enumeration oracle: cross-validation, conservation, diagnostics."""

from fractions import Fraction

import pytest

from coinpress.adversaries import (
    MixtureProver,
    inflating_prover,
    overlapping_sets_prover,
)
from coinpress.dist import ExplicitDistribution
from coinpress.oracle import (
    EnumerationBudgetError,
    ExactConfig,
    OracleRun,
    completeness_diagnostics,
    exact_output_distribution,
    exact_output_distribution_flat,
    pow2_bounds,
    soundness_diagnostics,
    verify_band_sandwich,
    verify_band_sums,
)
from coinpress.protocol import ProtocolParams, derive_params, honest_prover


def raw_params(n=3, t=6, gap_size=1, interval_size=2, sampling_gap=4.0, eps=1.0):
    return ProtocolParams.raw(
        n=n, eps=eps, delta=0.5, t=t, gap_size=gap_size,
        interval_size=interval_size, sampling_gap=sampling_gap,
    )


def skewed_dist(n=3):
    return ExplicitDistribution(
        n=n, mass={0: Fraction(1, 2), 3: Fraction(1, 4), 5: Fraction(1, 4)}
    )


def provers_for(dist, params):
    mix = MixtureProver(
        [(Fraction(1, 2), dist), (Fraction(1, 4), ExplicitDistribution.point(params.n, 0))],
        seed=3, params=params,
    )
    return {
        "honest": honest_prover(dist, params),
        "mixture": mix,
        "inflating": inflating_prover(dist, 1, params),
        "scripted-overlap": overlapping_sets_prover(dist, params),
    }


CONFIGS = [
    dict(n=3, t=6, gap_size=1, interval_size=2, sampling_gap=4.0),
    dict(n=3, t=6, gap_size=1, interval_size=2, sampling_gap=0.5),
    dict(n=3, t=8, gap_size=2, interval_size=2, sampling_gap=1.0),
]


class TestEnumeratorsAgree:
    @pytest.mark.parametrize("cfg", CONFIGS)
    def test_structured_vs_flat_all_provers(self, cfg):
        params = raw_params(**cfg)
        dist = skewed_dist()
        for name, prover in provers_for(dist, params).items():
            exact = exact_output_distribution(ExactConfig(params=params, prover=prover))
            flat_out, flat_rej = exact_output_distribution_flat(params, prover)
            assert exact.outputs == flat_out, name
            assert exact.reject_mass == flat_rej, name

    @pytest.mark.parametrize("cfg", CONFIGS)
    def test_total_mass_conserved(self, cfg):
        params = raw_params(**cfg)
        for name, prover in provers_for(skewed_dist(), params).items():
            exact = exact_output_distribution(ExactConfig(params=params, prover=prover))
            assert exact.total_mass() == 1, name


class TestExactDistribution:
    def test_honest_no_reject_exact_law(self):
        params = raw_params()
        dist = skewed_dist()
        exact = exact_output_distribution(ExactConfig(params=params, prover=honest_prover(dist, params)))
        assert exact.reject_mass == 0
        assert exact.by_element_probability() == {
            (0, Fraction(1, 2)): Fraction(1, 2),
            (3, Fraction(1, 4)): Fraction(1, 4),
            (5, Fraction(1, 4)): Fraction(1, 4),
        }

    def test_point_mass_single_output(self):
        params = raw_params()
        dist = ExplicitDistribution.point(3, 0)
        exact = exact_output_distribution(ExactConfig(params=params, prover=honest_prover(dist, params)))
        assert set(exact.by_element_probability()) <= {(0, Fraction(1))}
        assert exact.total_mass() == 1

    def test_trivial_fallback_equals_distribution(self):
        params = derive_params(8, 0.5, 0.5)
        for dist in (
            ExplicitDistribution(n=8, mass={0: Fraction(1, 2), 9: Fraction(1, 2)}),
            ExplicitDistribution.uniform(8, range(6)),
            ExplicitDistribution(n=8, mass={1: Fraction(2, 3), 2: Fraction(1, 3)}),
        ):
            exact = exact_output_distribution(
                ExactConfig(params=params, prover=honest_prover(dist, params))
            )
            assert exact.by_element_probability() == {
                (x, p): p for x, p in dist.mass.items()
            }

    def test_budget_guard(self):
        params = raw_params()
        with pytest.raises(EnumerationBudgetError):
            ExactConfig(params=params, prover=honest_prover(skewed_dist(), params), budget=10)

    def test_frozen_reject_mass_at_positive_hash_width(self):
        # regression pin for the skewed distribution at sampling_gap 0.5:
        # the cardinality check fails for 5/16 of the hash draws
        params = raw_params(sampling_gap=0.5)
        exact = exact_output_distribution(
            ExactConfig(params=params, prover=honest_prover(skewed_dist(), params))
        )
        assert exact.reject_by_reason == {"check-b": Fraction(5, 16)}

    def test_output_law_close_to_distribution(self):
        # rejection-or-output law versus the held distribution, as a
        # statistical distance (exactly zero on an all-m=0 config)
        from coinpress.dist import statistical_distance

        params = raw_params()
        dist = skewed_dist()
        exact = exact_output_distribution(
            ExactConfig(params=params, prover=honest_prover(dist, params))
        )
        law = {x: v for x, v in exact.element_marginal().items()}
        if exact.reject_mass:
            law["reject"] = exact.reject_mass
        assert statistical_distance(law, dict(dist.mass)) == 0


class TestWiderInstance:
    def test_four_bit_instance_enumerates(self):
        # full 2^12-member hash family per challenge
        params = ProtocolParams.raw(
            n=4, eps=1.0, delta=0.5, t=8, gap_size=1, interval_size=2, sampling_gap=3.0
        )
        dist = ExplicitDistribution(
            n=4,
            mass={0: Fraction(1, 2), 7: Fraction(1, 4), 9: Fraction(1, 8), 15: Fraction(1, 8)},
        )
        run = OracleRun(ExactConfig(params=params, prover=honest_prover(dist, params)))
        exact = run.distribution
        assert exact.total_mass() == 1
        assert verify_band_sandwich(run).ok
        flat_out, flat_rej = exact_output_distribution_flat(params, honest_prover(dist, params))
        assert flat_out == exact.outputs and flat_rej == exact.reject_mass


class TestTrivialFallbackMixtures:
    def test_mixture_support_decomposes_in_fallback(self):
        params = derive_params(8, 0.5, 0.5)
        from coinpress.adversaries import MixtureProver

        d0 = ExplicitDistribution(n=8, mass={0: Fraction(1, 2), 1: Fraction(1, 2)})
        prover = MixtureProver([(Fraction(1, 2), d0)], seed=0, params=params)
        exact = exact_output_distribution(ExactConfig(params=params, prover=prover))
        # half the mass plays honestly for d0, half rejects outright
        assert exact.reject_mass == Fraction(1, 2)
        assert exact.by_element_probability() == {
            (0, Fraction(1, 2)): Fraction(1, 4),
            (1, Fraction(1, 2)): Fraction(1, 4),
        }


class TestChallengeDistribution:
    def test_single_band_enumerable(self):
        # all mass in band 2 of a t=6 layout: shifts -1 and 0 hold it in
        # interval 1, shift 1 has it in a gap, so (s,k) splits evenly
        params = raw_params()
        dist = ExplicitDistribution.uniform(3, [0, 1, 2, 3])  # band 2
        run = OracleRun(ExactConfig(params=params, prover=honest_prover(dist, params)))
        assert run.challenge_distribution() == {
            (-1, 1): Fraction(1, 2),
            (0, 1): Fraction(1, 2),
        }


class TestPlacementProbability:
    def test_honest_m_zero_is_one_on_live_bands(self):
        params = raw_params()
        dist = skewed_dist()
        run = OracleRun(ExactConfig(params=params, prover=honest_prover(dist, params)))
        comp = run.components[0]
        # band 1 holds element 0, live, shift -1 interval 1
        assert comp.placement_probability(-1, 0, 1) == 1
        assert comp.placement_probability(-1, 3, 2) == 1

    def test_gap_band_is_zero(self):
        params = raw_params()
        dist = skewed_dist()
        run = OracleRun(ExactConfig(params=params, prover=honest_prover(dist, params)))
        comp = run.components[0]
        # shift -1 has gaps at 0, 3, 6
        assert comp.placement_probability(-1, 0, 0) == 0
        assert comp.placement_probability(-1, 0, 3) == 0

    def test_element_outside_bucket_zero_for_honest(self):
        params = raw_params()
        dist = skewed_dist()
        run = OracleRun(ExactConfig(params=params, prover=honest_prover(dist, params)))
        comp = run.components[0]
        # element 1 is not in the support, so never placed anywhere
        assert comp.placement_probability(-1, 1, 1) == 0


class TestStructuralChecks:
    @pytest.mark.parametrize("cfg", CONFIGS)
    def test_sandwich_and_sums_all_provers(self, cfg):
        params = raw_params(**cfg)
        for name, prover in provers_for(skewed_dist(), params).items():
            run = OracleRun(ExactConfig(params=params, prover=prover))
            sandwich = verify_band_sandwich(run)
            assert sandwich.ok, (name, sandwich.violations[:2])
            assert not sandwich.indeterminate, name
            sums = verify_band_sums(run)
            assert sums.ok, (name, sums.violations[:2])

    def test_fractional_eps_uses_enclosures(self):
        params = raw_params(n=2, t=8, gap_size=2, interval_size=2, sampling_gap=3.0, eps=0.5)
        dist = ExplicitDistribution(n=2, mass={0: Fraction(1, 2), 3: Fraction(1, 2)})
        run = OracleRun(ExactConfig(params=params, prover=honest_prover(dist, params)))
        report = verify_band_sandwich(run)
        assert report.ok and not report.indeterminate

    def test_pow2_bounds_enclose(self):
        # rigorous check via integer powers: lo^10 < 2^17 < hi^10
        lo, hi = pow2_bounds(1.7)
        assert lo**10 < 2**17 < hi**10
        exact_lo, exact_hi = pow2_bounds(3.0)
        assert exact_lo == exact_hi == 8
        neg_lo, neg_hi = pow2_bounds(-1.5)
        assert neg_lo**2 < Fraction(1, 8) < neg_hi**2


class TestSoundnessDiagnostics:
    def test_point_mass_never_undervalued(self):
        # gap_size 4 puts the cutoff at half the conditional mass, below the
        # claimed probability 1
        params = ProtocolParams.raw(
            n=3, eps=1.0, delta=0.25, t=8, gap_size=4, interval_size=4, sampling_gap=4.0
        )
        dist = ExplicitDistribution.point(3, 0)
        run = OracleRun(ExactConfig(params=params, prover=honest_prover(dist, params)))
        diag = soundness_diagnostics(run)
        assert diag.bad_probability == 0
        assert diag.conditional_sums[0] == 1

    def test_band_split_partitions_above_cutoff_sums(self):
        params = raw_params(sampling_gap=0.5)
        run = OracleRun(
            ExactConfig(params=params, prover=honest_prover(skewed_dist(), params))
        )
        diag = soundness_diagnostics(run)
        for sd in diag.per_shift.values():
            for x, total in sd.sums_above_cutoff.items():
                split = sd.sums_medium.get(x, Fraction(0)) + sd.sums_large.get(x, Fraction(0))
                assert split == total

    def test_band_edges_ordered_when_gap_wide(self):
        # the scaling factor 2^((gap/2 - 1) eps) exceeds 1 only for gaps > 2,
        # which is when the three bands are properly ordered
        params = ProtocolParams.raw(
            n=3, eps=1.0, delta=0.25, t=8, gap_size=4, interval_size=4, sampling_gap=4.0
        )
        run = OracleRun(
            ExactConfig(params=params, prover=honest_prover(skewed_dist(), params))
        )
        diag = soundness_diagnostics(run)
        assert diag.per_shift
        for sd in diag.per_shift.values():
            for x in sd.cutoff:
                assert sd.cutoff[x] <= sd.large_edge[x]

    def test_bad_event_mass_decomposes_over_shifts(self):
        params = raw_params(sampling_gap=0.5)
        run = OracleRun(
            ExactConfig(params=params, prover=honest_prover(skewed_dist(), params))
        )
        diag = soundness_diagnostics(run)
        comp = run.components[0]
        recomputed = sum(
            (comp.shift_prob(s) * sd.bad_probability for s, sd in diag.per_shift.items()),
            Fraction(0),
        )
        assert diag.bad_probability == recomputed


class TestCompletenessDiagnostics:
    @pytest.mark.parametrize("cfg", CONFIGS)
    def test_partition_and_band(self, cfg):
        params = raw_params(**cfg)
        dist = skewed_dist()
        run = OracleRun(ExactConfig(params=params, prover=honest_prover(dist, params)))
        diag = completeness_diagnostics(run, dist)
        assert diag.partition_ok
        assert diag.covered == {0, 3, 5}
        assert diag.covered_mass == 1
        # honest prover never outputs a wrong probability
        assert diag.wrong_probability_mass == 0
        # at eps=1 the deviation window 1 +- 132*eps is generous
        assert diag.in_band

    def test_every_output_element_is_covered(self):
        params = raw_params()
        dist = skewed_dist()
        run = OracleRun(ExactConfig(params=params, prover=honest_prover(dist, params)))
        diag = completeness_diagnostics(run, dist)
        for (x, _band, _p) in run.distribution.outputs:
            assert x in diag.covered
