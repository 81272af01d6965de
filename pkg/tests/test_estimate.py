"""Estimators: worker invariance, error bars, and cross-method agreement."""
import math

import numpy as np
import pytest

from latticeldp import (
    EventSpec,
    RngStream,
    build_guided_proposal,
    consistency_check,
    estimate_event_is,
    estimate_event_naive,
    estimate_event_zeta,
    estimate_events_is,
    estimate_strip,
    scaling_study,
)
from latticeldp.simulate import identity_proposal


@pytest.fixture
def wide_tube(diagonal):
    return EventSpec("tube", diagonal, 0.8)


class TestWorkerInvariance:
    def test_naive_estimate_ignores_worker_count(self, unit_params, wide_tube):
        results = [
            estimate_event_naive(
                unit_params, wide_tube, 2.0, 600, RngStream(211), workers=w
            )
            for w in (1, 3, 7)
        ]
        for r in results[1:]:
            assert r.p_hat == results[0].p_hat
            assert r.log_p_hat == results[0].log_p_hat
            assert r.std_error == results[0].std_error
            assert r.n_hits == results[0].n_hits

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_weighted_estimate_ignores_worker_count(self, unit_params, wide_tube, diagonal):
        prop = build_guided_proposal(unit_params, diagonal, 2.0)
        results = [
            estimate_event_is(
                unit_params, wide_tube, 2.0, 400, RngStream(223), proposal=prop, workers=w
            )
            for w in (1, 4)
        ]
        assert results[0].p_hat == results[1].p_hat
        assert results[0].std_error == results[1].std_error
        assert results[0].ess == results[1].ess


class TestNaive:
    def test_rerun_is_bit_identical(self, unit_params, wide_tube):
        a = estimate_event_naive(unit_params, wide_tube, 2.0, 500, RngStream(227))
        b = estimate_event_naive(unit_params, wide_tube, 2.0, 500, RngStream(227))
        assert a == b

    def test_reported_error_bar_matches_dispersion(self, unit_params, wide_tube):
        reps = [
            estimate_event_naive(unit_params, wide_tube, 2.0, 3000, RngStream(229, 10_000 * k))
            for k in range(20)
        ]
        spread = np.std([r.p_hat for r in reps], ddof=1)
        typical_se = np.mean([r.std_error for r in reps])
        assert typical_se / 2 < spread < typical_se * 2

    def test_zero_hit_warning_and_fields(self, unit_params, diagonal):
        needle = EventSpec("tube", diagonal, 0.05)
        with pytest.warns(UserWarning, match="no hits"):
            r = estimate_event_naive(unit_params, needle, 3.0, 50, RngStream(233))
        assert r.zero_hits
        assert r.p_hat == 0.0
        assert r.log_p_hat == -math.inf
        assert r.normalized is None

    def test_result_dict_round_trips_key_fields(self, unit_params, wide_tube):
        r = estimate_event_naive(unit_params, wide_tube, 2.0, 300, RngStream(239))
        d = r.to_dict()
        assert d["T"] == 2.0
        assert d["method"] == "naive"
        assert d["n"] == 300
        assert d["p_hat"] == r.p_hat


class TestImportanceSampling:
    def test_identity_proposal_reproduces_the_naive_estimate(self, unit_params, wide_tube):
        ident = identity_proposal(unit_params, 2.0)
        naive = estimate_event_naive(unit_params, wide_tube, 2.0, 800, RngStream(241))
        weighted = estimate_event_is(
            unit_params, wide_tube, 2.0, 800, RngStream(241), proposal=ident
        )
        assert weighted.p_hat == pytest.approx(naive.p_hat, rel=1e-12)
        assert weighted.n_hits == naive.n_hits

    def test_agrees_with_naive_within_error_bars(self, unit_params, wide_tube, diagonal):
        prop = build_guided_proposal(unit_params, diagonal, 2.0)
        naive = estimate_event_naive(unit_params, wide_tube, 2.0, 20_000, RngStream(251))
        weighted = estimate_event_is(
            unit_params, wide_tube, 2.0, 5_000, RngStream(257), proposal=prop
        )
        gap = abs(weighted.p_hat - naive.p_hat)
        assert gap < 3.0 * math.hypot(naive.std_error, weighted.std_error)

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_nested_events_preserve_inclusion_exactly(self, unit_params, diagonal):
        tube = EventSpec("tube", diagonal, 0.5)
        strip = EventSpec("strip", diagonal, 0.5, bound_m=3.0)
        prop = build_guided_proposal(unit_params, diagonal, 3.0)
        r_tube, r_strip = estimate_events_is(
            unit_params, [tube, strip], 3.0, 2_000, RngStream(263), proposal=prop
        )
        assert r_strip.p_hat >= r_tube.p_hat
        assert r_strip.n_hits >= r_tube.n_hits

    def test_low_ess_warns(self, unit_params, wide_tube):
        # a proposal with controls scaled far off the model rates produces
        # wildly uneven weights at this horizon
        prop = identity_proposal(unit_params, 2.0).scaled(6.0)
        big = EventSpec("tube", wide_tube.target, 50.0)
        with pytest.warns(UserWarning, match="effective sample size"):
            r = estimate_event_is(
                unit_params, big, 2.0, 300, RngStream(269), proposal=prop
            )
        assert r.ess is not None and r.ess < 10.0

    def test_rejects_mismatched_proposal(self, unit_params, wide_tube, diagonal):
        prop = build_guided_proposal(unit_params, diagonal, 4.0)
        with pytest.raises(ValueError):
            estimate_event_is(
                unit_params, wide_tube, 2.0, 100, RngStream(0), proposal=prop
            )


class TestReferenceMeasureRoute:
    def test_total_mass_is_one_on_a_sure_event(self, unit_params, diagonal):
        # weighting reference paths by the density telescopes to P(anything) = 1
        everything = EventSpec("tube", diagonal, 60.0)
        r = estimate_event_zeta(unit_params, everything, 1.5, 40_000, RngStream(271))
        assert r.p_hat == pytest.approx(1.0, abs=4 * r.std_error)

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_agrees_with_naive_on_a_plain_event(self, unit_params, wide_tube):
        naive = estimate_event_naive(unit_params, wide_tube, 1.5, 20_000, RngStream(277))
        viaref = estimate_event_zeta(unit_params, wide_tube, 1.5, 40_000, RngStream(281))
        gap = abs(naive.p_hat - viaref.p_hat)
        assert gap < 4.0 * math.hypot(naive.std_error, viaref.std_error)


class TestStrip:
    def test_default_proposal_targets_the_event(self, unit_params, diagonal):
        r = estimate_strip(unit_params, diagonal, 0.8, 3.0, 2.0, 1_500, RngStream(283))
        assert r.method == "guided-is"
        assert r.n_hits > 0
        assert r.ess is None or r.ess >= 10.0

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_strip_dominates_tube_at_equal_width(self, unit_params, diagonal):
        tube = EventSpec("tube", diagonal, 0.8)
        strip = EventSpec("strip", diagonal, 0.8, bound_m=3.0)
        prop = build_guided_proposal(unit_params, diagonal, 2.0)
        r_tube, r_strip = estimate_events_is(
            unit_params, [tube, strip], 2.0, 3_000, RngStream(293), proposal=prop
        )
        assert r_tube.n_hits > 0
        assert r_strip.p_hat >= r_tube.p_hat


class TestConsistency:
    def test_small_scale_agreement(self, unit_params):
        # short horizon keeps the weight tail light, so the z-score is
        # trustworthy at this replica count
        report = consistency_check(unit_params, horizon=1.0, n=5_000, rng=RngStream(307))
        assert abs(report.z_score) <= 4.0
        assert report.direct.n_replicas == 5_000
        assert report.weighted.method == "zeta-weighted"


class TestScalingStudy:
    def test_rejects_bad_horizon_grids(self, unit_params, diagonal):
        with pytest.raises(ValueError):
            scaling_study(unit_params, diagonal, horizons=(4.0,), n=10, rng=RngStream(0))
        with pytest.raises(ValueError):
            scaling_study(
                unit_params, diagonal, horizons=(4.0, 4.0), n=10, rng=RngStream(0)
            )

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_tiny_study_populates_rows_and_fits(self, unit_params, diagonal):
        study = scaling_study(
            unit_params,
            diagonal,
            epsilon=0.8,
            horizons=(1.0, 2.0),
            n=2_000,
            rng=RngStream(311),
        )
        assert len(study.rows) == 2
        assert study.target_rate == pytest.approx(1.5)
        assert [r.horizon for r in study.rows] == [1.0, 2.0]
        if not any(r.zero_hits for r in study.rows):
            assert math.isfinite(study.fitted_slope)
