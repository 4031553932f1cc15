"""
Tests for the Monte Carlo studies and their summaries.

Tests marked slow run the desk-scale acceptance studies (minutes each);
deselect them with ``-m "not slow"``.
"""

from dataclasses import replace

import pytest

from spde_limits.analysis import CONVOLUTION_EVENTS, convolution_events
from spde_limits.config import AUTO, StudyConfig
from spde_limits.errors import ConfigurationError
from spde_limits.models import Model, SigmaKind, SigmaSchedule
from spde_limits.renorm import wick_convergence_study
from spde_limits.studies import (
    RunRecord,
    SampleTask,
    c_zero_for,
    default_schedules,
    error_rate,
    estimate_probability,
    regime_scan,
    run_convergence_study,
    run_sample,
    summarize,
    theorem_inequality_check,
)
from spde_limits.studies.regimes import h_minus1_bound
from spde_limits.studies.theorem import calibrate_constants, compare_sides

QUIET = {name: 0 for name in (*CONVOLUTION_EVENTS, "initial", "residual", "error")}
COMPARABLE = {"gamma_below_floor": False, "eps_not_small": False}


def make_record(eps=0.1, sample=0, error_sq=0.01, total=0.0, **events):
    return RunRecord(
        model="ch_ac_homotopy",
        eps=eps,
        sigma=0.2,
        c_zero=0.0,
        seed=0,
        sample=sample,
        p=4.0,
        sup_error_sq=error_sq,
        residual={
            "term1": 0.0,
            "term2": 0.0,
            "term3": total,
            "total": total,
            "term3_parts": {},
        },
        statistics={},
        events={**QUIET, **events},
        flags=dict(COMPARABLE),
    )


@pytest.mark.unit
class TestProbabilityEstimates:
    """Test Wilson score intervals."""

    def test_half_of_one_hundred(self):
        estimate = estimate_probability([1] * 50 + [0] * 50)
        assert estimate.p_hat == 0.5
        assert estimate.low == pytest.approx(0.4038, abs=1e-4)
        assert estimate.high == pytest.approx(0.5962, abs=1e-4)

    def test_frequency(self):
        estimate = estimate_probability([1, 1, 0])
        assert estimate.p_hat == pytest.approx(2 / 3)
        assert estimate.successes == 2 and estimate.trials == 3
        assert estimate.low < estimate.p_hat < estimate.high

    def test_no_successes(self):
        """The interval stays inside [0, 1] with a positive upper end."""
        estimate = estimate_probability([0] * 10)
        assert estimate.low == pytest.approx(0.0, abs=1e-12)
        assert estimate.high == pytest.approx(0.2775, abs=1e-4)
        assert estimate.upper_width == estimate.high

    def test_invalid_indicators(self):
        with pytest.raises(ConfigurationError):
            estimate_probability([])
        with pytest.raises(ConfigurationError):
            estimate_probability([0, 2])


@pytest.mark.unit
class TestSummaries:
    """Test per-ε summary rows."""

    def test_summarize_orders_by_decreasing_eps(self):
        records = [
            make_record(0.05, 0, 0.01),
            make_record(0.1, 1, 0.16, sup_c0=1),
            make_record(0.1, 0, 0.04),
            make_record(0.05, 1, 0.01),
        ]
        rows = summarize(records)
        assert [row["eps"] for row in rows] == [0.1, 0.05]
        assert rows[0]["samples"] == 2
        assert rows[0]["median_sup_error"] == pytest.approx(0.3)
        assert rows[0]["p_sup_c0"] == 0.5
        assert rows[1]["median_sup_error"] == pytest.approx(0.1)

    def test_error_rate(self):
        rows = [
            {"eps": 0.2, "median_sup_error": 0.4},
            {"eps": 0.1, "median_sup_error": 0.2},
        ]
        assert error_rate(rows) == pytest.approx(1.0)
        assert error_rate(rows[:1]) is None

    def test_record_row_is_flat(self):
        row = make_record(error_sq=0.25, total=0.5).to_dict()
        assert row["sup_error"] == pytest.approx(0.5)
        assert row["residual_total"] == 0.5
        assert "residual" not in row
        assert row["events"]["initial"] == 0


@pytest.mark.unit
class TestTheoremComparison:
    """Test calibration and the side-by-side comparison."""

    def test_calibration(self):
        pilot = [make_record(sample=i, error_sq=float(i)) for i in range(100)]
        big_k, scale = calibrate_constants(pilot, gamma=1.0)
        assert big_k == pytest.approx(98.01)
        assert scale == 1.0

    def test_residual_scale_from_quiet_runs(self):
        pilot = [make_record(sample=i, total=2.0 * i) for i in range(101)]
        pilot.append(make_record(sample=101, total=1e6, wick_lp=1))
        _, scale = calibrate_constants(pilot, gamma=2.0)
        assert scale == pytest.approx(99.0)

    def test_pass_when_events_cover_errors(self):
        records = [make_record(sample=i) for i in range(8)]
        records += [make_record(sample=8 + i, error=1, sup_c0=1) for i in range(2)]
        verdict = compare_sides(0.1, records, 1.0, 1.0)
        assert verdict.verdict == "PASS"
        assert verdict.lhs.p_hat == pytest.approx(0.2)
        assert verdict.rhs_total == pytest.approx(0.2)
        assert verdict.implication_rate == 1.0

    def test_fail_when_errors_are_unexplained(self):
        records = [make_record(sample=i, error=int(i < 50)) for i in range(100)]
        verdict = compare_sides(0.1, records, 1.0, 1.0)
        assert verdict.verdict == "FAIL"
        assert verdict.joint_width < verdict.lhs.p_hat

    def test_flagged_runs_are_skipped(self):
        record = make_record()
        flagged = replace(record, flags={**COMPARABLE, "eps_not_small": True})
        verdict = compare_sides(0.1, [flagged], 1.0, 1.0)
        assert verdict.verdict == "SKIPPED"
        assert verdict.skipped == 1


@pytest.mark.unit
class TestCZeroFor:
    """Test C₀ resolution for studies."""

    def test_explicit_value_wins(self, log_schedule):
        assert c_zero_for(Model.CH_AC_HOMOTOPY, log_schedule, 0.3) == 0.3

    def test_auto_zero_regime(self):
        schedule = SigmaSchedule(SigmaKind.POWER, 1.0, 1.0)
        assert c_zero_for(Model.AC_BILAPLACIAN, schedule, AUTO) == 0.0

    def test_auto_divergent_raises(self):
        with pytest.raises(ConfigurationError, match="diverges"):
            c_zero_for(Model.CH_AC_HOMOTOPY, SigmaSchedule.constant(1.0), AUTO)

    def test_auto_unavailable_for_mollified_noise(self, log_schedule):
        with pytest.raises(ConfigurationError, match="explicitly"):
            c_zero_for(Model.AC_MOLLIFIED_NOISE, log_schedule, AUTO)


@pytest.mark.integration
class TestSmallStudies:
    """Run every study inline on a 16×16 grid."""

    def test_run_sample(self, small_study):
        record = run_sample(SampleTask(small_study, 0.1, 2, 0.0, 1.0))
        assert (record.eps, record.sample, record.seed) == (0.1, 2, 7)
        assert record.events["initial"] == 0
        assert "error" not in record.events
        assert set(record.events) >= set(CONVOLUTION_EVENTS)
        assert set(record.flags) == set(COMPARABLE)
        assert record.sup_error_sq >= 0.0
        assert record.residual["total"] >= 0.0

    def test_error_event_with_big_k(self, small_study):
        config = replace(small_study, big_k=1e-12)
        record = run_sample(SampleTask(config, 0.1, 0, 0.0, 1.0))
        assert record.events["error"] == 1

    def test_sample_is_reproducible(self, small_study):
        task = SampleTask(small_study, 0.2, 1, 0.0, 1.0)
        first, second = run_sample(task), run_sample(task)
        assert first == second
        assert first.to_dict().keys() == second.to_dict().keys()

    def test_records_match_across_worker_counts(self, small_study):
        """Only the wall time may differ between a serial and a pooled run."""
        serial = run_convergence_study(small_study, workers=1)
        pooled = run_convergence_study(small_study, workers=3)
        assert serial.records == pooled.records
        assert [r.to_dict() | {"wall_time": 0} for r in serial.records] == [
            r.to_dict() | {"wall_time": 0} for r in pooled.records
        ]

    def test_sample_events_come_from_convolution_events(
        self, small_study, monkeypatch
    ):
        seen = []

        def recording(*args, **kwargs):
            seen.append(kwargs["statistics"])
            return convolution_events(*args, **kwargs)

        monkeypatch.setattr(
            "spde_limits.studies.convergence.convolution_events", recording
        )
        record = run_sample(SampleTask(small_study, 0.1, 3, 0.0, 1.0))
        assert seen == [record.statistics]
        assert set(record.events) == {*CONVOLUTION_EVENTS, "initial", "residual"}

    def test_convergence_study(self, small_study):
        seen = []
        result = run_convergence_study(small_study, on_record=seen.append)
        assert len(result.records) == 8
        assert [r.eps for r in seen] == [0.2] * 4 + [0.1] * 4
        assert [row["eps"] for row in result.summary] == [0.2, 0.1]
        assert result.c_zero == 0.0
        assert result.reduction > 0.0

    def test_theorem_check(self, small_study):
        report = theorem_inequality_check(small_study)
        assert report.big_k_source == "pilot"
        assert report.pilot_eps == 0.2
        assert [v.eps for v in report.per_eps] == [0.1]
        assert len(report.records) == 8
        pilot_samples = {r.sample for r in report.records if r.eps == 0.2}
        assert pilot_samples == {4, 5, 6, 7}
        assert report.verdict in ("PASS", "FAIL", "SKIPPED")
        assert report.to_dict()["per_eps"][0]["samples"] == 4

    def test_theorem_check_with_fixed_k(self, small_study):
        report = theorem_inequality_check(replace(small_study, big_k=2.0))
        assert report.big_k == 2.0
        assert report.big_k_source == "config"
        pilot = [r for r in report.records if r.sample >= small_study.samples]
        assert pilot and all("error" in r.events for r in pilot)

    def test_zero_k_is_rejected_rather_than_defaulted(self, small_study):
        with pytest.raises(ConfigurationError):
            replace(small_study, big_k=0.0)

    def test_regime_scan(self, small_study):
        power = SigmaSchedule(SigmaKind.POWER, 0.5, 1.0)
        config = replace(small_study, schedules=(power,))
        (summary,) = regime_scan(config)
        assert summary.tag == "C0=0"
        assert summary.eps == (0.2, 0.1)
        assert summary.sigma == pytest.approx((0.1, 0.05))
        assert summary.h_minus1_bounded
        assert summary.error_medians is not None
        assert len(summary.records) == 8
        assert summary.to_dict()["l2_trend"] == "decreasing"


@pytest.mark.unit
class TestRegimeHelpers:
    def test_default_schedules(self):
        kinds = [s.kind for s in default_schedules(0.3)]
        assert kinds == [SigmaKind.POWER, SigmaKind.LOG_INVERSE, SigmaKind.CONSTANT]

    def test_h_minus1_bound_includes_zero_mode(self, homotopy_spec, grid8):
        with_zero = h_minus1_bound(homotopy_spec, grid8, 1.0)
        without = h_minus1_bound(
            replace(homotopy_spec, include_zero_mode=False), grid8, 1.0
        )
        assert with_zero - without == pytest.approx(homotopy_spec.sigma**2)


def desk_study(**overrides):
    """The desk-scale ChAc study: n=64, T=0.5, dt=1e-3, LogInverse σ₀=0.5."""
    config = StudyConfig(
        model=Model.CH_AC_HOMOTOPY,
        n=64,
        T=0.5,
        dt=1e-3,
        eps_grid=(0.2, 0.1, 0.05, 0.025),
        schedule=SigmaSchedule(SigmaKind.LOG_INVERSE, 0.5),
        samples=8,
        master_seed=2024,
    )
    return replace(config, **overrides)


@pytest.mark.slow
@pytest.mark.timeout(3600)
class TestAcceptance:
    """Desk-scale studies with the thresholds the harness is judged by."""

    def test_main_convergence(self):
        """Median sup error drops by at least 1.5 from ε=0.2 to ε=0.025."""
        result = run_convergence_study(desk_study(), workers=2)
        assert result.reduction >= 1.5

    def test_deterministic_singular_limit(self):
        """With σ ≡ 0 and C₀ = 0 the error halves when ε halves (±30%)."""
        config = desk_study(
            schedule=SigmaSchedule.constant(0.0), c_zero=0.0, samples=1
        )
        errors = run_convergence_study(config).median_errors
        ratios = [a / b for a, b in zip(errors, errors[1:])]
        assert all(1.4 <= r <= 2.6 for r in ratios), ratios

    def test_theorem_inequality(self):
        """Calibrated K, held-out seeds, ε ∈ {0.1, 0.05}, M=32 per side."""
        config = desk_study(eps_grid=(0.2, 0.1, 0.05), samples=32)
        report = theorem_inequality_check(config, workers=2)
        assert [v.eps for v in report.per_eps] == [0.1, 0.05]
        assert report.verdict == "PASS"

    def test_regime_scan(self):
        """Constant σ: L² grows, H^{-1} bounded; Power(1): C₀ = 0, error falls."""
        constant = SigmaSchedule.constant(0.5)
        power = SigmaSchedule(SigmaKind.POWER, 0.5, 1.0)
        config = desk_study(schedule=constant, schedules=(constant, power))
        by_kind = {s.schedule.kind: s for s in regime_scan(config, workers=2)}
        flat = by_kind[SigmaKind.CONSTANT]
        assert flat.tag == "C0 divergent"
        assert flat.l2_trend == "increasing"
        assert flat.h_minus1_bounded
        assert flat.mc_consistent
        fast = by_kind[SigmaKind.POWER]
        assert fast.tag == "C0=0"
        assert fast.error_decreasing

    def test_wick_and_cube_decay(self):
        """Wick square (grid- and C₀-centered) and cube in L²H^{-1} fall along ε."""
        schedule = SigmaSchedule(SigmaKind.LOG_INVERSE, 0.5)
        config = desk_study(samples=32)
        c_zero = c_zero_for(Model.CH_AC_HOMOTOPY, schedule, AUTO)
        specs = [config.spec(eps, c_zero) for eps in config.eps_grid]
        stats = wick_convergence_study(
            specs, n=64, T=0.5, steps=100, samples=32, master_seed=11, workers=2
        )
        for name in ("centered_grid", "centered_c0", "cube"):
            means = [getattr(s, name).mean for s in stats]
            errs = [getattr(s, name).stderr for s in stats]
            assert means[-1] < means[0], name
            for i in range(len(means) - 1):
                assert means[i + 1] < means[i] + errs[i] + errs[i + 1], name
        assert all(s.exact_mean_square_T > 0 for s in stats)
