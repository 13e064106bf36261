"""Step counters, summary rounding, and trace replay."""

import pytest

from beambatch import CostParams, MetricsReport, round_half_up

PARAMS = CostParams(1.0, 1.0)


class TestRecordStep:
    def test_single_step(self):
        report = MetricsReport.new()
        report.record_step(10, 4, PARAMS)
        assert report.timesteps == 1
        assert report.candidate_expansions == 10
        assert report.simulated_cost == 10 * (1 + 4)

    def test_zero_expansion_step_still_counts(self):
        report = MetricsReport.new()
        report.record_step(0, 1, PARAMS)
        assert report.timesteps == 1
        assert report.candidate_expansions == 0
        assert report.simulated_cost == 0.0

    def test_counters_never_decrease(self):
        report = MetricsReport.new()
        seen = []
        for expansions in (3, 0, 7, 2):
            report.record_step(expansions, 2, PARAMS)
            seen.append(
                (report.timesteps, report.candidate_expansions, report.simulated_cost)
            )
        assert seen == sorted(seen)


class TestSummaryFormatting:
    @pytest.mark.parametrize(
        "expansions,steps,want",
        [
            (5071, 126, 40.2),
            (14154, 248, 57.1),
            (57550, 1469, 39.2),
            (100, 100, 1.0),
        ],
    )
    def test_one_decimal_round_half_up(self, expansions, steps, want):
        report = MetricsReport(timesteps=steps, candidate_expansions=expansions)
        assert report.summarize()["expansions_per_step"] == want

    def test_round_half_up_at_the_boundary(self):
        assert round_half_up(0.25, 1) == 0.3
        assert round_half_up(0.35, 1) == 0.4
        assert round_half_up(2.449, 1) == 2.4

    def test_zero_timesteps_flagged(self):
        summary = MetricsReport.new().summarize()
        assert summary["expansions_per_step"] == 0.0
        assert summary["undefined_ratio"] is True

    def test_summary_echoes_all_counters(self):
        report = MetricsReport.new()
        report.record_step(4, 3, PARAMS)
        report.record_step(6, 5, PARAMS)
        summary = report.summarize()
        assert summary["timesteps"] == 2
        assert summary["candidate_expansions"] == 10
        assert summary["simulated_cost"] == 4 * 4 + 6 * 6
        assert "undefined_ratio" not in summary


class TestTrace:
    def test_replaying_the_trace_reproduces_totals(self):
        report = MetricsReport.new(trace=True)
        steps = [(5, 2), (0, 1), (8, 7), (3, 3)]
        for expansions, length in steps:
            report.record_step(expansions, length, PARAMS)
        assert report.timesteps == len(report.per_step_trace)
        assert report.candidate_expansions == sum(r.expansions for r in report.per_step_trace)
        assert report.simulated_cost == pytest.approx(
            sum(r.cost for r in report.per_step_trace)
        )
        assert [r.timestep for r in report.per_step_trace] == [1, 2, 3, 4]

    def test_trace_disabled_by_default(self):
        report = MetricsReport.new()
        report.record_step(1, 1, PARAMS)
        assert report.per_step_trace is None
