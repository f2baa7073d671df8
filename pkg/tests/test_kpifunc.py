import math

import pytest

from functions.errors import SimulationError
from functions.kpifunc import (
    ExperimentSpec,
    KpiReport,
    KpiRow,
    ScenarioResult,
    compare,
    iter_rows,
    jitter,
    new_result,
    ratio,
    recommend,
    run_download_experiment,
    run_experiment,
    run_jitter_experiment,
    run_video_experiment,
    run_webpage_experiment,
    summary_rows,
)
from functions.scenario_schema import build_scenario


def _result(label, stack, rows_by_kind):
    res = ScenarioResult(label=label, stack=stack, fingerprint="f" * 16, seed=1, mode="paper-calibration")
    for kind, rows in rows_by_kind.items():
        res.experiments[kind] = [KpiRow(i, m) for i, m in enumerate(rows)]
    return res


def _pair():
    nr = _result("5G-NTN", "ntn5g", {
        "jitter": [{"jitter_ms": 4.0}, {"jitter_ms": 4.2}],
        "webpage": [{"ttfb_s": 1.30, "total_s": 6.0}, {"ttfb_s": 1.32, "total_s": 6.2}],
        "download": [{"throughput_kBps": 608}, {"throughput_kBps": 600}],
    })
    dvb = _result("DVB-S2/RCS2", "dvbs2rcs2", {
        "jitter": [{"jitter_ms": 12.0}, {"jitter_ms": 12.6}],
        "webpage": [{"ttfb_s": 1.40, "total_s": 13.0}, {"ttfb_s": 1.38, "total_s": 13.2}],
        "download": [{"throughput_kBps": 274}, {"throughput_kBps": 270}],
    })
    return nr, dvb


def test_jitter_of_regular_series():
    assert jitter([520_000, 524_000, 528_000]) == pytest.approx(4.0)
    assert jitter([520_000, 530_000, 520_000]) == pytest.approx(10.0)


def test_jitter_needs_two_samples():
    with pytest.raises(ValueError):
        jitter([520_000])


def test_ratio_rounds_and_handles_zero():
    assert ratio(13.60, 4.15) == 3.28
    assert ratio(608, 274) == 2.22
    assert ratio(1.0, 0) is None


def test_kpi_row_rounds_to_report_precision():
    row = KpiRow(0, {"throughput_kBps": 240.6, "jitter_ms": 4.1267, "ramp_s": 1.234})
    assert row.metrics == {"throughput_kBps": 241.0, "jitter_ms": 4.13, "ramp_s": 1.23}


@pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
def test_kpi_row_rejects_bad_values(bad):
    with pytest.raises(ValueError):
        KpiRow(0, {"jitter_ms": bad})


def test_experiment_spec_validation(nr_scenario):
    with pytest.raises(ValueError):
        ExperimentSpec("ping")
    with pytest.raises(ValueError):
        ExperimentSpec("jitter", repetitions=0)
    spec = ExperimentSpec.for_scenario("video", nr_scenario)
    assert spec.payload_bytes == 33_500_000
    assert spec.repetitions == 5
    assert ExperimentSpec.for_scenario("jitter", nr_scenario, 2).extra["count"] == 100


def test_ratio_columns_follow_orientation():
    nr, dvb = _pair()
    report = compare(nr, dvb)
    cols = {c.kind: c for c in report.ratios}
    assert cols["jitter"].orientation == "dvb/nr"
    assert cols["jitter"].values == (3.0, 3.0)
    assert cols["download"].orientation == "nr/dvb"
    assert cols["download"].values == (2.22, 2.22)
    assert cols["download"].mean == 2.22
    assert "video" not in cols


def test_compare_swaps_reversed_pair():
    nr, dvb = _pair()
    report = compare(dvb, nr)
    assert [s.stack for s in report.scenarios] == ["ntn5g", "dvbs2rcs2"]


def test_compare_rejects_uneven_repetitions():
    nr, dvb = _pair()
    dvb.experiments["jitter"].pop()
    with pytest.raises(ValueError):
        compare(nr, dvb)


def test_identical_results_give_unit_ratios():
    nr, _ = _pair()
    twin = _result("twin", "ntn5g", {k: [r.metrics for r in rows] for k, rows in nr.experiments.items()})
    report = compare(nr, twin)
    assert all(v == 1.0 for col in report.ratios for v in col.values)


def test_zero_denominator_is_undefined():
    nr = _result("a", "ntn5g", {"download": [{"throughput_kBps": 100}]})
    stalled = _result("b", "dvbs2rcs2", {"download": [{"throughput_kBps": 0}]})
    col = compare(nr, stalled).ratios[0]
    assert col.values == (None,)
    assert col.mean is None


def test_recommendations():
    nr, dvb = _pair()
    recs = {r.app_class: r for r in recommend(compare(nr, dvb))}
    assert recs["jitter-sensitive (voice, gaming)"].suited == ("5G-NTN",)
    assert recs["sustained download"].suited == ("5G-NTN",)
    assert recs["light webpage"].suited == ("5G-NTN", "DVB-S2/RCS2")
    assert "video streaming startup" not in recs


def test_recommend_needs_pair():
    nr, _ = _pair()
    with pytest.raises(ValueError):
        recommend(KpiReport(scenarios=[nr]))
    assert KpiReport(scenarios=[nr]).ratios == []


def test_summary_and_iter_rows():
    nr, dvb = _pair()
    report = compare(nr, dvb)
    rows = summary_rows(report)
    assert {"scenario": "5G-NTN", "experiment": "jitter", "metric": "jitter_ms", "mean": 4.1} in rows
    assert len(list(iter_rows(report))) == 12


def _ideal(**extra):
    data = {"framing": False, "nr.noise_ms": 0, "workload.webpage_bytes": 10_000, "workload.video_buffer_bytes": 50_000}
    data.update(extra)
    return build_scenario(data)


def test_jitter_experiment_on_noise_free_path():
    scenario = _ideal()
    row = run_jitter_experiment(ExperimentSpec("jitter", 1, 84, {"count": 10, "interval_ms": 1000.0}), scenario)
    assert row.metrics["jitter_ms"] == 0.0
    assert row.metrics["rtt_min_ms"] == row.metrics["rtt_max_ms"] == 520.0


def test_jitter_experiment_replays(nr_scenario):
    spec = ExperimentSpec("jitter", 1, 84, {"count": 10, "interval_ms": 1000.0})
    a = run_jitter_experiment(spec, nr_scenario, trace=True)
    b = run_jitter_experiment(spec, nr_scenario, trace=True)
    c = run_jitter_experiment(spec, nr_scenario, run_index=1, trace=True)
    assert a.trace_hash == b.trace_hash
    assert a.metrics == b.metrics
    assert c.trace_hash != a.trace_hash


def test_webpage_ttfb_is_two_rtts_on_ideal_path():
    scenario = _ideal()
    row = run_webpage_experiment(ExperimentSpec.for_scenario("webpage", scenario, 1), scenario)
    assert row.metrics["connect_s"] == 0.52
    assert row.metrics["ttfb_s"] == 1.04
    assert row.metrics["start_transfer_s"] == 1.04


def test_video_ttff_is_buffer_completion():
    scenario = _ideal()
    row = run_video_experiment(ExperimentSpec.for_scenario("video", scenario, 1), scenario)
    assert row.metrics["ttff_s"] == row.metrics["total_s"]
    assert row.metrics["ttff_s"] > row.metrics["start_transfer_s"]


@pytest.mark.parametrize("stack,bound", [("ntn5g", 85.625), ("dvbs2rcs2", 248.457)])
def test_download_stays_under_capacity(stack, bound):
    scenario = build_scenario({"stack": stack, "workload.download_bytes": 400_000})
    row = run_download_experiment(ExperimentSpec.for_scenario("download", scenario, 1), scenario)
    assert 0 < row.metrics["throughput_kBps"] <= bound + 0.5
    assert row.metrics["ramp_s"] >= 0


def test_run_experiment_reports_each_row():
    scenario = _ideal()
    seen = []
    rows = run_experiment(
        ExperimentSpec("jitter", 3, 84, {"count": 5, "interval_ms": 500.0}), scenario,
        on_row=lambda label, kind, row: seen.append((label, kind, row.run_index)),
    )
    assert [r.run_index for r in rows] == [0, 1, 2]
    assert seen == [("5G-NTN", "jitter", 0), ("5G-NTN", "jitter", 1), ("5G-NTN", "jitter", 2)]


def test_trace_file_for_first_run(tmp_path):
    scenario = _ideal()
    out = tmp_path / "trace.csv"
    run_experiment(ExperimentSpec("jitter", 2, 84, {"count": 3, "interval_ms": 500.0}), scenario, trace_to=out)
    assert out.read_text(encoding="utf-8").startswith("time_us,seq,kind,detail\n")


def test_new_result_carries_fingerprint(nr_scenario):
    res = new_result(nr_scenario)
    assert res.label == "5G-NTN"
    assert len(res.fingerprint) == 16


def test_jitter_experiment_with_too_few_replies_is_simulation_error():
    scenario = _ideal(loss_rate=0.99)
    with pytest.raises(SimulationError):
        run_jitter_experiment(ExperimentSpec("jitter", 1, 84, {"count": 3, "interval_ms": 500.0}), scenario)
