import orjson
import pandas as pd
import pytest

from functions.errors import ReportWriteError
from functions.kpifunc import KpiReport, KpiRow, ScenarioResult, compare
from functions.reportfunc import experiment_table, fmt_value, render_json, render_text, runs_frame, write_report


def _res(label, stack, jitters, throughputs):
    res = ScenarioResult(label=label, stack=stack, fingerprint="0123456789abcdef", seed=1, mode="paper-calibration")
    res.experiments["jitter"] = [KpiRow(i, {"jitter_ms": j}, trace_hash="h" * 8) for i, j in enumerate(jitters)]
    res.experiments["download"] = [KpiRow(i, {"throughput_kBps": t}) for i, t in enumerate(throughputs)]
    return res


@pytest.fixture
def compared():
    nr = _res("5G-NTN", "ntn5g", [4.0, 4.2], [608, 600])
    dvb = _res("DVB-S2/RCS2", "dvbs2rcs2", [13.6, 12.6], [274, 270])
    return compare(nr, dvb)


def test_fmt_value():
    assert fmt_value("jitter_ms", 4.1) == "4.10"
    assert fmt_value("throughput_kBps", 608.0) == "608"
    assert fmt_value("ratio", None) == "n/a"


def test_experiment_table_has_ratio_and_mean(compared):
    text = experiment_table(compared, "jitter").get_string()
    assert "DVB / 5G Ratio" in text
    assert "Mean" in text
    assert "3.40" in text  # 13.6 / 4.0
    dl = experiment_table(compared, "download").get_string()
    assert "5G / DVB Ratio" in dl
    assert experiment_table(compared, "video") is None


def test_single_scenario_table_has_no_ratio():
    report = KpiReport(scenarios=[_res("5G-NTN", "ntn5g", [4.0], [600])])
    text = render_text(report)
    assert "Ratio" not in text
    assert "Stack recommendation" not in text
    assert "fingerprint=0123456789abcdef" in text


def test_render_text_lists_recommendations(compared):
    text = render_text(compared)
    assert "Stack recommendation per application class" in text
    assert "sustained download" in text


def test_runs_frame_shape(compared):
    frame = runs_frame(compared)
    assert list(frame.columns) == ["scenario", "run", "metric", "value"]
    assert len(frame) == 8
    assert set(frame["metric"]) == {"jitter.jitter_ms", "download.throughput_kBps"}


def test_json_report_contents(compared):
    data = orjson.loads(render_json(compared))
    assert data["rng_algorithm"]
    assert [s["stack"] for s in data["scenarios"]] == ["ntn5g", "dvbs2rcs2"]
    ratios = {r["experiment"]: r for r in data["ratios"]}
    assert ratios["download"]["values"] == [2.22, 2.22]
    assert data["scenarios"][0]["experiments"]["jitter"][0]["trace_hash"] == "h" * 8
    assert "trace_hash" not in data["scenarios"][0]["experiments"]["download"][0]


def test_write_report_all_formats(tmp_path, compared):
    written = write_report(compared, tmp_path / "out")
    names = sorted(p.name for p in written)
    assert names == ["kpi_download.txt", "kpi_jitter.txt", "kpi_report.json", "kpi_runs.csv", "kpi_summary.txt"]
    csv = pd.read_csv(tmp_path / "out" / "kpi_runs.csv")
    assert len(csv) == 8


def test_write_report_selected_format(tmp_path, compared):
    written = write_report(compared, tmp_path, ["csv"])
    assert [p.name for p in written] == ["kpi_runs.csv"]
    with pytest.raises(ValueError):
        write_report(compared, tmp_path, ["xml"])


def test_write_failure_is_report_error(tmp_path, compared):
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(ReportWriteError):
        write_report(compared, blocker / "sub")
