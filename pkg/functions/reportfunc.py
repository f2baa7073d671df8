"""KPI report emission: aligned text tables, per-run CSV, structured JSON."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import orjson
import pandas as pd
from prettytable import PrettyTable

from functions.errors import ReportWriteError
from functions.kpifunc import EXPERIMENTS, PRECISION, KpiReport, iter_rows, summary_rows

logger = logging.getLogger(__name__)

FORMATS = ("text", "csv", "json")
UNDEFINED_MARK = "n/a"

_TITLES = {
    "jitter": "Jitter (100 echo probes)",
    "video": "Video time to first frame",
    "webpage": "Webpage load",
    "download": "File download",
}

_UNITS = {
    "jitter_ms": "Jitter (ms)",
    "rtt_min_ms": "RTT min (ms)",
    "rtt_mean_ms": "RTT mean (ms)",
    "rtt_max_ms": "RTT max (ms)",
    "ttff_s": "TTFF (s)",
    "ttfb_s": "TTFB (s)",
    "connect_s": "Connect (s)",
    "start_transfer_s": "Start transfer (s)",
    "total_s": "Total (s)",
    "ramp_s": "Ramp (s)",
    "throughput_kBps": "Throughput (kB/s)",
}

_ORIENTATION_LABEL = {"dvb/nr": "DVB / 5G Ratio", "nr/dvb": "5G / DVB Ratio"}


def fmt_value(metric: str, value: Optional[float]) -> str:
    if value is None:
        return UNDEFINED_MARK
    digits = PRECISION.get(metric, 2)
    return f"{value:.{digits}f}"


# =========================
# 文本
# =========================
def experiment_table(report: KpiReport, kind: str) -> Optional[PrettyTable]:
    results = [r for r in report.scenarios if r.experiments.get(kind)]
    if not results:
        return None
    metrics = list(results[0].experiments[kind][0].metrics)
    ratio_col = next((c for c in report.ratios if c.kind == kind), None)

    table = PrettyTable()
    table.title = _TITLES[kind]
    fields = ["Run"]
    for res in results:
        fields += [f"{res.label} {_UNITS.get(m, m)}" if len(results) > 1 else _UNITS.get(m, m) for m in metrics]
    if ratio_col is not None:
        fields.append(_ORIENTATION_LABEL[ratio_col.orientation])
    table.field_names = fields
    table.align = "r"
    table.align["Run"] = "l"

    n = max(len(res.experiments[kind]) for res in results)
    for i in range(n):
        row: List[str] = [str(i + 1)]
        for res in results:
            rows = res.experiments[kind]
            row += [fmt_value(m, rows[i].metrics.get(m)) if i < len(rows) else "" for m in metrics]
        if ratio_col is not None:
            row.append(fmt_value("ratio", ratio_col.values[i] if i < len(ratio_col.values) else None))
        table.add_row(row)

    mean_row: List[str] = ["Mean"]
    for res in results:
        means = res.means(kind)
        mean_row += [fmt_value(m, means.get(m)) for m in metrics]
    if ratio_col is not None:
        mean_row.append(fmt_value("ratio", ratio_col.mean))
    table.add_row(mean_row)
    return table


def recommendation_table(report: KpiReport) -> Optional[PrettyTable]:
    recs = report.recommendations
    if not recs:
        return None
    nr, dvb = report.scenarios
    table = PrettyTable()
    table.title = "Stack recommendation per application class"
    table.field_names = ["Application class", "Metric", f"{nr.label} mean", f"{dvb.label} mean", "Suited"]
    table.align = "l"
    for r in recs:
        table.add_row([
            r.app_class, _UNITS.get(r.metric, r.metric),
            fmt_value(r.metric, r.value_nr), fmt_value(r.metric, r.value_dvb), " + ".join(r.suited),
        ])
    return table


def render_text(report: KpiReport, kinds: Sequence[str] = EXPERIMENTS, recommendations: bool = True) -> str:
    parts: List[str] = []
    header = [f"rng: {report.rng_algorithm}"]
    for res in report.scenarios:
        header.append(f"scenario: {res.label} stack={res.stack} mode={res.mode} seed={res.seed} fingerprint={res.fingerprint}")
    parts.append("\n".join(header))
    for kind in kinds:
        table = experiment_table(report, kind)
        if table is not None:
            parts.append(table.get_string())
    rec = recommendation_table(report) if recommendations else None
    if rec is not None:
        parts.append(rec.get_string())
    return "\n\n".join(parts) + "\n"


# =========================
# CSV / JSON
# =========================
def runs_frame(report: KpiReport) -> pd.DataFrame:
    """One row per (scenario, run, metric); metric names are prefixed with the experiment."""
    records = []
    for res, kind, row in iter_rows(report):
        for metric, value in row.metrics.items():
            records.append({"scenario": res.label, "run": row.run_index, "metric": f"{kind}.{metric}", "value": value})
    return pd.DataFrame.from_records(records, columns=["scenario", "run", "metric", "value"])


def report_dict(report: KpiReport) -> Dict[str, object]:
    scenarios = []
    for res in report.scenarios:
        experiments = {}
        for kind in EXPERIMENTS:
            rows = res.experiments.get(kind)
            if not rows:
                continue
            experiments[kind] = [
                {"run": r.run_index, "metrics": r.metrics, **({"trace_hash": r.trace_hash} if r.trace_hash else {})}
                for r in rows
            ]
        scenarios.append({
            "label": res.label, "stack": res.stack, "mode": res.mode, "seed": res.seed,
            "fingerprint": res.fingerprint, "experiments": experiments,
        })
    return {
        "rng_algorithm": report.rng_algorithm,
        "scenarios": scenarios,
        "ratios": [
            {"experiment": c.kind, "metric": c.metric, "orientation": c.orientation,
             "values": list(c.values), "mean": c.mean}
            for c in report.ratios
        ],
        "summary": summary_rows(report),
        "recommendations": [
            {"application_class": r.app_class, "metric": r.metric, "nr": r.value_nr,
             "dvb": r.value_dvb, "suited": list(r.suited)}
            for r in report.recommendations
        ],
    }


def render_json(report: KpiReport) -> bytes:
    return orjson.dumps(report_dict(report), option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2)


# =========================
# 写出
# =========================
def write_report(report: KpiReport, out_dir: str | Path, formats: Sequence[str] = FORMATS) -> List[Path]:
    """Write the requested formats under out_dir; returns the written paths."""
    bad = [f for f in formats if f not in FORMATS]
    if bad:
        raise ValueError(f"unknown report format(s): {bad}")
    out = Path(out_dir)
    written: List[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "text" in formats:
            for kind in EXPERIMENTS:
                if any(res.experiments.get(kind) for res in report.scenarios):
                    p = out / f"kpi_{kind}.txt"
                    p.write_text(render_text(report, kinds=(kind,), recommendations=False), encoding="utf-8")
                    written.append(p)
            if report.compared:
                p = out / "kpi_summary.txt"
                p.write_text(render_text(report, kinds=()), encoding="utf-8")
                written.append(p)
        if "csv" in formats:
            p = out / "kpi_runs.csv"
            runs_frame(report).to_csv(p, index=False)
            written.append(p)
        if "json" in formats:
            p = out / "kpi_report.json"
            p.write_bytes(render_json(report))
            written.append(p)
    except OSError as e:
        raise ReportWriteError(f"[report] cannot write to {out}: {e}") from e
    for p in written:
        logger.info("[report] wrote %s", p)
    return written
