"""Workloads and KPI reduction.

Each experiment run gets a fresh simulator seeded with seed + run_index and
starts at a random offset inside the first second, so alignment phases
differ between runs. Metrics are stored at report precision; ratio columns
are always recomputed from the stored rows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

import config
from functions.errors import SimulationError
from functions.linkfunc import AccessPath, build_access_path
from functions.scenario_schema import ScenarioConfig, fingerprint
from functions.simfunc import Simulator, draw_uniform
from functions.transportfunc import EchoFlow, FlowTimeline, ReliableFlow, connect, ramp_time, run_echo, throughput, transfer

logger = logging.getLogger(__name__)

EXPERIMENTS = ("jitter", "video", "webpage", "download")

# decimals kept per metric
PRECISION: Dict[str, int] = {
    "jitter_ms": 2,
    "rtt_min_ms": 2,
    "rtt_mean_ms": 2,
    "rtt_max_ms": 2,
    "ttff_s": 2,
    "ttfb_s": 2,
    "connect_s": 2,
    "start_transfer_s": 2,
    "total_s": 2,
    "ramp_s": 2,
    "throughput_kBps": 0,
}

# kind -> (metric, orientation); "dvb/nr" puts the DVB value on top
RATIO_COLUMNS: Dict[str, Tuple[str, str]] = {
    "jitter": ("jitter_ms", "dvb/nr"),
    "video": ("ttff_s", "dvb/nr"),
    "webpage": ("ttfb_s", "dvb/nr"),
    "download": ("throughput_kBps", "nr/dvb"),
}

# application class -> (experiment, metric, higher_is_better)
APPLICATION_CLASSES: Dict[str, Tuple[str, str, bool]] = {
    "jitter-sensitive (voice, gaming)": ("jitter", "jitter_ms", False),
    "video streaming startup": ("video", "ttff_s", False),
    "light webpage": ("webpage", "ttfb_s", False),
    "interactive transfer": ("webpage", "total_s", False),
    "sustained download": ("download", "throughput_kBps", True),
}

UNDEFINED = None


# =========================
# 类型
# =========================
@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    repetitions: int = config.REPETITIONS
    payload_bytes: int = 0
    extra: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENTS:
            raise ValueError(f"unknown experiment: {self.kind!r} (expected one of {', '.join(EXPERIMENTS)})")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.payload_bytes < 0:
            raise ValueError("payload_bytes must be >= 0")

    @classmethod
    def for_scenario(cls, kind: str, scenario: ScenarioConfig, repetitions: Optional[int] = None) -> "ExperimentSpec":
        w = scenario.workload
        reps = repetitions if repetitions is not None else w.repetitions
        if kind == "jitter":
            return cls(kind, reps, w.echo_size, {"count": w.echo_count, "interval_ms": w.echo_interval_ms})
        if kind == "video":
            return cls(kind, reps, w.video_buffer_bytes, {"initial_buffer_bytes": w.video_buffer_bytes})
        if kind == "webpage":
            return cls(kind, reps, w.webpage_bytes, {"server_processing_ms": w.server_processing_ms})
        if kind == "download":
            return cls(kind, reps, w.download_bytes)
        # let __post_init__ name the bad kind
        return cls(kind, reps)


@dataclass
class KpiRow:
    run_index: int
    metrics: Dict[str, float]
    trace_hash: Optional[str] = None

    def __post_init__(self):
        clean: Dict[str, float] = {}
        for name, value in self.metrics.items():
            value = float(value)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"metric {name}={value} must be finite and >= 0")
            clean[name] = round(value, PRECISION.get(name, 3))
        self.metrics = clean


@dataclass
class ScenarioResult:
    label: str
    stack: str
    fingerprint: str
    seed: int
    mode: str
    experiments: Dict[str, List[KpiRow]] = field(default_factory=dict)

    def means(self, kind: str) -> Dict[str, float]:
        rows = self.experiments.get(kind, [])
        if not rows:
            return {}
        names = list(rows[0].metrics)
        return {n: float(np.mean([r.metrics[n] for r in rows])) for n in names}


@dataclass(frozen=True)
class RatioColumn:
    kind: str
    metric: str
    orientation: str
    values: Tuple[Optional[float], ...]

    @property
    def mean(self) -> Optional[float]:
        defined = [v for v in self.values if v is not None]
        if not defined:
            return UNDEFINED
        return round(float(np.mean(defined)), 2)


@dataclass(frozen=True)
class Recommendation:
    app_class: str
    metric: str
    value_nr: float
    value_dvb: float
    suited: Tuple[str, ...]


@dataclass
class KpiReport:
    scenarios: List[ScenarioResult]
    rng_algorithm: str = config.RNG_ALGORITHM_ID

    @property
    def compared(self) -> bool:
        return len(self.scenarios) == 2

    @property
    def ratios(self) -> List[RatioColumn]:
        if not self.compared:
            return []
        nr, dvb = self.scenarios
        out: List[RatioColumn] = []
        for kind in EXPERIMENTS:
            if kind not in nr.experiments or kind not in dvb.experiments:
                continue
            metric, orientation = RATIO_COLUMNS[kind]
            pairs = zip(nr.experiments[kind], dvb.experiments[kind])
            values = []
            for a, b in pairs:
                top, bottom = (b, a) if orientation == "dvb/nr" else (a, b)
                values.append(ratio(top.metrics[metric], bottom.metrics[metric]))
            out.append(RatioColumn(kind, metric, orientation, tuple(values)))
        return out

    @property
    def recommendations(self) -> List[Recommendation]:
        return recommend(self) if self.compared else []


# =========================
# 统计归约
# =========================
def jitter(rtts: Sequence[int]) -> float:
    """Mean absolute difference between consecutive RTT samples, in ms."""
    if len(rtts) < 2:
        raise ValueError(f"jitter needs at least 2 RTT samples, got {len(rtts)}")
    arr = np.asarray(rtts, dtype=np.float64)
    return float(np.mean(np.abs(np.diff(arr)))) / 1000.0


def ratio(top: float, bottom: float) -> Optional[float]:
    if bottom == 0:
        return UNDEFINED
    return round(top / bottom, 2)


# =========================
# 实验运行
# =========================
@dataclass
class _Run:
    sim: Simulator
    path: AccessPath
    start_at: int


def _new_run(scenario: ScenarioConfig, run_index: int, trace: bool, keep_lines: bool) -> _Run:
    sim = Simulator(seed=scenario.seed + run_index, trace=trace, keep_trace_lines=keep_lines)
    path = build_access_path(sim, scenario)
    sim.rng.register("workload.start")
    start_at = int(draw_uniform(sim.rng, "workload.start") * 1_000_000)
    return _Run(sim, path, start_at)


def _finish(run: _Run, run_index: int, metrics: Dict[str, float], trace: bool, trace_to: Optional[Path]) -> KpiRow:
    if trace_to is not None:
        run.sim.dump_trace(trace_to)
        logger.info("[run] event trace written to %s", trace_to)
    return KpiRow(run_index=run_index, metrics=metrics, trace_hash=run.sim.trace_hash() if trace else None)


def _fetch(run: _Run, scenario: ScenarioConfig, size: int, processing_us: int = 0) -> FlowTimeline:
    w = scenario.workload
    run.sim.run_until(run.start_at)
    flow = ReliableFlow(
        run.sim, run.path, name="tcp", mss=w.mss, initial_cwnd=w.initial_cwnd,
        ack_every=w.ack_every, delayed_ack_us=int(round(w.delayed_ack_ms * 1000)),
    )
    connect(run.sim, run.path, flow)
    return transfer(run.sim, run.path, flow, size, processing_us)


def _timeline_metrics(tl: FlowTimeline) -> Dict[str, float]:
    return {
        "connect_s": tl.seconds(tl.t_connected),
        "start_transfer_s": tl.seconds(tl.t_start_transfer),
        "total_s": tl.seconds(tl.t_complete),
    }


def run_jitter_experiment(
    spec: ExperimentSpec, scenario: ScenarioConfig, run_index: int = 0,
    trace: bool = False, trace_to: Optional[Path] = None,
) -> KpiRow:
    _expect(spec, "jitter")
    run = _new_run(scenario, run_index, trace, trace_to is not None)
    flow = EchoFlow(
        count=int(spec.extra.get("count", config.ECHO_COUNT)),
        interval=int(round(spec.extra.get("interval_ms", config.ECHO_INTERVAL_MS) * 1000)),
        probe_size=spec.payload_bytes or config.ECHO_SIZE,
        start_at=run.start_at,
    )
    rtts = run_echo(run.sim, run.path, flow)
    if len(rtts) < 2:
        raise SimulationError(
            f"[run] {scenario.label}: only {len(rtts)} of {flow.count} probes returned, jitter needs 2", run.sim.now,
        )
    arr = np.asarray(rtts, dtype=np.float64) / 1000.0
    metrics = {
        "jitter_ms": jitter(rtts),
        "rtt_min_ms": float(arr.min()),
        "rtt_mean_ms": float(arr.mean()),
        "rtt_max_ms": float(arr.max()),
    }
    return _finish(run, run_index, metrics, trace, trace_to)


def run_video_experiment(
    spec: ExperimentSpec, scenario: ScenarioConfig, run_index: int = 0,
    trace: bool = False, trace_to: Optional[Path] = None,
) -> KpiRow:
    _expect(spec, "video")
    run = _new_run(scenario, run_index, trace, trace_to is not None)
    buffer_bytes = int(spec.extra.get("initial_buffer_bytes", spec.payload_bytes))
    tl = _fetch(run, scenario, buffer_bytes)
    metrics = {"ttff_s": tl.seconds(tl.t_complete), **_timeline_metrics(tl)}
    return _finish(run, run_index, metrics, trace, trace_to)


def run_webpage_experiment(
    spec: ExperimentSpec, scenario: ScenarioConfig, run_index: int = 0,
    trace: bool = False, trace_to: Optional[Path] = None,
) -> KpiRow:
    _expect(spec, "webpage")
    run = _new_run(scenario, run_index, trace, trace_to is not None)
    processing_us = int(round(spec.extra.get("server_processing_ms", 0.0) * 1000))
    tl = _fetch(run, scenario, spec.payload_bytes, processing_us)
    metrics = {"ttfb_s": tl.seconds(tl.t_first_byte), **_timeline_metrics(tl)}
    return _finish(run, run_index, metrics, trace, trace_to)


def run_download_experiment(
    spec: ExperimentSpec, scenario: ScenarioConfig, run_index: int = 0,
    trace: bool = False, trace_to: Optional[Path] = None,
) -> KpiRow:
    _expect(spec, "download")
    run = _new_run(scenario, run_index, trace, trace_to is not None)
    tl = _fetch(run, scenario, spec.payload_bytes)
    metrics = {"throughput_kBps": throughput(tl), "ramp_s": ramp_time(tl), **_timeline_metrics(tl)}
    return _finish(run, run_index, metrics, trace, trace_to)


_RUNNERS = {
    "jitter": run_jitter_experiment,
    "video": run_video_experiment,
    "webpage": run_webpage_experiment,
    "download": run_download_experiment,
}


def _expect(spec: ExperimentSpec, kind: str) -> None:
    if spec.kind != kind:
        raise ValueError(f"expected a {kind} experiment, got {spec.kind}")


def run_experiment(
    spec: ExperimentSpec,
    scenario: ScenarioConfig,
    trace: bool = False,
    trace_to: Optional[Path] = None,
    on_row: Optional[Callable[[str, str, KpiRow], None]] = None,
) -> List[KpiRow]:
    """All repetitions of one experiment; trace_to receives run 0's event trace."""
    runner = _RUNNERS[spec.kind]
    rows = []
    for i in range(spec.repetitions):
        rows.append(runner(spec, scenario, i, trace=trace, trace_to=trace_to if i == 0 else None))
        logger.debug("[run] %s %s run %d: %s", scenario.label, spec.kind, i, rows[-1].metrics)
        if on_row is not None:
            on_row(scenario.label, spec.kind, rows[-1])
    return rows


def new_result(scenario: ScenarioConfig) -> ScenarioResult:
    return ScenarioResult(
        label=scenario.label, stack=scenario.stack, fingerprint=fingerprint(scenario),
        seed=scenario.seed, mode=scenario.mode,
    )


# =========================
# 对比
# =========================
def compare(report_nr: ScenarioResult, report_dvb: ScenarioResult) -> KpiReport:
    """Pair two scenario results; the first takes the 5G side of every ratio.

    A DVB/NR pair given the wrong way round is swapped.
    """
    if report_nr.stack == "dvbs2rcs2" and report_dvb.stack == "ntn5g":
        report_nr, report_dvb = report_dvb, report_nr
    for kind in set(report_nr.experiments) & set(report_dvb.experiments):
        a, b = len(report_nr.experiments[kind]), len(report_dvb.experiments[kind])
        if a != b:
            raise ValueError(f"{kind}: repetitions differ between scenarios ({a} vs {b})")
    return KpiReport(scenarios=[report_nr, report_dvb])


def recommend(report: KpiReport, gap: float = config.COMPARABLE_GAP) -> List[Recommendation]:
    """Per application class, the stack(s) suited by the class metric; both
    when the means are within gap of each other."""
    if not report.compared:
        raise ValueError("recommendations need a compared report")
    nr, dvb = report.scenarios
    out: List[Recommendation] = []
    for app_class, (kind, metric, higher_better) in APPLICATION_CLASSES.items():
        m_nr, m_dvb = nr.means(kind), dvb.means(kind)
        if metric not in m_nr or metric not in m_dvb:
            continue
        a, b = m_nr[metric], m_dvb[metric]
        top = max(a, b)
        if top == 0 or abs(a - b) / top <= gap:
            suited: Tuple[str, ...] = (nr.label, dvb.label)
        elif (a > b) == higher_better:
            suited = (nr.label,)
        else:
            suited = (dvb.label,)
        out.append(Recommendation(app_class, metric, round(a, 2), round(b, 2), suited))
    return out


def summary_rows(report: KpiReport) -> List[Dict[str, object]]:
    """Flat mean rows: one per scenario, experiment and metric."""
    rows: List[Dict[str, object]] = []
    for res in report.scenarios:
        for kind in EXPERIMENTS:
            for metric, mean in res.means(kind).items():
                rows.append({"scenario": res.label, "experiment": kind, "metric": metric, "mean": round(mean, 2)})
    return rows


def iter_rows(report: KpiReport) -> Iterable[Tuple[ScenarioResult, str, KpiRow]]:
    for res in report.scenarios:
        for kind in EXPERIMENTS:
            for row in res.experiments.get(kind, []):
                yield res, kind, row
