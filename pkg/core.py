"""satbench 核心逻辑（与 CLI 解耦）

目标：
- CLI 与测试共用同一组服务函数
- 此处不解析 argv、不打印、不读取墙钟时间
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import config
from functions.channelfunc import (
    check_decodable,
    ecef_granules,
    is_decodable,
    koffset_slots,
    link_snr,
    nominal_bandwidth_nr,
    occupied_bandwidth_dvb,
    ta_common_granules,
)
from functions.dvbfunc import capacity_bound_kBps as dvb_bound_kBps, info_rate_bps, make_bbframe
from functions.kpifunc import EXPERIMENTS, ExperimentSpec, KpiReport, KpiRow, ScenarioResult, compare, new_result, run_experiment
from functions.ntnfunc import capacity_bound_kBps as nr_bound_kBps, slot_capacity_bits
from functions.scenario_schema import ScenarioConfig, fingerprint, parse_scenario

logger = logging.getLogger(__name__)

RowCallback = Callable[[str, str, KpiRow], None]


# =========================
# 场景加载
# =========================
def load_scenario(path: str | Path, seed: Optional[int] = None, mode: Optional[str] = None) -> ScenarioConfig:
    """Parse a scenario file and apply command-line overrides (seed, mode)."""
    scenario = parse_scenario(path)
    return apply_overrides(scenario, seed=seed, mode=mode)


def apply_overrides(scenario: ScenarioConfig, seed: Optional[int] = None, mode: Optional[str] = None) -> ScenarioConfig:
    update: Dict[str, object] = {}
    if seed is not None:
        update["seed"] = int(seed)
    if mode is not None:
        if mode not in ("capacity-true", "paper-calibration"):
            raise ValueError(f"unknown mode: {mode}")
        update["mode"] = mode
    if update:
        scenario = scenario.model_copy(update=update)
    _warn_ignored_overrides(scenario)
    return scenario


def _warn_ignored_overrides(scenario: ScenarioConfig) -> None:
    if scenario.mode != "capacity-true":
        return
    block = scenario.nr if scenario.is_nr else scenario.dvb
    if block.phy_rate_override is not None:
        logger.warning(
            "[run] %s: phy_rate_override=%s ignored in capacity-true mode",
            scenario.label, block.phy_rate_override,
        )


def resolve_experiments(name: str) -> Tuple[str, ...]:
    if name == "all":
        return EXPERIMENTS
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; expected one of {', '.join(EXPERIMENTS)} or all")
    return (name,)


# =========================
# 实验运行
# =========================
def run_scenario(
    scenario: ScenarioConfig,
    kinds: Sequence[str] = EXPERIMENTS,
    repetitions: Optional[int] = None,
    trace_to: Optional[Path] = None,
    on_row: Optional[RowCallback] = None,
) -> ScenarioResult:
    """Run the requested experiments on one scenario, sequentially.

    trace_to receives the event trace of run 0 of the first experiment.
    """
    check_decodable(link_snr(scenario.link_budget()), scenario.scheme())
    result = new_result(scenario)
    for i, kind in enumerate(kinds):
        spec = ExperimentSpec.for_scenario(kind, scenario, repetitions)
        logger.info("[run] %s: %s x%d", scenario.label, kind, spec.repetitions)
        result.experiments[kind] = run_experiment(
            spec, scenario, trace_to=trace_to if i == 0 else None, on_row=on_row,
        )
    return result


def run_experiments(
    scenarios: Sequence[ScenarioConfig],
    kinds: Sequence[str] = EXPERIMENTS,
    repetitions: Optional[int] = None,
    max_workers: int = 2,
    trace_to: Optional[Path] = None,
    on_row: Optional[RowCallback] = None,
) -> List[ScenarioResult]:
    """One worker per scenario; instances share nothing, results keep input order."""

    def _job(idx: int) -> ScenarioResult:
        return run_scenario(
            scenarios[idx], kinds, repetitions,
            trace_to=trace_to if idx == 0 else None, on_row=on_row,
        )

    if len(scenarios) <= 1 or max_workers <= 1:
        return [_job(i) for i in range(len(scenarios))]
    with ThreadPoolExecutor(max_workers=max_workers) as ex:
        futs = [ex.submit(_job, i) for i in range(len(scenarios))]
        return [f.result() for f in futs]


def single_report(result: ScenarioResult) -> KpiReport:
    return KpiReport(scenarios=[result])


def compare_scenarios(
    scenario_a: ScenarioConfig,
    scenario_b: ScenarioConfig,
    kinds: Sequence[str] = EXPERIMENTS,
    repetitions: Optional[int] = None,
    trace_to: Optional[Path] = None,
    on_row: Optional[RowCallback] = None,
) -> KpiReport:
    """Run both scenarios in parallel and pair them (5G side first)."""
    if scenario_a.label == scenario_b.label:
        scenario_a = scenario_a.model_copy(update={"name": f"{scenario_a.label} (a)"})
        scenario_b = scenario_b.model_copy(update={"name": f"{scenario_b.label} (b)"})
    res_a, res_b = run_experiments([scenario_a, scenario_b], kinds, repetitions, trace_to=trace_to, on_row=on_row)
    return compare(res_a, res_b)


# =========================
# 静态参数列表
# =========================
def params_listing(scenario: ScenarioConfig) -> List[Tuple[str, object]]:
    """Derived static parameters as (key, value) pairs, in display order."""
    out: List[Tuple[str, object]] = [
        ("scenario", scenario.label),
        ("stack", scenario.stack),
        ("mode", scenario.mode),
        ("fingerprint", fingerprint(scenario)),
        ("link.one_way_delay_us", scenario.one_way_delay_us),
        ("link.rtt_us", 2 * scenario.one_way_delay_us),
    ]
    budget = scenario.link_budget()
    scheme = scenario.scheme()
    snr = link_snr(budget)
    out += [
        ("budget.clear_sky_db", budget.clear_sky_snr),
        ("budget.attenuation_db", budget.attenuation),
        ("budget.link_snr_db", snr),
        ("scheme.label", scheme.label),
        ("scheme.modulation_order", scheme.modulation_order),
        ("scheme.code_rate", scheme.code_rate),
        ("scheme.spectral_efficiency", round(scheme.spectral_efficiency, 4)),
        ("scheme.decode_threshold_db", scheme.decode_threshold_snr),
        ("scheme.decodable", is_decodable(snr, scheme)),
    ]
    if scenario.is_nr:
        out += _nr_params(scenario)
    else:
        out += _dvb_params(scenario)
    return out


def _nr_params(scenario: ScenarioConfig) -> List[Tuple[str, object]]:
    nr = scenario.nr
    carrier = scenario.nr_carrier()
    ta_exact = ta_common_granules(scenario.one_way_delay_us)
    ecef = ecef_granules(config.GEO_ALTITUDE_M)
    override = scenario.nr_rate_override()
    bits = slot_capacity_bits(scenario.nr_scheme(), carrier, override)
    true_bits = slot_capacity_bits(scenario.nr_scheme(), carrier)
    return [
        ("nr.nominal_bandwidth_hz", nominal_bandwidth_nr(nr.n_prb, carrier.scs)),
        ("nr.slot_duration_us", carrier.slot_duration),
        ("nr.ta_common_exact", ta_exact),
        ("nr.ta_common_published", config.TA_COMMON_PUBLISHED),
        ("nr.ta_common_discrepancy", ta_exact != config.TA_COMMON_PUBLISHED),
        ("nr.koffset_slots", scenario.koffset()),
        ("nr.koffset_auto", koffset_slots(2 * scenario.one_way_delay_us, carrier.slot_duration)),
        ("nr.ecef_granules", ecef),
        ("nr.ecef_published", config.ECEF_PUBLISHED),
        ("nr.sr_period_slots", nr.sr_period_slots),
        ("nr.slot_capacity_bits", true_bits),
        ("nr.capacity_bound_kBps", round(nr_bound_kBps(true_bits, carrier.slot_duration), 3)),
        ("nr.phy_rate_override_bps", override if override is not None else "none"),
        ("nr.effective_slot_bits", bits),
        ("nr.effective_bound_kBps", round(nr_bound_kBps(bits, carrier.slot_duration), 3)),
    ]


def _dvb_params(scenario: ScenarioConfig) -> List[Tuple[str, object]]:
    dvb = scenario.dvb
    carrier = scenario.dvb_carrier()
    true_frame = make_bbframe(scenario.fecframe_bits, scenario.dvb_scheme(), carrier)
    frame = make_bbframe(scenario.fecframe_bits, scenario.dvb_scheme(), carrier, scenario.dvb_rate_override())
    override = scenario.dvb_rate_override()
    return [
        ("dvb.occupied_bandwidth_hz", occupied_bandwidth_dvb(dvb.symbol_rate, dvb.roll_off)),
        ("dvb.fecframe_bits", scenario.fecframe_bits),
        ("dvb.bbframe_info_bits", true_frame.payload_capacity_bits),
        ("dvb.bbframe_airtime_us", true_frame.airtime),
        ("dvb.info_rate_bps", round(info_rate_bps(true_frame), 1)),
        ("dvb.capacity_bound_kBps", round(dvb_bound_kBps(true_frame), 3)),
        ("dvb.phy_rate_override_bps", override if override is not None else "none"),
        ("dvb.effective_airtime_us", frame.airtime),
        ("dvb.effective_bound_kBps", round(dvb_bound_kBps(frame), 3)),
        ("dvb.superframe_us", int(round(dvb.superframe_ms * 1000))),
        ("dvb.terminal_slot_offset_us", int(round(dvb.terminal_slot_offset_ms * 1000))),
        ("dvb.standing_bytes", dvb.standing_bytes),
        ("dvb.grant_exchange", dvb.grant_exchange),
        ("dvb.assembly_timer_us", int(round(dvb.assembly_timer_ms * 1000))),
    ]


def render_params(listing: Sequence[Tuple[str, object]]) -> str:
    lines = []
    for key, value in listing:
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float) and value.is_integer():
            value = int(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
