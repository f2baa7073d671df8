"""Property suites behind the `selftest` verb.

Each suite returns a SuiteResult instead of raising, so the CLI can report
all of them. quick=True shrinks sample sizes for a fast smoke pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from functions.dvbfunc import gse_encapsulate, gse_reassemble
from functions.framefunc import Packet, PacketQueue
from functions.kpifunc import ExperimentSpec, jitter, run_jitter_experiment
from functions.linkfunc import build_access_path
from functions.scenario_schema import ScenarioConfig, build_scenario
from functions.simfunc import Simulator
from functions.transportfunc import EchoFlow, ReliableFlow, connect, ramp_time, run_echo, transfer

logger = logging.getLogger(__name__)

SUPERFRAME_SWEEP_MS = (10.0, 26.5, 50.0, 100.0)
NOISE_LAW_J_MS = (1.0, 5.0, 20.0)
# mean |dRTT| / J for independent uniform noise on [0, J]
NOISE_LAW = {"client": 1.0 / 3.0, "both": 7.0 / 15.0}
RAMP_PHASES = 8


@dataclass(frozen=True)
class SuiteResult:
    key: str
    name: str
    passed: bool
    detail: str


def _result(key: str, name: str, failures: List[str], ok_detail: str) -> SuiteResult:
    if failures:
        return SuiteResult(key, name, False, "; ".join(failures[:5]))
    return SuiteResult(key, name, True, ok_detail)


# ----- (a) -----
def random_scenarios(n: int, seed: int = 7) -> List[ScenarioConfig]:
    gen = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        stack = "ntn5g" if gen.random() < 0.5 else "dvbs2rcs2"
        data: Dict[str, object] = {
            "stack": stack,
            "seed": int(gen.integers(0, 2**31)),
            "one_way_delay_ms": float(np.round(gen.uniform(5.0, 300.0), 3)),
            "noise_scope": "both" if gen.random() < 0.5 else "client",
            "mode": "paper-calibration" if gen.random() < 0.5 else "capacity-true",
        }
        if stack == "ntn5g":
            data["nr.noise_ms"] = float(np.round(gen.uniform(0.0, 20.0), 2))
        else:
            data["dvb.noise_ms"] = float(np.round(gen.uniform(0.0, 5.0), 2))
            data["dvb.superframe_ms"] = float(np.round(gen.uniform(5.0, 60.0), 1))
        out.append(build_scenario(data, source="<random>"))
    return out


def suite_replay_determinism(quick: bool = False) -> SuiteResult:
    n, probes = (4, 10) if quick else (20, 20)
    failures = []
    for i, scenario in enumerate(random_scenarios(n)):
        spec = ExperimentSpec("jitter", 1, 84, {"count": probes, "interval_ms": 1000.0})
        a = run_jitter_experiment(spec, scenario, trace=True)
        b = run_jitter_experiment(spec, scenario, trace=True)
        if a.trace_hash != b.trace_hash or a.metrics != b.metrics:
            failures.append(f"scenario {i} ({scenario.stack}, seed={scenario.seed}) replay differs")
    return _result("a", "replay determinism", failures, f"{n} scenarios, identical trace hashes")


# ----- (b) -----
def suite_gse_roundtrip(quick: bool = False, seed: int = 11) -> SuiteResult:
    total = 1_000 if quick else 10_000
    batch = 100
    gen = np.random.default_rng(seed)
    failures = []
    pid = 0
    for _ in range(total // batch):
        queue = PacketQueue()
        sent: Dict[int, bytes] = {}
        for _ in range(batch):
            pid += 1
            size = int(gen.integers(1, 65_537))
            data = gen.bytes(size)
            sent[pid] = data
            queue.push(Packet(packet_id=pid, flow="gse", size=size, created_at=0, data=data), 0)
        pdus = []
        while queue:
            pdus.extend(gse_encapsulate(queue, 12_880))
        got = gse_reassemble(pdus)
        if got != sent:
            bad = sorted(k for k in sent if got.get(k) != sent[k])
            failures.append(f"packets {bad[:3]} not byte-identical")
    return _result("b", "GSE fragment/reassemble identity", failures, f"{total} random packets")


# ----- (c) -----
def suite_rtt_lower_bound(quick: bool = False) -> SuiteResult:
    probes = 20 if quick else 100
    failures = []
    for stack in ("ntn5g", "dvbs2rcs2"):
        for mode in ("capacity-true", "paper-calibration"):
            scenario = build_scenario({"stack": stack, "mode": mode})
            sim = Simulator(seed=scenario.seed)
            path = build_access_path(sim, scenario)
            samples = run_echo(sim, path, EchoFlow(count=probes))
            floor = 2 * scenario.one_way_delay_us
            low = [s for s in samples if s < floor]
            if low or len(samples) != probes:
                failures.append(f"{stack}/{mode}: {len(low)} samples below {floor}us, {len(samples)}/{probes} returned")
    return _result("c", "RTT >= 2 x one-way delay", failures, f"{probes} probes per stack and mode")


# ----- (d) -----
def suite_constant_jitter(quick: bool = False) -> SuiteResult:
    failures = []
    for n in (2, 3, 100):
        for value in (0, 520_000, 999_999):
            if jitter([value] * n) != 0.0:
                failures.append(f"jitter of {n} x {value} is not 0")
    return _result("d", "jitter(constant) == 0", failures, "constant series give 0 ms")


# ----- (e) -----
def noise_law_jitter(
    j_ms: float, scope: str, probes: int, stack: str = "ntn5g", seed: int = 3, interval_ms: float = 100.0,
) -> float:
    """Measured jitter (ms) with framing disabled and noise amplitude j_ms.

    interval_ms must exceed j_ms so host FIFO order never couples probes.
    """
    block = "nr" if stack == "ntn5g" else "dvb"
    scenario = build_scenario({
        "stack": stack, "seed": seed, "framing": False, "noise_scope": scope, f"{block}.noise_ms": j_ms,
        "max_sim_time_s": probes * interval_ms / 1000.0 + 10.0,
    })
    sim = Simulator(seed=scenario.seed)
    path = build_access_path(sim, scenario)
    flow = EchoFlow(count=probes, interval=int(interval_ms * 1000))
    return jitter(run_echo(sim, path, flow))


def suite_noise_law(quick: bool = False) -> SuiteResult:
    probes = 5_000 if quick else 20_000
    failures = []
    for scope, factor in NOISE_LAW.items():
        for j in NOISE_LAW_J_MS:
            measured = noise_law_jitter(j, scope, probes)
            expected = factor * j
            if abs(measured - expected) > 0.05 * expected:
                failures.append(f"J={j}ms scope={scope}: {measured:.3f}ms vs {expected:.3f}ms")
    return _result("e", "uniform-noise jitter law", failures, f"J/3 (client) and 7J/15 (both) within 5%, {probes} probes")


# ----- (f) -----
def suite_byte_conservation(quick: bool = False) -> SuiteResult:
    sizes = (0, 1, 1_460, 200_000) if quick else (0, 1, 1_460, 1_461, 200_000, 1_000_000)
    failures = []
    for stack in ("ntn5g", "dvbs2rcs2"):
        scenario = build_scenario({"stack": stack, "mode": "paper-calibration"})
        for size in sizes:
            sim = Simulator(seed=scenario.seed)
            path = build_access_path(sim, scenario)
            flow = ReliableFlow(sim, path)
            connect(sim, path, flow)
            tl = transfer(sim, path, flow, size)
            steps = [tl.t_request, tl.t_connected, tl.t_first_byte, tl.t_complete]
            if tl.bytes_total != size:
                failures.append(f"{stack}: {tl.bytes_total} of {size} bytes")
            if steps != sorted(steps):
                failures.append(f"{stack}: timeline not monotone for {size} bytes")
    return _result("f", "byte conservation", failures, f"{len(sizes)} sizes per stack")


# ----- (g) -----
def ramp_sweep(
    size: int,
    superframes_ms: Sequence[float] = SUPERFRAME_SWEEP_MS,
    phases: int = RAMP_PHASES,
    seed: int = 5,
) -> List[Tuple[float, float]]:
    """(superframe_ms, mean ramp_s) for a DVB capacity-true download per superframe period.

    A single run waits for return opportunities at whatever phase its RTT
    lands on, so each period is averaged over start offsets spread evenly
    across one superframe.
    """
    out = []
    for p in superframes_ms:
        scenario = build_scenario({"stack": "dvbs2rcs2", "seed": seed, "dvb.superframe_ms": p})
        period = int(round(p * 1000))
        ramps = []
        for k in range(phases):
            sim = Simulator(seed=scenario.seed)
            path = build_access_path(sim, scenario)
            flow = ReliableFlow(sim, path)
            sim.run_until(k * period // phases)
            connect(sim, path, flow)
            ramps.append(ramp_time(transfer(sim, path, flow, size)))
        out.append((p, float(np.mean(ramps))))
    return out


def suite_ack_delay_monotonicity(quick: bool = False) -> SuiteResult:
    size = 2_000_000 if quick else 4_000_000
    sweep = ramp_sweep(size)
    failures = []
    for (p0, r0), (p1, r1) in zip(sweep, sweep[1:]):
        if r1 < r0:
            failures.append(f"ramp drops from {r0:.2f}s (P={p0}ms) to {r1:.2f}s (P={p1}ms)")
    detail = ", ".join(f"P={p:g}ms:{r:.2f}s" for p, r in sweep)
    return _result("g", "ACK-delay monotonicity", failures, detail)


SUITES: Dict[str, Callable[[bool], SuiteResult]] = {
    "a": suite_replay_determinism,
    "b": suite_gse_roundtrip,
    "c": suite_rtt_lower_bound,
    "d": suite_constant_jitter,
    "e": suite_noise_law,
    "f": suite_byte_conservation,
    "g": suite_ack_delay_monotonicity,
}


def run_selftest(quick: bool = False, only: Optional[Sequence[str]] = None) -> List[SuiteResult]:
    keys = list(only) if only else list(SUITES)
    unknown = [k for k in keys if k not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s): {unknown}; expected {', '.join(SUITES)}")
    results = []
    for key in keys:
        try:
            res = SUITES[key](quick)
        except Exception as e:
            res = SuiteResult(key, SUITES[key].__name__, False, f"{type(e).__name__}: {e}")
        logger.info("[selftest] (%s) %s: %s", res.key, "PASS" if res.passed else "FAIL", res.detail)
        results.append(res)
    return results
