"""Static GEO link maths and the propagation element shared by both stacks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Optional

import config
from functions.errors import ConfigError
from functions.framefunc import CarrierFrame
from functions.simfunc import Simulator

logger = logging.getLogger(__name__)

VALID_SCS_HZ = (15_000, 30_000, 60_000)


@dataclass(frozen=True)
class GeoLink:
    one_way_delay: int  # us
    payload_mode: str = "transparent"
    loss_rate: float = 0.0

    def __post_init__(self):
        if self.one_way_delay < 0:
            raise ValueError("one_way_delay must be >= 0")
        if self.payload_mode != "transparent":
            raise ValueError(f"unsupported payload mode: {self.payload_mode}")
        if not 0.0 <= self.loss_rate < 1.0:
            raise ValueError("loss_rate must be in [0, 1)")

    @property
    def rtt(self) -> int:
        return 2 * self.one_way_delay


@dataclass(frozen=True)
class NrCarrier:
    n_prb: int
    scs: int  # Hz

    def __post_init__(self):
        if self.n_prb < 1:
            raise ValueError("n_prb must be >= 1")
        if self.scs not in VALID_SCS_HZ:
            raise ValueError(f"scs must be one of {VALID_SCS_HZ}, got {self.scs}")

    @property
    def slot_duration(self) -> int:
        # 15 kHz -> 1000 us, 30 kHz -> 500 us, 60 kHz -> 250 us
        return 1000 * 15_000 // self.scs

    @property
    def bandwidth(self) -> int:
        return nominal_bandwidth_nr(self.n_prb, self.scs)


@dataclass(frozen=True)
class DvbCarrier:
    symbol_rate: float
    roll_off: float

    def __post_init__(self):
        if self.symbol_rate <= 0:
            raise ValueError("symbol_rate must be > 0")
        if not 0.0 <= self.roll_off <= 1.0:
            raise ValueError("roll_off must be in [0, 1]")

    @property
    def bandwidth(self) -> float:
        return occupied_bandwidth_dvb(self.symbol_rate, self.roll_off)


@dataclass(frozen=True)
class CodingScheme:
    label: str
    modulation_order: int
    code_rate: float
    spectral_efficiency: float
    decode_threshold_snr: float
    family: str = "nr"

    def __post_init__(self):
        if not 0.0 < self.code_rate <= 1.0:
            raise ValueError(f"{self.label}: code_rate must be in (0, 1]")
        if self.modulation_order < 1:
            raise ValueError(f"{self.label}: modulation_order must be >= 1")
        if self.spectral_efficiency <= 0:
            raise ValueError(f"{self.label}: spectral_efficiency must be > 0")
        if self.family == "nr":
            expected = self.modulation_order * self.code_rate
            if abs(self.spectral_efficiency - expected) > 0.01 * expected:
                raise ValueError(
                    f"{self.label}: spectral efficiency {self.spectral_efficiency} != "
                    f"modulation_order x code_rate = {expected:.4f}"
                )


def nr_scheme(mcs: int, threshold_db: Optional[float] = None) -> CodingScheme:
    try:
        label, qm, rate, thr = config.NR_MCS_TABLE[mcs]
    except KeyError:
        raise ValueError(f"unsupported NR MCS index: {mcs}") from None
    return CodingScheme(
        label=label,
        modulation_order=qm,
        code_rate=rate,
        spectral_efficiency=qm * rate,
        decode_threshold_snr=thr if threshold_db is None else threshold_db,
        family="nr",
    )


def dvb_scheme(modcod: int, threshold_db: Optional[float] = None) -> CodingScheme:
    try:
        label, qm, rate, thr = config.DVB_MODCOD_TABLE[modcod]
    except KeyError:
        raise ValueError(f"unsupported DVB ModCod index: {modcod}") from None
    return CodingScheme(
        label=label,
        modulation_order=qm,
        code_rate=rate,
        spectral_efficiency=qm * rate,
        decode_threshold_snr=thr if threshold_db is None else threshold_db,
        family="dvb",
    )


@dataclass(frozen=True)
class LinkBudget:
    clear_sky_snr: float
    attenuation: float

    def __post_init__(self):
        if not (math.isfinite(self.clear_sky_snr) and math.isfinite(self.attenuation)):
            raise ValueError("link budget values must be finite")


# =========================
# 公式
# =========================
def nominal_bandwidth_nr(n_prb: int, scs: int) -> int:
    """12 subcarriers per PRB."""
    if n_prb < 1 or scs <= 0:
        raise ValueError(f"n_prb and scs must be positive (n_prb={n_prb}, scs={scs})")
    return 12 * int(n_prb) * int(scs)


def occupied_bandwidth_dvb(symbol_rate: float, roll_off: float) -> float:
    if symbol_rate <= 0:
        raise ValueError("symbol_rate must be > 0")
    if not 0.0 <= roll_off <= 1.0:
        raise ValueError(f"roll_off out of range [0, 1]: {roll_off}")
    return symbol_rate * (1.0 + roll_off)


def link_snr(budget: LinkBudget) -> float:
    return budget.clear_sky_snr - budget.attenuation


def is_decodable(snr: float, scheme: CodingScheme) -> bool:
    return snr >= scheme.decode_threshold_snr


def check_decodable(snr: float, scheme: CodingScheme, key_path: str = "budget") -> None:
    if not is_decodable(snr, scheme):
        raise ConfigError(
            f"link SNR {snr:.2f} dB below {scheme.label} decode threshold "
            f"{scheme.decode_threshold_snr:.2f} dB; scenario refuses to start",
            key_path,
        )


def ta_common_granules(one_way_delay_us: float) -> int:
    if one_way_delay_us < 0:
        raise ValueError("delay must be >= 0")
    # integer arithmetic in nanoseconds x 1000 avoids float floor errors
    return int(round(one_way_delay_us * 1_000_000)) // int(round(config.TA_COMMON_GRANULE_US * 1_000_000))


def koffset_slots(rtt_us: int, slot_duration_us: int) -> int:
    if rtt_us < 0 or slot_duration_us <= 0:
        raise ValueError("rtt must be >= 0 and slot_duration > 0")
    return -(-int(rtt_us) // int(slot_duration_us))


def ecef_granules(distance_m: float) -> int:
    if distance_m < 0:
        raise ValueError("distance must be >= 0")
    return int(round(distance_m / config.ECEF_STEP_M))


# =========================
# 传播
# =========================
def propagate(sim: Simulator, frame: CarrierFrame, link: GeoLink, kind: str, payload: Any = None) -> Optional[int]:
    """Schedule arrival of a frame one propagation delay after its airtime ends.

    Transparent payload: the satellite adds no processing delay. Returns the
    event id, or None when the optional loss knob drops the frame.
    """
    if link.loss_rate > 0.0:
        if sim.rng.register("channel.loss").uniform() < link.loss_rate:
            logger.debug("[channel] frame %s lost", frame.trace_detail())
            return None
    depart = max(sim.now, frame.end_at)
    return sim.schedule(depart + link.one_way_delay, kind, frame if payload is None else payload)
