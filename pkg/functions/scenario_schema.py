from __future__ import annotations

import hashlib
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

import config
from functions.channelfunc import (
    CodingScheme,
    DvbCarrier,
    GeoLink,
    LinkBudget,
    NrCarrier,
    dvb_scheme,
    is_decodable,
    koffset_slots,
    link_snr,
    nr_scheme,
)
from functions.errors import ConfigError

logger = logging.getLogger(__name__)

StackKind = Literal["ntn5g", "dvbs2rcs2"]
ModeKind = Literal["capacity-true", "paper-calibration"]

_STRICT = ConfigDict(extra="forbid", validate_assignment=False)


class NrBlock(BaseModel):
    model_config = _STRICT

    n_prb: int = Field(config.NR_N_PRB, ge=1)
    scs_khz: int = config.NR_SCS_KHZ
    mcs: int = config.NR_MCS
    # None means derived from the RTT (auto)
    koffset: Optional[int] = Field(None, ge=0)
    sr_period_slots: int = Field(config.NR_SR_PERIOD_SLOTS, ge=1)
    ul_grant_period_slots: int = Field(config.NR_UL_GRANT_PERIOD_SLOTS, ge=1)
    per_packet_header: int = Field(config.NR_PER_PACKET_HEADER, ge=0)
    per_tb_header: int = Field(config.NR_PER_TB_HEADER, ge=0)
    fragment_header: int = Field(config.NR_FRAGMENT_HEADER, ge=0)
    noise_ms: float = Field(config.NR_NOISE_MS, ge=0)
    phy_rate_override: Optional[float] = Field(None, gt=0)
    decode_threshold_db: Optional[float] = None

    @field_validator("scs_khz")
    @classmethod
    def _validate_scs(cls, v: int) -> int:
        if v not in (15, 30, 60):
            raise ValueError("scs_khz must be 15, 30 or 60")
        return v

    @field_validator("mcs")
    @classmethod
    def _validate_mcs(cls, v: int) -> int:
        if v not in config.NR_MCS_TABLE:
            raise ValueError(f"mcs must be one of {sorted(config.NR_MCS_TABLE)}")
        return v


class DvbBlock(BaseModel):
    model_config = _STRICT

    symbol_rate: float = Field(config.DVB_SYMBOL_RATE, gt=0)
    roll_off: float = Field(config.DVB_ROLL_OFF, ge=0, le=1)
    modcod: int = config.DVB_MODCOD
    fecframe: Literal["normal", "short"] = config.DVB_FECFRAME
    superframe_ms: float = Field(config.DVB_SUPERFRAME_MS, gt=0)
    terminal_slot_offset_ms: float = Field(0.0, ge=0)
    standing_bytes: int = Field(config.DVB_STANDING_BYTES, ge=0)
    assembly_timer_ms: float = Field(config.DVB_ASSEMBLY_TIMER_MS, ge=0)
    grant_exchange: bool = config.DVB_GRANT_EXCHANGE
    gse_first_header: int = Field(config.GSE_FIRST_HEADER, ge=0)
    gse_cont_header: int = Field(config.GSE_CONT_HEADER, ge=0)
    noise_ms: float = Field(config.DVB_NOISE_MS, ge=0)
    phy_rate_override: Optional[float] = Field(None, gt=0)
    decode_threshold_db: Optional[float] = None

    @field_validator("modcod")
    @classmethod
    def _validate_modcod(cls, v: int) -> int:
        if v not in config.DVB_MODCOD_TABLE:
            raise ValueError(f"modcod must be one of {sorted(config.DVB_MODCOD_TABLE)}")
        return v

    @model_validator(mode="after")
    def _offset_within_superframe(self) -> "DvbBlock":
        if self.terminal_slot_offset_ms >= self.superframe_ms:
            raise ValueError("terminal_slot_offset_ms must be smaller than superframe_ms")
        return self


class BudgetBlock(BaseModel):
    model_config = _STRICT

    # None means the stack's own operating point
    clear_sky_db: Optional[float] = None
    attenuation_db: Optional[float] = None


class WorkloadBlock(BaseModel):
    model_config = _STRICT

    repetitions: int = Field(config.REPETITIONS, ge=1)
    echo_count: int = Field(config.ECHO_COUNT, ge=2)
    echo_interval_ms: float = Field(config.ECHO_INTERVAL_MS, gt=0)
    echo_size: int = Field(config.ECHO_SIZE, ge=1)
    video_buffer_bytes: int = Field(config.VIDEO_INITIAL_BUFFER_BYTES, ge=0)
    webpage_bytes: int = Field(config.WEBPAGE_BYTES, ge=0)
    server_processing_ms: float = Field(config.WEBPAGE_SERVER_PROCESSING_MS, ge=0)
    download_bytes: int = Field(config.DOWNLOAD_BYTES, ge=0)
    mss: int = Field(config.MSS, ge=1)
    initial_cwnd: int = Field(config.INITIAL_CWND, ge=1)
    ack_every: int = Field(config.ACK_EVERY, ge=1)
    delayed_ack_ms: float = Field(config.DELAYED_ACK_MS, ge=0)


class ScenarioConfig(BaseModel):
    model_config = _STRICT

    stack: StackKind = "ntn5g"
    name: str = ""
    one_way_delay_ms: float = Field(config.ONE_WAY_DELAY_MS, ge=0)
    seed: int = config.DEFAULT_SEED
    mode: ModeKind = "capacity-true"
    noise_scope: Literal["client", "both"] = "client"
    loss_rate: float = Field(0.0, ge=0, lt=1)
    max_sim_time_s: float = Field(config.MAX_SIM_TIME_S, gt=0)
    # false: ideal pipe (no slots, frames or return scheduling), host noise only
    framing: bool = True
    nr: NrBlock = Field(default_factory=NrBlock)
    dvb: DvbBlock = Field(default_factory=DvbBlock)
    budget: BudgetBlock = Field(default_factory=BudgetBlock)
    workload: WorkloadBlock = Field(default_factory=WorkloadBlock)

    # ----- derived link objects -----
    @property
    def is_nr(self) -> bool:
        return self.stack == "ntn5g"

    @property
    def label(self) -> str:
        return self.name or ("5G-NTN" if self.is_nr else "DVB-S2/RCS2")

    @property
    def one_way_delay_us(self) -> int:
        return int(round(self.one_way_delay_ms * 1000))

    def geo_link(self) -> GeoLink:
        return GeoLink(one_way_delay=self.one_way_delay_us, loss_rate=self.loss_rate)

    def nr_carrier(self) -> NrCarrier:
        return NrCarrier(n_prb=self.nr.n_prb, scs=self.nr.scs_khz * 1000)

    def nr_scheme(self) -> CodingScheme:
        return nr_scheme(self.nr.mcs, self.nr.decode_threshold_db)

    def dvb_carrier(self) -> DvbCarrier:
        return DvbCarrier(symbol_rate=self.dvb.symbol_rate, roll_off=self.dvb.roll_off)

    def dvb_scheme(self) -> CodingScheme:
        return dvb_scheme(self.dvb.modcod, self.dvb.decode_threshold_db)

    def scheme(self) -> CodingScheme:
        return self.nr_scheme() if self.is_nr else self.dvb_scheme()

    def link_budget(self) -> LinkBudget:
        if self.is_nr:
            clear, att = config.NR_CLEAR_SKY_DB, config.NR_ATTENUATION_DB
        else:
            clear, att = config.CLEAR_SKY_DB, config.ATTENUATION_DB
        if self.budget.clear_sky_db is not None:
            clear = self.budget.clear_sky_db
        if self.budget.attenuation_db is not None:
            att = self.budget.attenuation_db
        return LinkBudget(clear_sky_snr=clear, attenuation=att)

    def koffset(self) -> int:
        if self.nr.koffset is not None:
            return self.nr.koffset
        return koffset_slots(2 * self.one_way_delay_us, self.nr_carrier().slot_duration)

    def nr_rate_override(self) -> Optional[float]:
        if self.mode != "paper-calibration":
            return None
        return self.nr.phy_rate_override or config.NR_CALIBRATED_PHY_RATE_BPS

    def dvb_rate_override(self) -> Optional[float]:
        if self.mode != "paper-calibration":
            return None
        return self.dvb.phy_rate_override or config.DVB_CALIBRATED_PHY_RATE_BPS

    @property
    def fecframe_bits(self) -> int:
        return config.FECFRAME_BITS[self.dvb.fecframe]

    def check_cross_fields(self, source: str = "<dict>") -> None:
        if self.is_nr and self.nr.koffset is not None:
            needed = koffset_slots(2 * self.one_way_delay_us, self.nr_carrier().slot_duration)
            if self.nr.koffset < needed:
                raise ConfigError(f"{source}: {self.nr.koffset} slots do not cover the RTT ({needed} slots)", "nr.koffset")


# =========================
# 文本格式：扁平的 dotted key = value
# =========================
_LINE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_.]*)\s*=\s*(.*?)\s*$")
_SECTIONS = ("nr", "dvb", "budget", "workload")


def _parse_value(raw: str) -> Any:
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("auto", "none", ""):
        return None
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    try:
        return int(raw.replace("_", ""))
    except ValueError:
        pass
    try:
        return float(raw.replace("_", ""))
    except ValueError:
        return raw


def parse_kv_text(text: str, source: str = "<text>") -> Dict[str, Any]:
    """Parse `a.b = value` lines into a nested dict; raises ConfigError with line info."""
    out: Dict[str, Any] = {}
    seen: Dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = _LINE_RE.match(stripped)
        if not m:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = m.group(1), m.group(2)
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key (first at line {seen[key]})", key)
        seen[key] = lineno
        parts = key.split(".")
        if len(parts) > 2 or (len(parts) == 2 and parts[0] not in _SECTIONS):
            raise ConfigError(f"{source}:{lineno}: unknown section", key)
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = _parse_value(raw)
    return out


def _pydantic_to_config_error(e: ValidationError, source: str) -> ConfigError:
    first = e.errors()[0]
    key_path = ".".join(str(p) for p in first.get("loc", ()))
    msg = first.get("msg", "invalid value")
    if first.get("type") == "extra_forbidden":
        msg = "unknown key"
    return ConfigError(f"{source}: {msg}", key_path or None)


def _nest(data: Dict[str, Any], source: str) -> Dict[str, Any]:
    """Accept dotted keys (`nr.noise_ms`) next to nested sections."""
    out: Dict[str, Any] = {}
    for key, value in data.items():
        if "." not in key:
            if isinstance(value, dict):
                out.setdefault(key, {}).update(value)
            else:
                out[key] = value
            continue
        section, _, leaf = key.partition(".")
        if section not in _SECTIONS or "." in leaf:
            raise ConfigError(f"{source}: unknown section", key)
        out.setdefault(section, {})[leaf] = value
    return out


def build_scenario(data: Dict[str, Any], source: str = "<dict>") -> ScenarioConfig:
    data = _nest(data, source)

    stack = data.get("stack", "ntn5g")
    inactive = "dvb" if stack == "ntn5g" else "nr"
    if stack in ("ntn5g", "dvbs2rcs2") and data.get(inactive):
        key = next(iter(data[inactive]))
        raise ConfigError(f"{source}: section '{inactive}' is inactive for stack={stack}", f"{inactive}.{key}")
    try:
        scenario = ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise _pydantic_to_config_error(e, source) from None
    scenario.check_cross_fields(source)
    snr = link_snr(scenario.link_budget())
    scheme = scenario.scheme()
    if not is_decodable(snr, scheme):
        raise ConfigError(
            f"{source}: link SNR {snr:.2f} dB below {scheme.label} decode threshold "
            f"{scheme.decode_threshold_snr:.2f} dB",
            "budget",
        )
    return scenario


def parse_scenario(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"scenario file not found: {p}")
    text = p.read_text(encoding="utf-8")
    return build_scenario(parse_kv_text(text, str(p)), str(p))


# =========================
# 规范形式 / 指纹
# =========================
def canonical_dict(scenario: ScenarioConfig) -> Dict[str, Any]:
    data = scenario.model_dump()
    data.pop("dvb" if scenario.is_nr else "nr")
    return data


def _flatten(data: Dict[str, Any], prefix: str = "") -> List[Tuple[str, Any]]:
    items: List[Tuple[str, Any]] = []
    for k in sorted(data):
        v = data[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            items.extend(_flatten(v, key + "."))
        else:
            items.append((key, v))
    return items


def _render_value(v: Any) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return f'"{v}"'
    return str(v)


def serialize_scenario(scenario: ScenarioConfig) -> str:
    lines = [f"{k} = {_render_value(v)}" for k, v in _flatten(canonical_dict(scenario))]
    return "\n".join(lines) + "\n"


def fingerprint(scenario: ScenarioConfig) -> str:
    raw = orjson.dumps(canonical_dict(scenario), option=orjson.OPT_SORT_KEYS)
    return hashlib.sha256(raw).hexdigest()[:16]
