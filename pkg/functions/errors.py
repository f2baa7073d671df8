from __future__ import annotations

from typing import Optional


class SatbenchError(Exception):
    """Base for every error raised on purpose by the simulator."""


class ConfigError(SatbenchError, ValueError):
    def __init__(self, message: str, key_path: Optional[str] = None):
        self.key_path = key_path
        prefix = f"{key_path}: " if key_path else ""
        super().__init__(f"{prefix}{message}")


class ScheduleError(SatbenchError, ValueError):
    """An event was scheduled before the current virtual time."""


class SimulationError(SatbenchError, RuntimeError):
    def __init__(self, message: str, time_us: Optional[int] = None, seq: Optional[int] = None, kind: str = ""):
        self.time_us = time_us
        self.seq = seq
        self.kind = kind
        ctx = f" [event t={time_us}us seq={seq} kind={kind}]" if time_us is not None else ""
        super().__init__(f"{message}{ctx}")


class SimulationTimeout(SimulationError):
    pass


class ReportWriteError(SatbenchError, OSError):
    pass
