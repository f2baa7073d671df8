"""Deterministic discrete-event engine.

Virtual time is an integer count of microseconds. Events are ordered by
(fire_at, seq) where seq is the insertion counter, so ties run FIFO and no
two events ever compare equal. No wall clock is read anywhere in here.
"""

from __future__ import annotations

import hashlib
import heapq
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

import config
from functions.errors import ScheduleError, SimulationError, SimulationTimeout

logger = logging.getLogger(__name__)

Handler = Callable[[Any], None]


@dataclass(frozen=True)
class Event:
    fire_at: int
    seq: int
    kind: str
    payload: Any = None

    def trace_line(self) -> str:
        return f"{self.fire_at},{self.seq},{self.kind},{_detail(self.payload)}"


def _detail(payload: Any) -> str:
    if payload is None:
        return ""
    fn = getattr(payload, "trace_detail", None)
    if fn is not None:
        return fn()
    return str(payload)


# =========================
# RNG 流
# =========================
def stream_key(seed: int, name: str) -> int:
    """128-bit Philox key derived from (seed, stream name)."""
    digest = hashlib.sha256(f"{int(seed)}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "big")


class RngStream:
    """One named, independently advancing Philox stream."""

    def __init__(self, seed: int, name: str):
        self.name = name
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(key=stream_key(seed, name)))
        self.draws = 0

    def uniform(self) -> float:
        self.draws += 1
        return float(self._gen.random())


class RngRegistry:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: Dict[str, RngStream] = {}

    def register(self, name: str) -> RngStream:
        stream = self._streams.get(name)
        if stream is None:
            stream = RngStream(self.seed, name)
            self._streams[name] = stream
        return stream

    def get(self, name: str) -> RngStream:
        try:
            return self._streams[name]
        except KeyError:
            raise ValueError(f"[sim] unknown rng stream: {name!r}") from None

    def names(self) -> List[str]:
        return sorted(self._streams)


def draw_uniform(registry: RngRegistry, name: str) -> float:
    """Advance only the named stream; real in [0, 1)."""
    return registry.get(name).uniform()


# =========================
# 仿真器
# =========================
class Simulator:
    def __init__(self, seed: int = config.DEFAULT_SEED, trace: bool = False, keep_trace_lines: bool = False):
        self._now = 0
        self._seq = 0
        self._queue: List[tuple] = []
        self._handlers: Dict[str, Handler] = {}
        self.rng = RngRegistry(seed)
        self.processed = 0
        self._trace = trace or keep_trace_lines
        self._hasher = hashlib.sha256() if self._trace else None
        self.trace_lines: Optional[List[str]] = [] if keep_trace_lines else None

    @property
    def now(self) -> int:
        return self._now

    def register(self, kind: str, handler: Handler) -> None:
        if kind in self._handlers:
            raise ValueError(f"[sim] handler already registered for kind={kind!r}")
        self._handlers[kind] = handler

    def schedule(self, fire_at: int, kind: str, payload: Any = None) -> int:
        fire_at = int(fire_at)
        if fire_at < self._now:
            raise ScheduleError(
                f"[sim] event kind={kind!r} scheduled in the past: fire_at={fire_at}us < now={self._now}us"
            )
        if fire_at > config.MAX_VIRTUAL_TIME_US:
            raise SimulationError(f"[sim] virtual time overflow scheduling kind={kind!r}", fire_at, None, kind)
        if kind not in self._handlers:
            raise ScheduleError(f"[sim] no handler registered for kind={kind!r}")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (fire_at, seq, kind, payload))
        return seq

    def call_later(self, delay_us: int, kind: str, payload: Any = None) -> int:
        return self.schedule(self._now + int(delay_us), kind, payload)

    def pending(self) -> int:
        return len(self._queue)

    def peek_time(self) -> Optional[int]:
        return self._queue[0][0] if self._queue else None

    def _dispatch(self, item: tuple) -> None:
        fire_at, seq, kind, payload = item
        self._now = fire_at
        if self._hasher is not None:
            line = Event(fire_at, seq, kind, payload).trace_line()
            self._hasher.update(line.encode("utf-8"))
            self._hasher.update(b"\n")
            if self.trace_lines is not None:
                self.trace_lines.append(line)
        try:
            self._handlers[kind](payload)
        except SimulationError:
            raise
        except Exception as e:
            raise SimulationError(f"[sim] handler failed: {type(e).__name__}: {e}", fire_at, seq, kind) from e
        self.processed += 1

    def run_until(self, t_end: int) -> int:
        """Process every event with fire_at <= t_end; the clock ends at t_end."""
        t_end = int(t_end)
        count = 0
        q = self._queue
        while q and q[0][0] <= t_end:
            self._dispatch(heapq.heappop(q))
            count += 1
        if t_end > self._now:
            self._now = t_end
        return count

    def run_until_idle(self, limit_us: int) -> int:
        """Drain the queue; events still pending past limit_us mean a timeout."""
        count = 0
        q = self._queue
        while q:
            if q[0][0] > limit_us:
                fire_at, seq, kind, _ = q[0]
                raise SimulationTimeout(
                    f"[sim] simulation exceeded max time {limit_us / 1e6:.1f}s", fire_at, seq, kind
                )
            self._dispatch(heapq.heappop(q))
            count += 1
        return count

    def run_while(self, predicate: Callable[[], bool], limit_us: int) -> int:
        """Process events one by one while predicate() holds or the queue runs dry.

        The clock stops on the event that made the predicate false.
        """
        count = 0
        q = self._queue
        while q and predicate():
            if q[0][0] > limit_us:
                fire_at, seq, kind, _ = q[0]
                raise SimulationTimeout(
                    f"[sim] simulation exceeded max time {limit_us / 1e6:.1f}s", fire_at, seq, kind
                )
            self._dispatch(heapq.heappop(q))
            count += 1
        return count

    def trace_hash(self) -> str:
        if self._hasher is None:
            raise ValueError("[sim] tracing disabled for this simulator")
        return self._hasher.copy().hexdigest()

    def dump_trace(self, path: str | Path) -> None:
        if self.trace_lines is None:
            raise ValueError("[sim] trace lines not kept for this simulator")
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text("time_us,seq,kind,detail\n" + "\n".join(self.trace_lines) + "\n", encoding="utf-8")
