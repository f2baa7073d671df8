"""Application transport over an access path.

Echo probes for RTT sampling, and a minimal ACK-clocked window protocol
(handshake, request, window-limited response, delayed cumulative ACKs).
No loss recovery: the baseline link is lossless.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

import config
from functions.errors import SimulationError
from functions.framefunc import Packet
from functions.linkfunc import AccessPath
from functions.simfunc import Simulator

logger = logging.getLogger(__name__)

HANDSHAKE = "handshake"
SLOW_START = "slow_start"
CONGESTION_AVOIDANCE = "congestion_avoidance"


# =========================
# Echo
# =========================
@dataclass
class EchoFlow:
    count: int = config.ECHO_COUNT
    interval: int = int(config.ECHO_INTERVAL_MS * 1000)  # us
    probe_size: int = config.ECHO_SIZE
    start_at: int = 0
    rtt_samples: List[int] = field(default_factory=list)

    def __post_init__(self):
        if self.count < 0 or self.interval <= 0 or self.probe_size <= 0:
            raise ValueError("echo flow needs count >= 0, interval > 0, probe_size > 0")


def run_echo(sim: Simulator, path: AccessPath, flow: EchoFlow, name: str = "echo", limit_us: Optional[int] = None) -> List[int]:
    """Send flow.count probes from the client and record RTTs in send order.

    The server echoes each probe straight back; a probe lost on the way
    leaves no sample.
    """
    send_kind = f"{name}.send"
    received: dict = {}

    def send(i: int) -> None:
        path.send_up(path.new_packet(name, flow.probe_size, sim.now, kind="echo-request", seq=i))

    def on_server(packet: Packet) -> None:
        if packet.flow == name and packet.kind == "echo-request":
            reply = path.new_packet(name, flow.probe_size, sim.now, kind="echo-reply", seq=packet.meta["seq"])
            reply.meta["sent_at"] = packet.created_at
            path.send_down(reply)

    def on_client(packet: Packet) -> None:
        if packet.flow == name and packet.kind == "echo-reply":
            received[packet.meta["seq"]] = sim.now - packet.meta["sent_at"]

    sim.register(send_kind, send)
    path.on_server(on_server)
    path.on_client(on_client)
    for i in range(flow.count):
        sim.schedule(flow.start_at + i * flow.interval, send_kind, i)
    if limit_us is None:
        limit_us = flow.start_at + int(path.scenario.max_sim_time_s * 1e6)
    sim.run_until_idle(limit_us)
    flow.rtt_samples = [received[i] for i in range(flow.count) if i in received]
    if len(flow.rtt_samples) < flow.count:
        logger.debug("[echo] %d of %d probes lost", flow.count - len(flow.rtt_samples), flow.count)
    return flow.rtt_samples


# =========================
# 可靠传输流
# =========================
@dataclass
class FlowTimeline:
    t_request: int = 0
    t_connected: Optional[int] = None
    t_first_byte: Optional[int] = None
    t_start_transfer: Optional[int] = None
    t_complete: Optional[int] = None
    bytes_total: int = 0
    # (client delivery time, cumulative payload bytes) per data segment
    deliveries: List[Tuple[int, int]] = field(default_factory=list)

    def seconds(self, t: Optional[int]) -> float:
        if t is None:
            raise ValueError("timeline instant not reached")
        return (t - self.t_request) / 1e6

    @property
    def complete(self) -> bool:
        return self.t_complete is not None


class ReliableFlow:
    """One client/server connection: SYN, SYN-ACK, GET, windowed response.

    The client's handshake ACK rides with the GET; a zero-size response is a
    single header-only segment so the first-byte instant always exists.
    """

    def __init__(
        self,
        sim: Simulator,
        path: AccessPath,
        name: str = "tcp",
        mss: int = config.MSS,
        initial_cwnd: int = config.INITIAL_CWND,
        ssthresh: float = math.inf,
        ack_every: int = config.ACK_EVERY,
        delayed_ack_us: int = int(config.DELAYED_ACK_MS * 1000),
        header: int = config.TCP_IP_HEADER,
    ):
        if mss <= 0 or initial_cwnd < 1 or ack_every < 1:
            raise ValueError("mss > 0, initial_cwnd >= 1 and ack_every >= 1 required")
        self.sim = sim
        self.path = path
        self.name = name
        self.mss = mss
        self.cwnd = float(initial_cwnd)
        self.ssthresh = ssthresh
        self.ack_every = ack_every
        self.delayed_ack_us = delayed_ack_us
        self.header = header
        self.state = HANDSHAKE
        self.timeline = FlowTimeline()
        self.bytes_acked = 0
        self.processing_us = 0
        # sender
        self._size = 0
        self._segments = 0
        self._next_seg = 0
        self._acked_segs = 0
        self._sending = False
        # receiver
        self._rx_segs = 0
        self._rx_unacked = 0
        self._delack_gen = 0
        self._delack_armed = False
        self._respond_kind = f"{name}.respond"
        self._delack_kind = f"{name}.delack"
        sim.register(self._respond_kind, self._start_response)
        sim.register(self._delack_kind, self._on_delack)
        path.on_server(self._server_rx)
        path.on_client(self._client_rx)

    # ----- client side -----
    def open(self) -> None:
        self.timeline.t_request = self.sim.now
        self.path.send_up(self.path.new_packet(self.name, config.SYN_SIZE, self.sim.now, kind="syn"))

    def request(self, size: int, processing_us: int = 0) -> None:
        if self.timeline.t_connected is None:
            raise RuntimeError(f"[tcp] {self.name}: request before the connection is up")
        if size < 0 or processing_us < 0:
            raise ValueError("size and processing delay must be >= 0")
        self.processing_us = int(processing_us)
        self.path.send_up(self.path.new_packet(self.name, config.GET_SIZE, self.sim.now, kind="get", req_size=size))

    def _client_rx(self, packet: Packet) -> None:
        if packet.flow != self.name:
            return
        now = self.sim.now
        tl = self.timeline
        if packet.kind == "syn-ack":
            tl.t_connected = now
            self.state = SLOW_START if self.cwnd < self.ssthresh else CONGESTION_AVOIDANCE
        elif packet.kind == "data":
            if tl.t_first_byte is None:
                tl.t_first_byte = now
                tl.t_start_transfer = now
            tl.bytes_total += packet.meta["payload"]
            tl.deliveries.append((now, tl.bytes_total))
            self._rx_segs += 1
            self._rx_unacked += 1
            if packet.meta["last"]:
                tl.t_complete = now
                self._send_ack()
            elif self._rx_unacked >= self.ack_every:
                self._send_ack()
            elif not self._delack_armed:
                self._delack_armed = True
                self.sim.call_later(self.delayed_ack_us, self._delack_kind, self._delack_gen)

    def _send_ack(self) -> None:
        self._rx_unacked = 0
        self._delack_gen += 1
        self._delack_armed = False
        self.path.send_up(self.path.new_packet(self.name, config.ACK_SIZE, self.sim.now, kind="ack", ack=self._rx_segs))

    def _on_delack(self, gen: int) -> None:
        if gen == self._delack_gen and self._rx_unacked:
            self._send_ack()

    # ----- server side -----
    def _server_rx(self, packet: Packet) -> None:
        if packet.flow != self.name:
            return
        if packet.kind == "syn":
            self.path.send_down(self.path.new_packet(self.name, config.SYN_SIZE, self.sim.now, kind="syn-ack"))
        elif packet.kind == "get":
            self._size = packet.meta["req_size"]
            self._segments = max(1, -(-self._size // self.mss))
            self.sim.call_later(self.processing_us, self._respond_kind)
        elif packet.kind == "ack":
            self._on_ack(packet.meta["ack"])

    def _start_response(self, _payload) -> None:
        self._sending = True
        self._pump()

    def _on_ack(self, ack: int) -> None:
        newly = ack - self._acked_segs
        if newly <= 0:
            return
        self._acked_segs = ack
        self.bytes_acked = min(self._size, ack * self.mss)
        if self.cwnd < self.ssthresh:
            self.state = SLOW_START
            self.cwnd += newly
        else:
            self.state = CONGESTION_AVOIDANCE
            self.cwnd += newly / self.cwnd
        self._pump()

    def _pump(self) -> None:
        if not self._sending:
            return
        while self._next_seg < self._segments and self.in_flight < int(self.cwnd):
            i = self._next_seg
            payload = min(self.mss, self._size - i * self.mss) if self._size else 0
            last = i == self._segments - 1
            self.path.send_down(
                self.path.new_packet(
                    self.name, payload + self.header, self.sim.now, kind="data", seq=i, payload=payload, last=last,
                )
            )
            self._next_seg += 1

    @property
    def in_flight(self) -> int:
        return self._next_seg - self._acked_segs


def _limit(path: AccessPath, flow: ReliableFlow) -> int:
    return flow.timeline.t_request + int(path.scenario.max_sim_time_s * 1e6)


def connect(sim: Simulator, path: AccessPath, flow: ReliableFlow) -> int:
    """Run the handshake; the clock stops on the SYN-ACK reaching the client."""
    flow.open()
    sim.run_while(lambda: flow.timeline.t_connected is None, _limit(path, flow))
    if flow.timeline.t_connected is None:
        raise SimulationError(f"[tcp] {flow.name}: handshake never completed", sim.now)
    return flow.timeline.t_connected


def transfer(sim: Simulator, path: AccessPath, flow: ReliableFlow, size: int, processing_us: int = 0) -> FlowTimeline:
    """Request size bytes on a connected flow and run until they are all delivered."""
    flow.request(size, processing_us)
    sim.run_while(lambda: not flow.timeline.complete, _limit(path, flow))
    tl = flow.timeline
    if not tl.complete:
        raise SimulationError(
            f"[tcp] {flow.name}: transfer stalled at {tl.bytes_total}/{size} bytes", sim.now
        )
    if tl.bytes_total != size:
        raise SimulationError(f"[tcp] {flow.name}: delivered {tl.bytes_total} bytes, expected {size}", sim.now)
    return tl


def throughput(timeline: FlowTimeline) -> float:
    """Payload kB/s (1000 B) between the first and the last delivered byte."""
    if timeline.t_complete is None or timeline.t_start_transfer is None:
        raise ValueError("timeline has no completed transfer")
    duration = timeline.t_complete - timeline.t_start_transfer
    if duration <= 0:
        raise ValueError("zero-duration transfer has no throughput")
    return timeline.bytes_total / (duration / 1e6) / 1000


def ramp_time(
    timeline: FlowTimeline,
    window_us: int = int(config.RAMP_WINDOW_MS * 1000),
    fraction: float = config.RAMP_FRACTION,
) -> float:
    """Seconds from start-transfer until trailing-window goodput first reaches
    fraction of its peak; the whole transfer time when no full window fits."""
    if timeline.t_start_transfer is None or timeline.t_complete is None:
        raise ValueError("timeline has no completed transfer")
    t0 = timeline.t_start_transfer
    if not timeline.deliveries:
        return 0.0
    arr = np.asarray(timeline.deliveries, dtype=np.int64)
    times, cum = arr[:, 0], arr[:, 1]
    # bytes delivered in (t - window, t] for every delivery instant t
    before = np.searchsorted(times, times - window_us, side="right") - 1
    base = np.where(before >= 0, cum[np.clip(before, 0, None)], 0)
    rate = (cum - base) / (window_us / 1e6)
    valid = times >= t0 + window_us
    if not valid.any():
        return (timeline.t_complete - t0) / 1e6
    peak = rate[valid].max()
    hit = np.flatnonzero(valid & (rate >= fraction * peak))
    return float(times[hit[0]] - t0) / 1e6
