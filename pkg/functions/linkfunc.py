"""Event-driven link elements and the per-scenario access path.

Forward (server -> client) is a continuous frame grid; return (client ->
server) is a grid of scheduled opportunities with a standing allocation and
grant requests for any backlog beyond it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

from functions.channelfunc import GeoLink, propagate
from functions.dvbfunc import ReturnSchedule, build_bbframe, capacity_bound_kBps as dvb_bound_kBps, make_bbframe, return_access_delay
from functions.framefunc import CarrierFrame, Packet, PacketQueue, Piece, Reassembler, next_grid_point
from functions.ntnfunc import (
    NrOverheadModel,
    SlotGrid,
    UplinkAccessState,
    build_transport_block,
    capacity_bound_kBps as nr_bound_kBps,
    slot_capacity_bits,
    uplink_access_delay,
)
from functions.scenario_schema import ScenarioConfig
from functions.simfunc import Simulator, draw_uniform

logger = logging.getLogger(__name__)

Receiver = Callable[[Packet], None]
FrameBuilder = Callable[[PacketQueue, int], Optional[CarrierFrame]]


@dataclass
class LinkStats:
    frames: int = 0
    busy_us: int = 0
    payload_bytes: int = 0
    grants_requested: int = 0
    granted_bytes: int = 0
    delivered: int = 0
    dropped_pieces: int = 0


class _Receiving:
    """Shared receive side: reassemble arriving frames and hand packets on."""

    sim: Simulator
    name: str
    geo: GeoLink
    receiver: Receiver
    reassembler: Reassembler
    stats: LinkStats

    def _on_arrive(self, frame: CarrierFrame) -> None:
        for piece in frame.pieces:
            try:
                packet = self.reassembler.push(piece)
            except ValueError:
                if self.geo.loss_rate <= 0.0:
                    raise
                # a lost frame took part of this packet with it
                self.reassembler.discard(piece.packet.packet_id)
                self.stats.dropped_pieces += 1
                continue
            if packet is not None:
                self.stats.delivered += 1
                self.receiver(packet)


# =========================
# 主机处理（保持顺序）
# =========================
class HostStage:
    """Per-packet processing noise at an end host, FIFO so flows never reorder."""

    def __init__(self, sim: Simulator, name: str, noise_us: int, receiver: Receiver):
        self.sim = sim
        self.name = name
        self.noise_us = int(noise_us)
        self.receiver = receiver
        self._last = 0
        self._kind = f"{name}.deliver"
        self._stream = f"{name}.noise"
        sim.register(self._kind, self._deliver)
        if self.noise_us > 0:
            sim.rng.register(self._stream)

    def arrive(self, packet: Packet) -> None:
        now = self.sim.now
        at = now
        if self.noise_us > 0:
            at += int(draw_uniform(self.sim.rng, self._stream) * self.noise_us)
        at = max(at, self._last)
        self._last = at
        if at == now:
            self.receiver(packet)
        else:
            self.sim.schedule(at, self._kind, packet)

    def _deliver(self, packet: Packet) -> None:
        self.receiver(packet)


# =========================
# 理想管道（关闭成帧）
# =========================
class IdealPipe(_Receiving):
    def __init__(self, sim: Simulator, name: str, geo: GeoLink, receiver: Receiver):
        self.sim = sim
        self.name = name
        self.geo = geo
        self.receiver = receiver
        self.reassembler = Reassembler()
        self.stats = LinkStats()
        self._arrive_kind = f"{name}.arrive"
        sim.register(self._arrive_kind, self._on_arrive)

    def send(self, packet: Packet) -> None:
        frame = CarrierFrame(
            label="PIPE", capacity_bits=0, start_at=self.sim.now, airtime=0,
            pieces=[Piece(packet=packet, offset=0, length=packet.size)],
        )
        self.stats.frames += 1
        self.stats.payload_bytes += packet.size
        propagate(self.sim, frame, self.geo, self._arrive_kind)


# =========================
# 前向：连续帧栅格
# =========================
class FramedForwardLink(_Receiving):
    def __init__(
        self,
        sim: Simulator,
        name: str,
        geo: GeoLink,
        frame_period: int,
        build: FrameBuilder,
        receiver: Receiver,
        assembly_timer: int = 0,
        full_bytes: Optional[int] = None,
        per_packet_header: int = 0,
    ):
        if frame_period <= 0:
            raise ValueError(f"[{name}] frame period must be > 0")
        self.sim = sim
        self.name = name
        self.geo = geo
        self.frame_period = int(frame_period)
        self.grid = SlotGrid(self.frame_period)
        self.build = build
        self.receiver = receiver
        self.assembly_timer = int(assembly_timer)
        self.full_bytes = full_bytes
        self.per_packet_header = per_packet_header
        self.queue = PacketQueue()
        self.reassembler = Reassembler()
        self.stats = LinkStats()
        self._armed = False
        self._boundary_kind = f"{name}.boundary"
        self._arrive_kind = f"{name}.arrive"
        sim.register(self._boundary_kind, self._on_boundary)
        sim.register(self._arrive_kind, self._on_arrive)

    def send(self, packet: Packet) -> None:
        self.queue.push(packet, self.sim.now)
        if not self._armed:
            self._armed = True
            self.sim.schedule(self.grid.next_boundary(self.sim.now), self._boundary_kind)

    def _frame_full(self) -> bool:
        if self.full_bytes is None:
            return True
        return self.queue.queued_bytes + self.per_packet_header * len(self.queue) >= self.full_bytes

    def _on_boundary(self, _payload) -> None:
        now = self.sim.now
        if not self.queue:
            self._armed = False
            return
        if self.assembly_timer and not self._frame_full():
            if now - self.queue.oldest_enqueue_time() < self.assembly_timer:
                # still batching; this frame slot stays idle
                self.sim.schedule(now + self.frame_period, self._boundary_kind)
                return
        frame = self.build(self.queue, now)
        if frame is not None:
            self.stats.frames += 1
            self.stats.busy_us += frame.airtime
            self.stats.payload_bytes += frame.payload_bytes
            propagate(self.sim, frame, self.geo, self._arrive_kind)
        self.sim.schedule(now + self.frame_period, self._boundary_kind)


# =========================
# 回传：调度发送机会
# =========================
@dataclass(frozen=True)
class ReturnHeaders:
    first: int  # piece that starts a packet
    cont: int  # piece that continues a split packet
    split: int = 0  # added to a starting piece when the packet gets split
    burst: int = 0  # once per burst


class ScheduledReturnLink(_Receiving):
    def __init__(
        self,
        sim: Simulator,
        name: str,
        geo: GeoLink,
        period: int,
        offset: int,
        standing_bytes: Optional[int],
        headers: ReturnHeaders,
        grant_delay: Optional[Callable[[int], int]],
        receiver: Receiver,
        burst_airtime: int = 0,
    ):
        if period <= 0:
            raise ValueError(f"[{name}] opportunity period must be > 0")
        self.sim = sim
        self.name = name
        self.geo = geo
        self.period = int(period)
        self.offset = int(offset)
        # None: every opportunity may carry the whole backlog
        self.standing_bytes = standing_bytes
        self.headers = headers
        self.grant_delay = grant_delay
        self.receiver = receiver
        self.burst_airtime = int(burst_airtime)
        self.queue = PacketQueue()
        self.reassembler = Reassembler()
        self.stats = LinkStats()
        self._grants: List[Tuple[int, int]] = []
        self._requested = 0
        self._armed = False
        self._opp_kind = f"{name}.opportunity"
        self._arrive_kind = f"{name}.arrive"
        sim.register(self._opp_kind, self._on_opportunity)
        sim.register(self._arrive_kind, self._on_arrive)

    def send(self, packet: Packet) -> None:
        self.queue.push(packet, self.sim.now)
        self._arm(self.sim.now)

    def next_opportunity(self, t: int) -> int:
        return next_grid_point(t, self.period, self.offset)

    def _arm(self, t: int) -> None:
        if not self._armed:
            self._armed = True
            self.sim.schedule(self.next_opportunity(t), self._opp_kind)

    def _take_grants(self, now: int) -> int:
        usable = 0
        keep: List[Tuple[int, int]] = []
        for at, nbytes in self._grants:
            if at <= now:
                usable += nbytes
            else:
                keep.append((at, nbytes))
        self._grants = keep
        return usable

    def _fill(self, budget: Optional[int]) -> List[Piece]:
        h = self.headers
        pieces: List[Piece] = []
        while self.queue and (budget is None or budget > 0):
            started = self.queue.head_started
            hdr = h.cont if started else h.first
            rem = self.queue.remaining_of_head()
            if budget is None or hdr + rem <= budget:
                piece = self.queue.take(rem)
            else:
                if not started:
                    hdr += h.split
                avail = budget - hdr
                if avail <= 0:
                    break
                piece = self.queue.take(avail)
            piece.header = hdr
            pieces.append(piece)
            if budget is not None:
                budget -= hdr + piece.length
        return pieces

    def _on_opportunity(self, _payload) -> None:
        now = self.sim.now
        self._armed = False
        granted = self._take_grants(now)
        if granted:
            self._requested = max(0, self._requested - granted)
            self.stats.granted_bytes += granted
        budget = None if self.standing_bytes is None else self.standing_bytes + granted - self.headers.burst
        pieces = self._fill(budget)
        if pieces:
            frame = CarrierFrame(
                label="RET", capacity_bits=0, start_at=now, airtime=self.burst_airtime,
                pieces=pieces, frame_header=self.headers.burst,
            )
            self.stats.frames += 1
            self.stats.busy_us += frame.airtime
            self.stats.payload_bytes += frame.payload_bytes
            propagate(self.sim, frame, self.geo, self._arrive_kind)
        if not self.queue:
            # grants still in flight lapse unused
            self._grants = []
            self._requested = 0
            return
        if self.grant_delay is not None:
            backlog = self.queue.queued_bytes + self.headers.first * len(self.queue)
            extra = backlog - self._requested
            if extra > 0:
                self._grants.append((now + self.grant_delay(now), extra))
                self._requested += extra
                self.stats.grants_requested += 1
        self._arm(now + 1)


# =========================
# 接入路径（单场景）
# =========================
@dataclass
class AccessPath:
    """Server <-> client path over one stack; add receivers before sending."""

    scenario: ScenarioConfig
    forward: object
    ret: object
    client_host: HostStage
    server_host: HostStage
    goodput_bound_kBps: float
    to_client: List[Receiver] = field(default_factory=list)
    to_server: List[Receiver] = field(default_factory=list)
    _next_id: int = 0

    def new_packet(self, flow: str, size: int, now: int, kind: str = "data", **meta) -> Packet:
        """Packet ids are unique per path; both reassemblers key on them."""
        self._next_id += 1
        return Packet(packet_id=self._next_id, flow=flow, size=size, created_at=now, kind=kind, meta=meta)

    def send_down(self, packet: Packet) -> None:
        self.forward.send(packet)

    def send_up(self, packet: Packet) -> None:
        self.ret.send(packet)

    def on_client(self, receiver: Receiver) -> None:
        self.to_client.append(receiver)

    def on_server(self, receiver: Receiver) -> None:
        self.to_server.append(receiver)

    @property
    def one_way_delay(self) -> int:
        return self.scenario.one_way_delay_us


def build_access_path(sim: Simulator, scenario: ScenarioConfig) -> AccessPath:
    geo = scenario.geo_link()
    to_client: List[Receiver] = []
    to_server: List[Receiver] = []

    def client_rx(packet: Packet) -> None:
        for cb in to_client:
            cb(packet)

    def server_rx(packet: Packet) -> None:
        for cb in to_server:
            cb(packet)

    prefix = "ntn" if scenario.is_nr else "dvb"
    noise_ms = scenario.nr.noise_ms if scenario.is_nr else scenario.dvb.noise_ms
    client_noise = int(round(noise_ms * 1000))
    server_noise = client_noise if scenario.noise_scope == "both" else 0
    client_host = HostStage(sim, f"{prefix}.client", client_noise, client_rx)
    server_host = HostStage(sim, f"{prefix}.server", server_noise, server_rx)

    if not scenario.framing:
        forward = IdealPipe(sim, f"{prefix}.fwd", geo, client_host.arrive)
        ret = IdealPipe(sim, f"{prefix}.ret", geo, server_host.arrive)
        bound = float("inf")
    elif scenario.is_nr:
        forward, ret, bound = _build_nr(sim, scenario, geo, client_host, server_host)
    else:
        forward, ret, bound = _build_dvb(sim, scenario, geo, client_host, server_host)
    return AccessPath(
        scenario=scenario, forward=forward, ret=ret, client_host=client_host,
        server_host=server_host, goodput_bound_kBps=bound,
        to_client=to_client, to_server=to_server,
    )


def _build_nr(sim: Simulator, scenario: ScenarioConfig, geo: GeoLink, client_host: HostStage, server_host: HostStage):
    nr = scenario.nr
    carrier = scenario.nr_carrier()
    slot = carrier.slot_duration
    bits = slot_capacity_bits(scenario.nr_scheme(), carrier, scenario.nr_rate_override())
    overhead = NrOverheadModel(nr.per_packet_header, nr.per_tb_header, nr.fragment_header)
    if bits // 8 <= overhead.per_tb_header + overhead.per_packet_header + overhead.fragment_header:
        raise ValueError(f"[ntn] slot capacity of {bits} bits cannot carry payload")

    def build(queue: PacketQueue, now: int) -> Optional[CarrierFrame]:
        return build_transport_block(queue, bits, overhead, start_at=now, airtime=slot)

    forward = FramedForwardLink(sim, "ntn.fwd", geo, slot, build, client_host.arrive)
    access = UplinkAccessState(
        sr_opportunity_period=nr.sr_period_slots * slot, koffset=scenario.koffset(), slot_duration=slot,
    )
    ret = ScheduledReturnLink(
        sim, "ntn.ret", geo,
        period=nr.ul_grant_period_slots * slot,
        offset=0,
        standing_bytes=bits // 8,
        headers=ReturnHeaders(
            first=nr.per_packet_header, cont=nr.fragment_header,
            split=nr.fragment_header, burst=nr.per_tb_header,
        ),
        grant_delay=lambda t: uplink_access_delay(access, t),
        receiver=server_host.arrive,
        burst_airtime=slot,
    )
    bound = nr_bound_kBps(bits, slot)
    logger.debug("[ntn] slot=%dus tb=%d bits bound=%.1f kB/s koffset=%d", slot, bits, bound, scenario.koffset())
    return forward, ret, bound


def _build_dvb(sim: Simulator, scenario: ScenarioConfig, geo: GeoLink, client_host: HostStage, server_host: HostStage):
    dvb = scenario.dvb
    bbframe = make_bbframe(
        scenario.fecframe_bits, scenario.dvb_scheme(), scenario.dvb_carrier(), scenario.dvb_rate_override(),
    )

    def build(queue: PacketQueue, now: int) -> Optional[CarrierFrame]:
        return build_bbframe(queue, bbframe, now, dvb.gse_first_header, dvb.gse_cont_header)

    forward = FramedForwardLink(
        sim, "dvb.fwd", geo, bbframe.airtime, build, client_host.arrive,
        assembly_timer=int(round(dvb.assembly_timer_ms * 1000)),
        full_bytes=bbframe.payload_capacity_bits // 8,
        per_packet_header=dvb.gse_first_header,
    )
    schedule = ReturnSchedule(
        superframe_period=int(round(dvb.superframe_ms * 1000)),
        terminal_slot_offset=int(round(dvb.terminal_slot_offset_ms * 1000)),
        grant_exchange=dvb.grant_exchange,
        grant_round_trip=geo.rtt,
        standing_bytes=dvb.standing_bytes,
    )
    ret = ScheduledReturnLink(
        sim, "dvb.ret", geo,
        period=schedule.superframe_period,
        offset=schedule.terminal_slot_offset,
        standing_bytes=schedule.standing_bytes if schedule.grant_exchange else None,
        headers=ReturnHeaders(first=dvb.gse_first_header, cont=dvb.gse_cont_header),
        grant_delay=(lambda t: return_access_delay(schedule, t)) if schedule.grant_exchange else None,
        receiver=server_host.arrive,
    )
    bound = dvb_bound_kBps(bbframe)
    logger.debug(
        "[dvb] bbframe airtime=%dus info=%d bits bound=%.1f kB/s superframe=%dus",
        bbframe.airtime, bbframe.payload_capacity_bits, bound, schedule.superframe_period,
    )
    return forward, ret, bound
