"""5G-NTN link layer: FDD slot grid, transport-block filling, grant-based uplink."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import config
from functions.channelfunc import CodingScheme, NrCarrier
from functions.framefunc import CarrierFrame, PacketQueue, next_grid_point


@dataclass(frozen=True)
class NrOverheadModel:
    per_packet_header: int = config.NR_PER_PACKET_HEADER
    per_tb_header: int = config.NR_PER_TB_HEADER
    # reassembly header carried by every piece of a split packet
    fragment_header: int = config.NR_FRAGMENT_HEADER

    def __post_init__(self):
        if min(self.per_packet_header, self.per_tb_header, self.fragment_header) < 0:
            raise ValueError("NR overheads must be >= 0")


@dataclass
class SlotGrid:
    slot_duration: int
    offset: int = 0

    def next_boundary(self, t: int) -> int:
        return next_grid_point(t, self.slot_duration, self.offset)


@dataclass
class UplinkAccessState:
    sr_opportunity_period: int  # us
    koffset: int  # slots
    slot_duration: int  # us
    sr_offset: int = 0

    @property
    def grant_delay(self) -> int:
        return self.koffset * self.slot_duration


def slot_capacity_bits(scheme: CodingScheme, carrier: NrCarrier, phy_rate_override: Optional[float] = None) -> int:
    """Bits per slot at the fixed MCS (or at an overriding effective PHY rate)."""
    if scheme.family != "nr":
        raise ValueError(f"{scheme.label} is not an NR scheme")
    if phy_rate_override is not None:
        return int(math.floor(phy_rate_override * carrier.slot_duration / 1e6 + 1e-9))
    return int(math.floor(scheme.spectral_efficiency * carrier.bandwidth * carrier.slot_duration / 1e6 + 1e-9))


def capacity_bound_kBps(slot_bits: int, slot_duration: int) -> float:
    return slot_bits * (1e6 / slot_duration) / 8 / 1000


def build_transport_block(
    queue: PacketQueue,
    capacity_bits: int,
    overhead: NrOverheadModel,
    start_at: int = 0,
    airtime: int = 1000,
) -> Optional[CarrierFrame]:
    """Fill one TB from the queue; None when the queue is empty (slot idles).

    Whole packets go in while they fit, the packet that does not fit is split
    byte-wise and its remainder waits for the next slot.
    """
    if not queue:
        return None
    space = capacity_bits // 8 - overhead.per_tb_header
    tb = CarrierFrame(
        label="TB", capacity_bits=capacity_bits, start_at=start_at, airtime=airtime,
        frame_header=overhead.per_tb_header,
    )
    while queue and space > 0:
        started = queue.head_started
        pkt_hdr = 0 if started else overhead.per_packet_header
        frag_hdr = overhead.fragment_header if started else 0
        rem = queue.remaining_of_head()
        if pkt_hdr + frag_hdr + rem <= space:
            piece = queue.take(rem)
            piece.header = pkt_hdr + frag_hdr
            space -= piece.header + piece.length
            tb.pieces.append(piece)
            continue
        # head does not fit: it becomes a leading fragment of its packet
        avail = space - pkt_hdr - overhead.fragment_header
        if avail <= 0:
            break
        piece = queue.take(avail)
        piece.header = pkt_hdr + overhead.fragment_header
        tb.pieces.append(piece)
        space = 0
    if not tb.pieces:
        return None
    return tb


def uplink_access_delay(state: UplinkAccessState, request_time: int) -> int:
    """Delay until the first granted uplink byte may depart.

    Wait for the next SR opportunity, then koffset slots; the koffset covers
    the SR flight to the gNB and the grant travelling back.
    """
    sr_at = next_grid_point(request_time, state.sr_opportunity_period, state.sr_offset)
    return (sr_at - request_time) + state.grant_delay
