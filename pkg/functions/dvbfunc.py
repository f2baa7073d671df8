"""DVB-S2/RCS2 link layer: GSE into BBFRAMEs, TDM forward timing, scheduled return."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional

import config
from functions.channelfunc import CodingScheme, DvbCarrier
from functions.framefunc import CarrierFrame, PacketQueue, next_grid_point


@dataclass(frozen=True)
class GsePdu:
    parent_packet: int
    fragment_index: int
    length: int
    gse_header: int
    start: bool
    end: bool
    payload: Optional[bytes] = None

    @property
    def size(self) -> int:
        return self.length + self.gse_header


@dataclass(frozen=True)
class BbFrame:
    fecframe_bits: int
    scheme: CodingScheme
    payload_capacity_bits: int
    airtime: int  # us


@dataclass(frozen=True)
class ReturnSchedule:
    superframe_period: int  # us
    terminal_slot_offset: int = 0  # us
    grant_exchange: bool = True
    grant_round_trip: int = 2 * int(config.ONE_WAY_DELAY_MS * 1000)
    standing_bytes: int = config.DVB_STANDING_BYTES

    def __post_init__(self):
        if self.superframe_period <= 0:
            raise ValueError("superframe_period must be > 0")
        if not 0 <= self.terminal_slot_offset < self.superframe_period:
            raise ValueError("terminal_slot_offset must be within one superframe")

    def next_opportunity(self, t: int) -> int:
        return next_grid_point(t, self.superframe_period, self.terminal_slot_offset)


def bbframe_info_bits(fecframe_bits: int, code_rate: float) -> int:
    if fecframe_bits not in config.FECFRAME_BITS.values():
        raise ValueError(f"unsupported FECFRAME length: {fecframe_bits}")
    return int(math.floor(code_rate * fecframe_bits + 1e-9)) - config.BBHEADER_BITS


def bbframe_airtime(fecframe_bits: int, scheme: CodingScheme, carrier: DvbCarrier) -> int:
    if scheme.modulation_order < 1:
        raise ValueError("modulation_order must be >= 1")
    symbols = fecframe_bits / scheme.modulation_order
    return int(round(symbols / carrier.symbol_rate * 1e6))


def make_bbframe(
    fecframe_bits: int,
    scheme: CodingScheme,
    carrier: DvbCarrier,
    info_rate_override: Optional[float] = None,
) -> BbFrame:
    info = bbframe_info_bits(fecframe_bits, scheme.code_rate)
    if info_rate_override is not None:
        airtime = int(round(info / info_rate_override * 1e6))
    else:
        airtime = bbframe_airtime(fecframe_bits, scheme, carrier)
    return BbFrame(fecframe_bits=fecframe_bits, scheme=scheme, payload_capacity_bits=info, airtime=airtime)


def info_rate_bps(frame: BbFrame) -> float:
    return frame.payload_capacity_bits / (frame.airtime / 1e6)


def gse_fill(
    queue: PacketQueue,
    capacity_bits: int,
    first_header: int = config.GSE_FIRST_HEADER,
    cont_header: int = config.GSE_CONT_HEADER,
) -> List:
    """Take pieces for one BBFRAME: whole packets plus at most one trailing fragment."""
    space = capacity_bits // 8
    pieces = []
    while queue and space > 0:
        hdr = cont_header if queue.head_started else first_header
        rem = queue.remaining_of_head()
        if hdr + rem <= space:
            piece = queue.take(rem)
            piece.header = hdr
            space -= hdr + piece.length
            pieces.append(piece)
            continue
        avail = space - hdr
        if avail <= 0:
            break
        piece = queue.take(avail)
        piece.header = hdr
        pieces.append(piece)
        break
    return pieces


def gse_encapsulate(
    queue: PacketQueue,
    capacity_bits: int,
    first_header: int = config.GSE_FIRST_HEADER,
    cont_header: int = config.GSE_CONT_HEADER,
) -> List[GsePdu]:
    """GSE PDUs filling one BBFRAME; payload bytes are sliced when packets carry data."""
    out: List[GsePdu] = []
    for piece in gse_fill(queue, capacity_bits, first_header, cont_header):
        data = piece.packet.data
        out.append(
            GsePdu(
                parent_packet=piece.packet.packet_id,
                fragment_index=piece.index,
                length=piece.length,
                gse_header=piece.header,
                start=piece.first,
                end=piece.last,
                payload=None if data is None else data[piece.offset: piece.offset + piece.length],
            )
        )
    return out


def build_bbframe(
    queue: PacketQueue,
    frame: BbFrame,
    start_at: int,
    first_header: int = config.GSE_FIRST_HEADER,
    cont_header: int = config.GSE_CONT_HEADER,
) -> Optional[CarrierFrame]:
    pieces = gse_fill(queue, frame.payload_capacity_bits, first_header, cont_header)
    if not pieces:
        return None
    return CarrierFrame(
        label="BBFRAME",
        capacity_bits=frame.payload_capacity_bits,
        start_at=start_at,
        airtime=frame.airtime,
        pieces=pieces,
    )


def gse_reassemble(pdus: Iterable[GsePdu]) -> Dict[int, bytes]:
    """Rebuild packets from PDUs in arrival order; indices must run 0, 1, 2, ..."""
    partial: Dict[int, List[bytes]] = {}
    done: Dict[int, bytes] = {}
    for pdu in pdus:
        if pdu.payload is None:
            raise ValueError(f"PDU of packet {pdu.parent_packet} carries no payload bytes")
        parts = partial.get(pdu.parent_packet)
        if pdu.start:
            if parts is not None or pdu.fragment_index != 0:
                raise ValueError(f"unexpected start fragment for packet {pdu.parent_packet}")
            parts = []
            partial[pdu.parent_packet] = parts
        elif parts is None or pdu.fragment_index != len(parts):
            raise ValueError(
                f"fragment {pdu.fragment_index} of packet {pdu.parent_packet} out of sequence"
            )
        parts.append(pdu.payload)
        if pdu.end:
            done[pdu.parent_packet] = b"".join(partial.pop(pdu.parent_packet))
    if partial:
        raise ValueError(f"incomplete packets left after reassembly: {sorted(partial)}")
    return done


def return_access_delay(schedule: ReturnSchedule, request_time: int) -> int:
    """Delay until the first granted return byte may depart.

    Wait for the next terminal opportunity; with a grant exchange the request
    rides that burst and the grant is usable at the first opportunity one
    round trip later.
    """
    first = schedule.next_opportunity(request_time)
    if not schedule.grant_exchange:
        return first - request_time
    granted_at = schedule.next_opportunity(first + schedule.grant_round_trip)
    return granted_at - request_time


def capacity_bound_kBps(frame: BbFrame) -> float:
    return info_rate_bps(frame) / 8 / 1000
