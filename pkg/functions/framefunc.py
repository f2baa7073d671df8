"""Packet and carrier-frame records shared by both access stacks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class Packet:
    """One application-layer IP datagram travelling through a link."""

    packet_id: int
    flow: str
    size: int
    created_at: int
    kind: str = "data"
    data: Optional[bytes] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def trace_detail(self) -> str:
        return f"{self.flow}:{self.kind}:{self.packet_id}:{self.size}"


@dataclass
class Piece:
    """A slice of one packet carried inside a frame (whole packet when first and last)."""

    packet: Packet
    offset: int
    length: int
    header: int = 0
    index: int = 0

    @property
    def first(self) -> bool:
        return self.offset == 0

    @property
    def last(self) -> bool:
        return self.offset + self.length == self.packet.size

    @property
    def whole(self) -> bool:
        return self.first and self.last


@dataclass
class CarrierFrame:
    """One PHY transmission unit: an NR transport block or a DVB BBFRAME."""

    label: str
    capacity_bits: int
    start_at: int
    airtime: int
    pieces: List[Piece] = field(default_factory=list)
    frame_header: int = 0

    @property
    def end_at(self) -> int:
        return self.start_at + self.airtime

    @property
    def occupied_bytes(self) -> int:
        return self.frame_header + sum(p.length + p.header for p in self.pieces)

    @property
    def payload_bytes(self) -> int:
        return sum(p.length for p in self.pieces)

    def completed_packets(self) -> List[Packet]:
        return [p.packet for p in self.pieces if p.last]

    def trace_detail(self) -> str:
        return f"{self.label}:{len(self.pieces)}:{self.occupied_bytes}B"


class PacketQueue:
    """FIFO of packets whose head may be partially sent."""

    def __init__(self):
        self._items: List[tuple] = []
        self._head = 0
        self.head_offset = 0
        self.head_pieces = 0
        self.queued_bytes = 0

    def __len__(self) -> int:
        return len(self._items) - self._head

    def __bool__(self) -> bool:
        return self._head < len(self._items)

    def push(self, packet: Packet, now: int) -> None:
        self._items.append((packet, now))
        self.queued_bytes += packet.size

    def oldest_enqueue_time(self) -> Optional[int]:
        if not self:
            return None
        return self._items[self._head][1]

    @property
    def head_started(self) -> bool:
        return self.head_offset > 0

    def remaining_of_head(self) -> int:
        packet, _ = self._items[self._head]
        return packet.size - self.head_offset

    def take(self, nbytes: int) -> Piece:
        """Remove up to nbytes of the head packet and return that slice."""
        packet, _ = self._items[self._head]
        offset = self.head_offset
        index = self.head_pieces
        length = min(nbytes, packet.size - offset)
        self.head_offset += length
        self.head_pieces += 1
        self.queued_bytes -= length
        if self.head_offset >= packet.size:
            self._head += 1
            self.head_offset = 0
            self.head_pieces = 0
            if self._head > 4096 and self._head * 2 > len(self._items):
                del self._items[: self._head]
                self._head = 0
        return Piece(packet=packet, offset=offset, length=length, index=index)


class Reassembler:
    """Receiver side of byte-granular fragmentation; rejects gaps and reordering."""

    def __init__(self):
        self._expect: Dict[int, tuple] = {}

    def push(self, piece: Piece) -> Optional[Packet]:
        pid = piece.packet.packet_id
        offset, index = self._expect.get(pid, (0, 0))
        if piece.offset != offset or piece.index != index:
            raise ValueError(
                f"fragment out of sequence for packet {pid}: got offset={piece.offset} "
                f"index={piece.index}, expected offset={offset} index={index}"
            )
        if piece.last:
            self._expect.pop(pid, None)
            return piece.packet
        self._expect[pid] = (offset + piece.length, index + 1)
        return None

    def discard(self, packet_id: int) -> None:
        """Forget a partially received packet; its later pieces are rejected too."""
        self._expect.pop(packet_id, None)

    @property
    def partial(self) -> int:
        return len(self._expect)


def next_grid_point(t: int, period: int, offset: int = 0) -> int:
    """Smallest offset + k * period that is >= t."""
    if period <= 0:
        raise ValueError("period must be > 0")
    if t <= offset:
        return offset
    k = -(-(t - offset) // period)
    return offset + k * period
