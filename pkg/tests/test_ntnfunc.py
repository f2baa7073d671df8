import pytest

from functions.channelfunc import NrCarrier, dvb_scheme, nr_scheme
from functions.framefunc import Packet, PacketQueue
from functions.ntnfunc import (
    NrOverheadModel,
    SlotGrid,
    UplinkAccessState,
    build_transport_block,
    capacity_bound_kBps,
    slot_capacity_bits,
    uplink_access_delay,
)

CARRIER = NrCarrier(25, 15_000)


def _queue(*sizes):
    q = PacketQueue()
    for i, size in enumerate(sizes, start=1):
        q.push(Packet(packet_id=i, flow="f", size=size, created_at=0), 0)
    return q


def test_slot_capacity_at_fixed_mcs():
    bits = slot_capacity_bits(nr_scheme(1), CARRIER)
    assert bits == 685
    assert capacity_bound_kBps(bits, CARRIER.slot_duration) == pytest.approx(85.625)


def test_slot_capacity_with_rate_override():
    assert slot_capacity_bits(nr_scheme(1), CARRIER, 4.99e6) == 4990


def test_slot_capacity_rejects_dvb_scheme():
    with pytest.raises(ValueError):
        slot_capacity_bits(dvb_scheme(1), CARRIER)


def test_empty_queue_idles_the_slot():
    assert build_transport_block(PacketQueue(), 685, NrOverheadModel()) is None


def test_whole_packets_then_stop_when_next_header_does_not_fit():
    q = _queue(50, 100)
    tb = build_transport_block(q, 685, NrOverheadModel())
    assert [p.length for p in tb.pieces] == [50]
    assert tb.pieces[0].header == 23
    assert tb.occupied_bytes == 3 + 23 + 50
    assert len(q) == 1


def test_large_packet_spans_slots_and_keeps_bytes():
    q = _queue(200)
    overhead = NrOverheadModel()
    pieces = []
    while q:
        tb = build_transport_block(q, 685, overhead)
        assert tb.occupied_bytes <= 685 // 8
        pieces.extend(tb.pieces)
    assert [p.length for p in pieces] == [57, 80, 63]
    assert [p.header for p in pieces] == [25, 2, 2]
    assert sum(p.length for p in pieces) == 200
    assert pieces[-1].last


def test_negative_overhead_rejected():
    with pytest.raises(ValueError):
        NrOverheadModel(per_packet_header=-1)


def test_slot_grid_boundary():
    grid = SlotGrid(slot_duration=1000)
    assert grid.next_boundary(0) == 0
    assert grid.next_boundary(1) == 1000


def test_uplink_access_waits_for_sr_then_koffset():
    state = UplinkAccessState(sr_opportunity_period=10_000, koffset=520, slot_duration=1000)
    assert state.grant_delay == 520_000
    assert uplink_access_delay(state, 1) == 9_999 + 520_000
    assert uplink_access_delay(state, 10_000) == 520_000
