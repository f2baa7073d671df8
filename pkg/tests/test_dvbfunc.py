import pytest

from functions.channelfunc import DvbCarrier, dvb_scheme
from functions.dvbfunc import (
    GsePdu,
    ReturnSchedule,
    bbframe_airtime,
    bbframe_info_bits,
    build_bbframe,
    capacity_bound_kBps,
    gse_encapsulate,
    gse_fill,
    gse_reassemble,
    info_rate_bps,
    make_bbframe,
    return_access_delay,
)
from functions.framefunc import Packet, PacketQueue

CARRIER = DvbCarrier(5e6, 0.35)


def _queue(*sizes, with_data=False):
    q = PacketQueue()
    for i, size in enumerate(sizes, start=1):
        data = bytes((i + k) % 256 for k in range(size)) if with_data else None
        q.push(Packet(packet_id=i, flow="f", size=size, created_at=0, data=data), 0)
    return q


@pytest.mark.parametrize(
    "fec,rate,expected",
    [(64_800, 0.2, 12_880), (16_200, 0.2, 3_160), (64_800, 1.0, 64_720)],
)
def test_bbframe_info_bits(fec, rate, expected):
    assert bbframe_info_bits(fec, rate) == expected


def test_bbframe_info_bits_rejects_unknown_length():
    with pytest.raises(ValueError):
        bbframe_info_bits(32_000, 0.5)


@pytest.mark.parametrize(
    "fec,symbol_rate,expected",
    [(64_800, 5e6, 6_480), (16_200, 5e6, 1_620), (64_800, 32.4e6, 1_000)],
)
def test_bbframe_airtime(fec, symbol_rate, expected):
    assert bbframe_airtime(fec, dvb_scheme(1), DvbCarrier(symbol_rate, 0.35)) == expected


def test_capacity_true_frame_rate():
    frame = make_bbframe(64_800, dvb_scheme(1), CARRIER)
    assert frame.airtime == 6_480
    assert info_rate_bps(frame) == pytest.approx(1_987_654.3, rel=1e-6)
    assert capacity_bound_kBps(frame) == pytest.approx(248.457, rel=1e-4)


def test_override_rescales_airtime():
    frame = make_bbframe(64_800, dvb_scheme(1), CARRIER, 2.24e6)
    assert frame.payload_capacity_bits == 12_880
    assert frame.airtime == 5_750


def test_gse_fill_whole_then_one_trailing_fragment():
    q = _queue(1_000, 1_000, 1_000)
    pieces = gse_fill(q, 12_880)
    assert [(p.length, p.header, p.first, p.last) for p in pieces] == [
        (1_000, 10, True, True),
        (590, 10, True, False),
    ]
    nxt = gse_fill(q, 12_880)
    assert (nxt[0].length, nxt[0].header, nxt[0].last) == (410, 3, True)


def test_build_bbframe_empty_queue():
    frame = make_bbframe(64_800, dvb_scheme(1), CARRIER)
    assert build_bbframe(PacketQueue(), frame, 0) is None


def test_build_bbframe_stays_within_capacity():
    frame = make_bbframe(64_800, dvb_scheme(1), CARRIER)
    q = _queue(*([1_500] * 5))
    bb = build_bbframe(q, frame, start_at=100)
    assert bb.label == "BBFRAME"
    assert bb.end_at == 100 + 6_480
    assert bb.occupied_bytes <= 12_880 // 8


def test_gse_roundtrip_is_byte_identical():
    q = _queue(1, 1_609, 5_000, 65_536, with_data=True)
    sent = {i: bytes((i + k) % 256 for k in range(s)) for i, s in enumerate((1, 1_609, 5_000, 65_536), start=1)}
    pdus = []
    while q:
        pdus.extend(gse_encapsulate(q, 12_880))
    assert all(p.size <= 1_610 for p in pdus)
    assert gse_reassemble(pdus) == sent


def test_gse_reassemble_rejects_missing_fragment():
    pdus = [
        GsePdu(1, 0, 3, 10, start=True, end=False, payload=b"abc"),
        GsePdu(1, 2, 3, 3, start=False, end=True, payload=b"ghi"),
    ]
    with pytest.raises(ValueError):
        gse_reassemble(pdus)


def test_gse_reassemble_rejects_incomplete_packet():
    with pytest.raises(ValueError):
        gse_reassemble([GsePdu(1, 0, 3, 10, start=True, end=False, payload=b"abc")])


def test_return_schedule_validation():
    with pytest.raises(ValueError):
        ReturnSchedule(superframe_period=0)
    with pytest.raises(ValueError):
        ReturnSchedule(superframe_period=32_000, terminal_slot_offset=32_000)


def test_return_access_delay_with_and_without_grant_exchange():
    with_exchange = ReturnSchedule(superframe_period=32_000, grant_round_trip=520_000)
    assert return_access_delay(with_exchange, 1) == 576_000 - 1
    standing = ReturnSchedule(superframe_period=32_000, grant_exchange=False)
    assert return_access_delay(standing, 1) == 32_000 - 1

