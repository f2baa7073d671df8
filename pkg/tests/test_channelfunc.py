import pytest

import config
from functions.channelfunc import (
    DvbCarrier,
    GeoLink,
    LinkBudget,
    NrCarrier,
    check_decodable,
    dvb_scheme,
    ecef_granules,
    is_decodable,
    koffset_slots,
    link_snr,
    nominal_bandwidth_nr,
    nr_scheme,
    occupied_bandwidth_dvb,
    propagate,
    ta_common_granules,
)
from functions.errors import ConfigError
from functions.framefunc import CarrierFrame


def test_nr_nominal_bandwidth():
    assert nominal_bandwidth_nr(25, 15_000) == 4_500_000
    assert NrCarrier(25, 15_000).bandwidth == 4_500_000


@pytest.mark.parametrize("scs,slot", [(15_000, 1000), (30_000, 500), (60_000, 250)])
def test_slot_duration_follows_numerology(scs, slot):
    assert NrCarrier(25, scs).slot_duration == slot


def test_invalid_carrier_rejected():
    with pytest.raises(ValueError):
        NrCarrier(25, 20_000)
    with pytest.raises(ValueError):
        NrCarrier(0, 15_000)
    with pytest.raises(ValueError):
        DvbCarrier(5e6, 1.5)


def test_dvb_occupied_bandwidth():
    assert occupied_bandwidth_dvb(5e6, 0.35) == pytest.approx(6_750_000)
    assert DvbCarrier(5e6, 0.0).bandwidth == pytest.approx(5e6)
    with pytest.raises(ValueError):
        occupied_bandwidth_dvb(5e6, -0.1)


def test_default_links_are_decodable():
    dvb_snr = link_snr(LinkBudget(config.CLEAR_SKY_DB, config.ATTENUATION_DB))
    nr_snr = link_snr(LinkBudget(config.NR_CLEAR_SKY_DB, config.NR_ATTENUATION_DB))
    assert dvb_snr == 6.0
    assert nr_snr == -3.0
    assert is_decodable(dvb_snr, dvb_scheme(1))
    assert is_decodable(nr_snr, nr_scheme(1))


def test_below_threshold_refuses_to_start():
    with pytest.raises(ConfigError) as exc:
        check_decodable(5.9, dvb_scheme(1))
    assert exc.value.key_path == "budget"


def test_nr_scheme_efficiency_is_order_times_rate():
    scheme = nr_scheme(1)
    assert scheme.spectral_efficiency == pytest.approx(2 * 0.0762)


def test_unknown_scheme_index():
    with pytest.raises(ValueError):
        nr_scheme(99)
    with pytest.raises(ValueError):
        dvb_scheme(99)


def test_ta_common_floor_division():
    assert ta_common_granules(260_000) == 63_850_687
    assert ta_common_granules(0) == 0
    # one granule is 4.072 ns
    assert ta_common_granules(0.004072) == 1
    assert ta_common_granules(0.004071) == 0


def test_koffset_covers_rtt():
    assert koffset_slots(520_000, 1000) == 520
    assert koffset_slots(520_001, 1000) == 521
    assert koffset_slots(0, 1000) == 0


def test_ecef_granules_at_geo_altitude():
    assert ecef_granules(config.GEO_ALTITUDE_M) == config.ECEF_PUBLISHED == 27_527_692


def test_geo_link_validation():
    assert GeoLink(260_000).rtt == 520_000
    with pytest.raises(ValueError):
        GeoLink(-1)
    with pytest.raises(ValueError):
        GeoLink(10, payload_mode="regenerative")
    with pytest.raises(ValueError):
        GeoLink(10, loss_rate=1.0)


def test_propagate_adds_delay_after_airtime(sim):
    arrivals = []
    sim.register("rx", lambda frame: arrivals.append((sim.now, frame.label)))
    frame = CarrierFrame(label="TB", capacity_bits=685, start_at=0, airtime=1000)
    propagate(sim, frame, GeoLink(260_000), "rx")
    sim.run_until_idle(10**7)
    assert arrivals == [(261_000, "TB")]


def test_propagate_loss_knob_drops_everything_near_one(sim):
    sim.register("rx", lambda frame: None)
    link = GeoLink(1_000, loss_rate=0.999999)
    dropped = sum(
        propagate(sim, CarrierFrame("F", 8, 0, 0), link, "rx") is None for _ in range(50)
    )
    assert dropped == 50
