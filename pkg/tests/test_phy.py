import math

import mpmath
import pytest
from hypothesis import given, strategies as st

from ares_sim.phy import (
    DEFAULT_RATE_TABLE,
    RadioConfig,
    RateTable,
    RssiMatrix,
    UnknownRateError,
    can_capture,
    capture_probability,
    pdr,
    power_sum_dbm,
    sinr_db,
)

dbm = st.floats(-100, 0, allow_nan=False)


def test_sinr_matches_high_precision_oracle():
    mpmath.mp.dps = 40
    mw = lambda x: mpmath.power(10, mpmath.mpf(x) / 10)
    oracle = 10 * mpmath.log10(mw(-60) / (mw(-95) + mw(-70)))
    assert sinr_db(-60, [-70], -95) == pytest.approx(float(oracle), abs=1e-12)
    assert sinr_db(-60, [-70], -95) == pytest.approx(9.98628807167317, abs=1e-12)


def test_power_sum_of_equal_powers_adds_three_db():
    assert power_sum_dbm([-70, -70]) == pytest.approx(-70 + 10 * math.log10(2))


def test_rate_table_lookups():
    t = DEFAULT_RATE_TABLE
    assert t.rates == (6, 9, 12, 18, 24, 36, 48, 54)
    assert t.saturated(36) == 26
    assert t.sinr_threshold(54) == 24.6
    assert t.fixed_rate_for(40.5) == 48
    assert t.fixed_rate_for(6) == 6
    with pytest.raises(ValueError):
        t.fixed_rate_for(60)
    with pytest.raises(UnknownRateError):
        t.index(11)


@pytest.mark.parametrize("rows", [
    [(6, 6, 6.0), (6, 6, 7.0)],        # nominal not increasing
    [(6, 7, 6.0)],                     # saturated above nominal
    [(6, 6, 8.0), (9, 9, 7.0)],        # thresholds decreasing
])
def test_rate_table_rejects_inconsistent_rows(rows):
    with pytest.raises(ValueError):
        RateTable.from_rows(rows)


def test_capture_follows_rate_threshold():
    rx = RadioConfig(18.0, -80.0)
    # about 20 dB SINR: enough for 24 Mbps, not for 48 Mbps
    assert can_capture(rx, -50, [-70], 24)
    assert not can_capture(rx, -50, [-70], 48)
    # below the receiver's CCA nothing is decoded
    assert not can_capture(rx, -85, [], 6)


def test_smoothed_capture_is_half_at_threshold():
    rx = RadioConfig(18.0, -95.0, -95.0)
    signal = -95.0 + DEFAULT_RATE_TABLE.sinr_threshold(12)
    assert capture_probability(rx, signal, [], 12, smoothing_db=1.0) == pytest.approx(0.5)
    assert capture_probability(rx, signal, [], 12) == 1.0


def test_pdr_validation():
    assert pdr(0.7, True) == 0.7
    assert pdr(0.7, False) == 0.0
    with pytest.raises(ValueError):
        pdr(1.2, True)


def test_rssi_matrix_summaries():
    m = RssiMatrix(-40, -45, -60, -55)
    assert (m.link_min, m.jammer_max, m.rssi_j) == (-45, -55, -60)


@given(dbm, dbm, st.floats(0, 30))
def test_sinr_decreases_with_more_interference(signal, interferer, extra):
    assert sinr_db(signal, [interferer + extra]) <= sinr_db(signal, [interferer]) + 1e-9


@given(dbm, st.floats(0, 30), st.sampled_from(DEFAULT_RATE_TABLE.rates), st.floats(0, 3))
def test_capture_monotone_in_signal(signal, boost, rate, smoothing):
    rx = RadioConfig(18.0, -90.0)
    lo = capture_probability(rx, signal, [-75], rate, smoothing_db=smoothing)
    hi = capture_probability(rx, signal + boost, [-75], rate, smoothing_db=smoothing)
    assert hi >= lo - 1e-12


@given(dbm)
def test_lower_rates_capture_whenever_higher_rates_do(signal):
    rx = RadioConfig(18.0, -90.0)
    ok = [can_capture(rx, signal, [-80], r) for r in DEFAULT_RATE_TABLE.rates]
    assert all(a or not b for a, b in zip(ok, ok[1:]))
