"""Static PHY tables and pure link-level predicates.

Power values are in dBm, ratios in dB, rates in Mbps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

NOISE_FLOOR_DBM = -95.0

# 802.11a/g OFDM timing
SLOT_TIME_S = 9e-6
SIFS_S = 16e-6
DIFS_S = SIFS_S + 2 * SLOT_TIME_S  # 34 us


class UnknownRateError(KeyError):
    """A nominal rate is not present in the rate table."""


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0.0:
        return -math.inf
    return 10.0 * math.log10(mw)


def power_sum_dbm(values_dbm: Iterable[float]) -> float:
    """Sum powers given in dBm in the linear domain."""
    return mw_to_dbm(sum(dbm_to_mw(v) for v in values_dbm))


@dataclass(frozen=True)
class RateEntry:
    nominal_mbps: float
    saturated_mbps: float
    sinr_threshold_db: float


@dataclass(frozen=True)
class RateTable:
    """Rate ladder: nominal rate, saturated goodput and SINR decode threshold."""

    entries: tuple[RateEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("rate table must not be empty")
        for lo, hi in zip(self.entries, self.entries[1:]):
            if hi.nominal_mbps <= lo.nominal_mbps:
                raise ValueError("nominal rates must be strictly increasing")
            if hi.saturated_mbps < lo.saturated_mbps:
                raise ValueError("saturated rates must be non-decreasing")
            if hi.sinr_threshold_db < lo.sinr_threshold_db:
                raise ValueError("SINR thresholds must be non-decreasing")
        for e in self.entries:
            if e.saturated_mbps > e.nominal_mbps:
                raise ValueError(f"saturated rate exceeds nominal rate at {e.nominal_mbps} Mbps")
            if e.saturated_mbps <= 0:
                raise ValueError("saturated rates must be positive")

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> "RateTable":
        return cls(tuple(RateEntry(float(r[0]), float(r[1]), float(r[2])) for r in rows))

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(e.nominal_mbps for e in self.entries)

    @property
    def lowest(self) -> float:
        return self.entries[0].nominal_mbps

    @property
    def highest(self) -> float:
        return self.entries[-1].nominal_mbps

    def index(self, rate: float) -> int:
        for i, e in enumerate(self.entries):
            if e.nominal_mbps == rate:
                return i
        raise UnknownRateError(f"rate {rate} Mbps not in table {self.rates}")

    def entry(self, rate: float) -> RateEntry:
        return self.entries[self.index(rate)]

    def saturated(self, rate: float) -> float:
        return self.entry(rate).saturated_mbps

    def sinr_threshold(self, rate: float) -> float:
        return self.entry(rate).sinr_threshold_db

    def fixed_rate_for(self, app_rate_mbps: float) -> float:
        """Smallest nominal rate that is at least the application rate."""
        for e in self.entries:
            if e.nominal_mbps >= app_rate_mbps:
                return e.nominal_mbps
        raise ValueError(
            f"application rate {app_rate_mbps} Mbps exceeds table maximum {self.highest} Mbps"
        )

    def to_rows(self) -> list[list[float]]:
        return [[e.nominal_mbps, e.saturated_mbps, e.sinr_threshold_db] for e in self.entries]


# Saturated goodput measured per nominal rate, and per-rate SINR decode thresholds.
DEFAULT_RATE_TABLE = RateTable.from_rows(
    [
        (6, 6, 6.0),
        (9, 9, 7.8),
        (12, 12, 9.0),
        (18, 18, 10.8),
        (24, 24, 17.0),
        (36, 26, 18.8),
        (48, 27, 24.0),
        (54, 27, 24.6),
    ]
)


@dataclass(frozen=True)
class RadioConfig:
    tx_power_dbm: float = 18.0
    cca_threshold_dbm: float = -80.0
    noise_floor_dbm: float = NOISE_FLOOR_DBM

    def __post_init__(self):
        if self.cca_threshold_dbm < self.noise_floor_dbm:
            raise ValueError("CCA threshold below noise floor")
        if not -10.0 <= self.tx_power_dbm <= 30.0:
            raise ValueError(f"tx power {self.tx_power_dbm} dBm outside [-10, 30]")


@dataclass(frozen=True)
class RssiMatrix:
    """RSSI seen on one legitimate link.

    ``tr``: transmitter signal at the receiver, ``rt``: reverse direction,
    ``jt``/``jr``: jammer signal at the transmitter/receiver.
    """

    tr: float
    rt: float
    jt: float
    jr: float
    rssi_j: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rssi_j", min(self.jt, self.jr))

    @property
    def link_min(self) -> float:
        return min(self.tr, self.rt)

    @property
    def jammer_max(self) -> float:
        return max(self.jt, self.jr)


def sinr_db(signal_dbm: float, interferers_dbm: Sequence[float], noise_floor_dbm: float = NOISE_FLOOR_DBM) -> float:
    denom = dbm_to_mw(noise_floor_dbm) + sum(dbm_to_mw(i) for i in interferers_dbm)
    return 10.0 * math.log10(dbm_to_mw(signal_dbm) / denom)


def medium_busy(observer: RadioConfig, incident_rssi_dbm: float) -> bool:
    return incident_rssi_dbm >= observer.cca_threshold_dbm


def can_capture(
    receiver: RadioConfig,
    desired_rssi_dbm: float,
    interferers_dbm: Sequence[float],
    rate: float,
    table: RateTable = DEFAULT_RATE_TABLE,
) -> bool:
    threshold = table.sinr_threshold(rate)
    if desired_rssi_dbm < receiver.cca_threshold_dbm:
        return False
    return sinr_db(desired_rssi_dbm, interferers_dbm, receiver.noise_floor_dbm) >= threshold


def capture_probability(
    receiver: RadioConfig,
    desired_rssi_dbm: float,
    interferers_dbm: Sequence[float],
    rate: float,
    table: RateTable = DEFAULT_RATE_TABLE,
    smoothing_db: float = 0.0,
) -> float:
    """Decode probability as a function of SINR.

    With ``smoothing_db == 0`` this is the hard step of :func:`can_capture`;
    otherwise a logistic of that width centred on the rate's threshold.
    """
    threshold = table.sinr_threshold(rate)
    if desired_rssi_dbm < receiver.cca_threshold_dbm:
        return 0.0
    margin = sinr_db(desired_rssi_dbm, interferers_dbm, receiver.noise_floor_dbm) - threshold
    if smoothing_db <= 0.0:
        return 1.0 if margin >= 0.0 else 0.0
    z = margin / smoothing_db
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)  # avoids overflow for large negative margins
    return e / (1.0 + e)


def pdr(link_base_pdr: float, capture_ok: bool) -> float:
    if not 0.0 <= link_base_pdr <= 1.0:
        raise ValueError("base PDR must lie in [0, 1]")
    return link_base_pdr if capture_ok else 0.0
