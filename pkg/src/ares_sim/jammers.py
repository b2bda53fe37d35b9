"""Jammer process models: constant, deceptive, random and reactive."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .phy import DIFS_S


class JammerKind(str, Enum):
    CONSTANT = "constant"
    DECEPTIVE = "deceptive"
    RANDOM = "random"
    REACTIVE = "reactive"


class Phase(str, Enum):
    SLEEPING = "sleeping"
    ACTIVE = "active"


@dataclass(frozen=True)
class JammerProfile:
    kind: JammerKind = JammerKind.RANDOM
    sleep: tuple[float, float] = (1.0, 8.0)
    active: tuple[float, float] = (1.0, 5.0)
    tx_power_dbm: float = 18.0
    packet_bytes: int = 1500
    jam_rate_mbps: float = 6.0
    # (time_s, rssi_offset_db) breakpoints, linearly interpolated
    mobility: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", JammerKind(self.kind))
        a, b = self.sleep
        c, d = self.active
        if not (0 <= a <= b and 0 <= c <= d):
            raise ValueError(f"bad jammer distributions sleep={self.sleep} active={self.active}")
        if self.kind is JammerKind.RANDOM and d <= 0:
            raise ValueError("random jammer needs a positive active period")
        times = [t for t, _ in self.mobility]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("mobility breakpoints must have increasing times")

    @property
    def mean_sleep_s(self) -> float:
        return 0.5 * (self.sleep[0] + self.sleep[1])

    @property
    def mean_active_s(self) -> float:
        return 0.5 * (self.active[0] + self.active[1])

    @property
    def duty_cycle(self) -> float:
        if self.kind in (JammerKind.CONSTANT, JammerKind.DECEPTIVE):
            return 1.0
        return self.mean_active_s / (self.mean_active_s + self.mean_sleep_s)

    @property
    def packet_airtime_s(self) -> float:
        return self.packet_bytes * 8 / (self.jam_rate_mbps * 1e6)

    def rssi_offset_db(self, t_s: float) -> float:
        if not self.mobility:
            return 0.0
        ts, offs = zip(*self.mobility)
        return float(np.interp(t_s, ts, offs))


# name -> (sleep U[a,b], active U[c,d]) in seconds
PRESET_DISTRIBUTIONS: dict[str, tuple[tuple[float, float], tuple[float, float]]] = {
    "balanced": ((1.0, 8.0), (1.0, 5.0)),
    "rare": ((1.0, 5.0), (1.0, 2.0)),
    "frequent": ((1.0, 2.0), (1.0, 15.0)),
    # used when measuring the fixed-vs-adaptive thresholds
    "balanced-validation": ((0.0, 4.0), (1.0, 6.0)),
    # MIMO WLAN / neighbour-AP experiments
    "balanced-mimo": ((1.0, 6.0), (1.0, 5.0)),
    # mesh experiment with a mobile jammer
    "frequent-mobile": ((0.0, 1.0), (1.0, 20.0)),
}


def preset(name: str, **overrides) -> JammerProfile:
    try:
        sleep, active = PRESET_DISTRIBUTIONS[name]
    except KeyError:
        raise KeyError(f"unknown jammer preset {name!r}; known: {sorted(PRESET_DISTRIBUTIONS)}") from None
    return JammerProfile(kind=JammerKind.RANDOM, sleep=sleep, active=active, **overrides)


@dataclass(frozen=True)
class JammerState:
    phase: Phase
    phase_remaining_s: float
    cycle_index: int = 0


def _draw(bounds: tuple[float, float], rng: np.random.Generator, quantum_s: float) -> float:
    x = float(rng.uniform(bounds[0], bounds[1]))
    if quantum_s > 0:
        x = round(x / quantum_s) * quantum_s
    return x


def sample_sleep(profile: JammerProfile, rng: np.random.Generator, quantum_s: float = 0.0) -> float:
    return _draw(profile.sleep, rng, quantum_s)


def sample_active(profile: JammerProfile, rng: np.random.Generator, quantum_s: float = 0.0) -> float:
    return _draw(profile.active, rng, quantum_s)


def initial_state(profile: JammerProfile, rng: np.random.Generator, quantum_s: float = 0.0) -> JammerState:
    """Random jammers start asleep; the others are always emitting (or armed)."""
    if profile.kind is JammerKind.RANDOM:
        return JammerState(Phase.SLEEPING, sample_sleep(profile, rng, quantum_s))
    return JammerState(Phase.ACTIVE, math.inf)


def advance(
    state: JammerState,
    profile: JammerProfile,
    dt: float,
    rng: np.random.Generator,
    quantum_s: float = 0.0,
) -> JammerState:
    """Advance the jammer by ``dt`` seconds, drawing fresh durations at every phase change."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if profile.kind is not JammerKind.RANDOM:
        return state
    phase, remaining, cycle = state.phase, state.phase_remaining_s, state.cycle_index
    left = dt
    while left >= remaining:
        left -= remaining
        if phase is Phase.SLEEPING:
            phase, remaining = Phase.ACTIVE, sample_active(profile, rng, quantum_s)
        else:
            phase, remaining = Phase.SLEEPING, sample_sleep(profile, rng, quantum_s)
            cycle += 1
    return replace(state, phase=phase, phase_remaining_s=remaining - left, cycle_index=cycle)


def is_emitting(profile: JammerProfile, state: JammerState) -> bool:
    """Whether the jammer is putting energy on the air (reactive jammers: only on sensed traffic)."""
    if profile.kind is JammerKind.REACTIVE:
        return False
    return state.phase is Phase.ACTIVE


@dataclass(frozen=True)
class Emission:
    kind: str  # "continuous" | "packetized" | "silent"
    gap_s: float = 0.0
    packet_airtime_s: float = 0.0

    @property
    def access_probability(self) -> float:
        """Chance that a deferring legitimate sender grabs the medium in a gap."""
        if self.kind == "silent":
            return 1.0
        if self.kind == "continuous":
            return 0.0
        return self.gap_s / (self.gap_s + self.packet_airtime_s)


def emission_pattern(
    profile: JammerProfile,
    active: bool = True,
    traffic_sensed: bool = True,
    difs_s: float = DIFS_S,
    min_backoff_s: float = 0.0,
) -> Emission:
    if profile.kind is JammerKind.REACTIVE:
        if not traffic_sensed:
            return Emission("silent")
        return Emission("continuous")
    if not active:
        return Emission("silent")
    if profile.kind is JammerKind.CONSTANT:
        return Emission("continuous")
    # back-to-back broadcast frames with the minimum deferral between them
    return Emission("packetized", gap_s=difs_s + min_backoff_s, packet_airtime_s=profile.packet_airtime_s)


def reactive_jam_probability(packet_bytes: int, rate_mbps: float, difs_s: float = DIFS_S) -> float:
    """Chance the sensing delay, uniform on [0, DIFS], is shorter than the packet's flight time."""
    if packet_bytes <= 0 or rate_mbps <= 0:
        raise ValueError("packet size and rate must be positive")
    t_flight = packet_bytes * 8 / (rate_mbps * 1e6)
    return min(max(t_flight / difs_s, 0.0), 1.0)


def reactive_jam_success(
    packet_bytes: int, rate_mbps: float, difs_s: float, rng: np.random.Generator
) -> bool:
    if packet_bytes <= 0 or rate_mbps <= 0:
        raise ValueError("packet size and rate must be positive")
    t_flight = packet_bytes * 8 / (rate_mbps * 1e6)
    t_sense = rng.uniform(0.0, difs_s)
    return bool(t_sense < t_flight)
