"""Closed-form long-run throughput of fixed vs. adaptive rate under a random jammer.

The adaptive side is modelled as a climb through "rungs": a recovery rung
that delivers the jammed throughput ``F``, then one rung per intermediate
rate from the floor up to the fixed rate, each delivering the saturated
goodput times the link's PDR at that rate.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, NamedTuple, Optional

from scipy.optimize import bisect

from .jammers import JammerProfile
from .phy import DEFAULT_RATE_TABLE, RateTable
from .rate_control import DwellProfile


@dataclass(frozen=True)
class JammerMoments:
    e_sleep_s: float
    e_active_s: float

    def __post_init__(self):
        if self.e_sleep_s <= 0 or self.e_active_s <= 0:
            raise ValueError("jammer moments must be positive")

    @classmethod
    def of(cls, profile: JammerProfile) -> "JammerMoments":
        return cls(profile.mean_sleep_s, profile.mean_active_s)

    @property
    def cycle_s(self) -> float:
        return self.e_sleep_s + self.e_active_s


@dataclass(frozen=True)
class AnalyticInputs:
    moments: JammerMoments
    app_rate_mbps: float
    pdr_f: float = 1.0
    F: float = 0.0
    dwell: DwellProfile = field(default_factory=DwellProfile)
    table: RateTable = DEFAULT_RATE_TABLE
    # PDR of the adaptive climb at each rate (default: full delivery)
    rung_pdr: Mapping[float, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.pdr_f <= 1.0:
            raise ValueError("pdr_f must lie in [0, 1]")
        if self.F < 0:
            raise ValueError("F must be non-negative")
        if self.F > self.table.saturated(self.table.lowest):
            raise ValueError("F cannot exceed the saturated rate of the lowest rate")

    @property
    def fixed_rate(self) -> float:
        return self.table.fixed_rate_for(self.app_rate_mbps)

    @property
    def saturated_rate(self) -> float:
        return self.table.saturated(self.fixed_rate)

    def with_pdr(self, pdr_f: float) -> "AnalyticInputs":
        return replace(self, pdr_f=pdr_f)


class Rung(NamedTuple):
    duration_s: float
    goodput_mbps: float


def _rung_goodput(inputs: AnalyticInputs, rate: float) -> float:
    return inputs.table.saturated(rate) * inputs.rung_pdr.get(rate, 1.0)


def climb(inputs: AnalyticInputs) -> tuple[list[Rung], float]:
    """Rungs of the post-jam climb and the goodput once converged."""
    table, target = inputs.table, inputs.fixed_rate
    rungs = []
    if inputs.dwell.recovery_s > 0:
        rungs.append(Rung(inputs.dwell.recovery_s, inputs.F))
    for rate in table.rates[: table.index(target)]:
        rungs.append(Rung(inputs.dwell.at(rate), _rung_goodput(inputs, rate)))
    return rungs, _rung_goodput(inputs, target)


def convergence_time(inputs: AnalyticInputs) -> float:
    return sum(r.duration_s for r in climb(inputs)[0])


def sleep_goodput(inputs: AnalyticInputs, sleep_s: float) -> float:
    """Megabits the adaptive link delivers during a sleep period of ``sleep_s``."""
    rungs, top = climb(inputs)
    delivered, t = 0.0, 0.0
    for rung in rungs:
        if t + rung.duration_s > sleep_s:
            return delivered + (sleep_s - t) * rung.goodput_mbps
        delivered += rung.duration_s * rung.goodput_mbps
        t += rung.duration_s
    return delivered + (sleep_s - t) * top


def t_fixed(inputs: AnalyticInputs) -> float:
    m = inputs.moments
    return (m.e_sleep_s * inputs.pdr_f * inputs.saturated_rate + m.e_active_s * inputs.F) / m.cycle_s


def t_adapt(inputs: AnalyticInputs) -> float:
    """Long-run adaptive throughput from the expected sleep/active durations.

    With no rungs at all the adaptive link behaves as a fixed link at its
    rung PDR.
    """
    m = inputs.moments
    rungs, top = climb(inputs)
    if not rungs:
        return t_fixed(inputs.with_pdr(inputs.rung_pdr.get(inputs.fixed_rate, 1.0)))
    x = sum(r.duration_s for r in rungs)
    if x < m.e_sleep_s:
        climbed = sum(r.duration_s * r.goodput_mbps for r in rungs)
        return ((m.e_sleep_s - x) * top + climbed + m.e_active_s * inputs.F) / m.cycle_s
    n = highest_full_rung(inputs)
    done = rungs[:n]
    spent = sum(r.duration_s for r in done)
    partial = rungs[n].goodput_mbps if n < len(rungs) else top
    climbed = sum(r.duration_s * r.goodput_mbps for r in done)
    return (climbed + (m.e_sleep_s - spent) * partial + m.e_active_s * inputs.F) / m.cycle_s


def adapt_case(inputs: AnalyticInputs) -> int:
    """1 when the climb completes within the mean sleep time, else 2."""
    return 1 if convergence_time(inputs) < inputs.moments.e_sleep_s else 2


def highest_full_rung(inputs: AnalyticInputs) -> int:
    """Number of rungs fully completed within the mean sleep time."""
    n, t = 0, 0.0
    for rung in climb(inputs)[0]:
        if t + rung.duration_s > inputs.moments.e_sleep_s:
            break
        t += rung.duration_s
        n += 1
    return n


def t_adapt_uniform(inputs: AnalyticInputs, sleep: tuple[float, float]) -> float:
    """Adaptive throughput averaged over a uniform sleep distribution.

    The cumulative climb goodput is piecewise linear in the sleep time, so
    its mean over U[a, b] is a sum of trapezoids between breakpoints.
    """
    a, b = sleep
    m = inputs.moments
    if b <= a:
        mean_sleep_goodput = sleep_goodput(inputs, a)
    else:
        points = [a]
        t = 0.0
        for rung in climb(inputs)[0]:
            t += rung.duration_s
            if a < t < b:
                points.append(t)
        points.append(b)
        area = sum(
            0.5 * (sleep_goodput(inputs, lo) + sleep_goodput(inputs, hi)) * (hi - lo)
            for lo, hi in zip(points, points[1:])
        )
        mean_sleep_goodput = area / (b - a)
    return (mean_sleep_goodput + m.e_active_s * inputs.F) / (0.5 * (a + b) + m.e_active_s)


class Threshold(NamedTuple):
    value: float
    bounded: bool  # True when no crossing exists in [0, 1] and ``value`` is a boundary


def pdr_threshold(inputs: AnalyticInputs, xtol: float = 1e-4) -> Threshold:
    """PDR at the fixed rate where fixed and adaptive throughput are equal."""

    def gap(p: float) -> float:
        x = inputs.with_pdr(p)
        return t_fixed(x) - t_adapt(x)

    lo, hi = gap(0.0), gap(1.0)
    if lo > 0:
        return Threshold(0.0, True)
    if hi <= 0:
        return Threshold(1.0, True)
    if lo == 0:
        return Threshold(0.0, False)
    return Threshold(bisect(gap, 0.0, 1.0, xtol=xtol), False)


def classify_link(inputs: AnalyticInputs) -> str:
    return "lossy" if t_fixed(inputs) <= t_adapt(inputs) else "lossless"


@dataclass(frozen=True)
class AnalysisRow:
    fixed_rate: float
    pdr_f: Optional[float]
    t_fixed: Optional[float]
    t_adapt: float
    threshold: float
    threshold_bounded: bool
    classification: Optional[str]
    case: int

    def as_dict(self) -> dict:
        return asdict(self)


def analyze(inputs: AnalyticInputs, with_pdr: bool = True) -> AnalysisRow:
    th = pdr_threshold(inputs)
    return AnalysisRow(
        fixed_rate=inputs.fixed_rate,
        pdr_f=inputs.pdr_f if with_pdr else None,
        t_fixed=t_fixed(inputs) if with_pdr else None,
        t_adapt=t_adapt(inputs),
        threshold=th.value,
        threshold_bounded=th.bounded,
        classification=classify_link(inputs) if with_pdr else None,
        case=adapt_case(inputs),
    )


def calibrate_recovery(inputs: AnalyticInputs, target_threshold: float, hi_s: Optional[float] = None) -> DwellProfile:
    """Recovery time that places the PDR threshold at ``target_threshold``.

    The threshold falls monotonically as recovery grows, so this is a
    one-dimensional root find over ``[0, hi_s]``.
    """
    hi_s = inputs.moments.e_sleep_s if hi_s is None else hi_s

    def gap(r: float) -> float:
        x = replace(inputs, dwell=replace(inputs.dwell, recovery_s=r))
        return pdr_threshold(x, xtol=1e-9).value - target_threshold

    r = bisect(gap, 0.0, hi_s, xtol=1e-9)
    return replace(inputs.dwell, recovery_s=r)
