"""Rate policies: fixed rate, a dwell-parameterised ladder adapter, and MRC.

The ladder stands in for SampleRate/Onoe/AMRR-style adapters. Its only
algorithm-specific input is the :class:`DwellProfile`, i.e. how long it sits
at each rate under good conditions before trying the next one up.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional, Union

from .phy import DEFAULT_RATE_TABLE, RateTable

_EPS = 1e-9
GOOD_PDR = 0.9


class Feedback(str, Enum):
    GOOD = "good"
    BAD = "bad"


class Transition(str, Enum):
    NONE = "none"
    ACTIVE_TO_SLEEP = "active->sleep"
    SLEEP_TO_ACTIVE = "sleep->active"


def feedback_from_pdr(pdr: float) -> Feedback:
    return Feedback.GOOD if pdr >= GOOD_PDR else Feedback.BAD


@dataclass(frozen=True)
class DwellProfile:
    """Time spent at each rate before stepping up.

    ``recovery_s`` is the time the adapter keeps delivering at the jammed
    level after conditions turn good, before its first step from the floor.
    """

    y: Mapping[float, float] = field(default_factory=dict)
    default_s: float = 1.25
    recovery_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "y", {float(k): float(v) for k, v in dict(self.y).items()})
        if self.default_s < 0 or self.recovery_s < 0 or any(v < 0 for v in self.y.values()):
            raise ValueError("dwell times must be non-negative")

    def at(self, rate: float) -> float:
        return self.y.get(float(rate), self.default_s)

    def convergence_time(self, floor: float, target: float, table: RateTable = DEFAULT_RATE_TABLE) -> float:
        """Recovery plus the dwell at every rate from ``floor`` up to (excluding) ``target``."""
        lo, hi = table.index(floor), table.index(target)
        return self.recovery_s + sum(self.at(r) for r in table.rates[lo:hi])

    def scaled(self, factor: float) -> "DwellProfile":
        return DwellProfile(
            {k: v * factor for k, v in self.y.items()}, self.default_s * factor, self.recovery_s * factor
        )

    def to_dict(self) -> dict:
        return {"default_s": self.default_s, "recovery_s": self.recovery_s, "y": {str(k): v for k, v in self.y.items()}}


@dataclass(frozen=True)
class FixedPolicy:
    rate: float


@dataclass(frozen=True)
class LadderState:
    rates: tuple[float, ...]  # allowed rungs, floor first, ceiling last
    index: int = 0
    time_at_rate_s: float = 0.0
    stalled: bool = False
    recovery_left_s: float = 0.0

    @property
    def rate(self) -> float:
        return self.rates[self.index]

    @property
    def at_floor(self) -> bool:
        return self.index == 0

    @property
    def at_ceiling(self) -> bool:
        return self.index == len(self.rates) - 1

    @property
    def delivering(self) -> bool:
        return not self.stalled and self.recovery_left_s <= 0.0


@dataclass(frozen=True)
class MrcState:
    inner: LadderState
    K: int
    remembered_rate: Optional[float] = None
    cycles_since_rescan: int = 0
    believes_jammed: bool = False
    rescanning: bool = True

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")

    @property
    def rate(self) -> float:
        return self.inner.rate


RatePolicyState = Union[FixedPolicy, LadderState, MrcState]


def new_ladder(table: RateTable = DEFAULT_RATE_TABLE, ceiling: Optional[float] = None, start: Optional[float] = None) -> LadderState:
    top = table.index(table.highest if ceiling is None else ceiling)
    rates = table.rates[: top + 1]
    idx = 0 if start is None else rates.index(start)
    return LadderState(rates=rates, index=idx)


def ladder_step(state: LadderState, feedback: Feedback, dt: float, dwell: DwellProfile) -> LadderState:
    """Advance the ladder by ``dt`` seconds of uniform feedback.

    Bad feedback drops one rung per call and resets the dwell timer; bad
    feedback at the floor stalls the adapter, which then needs
    ``dwell.recovery_s`` of good feedback before it delivers again. Good
    feedback climbs one rung per full dwell, possibly several within ``dt``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if feedback is Feedback.BAD:
        if state.at_floor:
            return replace(state, time_at_rate_s=0.0, stalled=True, recovery_left_s=dwell.recovery_s)
        return replace(state, index=state.index - 1, time_at_rate_s=0.0)

    index, t_at, left = state.index, state.time_at_rate_s, dt
    recovery = state.recovery_left_s if state.stalled else 0.0
    if recovery > 0.0:
        used = min(recovery, left)
        recovery -= used
        left -= used
    if recovery > _EPS:
        return replace(state, stalled=True, recovery_left_s=recovery, time_at_rate_s=0.0)
    top = len(state.rates) - 1
    while left > _EPS:
        if index == top:
            t_at += left
            break
        need = max(dwell.at(state.rates[index]) - t_at, 0.0)
        if left + _EPS >= need:
            left -= need
            index, t_at = index + 1, 0.0
        else:
            t_at += left
            left = 0.0
    return LadderState(rates=state.rates, index=index, time_at_rate_s=t_at, stalled=False, recovery_left_s=0.0)


def time_to_next_move(state: LadderState, feedback: Feedback, dwell: DwellProfile) -> Optional[float]:
    """Seconds of constant feedback until the ladder changes rung or stall state (None: never)."""
    if feedback is Feedback.BAD:
        if state.at_floor and state.stalled and state.recovery_left_s == dwell.recovery_s:
            return None
        return 0.0
    if state.stalled:
        if state.recovery_left_s > 0.0:
            return state.recovery_left_s
        return 0.0
    if state.at_ceiling:
        return None
    return max(dwell.at(state.rate) - state.time_at_rate_s, 0.0)


def mrc_transition(state: MrcState, transition: Transition) -> MrcState:
    """Apply one detected jammer edge.

    Every active->sleep edge advances the cycle counter. Once it reaches K,
    or when nothing is remembered yet, the inner ladder rescans from where it
    is and the memory restarts; otherwise the ladder jumps straight to the
    remembered rate.
    """
    if transition is Transition.NONE:
        return state
    if transition is Transition.SLEEP_TO_ACTIVE:
        return replace(state, believes_jammed=True)
    cycles = state.cycles_since_rescan + 1
    if state.remembered_rate is None or cycles >= state.K:
        return replace(state, believes_jammed=False, cycles_since_rescan=0, rescanning=True, remembered_rate=None)
    inner = state.inner
    if state.remembered_rate in inner.rates:
        inner = replace(
            inner,
            index=inner.rates.index(state.remembered_rate),
            time_at_rate_s=0.0,
            stalled=False,
            recovery_left_s=0.0,
        )
    return replace(state, inner=inner, believes_jammed=False, cycles_since_rescan=cycles, rescanning=False)


def mrc_step(
    state: MrcState,
    transition: Transition,
    feedback: Feedback,
    dt: float,
    dwell: DwellProfile,
) -> MrcState:
    """MRC layered over the inner ladder; ``transition`` comes from the detector."""
    state = mrc_transition(state, transition)
    remembered = state.remembered_rate
    if not state.believes_jammed and feedback is Feedback.GOOD and state.inner.delivering:
        remembered = state.inner.rate if remembered is None else max(remembered, state.inner.rate)
    inner = ladder_step(state.inner, feedback, dt, dwell)
    return replace(state, inner=inner, remembered_rate=remembered)


def choose_policy(decision: str, app_rate_mbps: float, table: RateTable = DEFAULT_RATE_TABLE) -> RatePolicyState:
    rate = table.fixed_rate_for(app_rate_mbps)
    if decision == "fixed":
        return FixedPolicy(rate)
    if decision == "adaptive":
        return new_ladder(table, ceiling=rate)
    raise ValueError(f"unknown decision {decision!r}")


def current_rate(state: RatePolicyState) -> float:
    return state.rate
