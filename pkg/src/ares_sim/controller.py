"""Network-level anti-jamming decision flow.

Per detection window the controller looks at each link's detector output
and decides whether to tune CCA/power, hand the link to a rate module, or
restore defaults. It never touches the radio itself; the engine applies the
returned actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional, Sequence

from .analytics import AnalyticInputs, classify_link
from .config import ControllerConfig
from .phy import RssiMatrix
from .power_control import cca_guard
from .rate_control import Transition


class Stage(str, Enum):
    IDLE = "idle"
    SETTLING = "settling"  # CCA just changed, waiting before judging the residual impact
    TUNED = "tuned"
    RATE = "rate"


@dataclass(frozen=True)
class LinkObservation:
    link_id: str
    jammed: bool
    transition: Transition
    throughput_mbps: float
    isolated_mbps: float  # pdr x saturated goodput at the link's current rate
    rssi: RssiMatrix
    jammer_energy: bool
    app_rate_mbps: float = 54.0
    pdr_at_fixed: float = 1.0


@dataclass(frozen=True)
class Action:
    kind: str  # tune_cca | activate_rate | restore
    link_id: Optional[str] = None
    detail: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class LinkControl:
    stage: Stage = Stage.IDLE
    settle_left: int = 0
    quiet_windows: int = 0
    isolated_mbps: float = 0.0


@dataclass(frozen=True)
class ControllerState:
    links: Mapping[str, LinkControl] = field(default_factory=dict)
    cca_tuned: bool = False

    @property
    def quiescent(self) -> bool:
        return not self.cca_tuned and all(c.stage is Stage.IDLE for c in self.links.values())


def _rate_action(obs: LinkObservation, cfg: ControllerConfig) -> Optional[Action]:
    if cfg.rate_module == "off":
        return None
    if cfg.rate_module == "mrc":
        return Action("activate_rate", obs.link_id, {"module": "mrc", "K": cfg.K})
    a = cfg.analytic
    inputs = AnalyticInputs(a.moments, obs.app_rate_mbps, obs.pdr_at_fixed, a.F, a.dwell)
    decision = "adaptive" if classify_link(inputs) == "lossy" else "fixed"
    return Action("activate_rate", obs.link_id, {"module": "analytic", "decision": decision})


def tick(
    state: ControllerState, observations: Sequence[LinkObservation], cfg: ControllerConfig
) -> tuple[ControllerState, list[Action]]:
    """Advance the decision flow by one detection window."""
    if not cfg.enabled:
        return state, []
    actions: list[Action] = []
    links = dict(state.links)
    cca_tuned = state.cca_tuned
    power_allowed = cfg.cca_tunable and cfg.cooperation and cfg.power_mode != "off"

    for obs in observations:
        c = links.get(obs.link_id, LinkControl())
        quiet = not obs.jammed and not obs.jammer_energy
        c = replace(c, quiet_windows=c.quiet_windows + 1 if quiet else 0)
        if c.stage is Stage.IDLE and not obs.jammed:
            c = replace(c, isolated_mbps=max(c.isolated_mbps, obs.isolated_mbps))

        if c.stage is Stage.IDLE and obs.transition is Transition.SLEEP_TO_ACTIVE:
            if power_allowed and cca_guard(obs.rssi, cfg.delta_db):
                if not cca_tuned:
                    actions.append(Action("tune_cca", obs.link_id, {"mode": cfg.power_mode}))
                    cca_tuned = True
                c = replace(c, stage=Stage.SETTLING, settle_left=cfg.settle_windows)
            else:
                act = _rate_action(obs, cfg)
                if act is not None:
                    actions.append(act)
                    c = replace(c, stage=Stage.RATE)
        elif c.stage is Stage.SETTLING:
            if c.settle_left > 0:
                c = replace(c, settle_left=c.settle_left - 1)
            elif obs.throughput_mbps < (1.0 - cfg.deficit_tol) * c.isolated_mbps:
                act = _rate_action(obs, cfg)
                if act is not None:
                    actions.append(act)
                c = replace(c, stage=Stage.RATE if act is not None else Stage.TUNED)
            else:
                c = replace(c, stage=Stage.TUNED)
        links[obs.link_id] = c

    if (cca_tuned or any(c.stage is not Stage.IDLE for c in links.values())) and all(
        c.quiet_windows >= cfg.hold_down_windows for c in links.values()
    ):
        actions.append(Action("restore"))
        links = {k: LinkControl(isolated_mbps=v.isolated_mbps) for k, v in links.items()}
        cca_tuned = False

    return ControllerState(links, cca_tuned), actions
