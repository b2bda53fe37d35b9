"""CCA/power tuning: the per-link rule, uniform network assignment, and a
beacon-flooding distributed variant with convergence accounting.

Transmit power and CCA are kept jointly consistent across a connected
network: every node transmits at the maximum power and uses the same CCA,
so ``power_dbm + cca_dbm`` is equal network-wide.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import networkx as nx
import numpy as np

from .phy import NOISE_FLOOR_DBM, RssiMatrix, sinr_db


@dataclass(frozen=True)
class PowerControlConfig:
    delta_db: float = 5.0
    max_power_dbm: float = 20.0
    default_cca_dbm: float = -80.0
    mode: str = "centralized"  # centralized | distributed | off

    def __post_init__(self):
        if self.delta_db < 0:
            raise ValueError("delta_db must be non-negative")
        if self.mode not in ("centralized", "distributed", "off"):
            raise ValueError(f"unknown power control mode {self.mode!r}")


@dataclass(frozen=True)
class LinkRssi:
    tx: str
    rx: str
    rssi: RssiMatrix

    @property
    def key(self) -> tuple[str, str]:
        return (self.tx, self.rx)


@dataclass(frozen=True)
class CcaAssignment:
    cca_dbm: Mapping[str, float]
    power_dbm: Mapping[str, float]
    epoch: int = 0

    def power_cca_sum(self) -> dict[str, float]:
        return {n: self.power_dbm[n] + self.cca_dbm[n] for n in self.cca_dbm}


def cca_guard(rssi: RssiMatrix, delta_db: float) -> bool:
    """Whether raising CCA can push the jammer below threshold while keeping the link."""
    return rssi.jammer_max <= rssi.link_min - delta_db


def cca_rule(rssi: RssiMatrix, delta_db: float, current_cca: float) -> float:
    if cca_guard(rssi, delta_db):
        return rssi.link_min - delta_db
    return current_cca


def jamming_free(rssi: RssiMatrix, delta_db: float) -> bool:
    return rssi.jammer_max <= rssi.link_min - 2 * delta_db


def _nodes(links: Iterable[LinkRssi]) -> list[str]:
    seen: dict[str, None] = {}
    for l in links:
        seen.setdefault(l.tx)
        seen.setdefault(l.rx)
    return list(seen)


def network_cca(links: Sequence[LinkRssi], delta_db: float) -> float:
    """Highest uniform CCA that keeps every link's Delta margin."""
    if not links:
        raise ValueError("no links to assign")
    return min(l.rssi.link_min for l in links) - delta_db


def centralized_assign(
    links: Sequence[LinkRssi], cfg: PowerControlConfig, epoch: int = 0, raise_only: bool = False
) -> CcaAssignment:
    cca = network_cca(links, cfg.delta_db)
    if raise_only:
        cca = max(cca, cfg.default_cca_dbm)
    nodes = _nodes(links)
    return CcaAssignment({n: cca for n in nodes}, {n: cfg.max_power_dbm for n in nodes}, epoch)


@dataclass
class DistributedState:
    """Each node's partial view: the links whose RSSI it has learned so far."""

    views: dict[str, dict[tuple[str, str], RssiMatrix]]
    epoch: int = 0
    rounds: int = 0

    @classmethod
    def initial(cls, links: Sequence[LinkRssi]) -> "DistributedState":
        views: dict[str, dict[tuple[str, str], RssiMatrix]] = {n: {} for n in _nodes(links)}
        for l in links:
            views[l.tx][l.key] = l.rssi
            views[l.rx][l.key] = l.rssi
        return cls(views)

    def node_cca(self, node: str, delta_db: float) -> float:
        return min(r.link_min for r in self.views[node].values()) - delta_db


def neighbours(links: Sequence[LinkRssi]) -> dict[str, list[str]]:
    adj: dict[str, list[str]] = {n: [] for n in _nodes(links)}
    for l in links:
        if l.rx not in adj[l.tx]:
            adj[l.tx].append(l.rx)
        if l.tx not in adj[l.rx]:
            adj[l.rx].append(l.tx)
    return adj


BeaconLoss = Union[float, Mapping[tuple[str, str], float], Callable[[str, str], float]]


def _loss_fn(loss: BeaconLoss) -> Callable[[str, str], float]:
    if callable(loss):
        return loss
    if isinstance(loss, Mapping):
        return lambda s, r: float(loss.get((s, r), 0.0))
    p = float(loss)
    if not 0.0 <= p <= 1.0:
        raise ValueError("beacon loss probability must lie in [0, 1]")
    return lambda s, r: p


def distributed_round(
    state: DistributedState,
    links: Sequence[LinkRssi],
    beacon_loss: BeaconLoss,
    cfg: PowerControlConfig,
    rng: np.random.Generator,
) -> tuple[DistributedState, CcaAssignment, bool]:
    """One beacon interval: every node broadcasts its view, receivers merge what they decode.

    ``beacon_loss`` gives the probability that the beacon from sender to
    receiver is lost (scalar, per directed edge, or a callable).
    """
    loss = _loss_fn(beacon_loss)
    adj = neighbours(links)
    snapshot = {n: dict(v) for n, v in state.views.items()}
    new_views = {n: dict(v) for n, v in state.views.items()}
    for sender in sorted(adj):
        for receiver in adj[sender]:
            # always draw so runs at different loss levels share random numbers
            if rng.random() < loss(sender, receiver):
                continue
            new_views[receiver].update(snapshot[sender])
    nodes = list(new_views)
    cca = {n: min(r.link_min for r in new_views[n].values()) - cfg.delta_db for n in nodes}
    target = network_cca(links, cfg.delta_db)
    converged = all(cca[n] == target and len(new_views[n]) == len(links) for n in nodes)
    epoch = state.epoch + (1 if new_views != state.views else 0)
    assignment = CcaAssignment(cca, {n: cfg.max_power_dbm for n in nodes}, epoch)
    return DistributedState(new_views, epoch, state.rounds + 1), assignment, converged


def capture_failure_probability(margin_db: float, threshold_db: float, delta_db: float) -> float:
    """P(margin + u < threshold) with shadowing u ~ U[-delta, delta]."""
    if delta_db <= 0:
        return 1.0 if margin_db < threshold_db else 0.0
    x = (threshold_db - margin_db + delta_db) / (2 * delta_db)
    return min(max(x, 0.0), 1.0)


def beacon_loss_probability(
    beacon_rssi_dbm: float,
    jammer_rssi_dbm: Optional[float],
    duty: float,
    delta_db: float,
    threshold_db: float = 6.0,
    noise_floor_dbm: float = NOISE_FLOOR_DBM,
) -> float:
    """Fraction of beacons lost: jammer audible for ``duty`` of the round, capture fails under shadowing."""
    if jammer_rssi_dbm is None or duty <= 0.0:
        margin = beacon_rssi_dbm - noise_floor_dbm
        return capture_failure_probability(margin, threshold_db, delta_db)
    jammed = capture_failure_probability(
        sinr_db(beacon_rssi_dbm, [jammer_rssi_dbm], noise_floor_dbm), threshold_db, delta_db
    )
    clear = capture_failure_probability(beacon_rssi_dbm - noise_floor_dbm, threshold_db, delta_db)
    return duty * jammed + (1.0 - duty) * clear


@dataclass(frozen=True)
class ConvergenceResult:
    rounds: Optional[int]
    time_s: Optional[float]
    assignment: CcaAssignment

    @property
    def converged(self) -> bool:
        return self.rounds is not None


def run_until_converged(
    links: Sequence[LinkRssi],
    beacon_loss: BeaconLoss,
    cfg: PowerControlConfig,
    rng: np.random.Generator,
    beacon_interval_s: float = 0.1,
    max_rounds: int = 10_000,
) -> ConvergenceResult:
    state = DistributedState.initial(links)
    assignment = None
    for _ in range(max_rounds):
        state, assignment, done = distributed_round(state, links, beacon_loss, cfg, rng)
        if done:
            return ConvergenceResult(state.rounds, state.rounds * beacon_interval_s, assignment)
    return ConvergenceResult(None, None, assignment)


def diameter(links: Sequence[LinkRssi]) -> int:
    g = nx.Graph()
    g.add_edges_from(l.key for l in links)
    return nx.diameter(g)
