"""Jamming detection from the consistency of windowed PDR and RSSI.

A low delivery ratio together with a strong received signal points to
jamming; a low delivery ratio with a weak signal is just a poor link.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .rate_control import Transition


@dataclass(frozen=True)
class DetectorConfig:
    window_s: float = 0.5
    pdr_low: float = 0.1
    rssi_margin_db: float = 20.0
    confirm_count: int = 2
    default_cca_dbm: float = -80.0

    def __post_init__(self):
        if self.window_s <= 0:
            raise ValueError("window_s must be positive")
        if self.confirm_count < 1:
            raise ValueError("confirm_count must be at least 1")

    @property
    def max_latency_s(self) -> float:
        return self.confirm_count * self.window_s


@dataclass(frozen=True)
class DetectorState:
    window_s: float = 0.5
    pdr_window: float = 1.0
    mean_rssi_dbm: float = float("-inf")
    jammed: bool = False
    last_transition: Transition = Transition.NONE
    consecutive_confirms: int = 0


def looks_jammed(window_pdr: float, window_rssi_dbm: float, cfg: DetectorConfig) -> bool:
    return window_pdr <= cfg.pdr_low and window_rssi_dbm >= cfg.default_cca_dbm + cfg.rssi_margin_db


def update(
    state: DetectorState, window_pdr: float, window_rssi_dbm: float, cfg: DetectorConfig
) -> tuple[DetectorState, Transition]:
    """Fold one window of statistics into the detector; flips need ``confirm_count`` agreeing windows."""
    raw = looks_jammed(window_pdr, window_rssi_dbm, cfg)
    confirms = state.consecutive_confirms + 1 if raw != state.jammed else 0
    state = replace(state, window_s=cfg.window_s, pdr_window=window_pdr, mean_rssi_dbm=window_rssi_dbm)
    if confirms < cfg.confirm_count:
        return replace(state, consecutive_confirms=confirms), Transition.NONE
    event = Transition.SLEEP_TO_ACTIVE if raw else Transition.ACTIVE_TO_SLEEP
    return replace(state, jammed=raw, last_transition=event, consecutive_confirms=0), event


def score_latencies(
    truth_edges: list[tuple[float, bool]],
    detector_edges: list[tuple[float, bool]],
    window_s: float,
    t0: float = 0.0,
) -> dict:
    """Match detector flips against ground-truth jammed/clear edges.

    Edges are ``(time_s, jammed_after)``. A flip is credited to the latest
    truth edge of the same direction before it, provided no other truth edge
    intervened. Latency is measured from the first window boundary at or
    after the truth edge, since the detector only sees whole windows.
    """
    latencies: list[float] = []
    missed = 0
    j = 0
    for i, (t, jammed) in enumerate(truth_edges):
        t_next = truth_edges[i + 1][0] if i + 1 < len(truth_edges) else float("inf")
        while j < len(detector_edges) and detector_edges[j][0] < t:
            j += 1
        k = j
        hit = None
        while k < len(detector_edges) and detector_edges[k][0] <= t_next:
            if detector_edges[k][1] == jammed:
                hit = detector_edges[k][0]
                break
            k += 1
        if hit is None:
            missed += 1
            continue
        n = -(-round((t - t0) / window_s * 1e9) // int(1e9))
        boundary = t0 + n * window_s
        latencies.append(round(hit - boundary, 9))
    return {
        "count": len(latencies),
        "missed": missed,
        "max_s": max(latencies) if latencies else None,
        "mean_s": sum(latencies) / len(latencies) if latencies else None,
    }
