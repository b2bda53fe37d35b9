"""Runners for the non-simulation scenario kinds, and result writers."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .analytics import AnalyticInputs, analyze
from .config import ConvergenceSpec, ScenarioConfig
from .engine import TRACE_COLUMNS, SimResult, run as run_simulation
from .phy import RssiMatrix
from .power_control import (
    LinkRssi,
    PowerControlConfig,
    beacon_loss_probability,
    centralized_assign,
    diameter,
    run_until_converged,
)

ANALYSIS_COLUMNS = (
    "app_rate_mbps",
    "fixed_rate",
    "pdr_f",
    "t_fixed",
    "t_adapt",
    "threshold",
    "threshold_bounded",
    "classification",
    "case",
)

CONVERGENCE_COLUMNS = ("p_j_dbm", "seeds", "mean_time_s", "max_time_s", "unconverged", "matches_centralized")


def run_analysis(cfg: ScenarioConfig) -> list[dict]:
    a = cfg.analysis
    rows = []
    for app_rate in a.rates:
        inputs = AnalyticInputs(
            a.moments, float(app_rate), 1.0 if a.pdr is None else a.pdr, a.F, a.dwell, cfg.rates
        )
        rows.append({"app_rate_mbps": float(app_rate), **analyze(inputs, with_pdr=a.pdr is not None).as_dict()})
    return rows


def convergence_links(spec: ConvergenceSpec, p_j_dbm: Optional[float]) -> list[LinkRssi]:
    def jam(node: str) -> float:
        if p_j_dbm is None or node not in spec.jammer_path_loss_db:
            return -200.0
        return p_j_dbm - spec.jammer_path_loss_db[node]

    out = []
    for a, b, pl in spec.links:
        rssi = spec.max_power_dbm - pl
        out.append(LinkRssi(a, b, RssiMatrix(rssi, rssi, jam(a), jam(b))))
    return out


def beacon_loss_model(spec: ConvergenceSpec, p_j_dbm: Optional[float]):
    """Per directed edge loss probability under a jammer of power ``p_j_dbm`` (None: no jammer)."""
    loss_db = {}
    for a, b, pl in spec.links:
        loss_db[(a, b)] = pl
        loss_db[(b, a)] = pl

    def loss(sender: str, receiver: str) -> float:
        beacon = spec.max_power_dbm - loss_db[(sender, receiver)]
        jr = None
        if p_j_dbm is not None and receiver in spec.jammer_path_loss_db:
            jr = p_j_dbm - spec.jammer_path_loss_db[receiver]
        return beacon_loss_probability(
            beacon, jr, spec.jammer_duty, spec.delta_db, spec.capture_threshold_db
        )

    return loss


def run_power_convergence(cfg: ScenarioConfig) -> list[dict]:
    """Distributed CCA convergence per jammer power; seeds are shared across powers."""
    spec = cfg.power_convergence
    pc = PowerControlConfig(spec.delta_db, spec.max_power_dbm, mode="distributed")
    rows = []
    for p_j in (None, *spec.p_j_dbm):
        links = convergence_links(spec, p_j)
        target = centralized_assign(links, pc)
        loss = beacon_loss_model(spec, p_j)
        times, unconverged, matches = [], 0, True
        for k in range(spec.seeds):
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, k]))
            res = run_until_converged(links, loss, pc, rng, spec.beacon_interval_s, spec.max_rounds)
            if not res.converged:
                unconverged += 1
                continue
            times.append(res.time_s)
            matches = matches and dict(res.assignment.cca_dbm) == dict(target.cca_dbm)
        rows.append(
            {
                "p_j_dbm": p_j,
                "seeds": spec.seeds,
                "mean_time_s": float(np.mean(times)) if times else None,
                "max_time_s": float(np.max(times)) if times else None,
                "unconverged": unconverged,
                "matches_centralized": matches,
            }
        )
    return rows


def network_diameter(cfg: ScenarioConfig) -> int:
    return diameter(convergence_links(cfg.power_convergence, None))


# ---------------------------------------------------------------- writers


def _write_rows(path: Path, columns: Sequence[str], rows: Iterable, fmt: str) -> Path:
    rows = list(rows)
    if fmt == "json":
        path = path.with_suffix(".json")
        records = [dict(zip(columns, r)) if not isinstance(r, dict) else {c: r[c] for c in columns} for r in rows]
        path.write_text(json.dumps(records, indent=1, allow_nan=False) + "\n")
        return path
    path = path.with_suffix(".csv")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([r[c] for c in columns] if isinstance(r, dict) else list(r))
    return path


def _clean(obj):
    """JSON-safe copy: infinities become strings, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_summary(path: Path, summary: dict) -> Path:
    path.write_text(json.dumps(_clean(summary), indent=1, sort_keys=True) + "\n")
    return path


def execute(cfg: ScenarioConfig, out_dir: Path, fmt: str = "csv") -> dict:
    """Run one resolved scenario and write its outputs; returns the summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "simulate":
        result: SimResult = run_simulation(cfg)
        _write_rows(out_dir / "trace", TRACE_COLUMNS, result.rows, fmt)
        summary = {**result.summary, "events": result.events}
    elif cfg.kind == "analyze":
        rows = run_analysis(cfg)
        _write_rows(out_dir / "analysis", ANALYSIS_COLUMNS, rows, fmt)
        summary = {"scenario": cfg.name, "rows": rows, "config": {**cfg.raw, "seed": cfg.seed}}
    else:
        rows = run_power_convergence(cfg)
        _write_rows(out_dir / "convergence", CONVERGENCE_COLUMNS, rows, fmt)
        summary = {
            "scenario": cfg.name,
            "rows": rows,
            "diameter": network_diameter(cfg),
            "config": {**cfg.raw, "seed": cfg.seed},
        }
    write_summary(out_dir / "summary.json", summary)
    return summary
