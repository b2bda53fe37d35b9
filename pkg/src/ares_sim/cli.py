"""Command-line entry point: ``ares-sim run|analyze|sweep``.

Exit status: 0 success, 2 validation or usage error, 3 runtime failure.
``ARES_OUT_DIR`` and ``ARES_SEED`` override the output directory and seed.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import yaml

from .analytics import AnalyticInputs, JammerMoments, analyze
from .config import ConfigError, dwell_from_dict, from_dict, load_document, set_path, variants
from .experiments import ANALYSIS_COLUMNS, execute
from .jammers import PRESET_DISTRIBUTIONS, preset

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3

DEFAULT_DWELL_FILE = "presets/samplerate_dwell.yml"


def resolve_scenario(name: str) -> Path:
    """A filesystem path, or ``presets/NAME.scn`` / ``NAME`` from the bundled presets."""
    p = Path(name)
    if p.exists():
        return p
    stem = p.name if p.suffix else p.name + ".scn"
    bundled = resources.files("ares_sim").joinpath("presets", stem)
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError([{"path": name, "message": "file not found"}])


def _seed(arg: Optional[int]) -> Optional[int]:
    if arg is not None:
        return arg
    env = os.environ.get("ARES_SEED")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError([{"path": "ARES_SEED", "message": f"not an integer: {env!r}"}]) from None


def _out_dir(arg: Optional[str]) -> Path:
    return Path(arg or os.environ.get("ARES_OUT_DIR") or "ares-out")


def _run_documents(docs: dict[str, dict], out_dir: Path, fmt: str) -> dict[str, dict]:
    configs = {name: from_dict(d) for name, d in docs.items()}  # validate everything before running
    out = {}
    for name, cfg in configs.items():
        out[name] = execute(cfg, out_dir / name if name else out_dir, fmt)
    return out


def _with_seed(doc: dict, seed: Optional[int]) -> dict:
    return doc if seed is None else {**doc, "seed": seed}


def cmd_run(args) -> int:
    doc = _with_seed(load_document(resolve_scenario(args.scenario)), _seed(args.seed))
    docs = variants(doc)
    if args.variant:
        if args.variant not in docs:
            raise ConfigError([{"path": "--variant", "message": f"unknown variant; have {sorted(docs)}"}])
        docs = {args.variant: docs[args.variant]}
    results = _run_documents(docs, _out_dir(args.out_dir), args.format)
    for name, summary in results.items():
        if "rows" in summary:
            for row in summary["rows"]:
                print(json.dumps({"variant": name, **row}) if name else json.dumps(row))
        else:
            means = {k: v["mean_mbps"] for k, v in summary["links"].items()}
            print(json.dumps({"variant": name, "mean_mbps": means}))
    return EXIT_OK


def _load_dwell(path: Optional[str]):
    if path is None:
        src = resources.files("ares_sim").joinpath(DEFAULT_DWELL_FILE)
        text = src.read_text()
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigError([{"path": path, "message": "dwell file not found"}])
        text = p.read_text()
    d = yaml.safe_load(text) or {}
    allowed = {"default_s", "recovery_s", "y"}
    bad = set(d) - allowed
    if bad:
        raise ConfigError([{"path": path or DEFAULT_DWELL_FILE, "message": f"unknown keys {sorted(bad)}"}])
    return dwell_from_dict(d)


def cmd_analyze(args) -> int:
    if args.jammer_preset not in PRESET_DISTRIBUTIONS:
        raise ConfigError([{"path": "--jammer-preset", "message": f"unknown preset {args.jammer_preset!r}"}])
    if args.pdr is not None and not 0.0 <= args.pdr <= 1.0:
        raise ConfigError([{"path": "--pdr", "message": "must lie in [0, 1]"}])
    dwell = _load_dwell(args.dwell_file)
    try:
        inputs = AnalyticInputs(
            JammerMoments.of(preset(args.jammer_preset)),
            args.rate,
            1.0 if args.pdr is None else args.pdr,
            args.F,
            dwell,
        )
        inputs.fixed_rate  # raises above the table maximum
    except ValueError as exc:
        raise ConfigError([{"path": "analyze", "message": str(exc)}]) from None
    row = {"app_rate_mbps": args.rate, **analyze(inputs, with_pdr=args.pdr is not None).as_dict()}
    if args.format == "json":
        print(json.dumps(row))
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(ANALYSIS_COLUMNS)
        w.writerow([row[c] for c in ANALYSIS_COLUMNS])
    return EXIT_OK


def parse_range(spec: str) -> list[Any]:
    """``start:stop:step`` (inclusive stop) or a comma list; values keep their YAML type."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"range {spec!r} must be start:stop:step")
        start, stop, step = (float(x) for x in parts)
        if step <= 0:
            raise ValueError("step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        vals = [start + i * step for i in range(max(n, 0))]
        if all(float(x).is_integer() for x in parts):
            return [int(round(v)) for v in vals]
        return [round(v, 12) for v in vals]
    if spec.strip() == "":
        return []
    return [yaml.safe_load(v) for v in spec.split(",")]


def _sweep_point(job: tuple) -> tuple[int, str]:
    index, docs, out_dir, fmt = job
    _run_documents(docs, Path(out_dir), fmt)
    return index, out_dir


def cmd_sweep(args) -> int:
    base = load_document(resolve_scenario(args.scenario))
    master = _seed(args.seed)
    if master is None:
        master = int(base.get("seed", 0))
    names, grids = [], []
    for p in args.param:
        if "=" not in p:
            raise ConfigError([{"path": "--param", "message": f"expected name=range, got {p!r}"}])
        name, spec = p.split("=", 1)
        try:
            grids.append(parse_range(spec))
        except ValueError as exc:
            raise ConfigError([{"path": f"--param {name}", "message": str(exc)}]) from None
        names.append(name)
    points = list(itertools.product(*grids)) if grids and all(grids) else []
    out_dir = _out_dir(args.out_dir)
    if not points:
        print(json.dumps({"points": 0}))
        return EXIT_OK
    index_path = out_dir / "index.csv"
    if index_path.exists():
        raise ConfigError([{"path": str(out_dir), "message": "output directory already holds a sweep; refusing to overwrite"}])

    seeds = np.random.SeedSequence(master).generate_state(len(points), dtype=np.uint32)
    jobs = []
    for i, values in enumerate(points):
        doc = dict(base)
        for name, v in zip(names, values):
            doc = set_path(doc, name, v)
        doc["seed"] = int(seeds[i])
        docs = variants(doc)
        for d in docs.values():
            from_dict(d)
        jobs.append((i, docs, str(out_dir / f"point_{i:04d}"), args.format))

    out_dir.mkdir(parents=True, exist_ok=True)
    if args.parallel > 1:
        with ProcessPoolExecutor(args.parallel) as pool:
            done = dict(pool.map(_sweep_point, jobs))
    else:
        done = dict(map(_sweep_point, jobs))
    with index_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point", *names, "seed", "path"])
        for (i, values), seed in zip(enumerate(points), seeds):
            w.writerow([i, *values, int(seed), Path(done[i]).name])
    print(json.dumps({"points": len(points), "index": str(index_path)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ares-sim", description="802.11 anti-jamming simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file or bundled preset")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int)
    r.add_argument("--out-dir")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--variant", help="run only this variant")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="fixed vs adaptive analytics for one link")
    a.add_argument("--rate", type=float, required=True, help="application rate in Mbps")
    a.add_argument("--pdr", type=float, help="PDR at the fixed rate")
    a.add_argument("--jammer-preset", default="balanced-validation")
    a.add_argument("--dwell-file", help="YAML with default_s, recovery_s and per-rate y")
    a.add_argument("--F", type=float, default=0.0, help="throughput while the jammer is on")
    a.add_argument("--format", choices=("csv", "json"), default="csv")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="grid of runs over scenario parameters")
    s.add_argument("scenario")
    s.add_argument("--param", action="append", default=[], help="dotted.name=start:stop:step or v1,v2")
    s.add_argument("--parallel", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--out-dir")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps(exc.report()), file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 3
        print(json.dumps({"error": "runtime", "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
