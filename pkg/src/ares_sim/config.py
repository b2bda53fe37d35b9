"""Scenario loading: YAML text, JSON-Schema validation, then typed objects.

Unknown keys are rejected. Validation problems are collected into a single
:class:`ConfigError` listing every offending field.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import jsonschema
import yaml

from .analytics import JammerMoments
from .detection import DetectorConfig
from .jammers import PRESET_DISTRIBUTIONS, JammerKind, JammerProfile, preset
from .phy import DEFAULT_RATE_TABLE, RateTable
from .rate_control import DwellProfile


class ConfigError(ValueError):
    """Scenario failed validation; ``errors`` holds ``{"path", "message"}`` entries."""

    def __init__(self, errors: list[dict]):
        self.errors = errors
        super().__init__("; ".join(f"{e['path']}: {e['message']}" for e in errors))

    def report(self) -> dict:
        return {"error": "validation", "errors": self.errors}


def _schema() -> dict:
    text = resources.files("ares_sim").joinpath("schema/scenario.schema.json").read_text()
    return json.loads(text)


def _stringify_keys(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _stringify_keys(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_stringify_keys(v) for v in obj]
    return obj


def deep_merge(base: Mapping, patch: Mapping) -> dict:
    out = copy.deepcopy(dict(base))
    for k, v in patch.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(doc: dict, dotted: str, value: Any) -> dict:
    """Return a copy of ``doc`` with ``a.b.0.c`` set to ``value``; list indices are integers."""
    out = copy.deepcopy(doc)
    parts = dotted.split(".")
    node: Any = out
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(node, list):
            try:
                idx = int(part)
                node[idx]
            except (ValueError, IndexError):
                raise ConfigError([{"path": dotted, "message": f"no list element {part!r}"}]) from None
            if last:
                node[idx] = value
            else:
                node = node[idx]
        else:
            if last:
                node[part] = value
            else:
                node = node.setdefault(part, {})
    return out


# ---------------------------------------------------------------- typed config


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "fixed"
    K: int = 30


@dataclass(frozen=True)
class LinkSpec:
    id: str
    tx: str
    rx: str
    path_loss_db: float
    path_loss_rt_db: float
    tx_power_dbm: float = 18.0
    rx_power_dbm: float = 18.0
    cca_dbm: float = -80.0
    base_pdr: Mapping[float, float] = field(default_factory=dict)
    base_pdr_default: float = 1.0
    app_rate_mbps: float = 54.0
    offered_mbps: Optional[float] = None
    packet_bytes: int = 1500
    policy: PolicySpec = field(default_factory=PolicySpec)
    dwell: Optional[DwellProfile] = None

    def pdr_at(self, rate: float) -> float:
        return self.base_pdr.get(float(rate), self.base_pdr_default)


@dataclass(frozen=True)
class JammerLink:
    path_loss_jt_db: float
    path_loss_jr_db: float


@dataclass(frozen=True)
class JammerSpec:
    id: str
    profile: JammerProfile
    links: Mapping[str, JammerLink]


@dataclass(frozen=True)
class AnalyticSetup:
    moments: JammerMoments
    F: float = 0.0
    dwell: DwellProfile = field(default_factory=DwellProfile)


@dataclass(frozen=True)
class ControllerConfig:
    enabled: bool = False
    cca_tunable: bool = True
    cooperation: bool = True
    power_mode: str = "centralized"
    rate_module: str = "mrc"
    K: int = 30
    settle_windows: int = 2
    deficit_tol: float = 0.1
    hold_down_windows: int = 10
    delta_db: float = 5.0
    max_power_dbm: float = 20.0
    default_cca_dbm: float = -80.0
    beacon_interval_s: float = 0.1
    analytic: Optional[AnalyticSetup] = None


@dataclass(frozen=True)
class AnalysisSpec:
    moments: JammerMoments
    rates: tuple[float, ...]
    pdr: Optional[float]
    F: float
    dwell: DwellProfile


@dataclass(frozen=True)
class ConvergenceSpec:
    links: tuple[tuple[str, str, float], ...]
    jammer_path_loss_db: Mapping[str, float]
    p_j_dbm: tuple[float, ...]
    jammer_duty: float = 1.0
    seeds: int = 50
    delta_db: float = 5.0
    max_power_dbm: float = 20.0
    beacon_interval_s: float = 0.1
    capture_threshold_db: float = 6.0
    max_rounds: int = 10_000


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    kind: str
    raw: Mapping[str, Any]
    seed: int = 0
    slot_s: float = 1e-3
    duration_s: float = 60.0
    rates: RateTable = DEFAULT_RATE_TABLE
    dwell: DwellProfile = field(default_factory=DwellProfile)
    detection: Optional[DetectorConfig] = field(default_factory=DetectorConfig)
    trace_period_s: Optional[float] = 0.5
    mobility_tick_s: float = 0.1
    shadowing_db: float = 0.0
    capture_smoothing_db: float = 0.0
    links: tuple[LinkSpec, ...] = ()
    jammers: tuple[JammerSpec, ...] = ()
    routes: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    analysis: Optional[AnalysisSpec] = None
    power_convergence: Optional[ConvergenceSpec] = None

    @property
    def n_slots(self) -> int:
        return round(self.duration_s / self.slot_s)

    def link(self, link_id: str) -> LinkSpec:
        for l in self.links:
            if l.id == link_id:
                return l
        raise KeyError(link_id)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return from_dict({**self.raw, "seed": int(seed)})


def dwell_from_dict(d: Optional[Mapping], base: Optional[DwellProfile] = None) -> DwellProfile:
    base = base or DwellProfile()
    if d is None:
        return base
    return DwellProfile(
        {float(k): v for k, v in d.get("y", {}).items()} or base.y,
        d.get("default_s", base.default_s),
        d.get("recovery_s", base.recovery_s),
    )


def _moments(d: Mapping, path: str, errors: list) -> Optional[JammerMoments]:
    if "jammer_preset" in d:
        name = d["jammer_preset"]
        if name not in PRESET_DISTRIBUTIONS:
            errors.append({"path": f"{path}.jammer_preset", "message": f"unknown preset {name!r}"})
            return None
        return JammerMoments.of(preset(name))
    if "sleep" in d and "active" in d:
        return JammerMoments(sum(d["sleep"]) / 2, sum(d["active"]) / 2)
    errors.append({"path": path, "message": "needs jammer_preset or sleep+active"})
    return None


def _pdr_map(v: Any) -> tuple[dict[float, float], float]:
    if v is None:
        return {}, 1.0
    if isinstance(v, (int, float)):
        return {}, float(v)
    default = float(v.get("default", 1.0))
    return {float(k): float(x) for k, x in v.items() if k != "default"}, default


def _jammer(d: Mapping, path: str, errors: list) -> Optional[JammerSpec]:
    kw: dict[str, Any] = {}
    for key in ("tx_power_dbm", "packet_bytes", "jam_rate_mbps"):
        if key in d:
            kw[key] = d[key]
    if "mobility" in d:
        kw["mobility"] = tuple((float(t), float(o)) for t, o in d["mobility"])
    try:
        if "preset" in d:
            if d["preset"] not in PRESET_DISTRIBUTIONS:
                errors.append({"path": f"{path}.preset", "message": f"unknown preset {d['preset']!r}"})
                return None
            sleep, active = PRESET_DISTRIBUTIONS[d["preset"]]
            kw.setdefault("sleep", sleep)
            kw.setdefault("active", active)
        if "sleep" in d:
            kw["sleep"] = tuple(d["sleep"])
        if "active" in d:
            kw["active"] = tuple(d["active"])
        kind = d.get("kind", "random")
        profile = JammerProfile(kind=JammerKind(kind), **kw)
    except ValueError as exc:
        errors.append({"path": path, "message": str(exc)})
        return None
    links = {k: JammerLink(v["path_loss_jt_db"], v["path_loss_jr_db"]) for k, v in d["links"].items()}
    return JammerSpec(d["id"], profile, links)


def _json_path(parts) -> str:
    return "$" + "".join(f"[{p!r}]" if isinstance(p, int) else f".{p}" for p in parts)


def from_dict(doc: Mapping[str, Any]) -> ScenarioConfig:
    """Validate a scenario document and build the typed config."""
    doc = _stringify_keys(doc)
    validator = jsonschema.Draft202012Validator(_schema())
    errors = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        path = _json_path(err.absolute_path)
        if err.validator == "additionalProperties" and isinstance(err.instance, Mapping):
            # one entry per unknown key, pointing at the key itself
            known = set(err.schema.get("properties", {}))
            for key in sorted(set(err.instance) - known):
                errors.append({"path": f"{path}.{key}", "message": "unknown field"})
            continue
        errors.append({"path": path, "message": err.message})
    if errors:
        raise ConfigError(errors)

    kind = doc["kind"]
    slot = float(doc.get("slot_s", 1e-3))
    duration = float(doc.get("duration_s", 60.0))
    if abs(duration / slot - round(duration / slot)) > 1e-6:
        errors.append({"path": "$.duration_s", "message": "must be an integral number of slots"})

    table = DEFAULT_RATE_TABLE
    if "rates" in doc:
        try:
            table = RateTable.from_rows(doc["rates"])
        except ValueError as exc:
            errors.append({"path": "$.rates", "message": str(exc)})

    dwell = dwell_from_dict(doc.get("dwell"))

    det_doc = doc.get("detection", {})
    detection: Optional[DetectorConfig] = None
    ctrl_doc = doc.get("controller", {})
    default_cca = float(doc.get("default_cca_dbm", -80.0))
    if det_doc.get("enabled", True):
        detection = DetectorConfig(
            window_s=det_doc.get("window_s", 0.5),
            pdr_low=det_doc.get("pdr_low", 0.1),
            rssi_margin_db=det_doc.get("rssi_margin_db", 20.0),
            confirm_count=det_doc.get("confirm_count", 2),
            default_cca_dbm=default_cca,
        )
        w = detection.window_s / slot
        if abs(w - round(w)) > 1e-6:
            errors.append({"path": "$.detection.window_s", "message": "must be an integral number of slots"})

    trace_period = doc.get("trace", {}).get("period_s", 0.5)
    if trace_period is not None and abs(trace_period / slot - round(trace_period / slot)) > 1e-6:
        errors.append({"path": "$.trace.period_s", "message": "must be an integral number of slots"})

    links = []
    ids: set[str] = set()
    for i, l in enumerate(doc.get("links", [])):
        path = f"$.links[{i}]"
        if l["id"] in ids:
            errors.append({"path": f"{path}.id", "message": f"duplicate link id {l['id']!r}"})
        ids.add(l["id"])
        pdr_map, pdr_default = _pdr_map(l.get("base_pdr"))
        for r in pdr_map:
            if r not in table.rates:
                errors.append({"path": f"{path}.base_pdr", "message": f"rate {r} not in rate table"})
        app = float(l.get("app_rate_mbps", table.highest))
        if app > table.highest:
            errors.append({"path": f"{path}.app_rate_mbps", "message": f"exceeds table maximum {table.highest}"})
        pol = l.get("policy", {"kind": "fixed"})
        links.append(
            LinkSpec(
                id=l["id"],
                tx=l["tx"],
                rx=l["rx"],
                path_loss_db=float(l["path_loss_db"]),
                path_loss_rt_db=float(l.get("path_loss_rt_db", l["path_loss_db"])),
                tx_power_dbm=float(l.get("tx_power_dbm", 18.0)),
                rx_power_dbm=float(l.get("rx_power_dbm", 18.0)),
                cca_dbm=float(l.get("cca_dbm", default_cca)),
                base_pdr=pdr_map,
                base_pdr_default=pdr_default,
                app_rate_mbps=app,
                offered_mbps=l.get("offered_mbps"),
                packet_bytes=int(l.get("packet_bytes", 1500)),
                policy=PolicySpec(pol["kind"], int(pol.get("K", 30))),
                dwell=dwell_from_dict(l["dwell"], dwell) if "dwell" in l else None,
            )
        )

    jammers = []
    for i, j in enumerate(doc.get("jammers", [])):
        path = f"$.jammers[{i}]"
        spec = _jammer(j, path, errors)
        if spec is None:
            continue
        for lid in spec.links:
            if lid not in ids:
                errors.append({"path": f"{path}.links.{lid}", "message": "references unknown link"})
        jammers.append(spec)

    routes = {}
    for name, members in doc.get("routes", {}).items():
        for lid in members:
            if lid not in ids:
                errors.append({"path": f"$.routes.{name}", "message": f"unknown link {lid!r}"})
        routes[name] = tuple(members)

    analytic = None
    if "analytic" in ctrl_doc:
        a = ctrl_doc["analytic"]
        m = _moments(a, "$.controller.analytic", errors)
        if m is not None:
            analytic = AnalyticSetup(m, float(a.get("F", 0.0)), dwell_from_dict(a.get("dwell"), dwell))
    controller = ControllerConfig(
        enabled=ctrl_doc.get("enabled", False),
        cca_tunable=ctrl_doc.get("cca_tunable", True),
        cooperation=ctrl_doc.get("cooperation", True),
        power_mode=ctrl_doc.get("power_mode", "centralized"),
        rate_module=ctrl_doc.get("rate_module", "mrc"),
        K=ctrl_doc.get("K", 30),
        settle_windows=ctrl_doc.get("settle_windows", 2),
        deficit_tol=ctrl_doc.get("deficit_tol", 0.1),
        hold_down_windows=ctrl_doc.get("hold_down_windows", 10),
        delta_db=ctrl_doc.get("delta_db", 5.0),
        max_power_dbm=ctrl_doc.get("max_power_dbm", 20.0),
        default_cca_dbm=default_cca,
        beacon_interval_s=ctrl_doc.get("beacon_interval_s", 0.1),
        analytic=analytic,
    )
    if controller.enabled and controller.rate_module == "analytic" and analytic is None:
        errors.append({"path": "$.controller.analytic", "message": "rate_module analytic needs an analytic section"})
    if controller.enabled and detection is None:
        errors.append({"path": "$.detection.enabled", "message": "the controller needs detection enabled"})
    if detection is None and any(l.policy.kind == "mrc" for l in links):
        errors.append({"path": "$.detection.enabled", "message": "mrc policies need detection enabled"})

    analysis = None
    if kind == "analyze":
        a = doc.get("analysis", {})
        m = _moments(a or {"jammer_preset": "balanced-validation"}, "$.analysis", errors)
        if m is not None:
            analysis = AnalysisSpec(
                moments=m,
                rates=tuple(a.get("rates", table.rates)),
                pdr=a.get("pdr"),
                F=float(a.get("F", 0.0)),
                dwell=dwell_from_dict(a.get("dwell"), dwell),
            )

    convergence = None
    if kind == "power_convergence":
        p = doc.get("power_convergence")
        if p is None:
            errors.append({"path": "$.power_convergence", "message": "required for kind power_convergence"})
        else:
            convergence = ConvergenceSpec(
                links=tuple((x["a"], x["b"], float(x["path_loss_db"])) for x in p["links"]),
                jammer_path_loss_db=dict(p.get("jammer_path_loss_db", {})),
                p_j_dbm=tuple(p.get("p_j_dbm", [1.0, 2.0, 3.0, 4.0])),
                jammer_duty=float(p.get("jammer_duty", 1.0)),
                seeds=int(p.get("seeds", 50)),
                delta_db=float(p.get("delta_db", 5.0)),
                max_power_dbm=float(p.get("max_power_dbm", 20.0)),
                beacon_interval_s=float(p.get("beacon_interval_s", 0.1)),
                capture_threshold_db=float(p.get("capture_threshold_db", 6.0)),
                max_rounds=int(p.get("max_rounds", 10_000)),
            )

    if kind == "simulate" and not links:
        errors.append({"path": "$.links", "message": "simulate scenarios need at least one link"})
    if errors:
        raise ConfigError(errors)

    return ScenarioConfig(
        name=doc["name"],
        kind=kind,
        raw=doc,
        seed=int(doc.get("seed", 0)),
        slot_s=slot,
        duration_s=duration,
        rates=table,
        dwell=dwell,
        detection=detection,
        trace_period_s=trace_period,
        mobility_tick_s=float(doc.get("mobility_tick_s", 0.1)),
        shadowing_db=float(doc.get("shadowing_db", 0.0)),
        capture_smoothing_db=float(doc.get("capture_smoothing_db", 0.0)),
        links=tuple(links),
        jammers=tuple(jammers),
        routes=routes,
        controller=controller,
        analysis=analysis,
        power_convergence=convergence,
    )


def load_document(path: Union[str, Path]) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError([{"path": str(path), "message": "file not found"}])
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([{"path": str(path), "message": f"YAML parse error: {exc}"}]) from None
    if not isinstance(doc, dict):
        raise ConfigError([{"path": str(path), "message": "top level must be a mapping"}])
    return doc


def variants(doc: Mapping[str, Any]) -> dict[str, dict]:
    """Expand ``variants`` into full documents; a document without variants is its own single variant."""
    base = {k: v for k, v in doc.items() if k != "variants"}
    patches = doc.get("variants") or {}
    if not patches:
        return {"": base}
    return {name: deep_merge(base, patch) for name, patch in patches.items()}


def load_variants(path: Union[str, Path]) -> dict[str, ScenarioConfig]:
    return {name: from_dict(d) for name, d in variants(load_document(path)).items()}


def load(path: Union[str, Path]) -> ScenarioConfig:
    """Load a scenario; with variants, the first one."""
    return next(iter(load_variants(path).values()))
