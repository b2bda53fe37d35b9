"""Seeded slot-level simulator of legitimate links under jamming.

Time advances in integer slots. Between events (jammer phase changes,
rate-ladder moves, detection windows, trace samples, mobility ticks and
beacon rounds) every link sees constant conditions, so a stretch of slots
is integrated in one step instead of slot by slot. The result is the same
as stepping each slot because per-slot goodput is deterministic given the
conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import controller as ctl
from .config import LinkSpec, ScenarioConfig
from .detection import DetectorState, score_latencies, update as detector_update
from .jammers import (
    JammerKind,
    Phase,
    emission_pattern,
    reactive_jam_probability,
    sample_active,
    sample_sleep,
)
from .phy import RssiMatrix, capture_probability, dbm_to_mw, mw_to_dbm, RadioConfig
from .power_control import (
    DistributedState,
    LinkRssi,
    PowerControlConfig,
    beacon_loss_probability,
    centralized_assign,
    distributed_round,
)
from .rate_control import (
    Feedback,
    FixedPolicy,
    LadderState,
    MrcState,
    Transition,
    choose_policy,
    feedback_from_pdr,
    ladder_step,
    mrc_step,
    mrc_transition,
    new_ladder,
    time_to_next_move,
)

TRACE_COLUMNS = (
    "t_s",
    "link_id",
    "throughput_mbps",
    "rate_mbps",
    "cca_dbm",
    "policy",
    "jammer_phase_truth",
    "jammed_truth",
    "detector_state",
)

Policy = Union[FixedPolicy, LadderState, MrcState]


@dataclass
class _Jammer:
    spec: object
    rng: np.random.Generator
    phase: Phase
    next_edge: float  # slot index of the next phase change (inf: never)
    cycle_index: int = 0
    shadow: dict = field(default_factory=dict)


@dataclass(frozen=True)
class _Conditions:
    goodput_mbps: float  # delivered Mbps while these conditions hold
    obs_pdr: float  # per-slot delivery probability seen by the detector
    rssi_dbm: float  # total power at the receiver
    feedback: Feedback
    jammed_truth: bool  # a jammer is on and the link is impaired
    phase_active: bool  # some jammer covering this link is in its active phase
    energy: bool  # jammer energy above the default CCA at the receiver


@dataclass
class _Link:
    spec: LinkSpec
    index: int
    share: float
    base_policy: Policy
    policy: Policy
    dwell: object
    detector: DetectorState = field(default_factory=DetectorState)
    w_pdr: float = 0.0
    w_rssi: float = 0.0
    w_bits: float = 0.0
    w_n: int = 0
    s_bits: float = 0.0
    bits_total: float = 0.0
    bits_jammed: float = 0.0
    slots_jammed: int = 0
    truth: Optional[bool] = None
    truth_edges: list = field(default_factory=list)
    detector_edges: list = field(default_factory=list)


def _policy_name(p: Policy) -> str:
    if isinstance(p, FixedPolicy):
        return "fixed"
    if isinstance(p, MrcState):
        return f"mrc(K={p.K})"
    return "ladder"


def _initial_policy(spec: LinkSpec, table) -> Policy:
    ceiling = table.fixed_rate_for(spec.app_rate_mbps)
    if spec.policy.kind == "fixed":
        return FixedPolicy(ceiling)
    ladder = new_ladder(table, ceiling=ceiling)
    if spec.policy.kind == "mrc":
        return MrcState(inner=ladder, K=spec.policy.K)
    return ladder


@dataclass
class SimResult:
    config: ScenarioConfig
    rows: list[tuple]
    summary: dict
    events: list[dict]

    def link_mean(self, link_id: str) -> float:
        return self.summary["links"][link_id]["mean_mbps"]


class Engine:
    def __init__(self, cfg: ScenarioConfig, seed: Optional[int] = None):
        if cfg.kind != "simulate":
            raise ValueError(f"engine runs simulate scenarios, not {cfg.kind!r}")
        self.cfg = cfg
        self.t = 0
        self._tick_epoch = 0
        self._mobility_t = 0.0
        self.seed = cfg.seed if seed is None else int(seed)
        self.slot = cfg.slot_s
        self.table = cfg.rates
        ss = np.random.SeedSequence(self.seed)
        jam_seqs = ss.spawn(len(cfg.jammers) + 2)
        self.rng_shadow = np.random.default_rng(jam_seqs[-2])
        self.rng_beacon = np.random.default_rng(jam_seqs[-1])

        share = {l.id: 1.0 for l in cfg.links}
        for members in cfg.routes.values():
            for lid in members:
                share[lid] = min(share[lid], 1.0 / len(members))

        self.links: list[_Link] = []
        for i, spec in enumerate(cfg.links):
            pol = _initial_policy(spec, self.table)
            self.links.append(_Link(spec, i, share[spec.id], pol, pol, spec.dwell or cfg.dwell))
        self.by_id = {l.spec.id: l for l in self.links}

        self.jammers: list[_Jammer] = []
        for spec, seq in zip(cfg.jammers, jam_seqs):
            rng = np.random.default_rng(seq)
            if spec.profile.kind is JammerKind.RANDOM:
                j = _Jammer(spec, rng, Phase.SLEEPING, 0.0)
                j.next_edge = self._draw_slots(sample_sleep(spec.profile, rng))
            else:
                j = _Jammer(spec, rng, Phase.ACTIVE, math.inf)
            self.jammers.append(j)

        self.default_cca: dict[str, float] = {}
        self.default_power: dict[str, float] = {}
        for l in cfg.links:
            self.default_cca.setdefault(l.tx, l.cca_dbm)
            self.default_cca.setdefault(l.rx, l.cca_dbm)
            self.default_power.setdefault(l.tx, l.tx_power_dbm)
            self.default_power.setdefault(l.rx, l.rx_power_dbm)
        self.cca = dict(self.default_cca)
        self.power = dict(self.default_power)
        self.link_shadow = {l.id: 0.0 for l in cfg.links}

        self.det_cfg = cfg.detection
        self.window = round(cfg.detection.window_s / self.slot) if cfg.detection else None
        self.sample = round(cfg.trace_period_s / self.slot) if cfg.trace_period_s else None
        has_mobility = any(j.spec.profile.mobility for j in self.jammers)
        self.tick = round(cfg.mobility_tick_s / self.slot) if (has_mobility or cfg.shadowing_db > 0) else None
        self.beacon = round(cfg.controller.beacon_interval_s / self.slot)
        self.ctrl_state = ctl.ControllerState()
        self.distributed: Optional[DistributedState] = None
        self.pc_cfg = PowerControlConfig(
            cfg.controller.delta_db,
            cfg.controller.max_power_dbm,
            cfg.controller.default_cca_dbm,
            cfg.controller.power_mode,
        )
        self.rows: list[tuple] = []
        self.events: list[dict] = []
        self._cache: dict = {}

    # ------------------------------------------------------------ helpers

    def _draw_slots(self, seconds: float) -> float:
        return float(self.t + round(seconds / self.slot))

    def _emitting(self) -> tuple[bool, ...]:
        return tuple(j.phase is Phase.ACTIVE for j in self.jammers)

    def _jammer_rssi(self, j: _Jammer, link_id: str, t_s: float) -> Optional[tuple[float, float]]:
        jl = j.spec.links.get(link_id)
        if jl is None:
            return None
        p = j.spec.profile
        # mobility is sampled on tick boundaries so conditions stay piecewise constant
        base = p.tx_power_dbm + p.rssi_offset_db(self._mobility_t) + j.shadow.get(link_id, 0.0)
        return base - jl.path_loss_jt_db, base - jl.path_loss_jr_db

    def rssi_matrix(self, link: _Link, t_s: float) -> RssiMatrix:
        s = link.spec
        sh = self.link_shadow[s.id]
        tr = self.power[s.tx] - s.path_loss_db + sh
        rt = self.power[s.rx] - s.path_loss_rt_db + sh
        jt = jr = -math.inf
        for j in self.jammers:
            r = self._jammer_rssi(j, s.id, t_s)
            if r is not None:
                jt, jr = max(jt, r[0]), max(jr, r[1])
        floor = -200.0
        return RssiMatrix(tr, rt, max(jt, floor), max(jr, floor))

    def _conditions(self, link: _Link, t_s: float) -> _Conditions:
        s = link.spec
        rate = link.policy.rate
        emitting = self._emitting()
        pol = link.policy
        delivering = True
        if not isinstance(pol, FixedPolicy):
            ld = _ladder(pol)
            delivering = not (ld.stalled and ld.recovery_left_s > 0)
        key = (link.index, rate, self.cca[s.tx], self.cca[s.rx], self.power[s.tx], emitting, self._tick_epoch, delivering)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        noise = -95.0
        desired = self.power[s.tx] - s.path_loss_db + self.link_shadow[s.id]
        rx_radio = RadioConfig(self.power[s.rx], max(self.cca[s.rx], noise), noise)
        access = 1.0
        interferers: list[float] = []
        reactive_p = 0.0
        reactive_jr: list[float] = []
        any_active = False
        phase_active = False
        energy_mw = 0.0
        for j, on in zip(self.jammers, emitting):
            r = self._jammer_rssi(j, s.id, t_s)
            if r is None:
                continue
            jt, jr = r
            prof = j.spec.profile
            if prof.kind is JammerKind.REACTIVE:
                p = reactive_jam_probability(s.packet_bytes, rate)
                reactive_p = max(reactive_p, p)
                reactive_jr.append(jr)
                continue
            if not on:
                continue
            any_active = phase_active = True
            interferers.append(jr)
            energy_mw += dbm_to_mw(jr)
            if jt >= self.cca[s.tx]:
                access = min(access, emission_pattern(prof, active=True).access_probability)
        cap = capture_probability(rx_radio, desired, interferers, rate, self.table, self.cfg.capture_smoothing_db)
        if reactive_jr:
            cap_j = capture_probability(
                rx_radio, desired, interferers + reactive_jr, rate, self.table, self.cfg.capture_smoothing_db
            )
            cap = (1.0 - reactive_p) * cap + reactive_p * cap_j
            any_active = any_active or reactive_p > 0
        pdr = s.pdr_at(rate) * cap
        offered = s.offered_mbps if s.offered_mbps is not None else math.inf
        capacity = min(offered, self.table.saturated(rate) * link.share)
        goodput = capacity * pdr * access if delivering else 0.0
        obs_pdr = pdr * access
        fb = feedback_from_pdr(pdr) if access > 0 else Feedback.BAD
        rssi = mw_to_dbm(dbm_to_mw(desired) + energy_mw + dbm_to_mw(noise))
        low = self.det_cfg.pdr_low if self.det_cfg else 0.1
        jammed_truth = any_active and obs_pdr <= low
        energy = energy_mw > 0 and mw_to_dbm(energy_mw) >= self.cfg.controller.default_cca_dbm
        c = _Conditions(goodput, obs_pdr, rssi, fb, jammed_truth, phase_active, energy)
        if len(self._cache) > 100_000:
            self._cache.clear()
        self._cache[key] = c
        return c

    # ------------------------------------------------------------ events

    def _jammer_edges(self) -> None:
        for j in self.jammers:
            while j.next_edge <= self.t:
                prof = j.spec.profile
                if j.phase is Phase.SLEEPING:
                    j.phase = Phase.ACTIVE
                    d = sample_active(prof, j.rng)
                else:
                    j.phase = Phase.SLEEPING
                    j.cycle_index += 1
                    d = sample_sleep(prof, j.rng)
                j.next_edge = j.next_edge + round(d / self.slot)

    def _tick_update(self) -> None:
        self._tick_epoch += 1
        self._mobility_t = self.t * self.slot
        d = self.cfg.shadowing_db
        if d > 0:
            for lid in self.link_shadow:
                self.link_shadow[lid] = float(self.rng_shadow.uniform(-d, d))
            for j in self.jammers:
                j.shadow = {lid: float(self.rng_shadow.uniform(-d, d)) for lid in j.spec.links}

    def _window(self) -> None:
        t_s = round(self.t * self.slot, 9)
        observations = []
        for link in self.links:
            n = max(link.w_n, 1)
            w_pdr, w_rssi = link.w_pdr / n, link.w_rssi / n
            thr = link.w_bits / (n * self.slot) / 1e6
            link.detector, event = detector_update(link.detector, w_pdr, w_rssi, self.det_cfg)
            if event is not Transition.NONE:
                link.detector_edges.append((t_s, link.detector.jammed))
            if isinstance(link.policy, MrcState):
                link.policy = mrc_transition(link.policy, event)
            if self.cfg.controller.enabled:
                s = link.spec
                rate = link.policy.rate
                energy = self._conditions(link, t_s).energy
                observations.append(
                    ctl.LinkObservation(
                        link_id=s.id,
                        jammed=link.detector.jammed,
                        transition=event,
                        throughput_mbps=thr,
                        isolated_mbps=s.pdr_at(rate) * self.table.saturated(rate) * link.share,
                        rssi=self.rssi_matrix(link, t_s),
                        jammer_energy=energy,
                        app_rate_mbps=s.app_rate_mbps,
                        pdr_at_fixed=s.pdr_at(self.table.fixed_rate_for(s.app_rate_mbps)),
                    )
                )
            link.w_pdr = link.w_rssi = link.w_bits = 0.0
            link.w_n = 0
        if observations:
            self.ctrl_state, actions = ctl.tick(self.ctrl_state, observations, self.cfg.controller)
            for a in actions:
                self._apply(a, t_s)

    def _apply(self, action: ctl.Action, t_s: float) -> None:
        rec = {"t_s": t_s, "action": action.kind, "link_id": action.link_id, **dict(action.detail)}
        if action.kind == "tune_cca":
            if self.pc_cfg.mode == "centralized":
                assignment = centralized_assign(self._link_rssi(t_s), self.pc_cfg, raise_only=True)
                self._assign(assignment.cca_dbm, assignment.power_dbm)
                rec["cca_dbm"] = next(iter(assignment.cca_dbm.values()))
            else:
                self.distributed = DistributedState.initial(self._link_rssi(t_s))
                self._next_beacon = self.t + self.beacon
        elif action.kind == "activate_rate":
            link = self.by_id[action.link_id]
            if action.detail["module"] == "mrc":
                inner = link.policy if isinstance(link.policy, LadderState) else _ladder_for(link, self.table)
                link.policy = MrcState(inner=inner, K=int(action.detail["K"]), believes_jammed=link.detector.jammed)
            else:
                link.policy = choose_policy(action.detail["decision"], link.spec.app_rate_mbps, self.table)
        elif action.kind == "restore":
            self.cca = dict(self.default_cca)
            self.power = dict(self.default_power)
            self.distributed = None
            for link in self.links:
                link.policy = link.base_policy
        self.events.append(rec)

    def _assign(self, cca: dict, power: dict) -> None:
        for node, v in cca.items():
            self.cca[node] = max(v, self.default_cca[node])
        for node, p in power.items():
            self.power[node] = p

    def _link_rssi(self, t_s: float) -> list[LinkRssi]:
        return [LinkRssi(l.spec.tx, l.spec.rx, self.rssi_matrix(l, t_s)) for l in self.links]

    def _beacon_round(self) -> None:
        t_s = self.t * self.slot
        links = self._link_rssi(t_s)
        emitting = self._emitting()

        def loss(sender: str, receiver: str) -> float:
            beacon = None
            jr = -math.inf
            for l in self.links:
                if (l.spec.tx, l.spec.rx) == (sender, receiver):
                    beacon = self.power[sender] - l.spec.path_loss_db
                elif (l.spec.rx, l.spec.tx) == (sender, receiver):
                    beacon = self.power[sender] - l.spec.path_loss_rt_db
                else:
                    continue
                for j, on in zip(self.jammers, emitting):
                    r = self._jammer_rssi(j, l.spec.id, t_s)
                    if r is not None and on:
                        jr = max(jr, r[1] if receiver == l.spec.rx else r[0])
            if beacon is None:
                return 1.0
            return beacon_loss_probability(beacon, None if jr == -math.inf else jr, 1.0, self.pc_cfg.delta_db)

        self.distributed, assignment, done = distributed_round(
            self.distributed, links, loss, self.pc_cfg, self.rng_beacon
        )
        self._assign(assignment.cca_dbm, assignment.power_dbm)
        self.events.append(
            {"t_s": t_s, "action": "beacon_round", "epoch": assignment.epoch, "converged": done}
        )
        if done:
            self.distributed = None
        else:
            self._next_beacon = self.t + self.beacon

    def _sample(self) -> None:
        t_s = round(self.t * self.slot, 9)
        period = self.sample * self.slot
        for link in self.links:
            phase = "none"
            for j in self.jammers:
                if link.spec.id in j.spec.links:
                    if j.spec.profile.kind is JammerKind.REACTIVE:
                        phase = "reactive"
                    elif j.phase is Phase.ACTIVE:
                        phase = "active"
                        break
                    else:
                        phase = "sleeping"
            self.rows.append(
                (
                    t_s,
                    link.spec.id,
                    link.s_bits / period / 1e6,
                    link.policy.rate,
                    self.cca[link.spec.rx],
                    _policy_name(link.policy),
                    phase,
                    int(bool(link.truth)),
                    "jammed" if link.detector.jammed else "clear",
                )
            )
            link.s_bits = 0.0

    # ------------------------------------------------------------ main loop

    def run(self) -> SimResult:
        T = self.cfg.n_slots
        self._next_beacon = math.inf
        self.t = 0
        if self.tick:
            self._tick_update()
        while self.t < T:
            t = self.t
            if t > 0:
                if self.window and t % self.window == 0:
                    self._window()
                if self.sample and t % self.sample == 0:
                    self._sample()
            self._jammer_edges()
            if self.tick and t > 0 and t % self.tick == 0:
                self._tick_update()
            if self.distributed is not None and t >= self._next_beacon:
                self._beacon_round()

            t_s = t * self.slot
            nxt = T
            if self.jammers:
                nxt = min(nxt, min(j.next_edge for j in self.jammers))
            for period in (self.window, self.sample, self.tick):
                if period:
                    nxt = min(nxt, (t // period + 1) * period)
            if self.distributed is not None:
                nxt = min(nxt, self._next_beacon)

            conds = []
            for link in self.links:
                c = self._conditions(link, t_s)
                conds.append(c)
                if c.jammed_truth != link.truth:
                    if link.truth is not None:
                        link.truth_edges.append((round(t_s, 9), c.jammed_truth))
                    link.truth = c.jammed_truth
                move = _next_move(link, c.feedback)
                if move is not None:
                    nxt = min(nxt, t + max(1, math.ceil(move / self.slot - 1e-9)))
            n = int(nxt - t)
            dt = n * self.slot
            for link, c in zip(self.links, conds):
                bits = c.goodput_mbps * 1e6 * dt
                link.bits_total += bits
                link.s_bits += bits
                link.w_bits += bits
                link.w_pdr += c.obs_pdr * n
                link.w_rssi += c.rssi_dbm * n
                link.w_n += n
                if c.phase_active:
                    link.bits_jammed += bits
                    link.slots_jammed += n
                _advance_policy(link, c.feedback, dt)
            self.t = int(nxt)

        if self.window and T % self.window == 0:
            self._window()
        if self.sample and T % self.sample == 0:
            self._sample()
        return SimResult(self.cfg, self.rows, self._summary(), self.events)

    def _summary(self) -> dict:
        seconds = self.cfg.n_slots * self.slot
        links = {}
        for link in self.links:
            jam_s = link.slots_jammed * self.slot
            clear_s = seconds - jam_s
            entry = {
                "mean_mbps": link.bits_total / seconds / 1e6,
                "active_mbps": link.bits_jammed / jam_s / 1e6 if jam_s > 0 else None,
                "sleep_mbps": (link.bits_total - link.bits_jammed) / clear_s / 1e6 if clear_s > 0 else None,
                "active_fraction": jam_s / seconds,
            }
            if self.det_cfg:
                entry["detection"] = score_latencies(link.truth_edges, link.detector_edges, self.det_cfg.window_s)
                entry["detection"]["false_flips"] = _false_flips(link.truth_edges, link.detector_edges)
            links[link.spec.id] = entry
        summary = {
            "scenario": self.cfg.name,
            "seed": self.seed,
            "duration_s": seconds,
            "links": links,
            "jammer_cycles": {j.spec.id: j.cycle_index for j in self.jammers},
            "routes": {name: route_throughput(self.rows, members) if self.rows else None
                       for name, members in self.cfg.routes.items()},
            "config": {**self.cfg.raw, "seed": self.seed},
        }
        return summary


def _ladder(p: Policy) -> LadderState:
    return p.inner if isinstance(p, MrcState) else p


def _ladder_for(link: _Link, table) -> LadderState:
    return new_ladder(table, ceiling=table.fixed_rate_for(link.spec.app_rate_mbps))


def _next_move(link: _Link, fb: Feedback) -> Optional[float]:
    p = link.policy
    if isinstance(p, FixedPolicy):
        return None
    return time_to_next_move(_ladder(p), fb, link.dwell)


def _advance_policy(link: _Link, fb: Feedback, dt: float) -> None:
    p = link.policy
    if isinstance(p, FixedPolicy):
        return
    if isinstance(p, MrcState):
        link.policy = mrc_step(p, Transition.NONE, fb, dt, link.dwell)
    else:
        link.policy = ladder_step(p, fb, dt, link.dwell)


def _false_flips(truth_edges: list, detector_edges: list) -> int:
    """Detector flips to jammed before the link was ever actually jammed."""
    first_jam = next((t for t, jammed in truth_edges if jammed), math.inf)
    return sum(1 for t, jammed in detector_edges if jammed and t < first_jam)


def route_throughput(rows: Sequence[tuple], route: Sequence[str]) -> float:
    """End-to-end goodput of a static route: mean over samples of the slowest hop."""
    per_t: dict[float, dict[str, float]] = {}
    for r in rows:
        per_t.setdefault(r[0], {})[r[1]] = r[2]
    if not per_t:
        raise ValueError("trace has no samples")
    missing = [lid for lid in route if lid not in next(iter(per_t.values()))]
    if missing:
        raise KeyError(f"route references links not in trace: {missing}")
    mins = [min(sample[lid] for lid in route) for sample in per_t.values()]
    return float(np.mean(mins))


def run(cfg: ScenarioConfig, seed: Optional[int] = None) -> SimResult:
    return Engine(cfg, seed).run()
