"""Session and multi-day simulation around a device controller.

The world loop per session: cycles fire on the app switch and every five
minutes; at each later cycle boundary the simulated user may override
parameters that sit outside their GT band; energy accrues between cycles
on whatever state is live, and drains the battery.
"""
from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from ..constraints import ConstraintRule, DecisionCtx, default_constraints
from ..device import (CapabilityProfile, DeviceState, Policy, SimClock, Verb, apply_policy,
                      default_profile)
from ..memory import (STM, Extractor, FeedbackEvent, LPMPage, battery_bucket)
from ..pipeline import (AdversarialBackend, CycleTrace, DecisionContext, HeuristicBackend, MixedBackend,
                        Pipeline, Toggles, legalize, trigger_walk)
from ..pipeline.catalog import AppCatalog, default_catalog
from .energy import EnergyModel, default_energy_model
from .profiles import UserProfile, simulate_user_response, stock_state
from .scenarios import ScenarioPack, TaskScenario


@dataclass
class CycleRecord:
    day: int
    minute: int
    app: str
    category: str
    bucket: str
    ctx: DecisionCtx
    raw_policy: Policy
    executed_policy: Policy
    state_after: DeviceState
    energy: float = 0.0
    overrides: int = 0
    reverts: int = 0
    changed: tuple[str, ...] = ()
    trace: CycleTrace | None = None


class Controller(Protocol):
    name: str

    def begin(self, state: DeviceState) -> None: ...

    def cycle(self, ctx: DecisionContext, trigger: str) -> tuple[DeviceState, CycleRecord]: ...

    def end(self, state: DeviceState) -> None: ...

    def night(self, day: int) -> None: ...


def _record(state: DeviceState, after: DeviceState, ctx: DecisionCtx, raw: Policy, executed: Policy,
            trace: CycleTrace | None = None) -> CycleRecord:
    changed = tuple(p for p in state.values if after[p] != state[p])
    return CycleRecord(state.clock.day, state.clock.minute, state.foreground_app, ctx.app_category,
                       battery_bucket(state.battery_pct), ctx, raw, executed, after, changed=changed,
                       trace=trace)


class NullController:
    """Stock device: never intervenes."""

    name = "stock"

    def __init__(self, catalog: AppCatalog | None = None):
        self.catalog = catalog or default_catalog()

    def begin(self, state):
        pass

    def cycle(self, ctx, trigger):
        s = ctx.device_state
        dctx = DecisionCtx(self.catalog.category(s.foreground_app) or "idle", "", s.battery_pct)
        return s, _record(s, s, dctx, Policy(), Policy())

    def end(self, state):
        pass

    def night(self, day):
        pass


class StaticController(NullController):
    """Applies a fixed policy once when an app comes to the foreground."""

    def __init__(self, name: str, policy_fn: Callable[[str, DeviceState], Policy],
                 capabilities: CapabilityProfile | None = None, catalog: AppCatalog | None = None):
        super().__init__(catalog)
        self.name = name
        self.policy_fn = policy_fn
        self.caps = capabilities or default_profile()

    def cycle(self, ctx, trigger):
        s = ctx.device_state
        cat = self.catalog.category(s.foreground_app) or "idle"
        dctx = DecisionCtx(cat, cat, s.battery_pct)
        if trigger != "app_switch":
            return s, _record(s, s, dctx, Policy(), Policy())
        pol, _ = legalize(self.policy_fn(cat, s), self.caps)
        after = apply_policy(s, pol, self.caps)
        return after, _record(s, after, dctx, pol, pol)


class SystemController:
    """The full decision pipeline plus nightly memory distillation."""

    def __init__(self, backend, capabilities: CapabilityProfile | None = None,
                 constraints: Sequence[ConstraintRule] | None = None, toggles: Toggles = Toggles(),
                 pages: dict[str, LPMPage] | None = None, catalog: AppCatalog | None = None,
                 name: str = "pipeline", sink: Callable[[CycleTrace], None] | None = None):
        self.name = name
        self.caps = capabilities or default_profile()
        self.pipeline = Pipeline(backend, self.caps,
                                 default_constraints() if constraints is None else tuple(constraints),
                                 toggles, STM(), None, catalog or default_catalog(), sink)
        self.toggles = toggles
        self.pages = pages if pages is not None else {}
        self.extractors: dict[str, Extractor] = {}
        self.week_log: list = []
        self.strong_today = 0

    @property
    def stm(self) -> STM:
        return self.pipeline.stm

    def begin(self, state):
        self.stm.end_session()
        self.stm.last_known_state = state
        self.stm.attributed = frozenset()

    def cycle(self, ctx, trigger):
        app = ctx.device_state.foreground_app
        self.pipeline.page = self.pages.setdefault(app, LPMPage(app)) if self.toggles.memory else None
        tr = self.pipeline.cycle(ctx, trigger)
        s = ctx.device_state
        dctx = DecisionCtx(tr.signature.app_category, tr.activity.activity_type, s.battery_pct)
        return tr.state_after, _record(s, tr.state_after, dctx, tr.arbitrated_policy, tr.executed_policy, tr)

    def end(self, state):
        self.pipeline.observe(state)
        self.stm.end_session()

    def night(self, day):
        snap = self.stm.drain()
        self.strong_today = sum(isinstance(e, FeedbackEvent) and e.strength == "STRONG" for e in snap)
        if not self.toggles.memory:
            return
        self.week_log.extend(snap)
        for app in sorted(self.pages):
            ex = self.extractors.setdefault(app, Extractor())
            ex.distill(snap, self.pages[app], day)
        if day % 7 == 6:
            for app in sorted(self.pages):
                self.extractors[app].aggregate(self.week_log, self.pages[app], self.caps)
            self.week_log = []

    def rule_count(self) -> int:
        return sum(len(p.rules) for p in self.pages.values())

    def candidate_count(self) -> int:
        return sum(len(p.candidates) for p in self.pages.values())


# -- baselines -----------------------------------------------------------------------

BATTERY_SAVER = {"brightness_cap": 1536, "refresh_rate": 60, "auto_sync": 0, "bg_process_limit": 2}

# Static per-category table, no battery or sub-activity awareness.
RULE_TABLE: dict[str, dict[str, int]] = {
    "navigation": {"refresh_rate": 60, "nfc": 0, "bg_process_limit": 3},
    "video": {"refresh_rate": 60, "nfc": 0, "bg_process_limit": 3, "auto_sync": 0},
    "meeting": {"refresh_rate": 60, "nfc": 0},
    "social": {"refresh_rate": 60, "brightness": 1536, "nfc": 0, "bg_process_limit": 3},
    "music": {"refresh_rate": 60, "brightness": 1024, "nfc": 0, "bg_process_limit": 3, "screen_timeout": 15},
    "feed": {"refresh_rate": 60, "nfc": 0, "bg_process_limit": 3},
    "reading": {"refresh_rate": 60, "brightness": 1536, "bluetooth": 0, "nfc": 0, "bg_process_limit": 2,
                "auto_sync": 0},
}


def battery_saver_policy(category: str, state: DeviceState) -> Policy:
    cap = BATTERY_SAVER["brightness_cap"]
    acts = {"refresh_rate": BATTERY_SAVER["refresh_rate"], "auto_sync": BATTERY_SAVER["auto_sync"],
            "bg_process_limit": BATTERY_SAVER["bg_process_limit"]}
    if state["brightness"] > cap:
        acts["brightness"] = cap
    return _sets(acts, "battery saver")


def rule_based_policy(category: str, state: DeviceState) -> Policy:
    return _sets(RULE_TABLE.get(category, {}), f"rule table {category}")


def _sets(values: dict[str, int], reason: str) -> Policy:
    from ..device import Action
    return Policy(tuple(Action(p, Verb.SET, v, "Medium", reason) for p, v in sorted(values.items())))


def make_backend(kind: str = "heuristic", adversarial: bool = False, seed: int = 0, coarse: bool = False,
                 rate: float = 0.2):
    if kind == "remote":
        from ..pipeline import RemoteBackend
        return RemoteBackend()
    if kind == "adversarial":
        return AdversarialBackend(coarse=coarse)
    if adversarial:
        return MixedBackend(rate, seed, coarse=coarse)
    return HeuristicBackend(coarse=coarse)


# -- sessions ------------------------------------------------------------------------

@dataclass
class SessionTrace:
    task: str
    category: str
    cycles: list[CycleRecord] = field(default_factory=list)
    energy: float = 0.0
    overrides: int = 0
    reverts: int = 0
    adjustments: int = 0
    first_state: DeviceState | None = None
    final_state: DeviceState | None = None


def simulate_session(user: UserProfile, task: TaskScenario, controller: Controller, state: DeviceState,
                     rng: random.Random, *, capabilities: CapabilityProfile | None = None,
                     model: EnergyModel | None = None, drain: bool = True,
                     user_active: bool = True) -> SessionTrace:
    """Run one foreground session of `task` starting from `state` (clock = session start)."""
    caps = capabilities or default_profile()
    model = model or default_energy_model()
    start = state.clock
    state = state.replace(foreground_app=task.app)
    level = float(state.battery_pct)
    trace = SessionTrace(task.id, task.category)
    written: dict[str, int] = {}
    controller.begin(state)

    def user_turn(s: DeviceState) -> tuple[DeviceState, int, int]:
        if not user_active:
            return s, 0, 0
        ovs = simulate_user_response(user, s, task.category, battery_bucket(s.battery_pct), rng, caps)
        rev = 0
        for o in ovs:
            if written.get(o.param) == o.old:
                rev += 1
                del written[o.param]
        trace.overrides += len(ovs)
        trace.reverts += rev
        return (s.with_values({o.param: o.new for o in ovs}) if ovs else s), len(ovs), rev

    fires = trigger_walk([0], task.duration)
    for i, (m, kind) in enumerate(fires):
        state = state.replace(clock=start.advance(m))
        n_ov = n_rev = 0
        if m > 0:
            state, n_ov, n_rev = user_turn(state)
        ctx = DecisionContext(state, task.ui_descriptor(m), ((task.app, m),))
        state, rec = controller.cycle(ctx, kind)
        rec.overrides, rec.reverts = n_ov, n_rev
        for p in rec.changed:
            written[p] = state[p]
        trace.adjustments += len(rec.changed)
        if trace.first_state is None:
            trace.first_state = state
        nxt = fires[i + 1][0] if i + 1 < len(fires) else task.duration
        rec.energy = model.energy(state, nxt - m)
        trace.energy += rec.energy
        if drain:
            level = max(0.0, level - model.drain(rec.energy))
            state = state.replace(battery_pct=int(round(level)))
        trace.cycles.append(rec)
    state = state.replace(clock=start.advance(task.duration))
    state, n_ov, n_rev = user_turn(state)
    if trace.cycles:
        trace.cycles[-1].overrides += n_ov
        trace.cycles[-1].reverts += n_rev
    controller.end(state)
    trace.final_state = state
    return trace


# -- longitudinal runs -----------------------------------------------------------------

@dataclass
class SimRun:
    seed: int
    days: int
    user: UserProfile
    scenarios: ScenarioPack
    toggles: Toggles = Toggles()
    backend: str = "heuristic"
    adversarial: bool = False
    capabilities: CapabilityProfile | None = None
    constraints: Sequence[ConstraintRule] | None = None
    model: EnergyModel | None = None
    morning_battery: int = 100


@dataclass
class DayRow:
    day: int
    sessions: int
    cycles: int
    energy: float
    strong_events: int
    reverts: int
    adjustments: int
    rules: int
    candidates: int

    @property
    def revert_rate(self) -> float:
        return 100.0 * self.reverts / self.adjustments if self.adjustments else 0.0


@dataclass
class LongitudinalTrace:
    days: list[DayRow] = field(default_factory=list)
    cycles: list[tuple] = field(default_factory=list)
    confidence: list[tuple] = field(default_factory=list)
    traces: list[CycleTrace] = field(default_factory=list)
    pages: dict[str, LPMPage] = field(default_factory=dict)
    events: list = field(default_factory=list)

    CYCLE_COLUMNS = ("day", "cycle", "minute", "app", "category", "bucket", "energy", "reverts", "rule_count")
    DAY_COLUMNS = ("day", "sessions", "cycles", "energy", "strong_events", "reverts", "adjustments",
                   "revert_rate", "rules", "candidates")
    CONF_COLUMNS = ("day", "app", "kind", "rule", "confidence")

    def cycles_csv(self) -> str:
        return _csv(self.CYCLE_COLUMNS, self.cycles)

    def days_csv(self) -> str:
        rows = [(d.day, d.sessions, d.cycles, _f(d.energy), d.strong_events, d.reverts, d.adjustments,
                 _f(d.revert_rate), d.rules, d.candidates) for d in self.days]
        return _csv(self.DAY_COLUMNS, rows)

    def confidence_csv(self) -> str:
        return _csv(self.CONF_COLUMNS, self.confidence)


def _f(x: float) -> str:
    return f"{x:.6f}"


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _rule_label(rule) -> str:
    sig = "/".join(rule.signature.as_tuple())
    return sig + ":" + ";".join(str(p) for p in rule.fragment)


def run_days(run: SimRun, keep_traces: bool = False) -> LongitudinalTrace:
    caps = run.capabilities or default_profile()
    model = run.model or default_energy_model()
    user = run.user.copy()
    rng = random.Random(run.seed)
    out = LongitudinalTrace()
    sink = out.traces.append if keep_traces else None
    backend = make_backend(run.backend, run.adversarial, run.seed,
                           coarse=not run.toggles.multi_agent)
    ctl = SystemController(backend, caps, run.constraints, run.toggles, sink=sink)
    state = stock_state(user, caps)
    cycle_no = 0
    for day in range(run.days):
        user.apply_shifts(day)
        state = state.replace(battery_pct=run.morning_battery)
        row = DayRow(day, 0, 0, 0.0, 0, 0, 0, 0, 0)
        for start, task in run.scenarios.day_schedule(day):
            state = state.replace(clock=SimClock(day, start))
            st = simulate_session(user, task, ctl, state, rng, capabilities=caps, model=model)
            state = st.final_state
            row.sessions += 1
            row.energy += st.energy
            row.reverts += st.reverts
            row.adjustments += st.adjustments
            for rec in st.cycles:
                out.cycles.append((day, cycle_no, rec.minute, rec.app, rec.category, rec.bucket,
                                   _f(rec.energy), rec.reverts, ctl.rule_count()))
                cycle_no += 1
                row.cycles += 1
        out.events.extend(e for e in ctl.stm.event_log if isinstance(e, FeedbackEvent))
        ctl.night(day)
        row.strong_events = ctl.strong_today
        row.rules, row.candidates = ctl.rule_count(), ctl.candidate_count()
        out.days.append(row)
        for app in sorted(ctl.pages):
            page = ctl.pages[app]
            for kind, items in (("rule", page.rules), ("candidate", page.candidates)):
                for r in sorted(items, key=lambda r: r.key):
                    out.confidence.append((day, app, kind, _rule_label(r), _f(r.confidence)))
    out.pages = ctl.pages
    return out
