"""One decision cycle: observe, recognize, decide, verify, execute."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from ..constraints import ConstraintRule, DecisionCtx, StatePredicate, verify
from ..device import (Action, CapabilityProfile, DeviceState, Policy, Verb, apply_policy,
                      default_profile, render_commands, validate_value)
from ..memory import (STM, AutoRecord, ContextRule, ContextSignature, LPMPage, battery_bucket,
                      record_override, retrieve, state_diff)
from .backends import ReasonerBackend, check_emitted, fallback
from .catalog import AppCatalog, default_catalog
from .redact import redact
from .types import IDLE, ActivityResult, CycleTrace, DecisionContext, digest, state_to_dict

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Toggles:
    memory: bool = True
    pdl: bool = True
    feedback: bool = True
    multi_agent: bool = True


def _best_rules(rules: Sequence[ContextRule]) -> dict[str, list[StatePredicate]]:
    """Per target, the predicates of the most specific, most confident rule."""
    ranked = sorted(rules, key=lambda r: (-r.signature.specificity(), -r.confidence, r.key))
    out: dict[str, list[StatePredicate]] = {}
    for r in ranked:
        for t in r.targets:
            if t not in out:
                out[t] = [p for p in r.fragment if p.target == t]
    return out


def arbitrate(locks: Mapping[str, int], context_rules: Sequence[ContextRule],
              general: Mapping[str, int], proposal: Policy, state: DeviceState | None = None,
              profile: CapabilityProfile | None = None) -> Policy:
    """Merge memory and proposal per parameter: lock > context rule > proposal > general profile."""
    profile = profile or default_profile()
    frags = _best_rules(context_rules)
    out = []
    for pid in profile.ids:
        spec = profile[pid]
        prop = proposal.get(pid)
        if pid in locks:
            out.append(Action(pid, Verb.LOCK, locks[pid], "High", "user lock"))
            continue
        written = prop.written_value(spec) if prop is not None else None
        current = state[pid] if state is not None else None
        if pid in frags:
            v = written if written is not None else current
            preds = frags[pid]
            if v is not None and not all(p.test(v) for p in preds):
                ok = [c for c in spec.values() if all(p.test(c) for p in preds)]
                if ok:
                    fix = min(ok, key=lambda c: (abs(c - v), c))
                    out.append(Action(pid, Verb.SET, fix, "High", "learned preference"))
                    continue
        if prop is not None:
            out.append(prop)
            continue
        g = general.get(pid)
        if g is not None and g != spec.default and g != current and spec.contains(g):
            out.append(Action(pid, Verb.SET, g, "Low", "general profile"))
    extra = [a for a in proposal if a.target not in profile]
    return Policy(tuple(out + extra))


def legalize(policy: Policy, profile: CapabilityProfile) -> tuple[Policy, list[str]]:
    """Drop unknown targets and snap out-of-domain values to the nearest admissible one."""
    out, fixes = [], []
    for a in policy:
        if a.target not in profile:
            fixes.append(f"dropped unknown parameter {a.target}")
            continue
        spec = profile[a.target]
        v = a.written_value(spec)
        if v is not None and a.verb in (Verb.SET, Verb.LOCK):
            res = validate_value(spec, v)
            if not res.valid:
                fixes.append(f"{a.target} {v} -> {res.nearest}")
                a = Action(a.target, a.verb, res.nearest, a.priority, a.reason)
        out.append(a)
    return Policy(tuple(out)), fixes


def detect_overrides(stm: STM, state: DeviceState) -> tuple[list[tuple[str, int, int]], int]:
    """Phase 1: diff against the last executed state, lock and log user changes.

    Returns the overrides and how many of them undid a value the system wrote.
    """
    if stm.last_known_state is None:
        return [], 0
    prev = stm.last_known_state
    # the baseline already holds the system's writes; a user change on top of one
    # is still an override, so only writes that are still in place stay masked
    mask = {p for p in stm.attributed if state[p] == prev[p]}
    diffs = state_diff(prev, state, mask)
    reverts = 0
    for pid, old, new in diffs:
        if stm.written.get(pid) == old:
            reverts += 1
            del stm.written[pid]
        if stm.last_signature is not None:
            record_override(stm, pid, new, stm.last_signature, old_value=old, clock=state.clock)
    stm.last_known_state = state
    stm.attributed = frozenset()
    return diffs, reverts


def run_cycle(ctx: DecisionContext, stm: STM, page: LPMPage | None, constraints: Sequence[ConstraintRule],
              capabilities: CapabilityProfile, backend: ReasonerBackend, *, toggles: Toggles = Toggles(),
              cycle_id: int = 0, trigger: str = "timer", catalog: AppCatalog | None = None,
              timed: bool = False) -> CycleTrace:
    catalog = catalog or default_catalog()
    profile = capabilities
    state = ctx.device_state
    clock = time.perf_counter if timed else (lambda: 0.0)
    timings: dict[str, float] = {}
    t = clock()

    def lap(name):
        nonlocal t
        now = clock()
        timings[name] = now - t
        t = now

    inputs = digest({"state": state_to_dict(state), "ui": ctx.ui_descriptor,
                     "locks": stm.active_constraints, "page": page.to_dict() if page else None})

    # phase 1: feedback
    overrides, reverts = [], 0
    if toggles.feedback:
        overrides, reverts = detect_overrides(stm, state)
    stm.start_session(state.foreground_app)
    locks = dict(stm.active_constraints)
    lap("feedback")

    # phase 2: activity and signature
    degraded = []
    safe_ctx = DecisionContext(state, redact(dict(ctx.ui_descriptor)), tuple(ctx.app_history))
    try:
        activity = backend.recognize(safe_ctx)
    except Exception as e:
        degraded.append(f"recognize: {e}")
        cat = catalog.category(state.foreground_app) or IDLE
        activity = ActivityResult(cat, "unknown", 0.0, "low")
    category = catalog.category(state.foreground_app) or activity.activity_type
    sub = activity.sub_activity if toggles.multi_agent else category
    sig = ContextSignature.build(category, sub, state.battery_pct, state.clock)
    dctx = DecisionCtx(category, activity.activity_type, state.battery_pct)
    lap("recognize")

    # phase 3: memory retrieval, proposal, arbitration
    rules: tuple[ContextRule, ...] = ()
    level, general = "general", {}
    if toggles.memory and page is not None:
        hit = retrieve(page, sig)
        rules, level, general = hit.rules, hit.level, page.general
    bucket = battery_bucket(state.battery_pct)
    if degraded:
        raw = fallback(bucket, profile)
    else:
        try:
            raw = backend.propose(activity, state, locks, rules, constraints, profile)
            if not isinstance(raw, Policy):
                raise TypeError(f"propose returned {type(raw).__name__}")
        except Exception as e:
            degraded.append(f"propose: {e}")
            raw = fallback(bucket, profile)
    arbitrated = arbitrate(locks, rules, general, raw, state, profile)
    legal, fixes = legalize(arbitrated, profile)
    lap("decide")

    # phase 4: verification, emission, execution
    report = None
    executed = legal
    if toggles.pdl:
        executed, report = verify(legal, state, dctx, constraints, profile, locks)
    advisories = []
    if toggles.multi_agent:
        try:
            advisories = backend.verify_assist(executed, constraints, profile)
        except Exception as e:
            log.info("verify_assist failed: %s", e)
    try:
        commands = backend.emit_commands(executed, profile)
        check_emitted(commands)
    except Exception as e:
        degraded.append(f"emit: {e}")
        commands = render_commands(executed, profile)
    new_state = apply_policy(state, executed, profile)
    changed = tuple(p for p in profile.ids if new_state[p] != state[p])
    attributed = frozenset(changed) - set(locks)
    stm.last_known_state = new_state
    stm.attributed = attributed
    stm.last_signature = sig
    stm.written.update({p: new_state[p] for p in attributed})
    stm.event_log.append(AutoRecord(state.clock, stm.session_id, state.foreground_app, sig,
                                    tuple(r.key for r in rules),
                                    tuple(sorted(new_state.values.items())), changed))
    lap("execute")

    return CycleTrace(cycle_id, trigger, inputs, activity, sig, level, tuple(r.key for r in rules),
                      raw, arbitrated, report, executed, commands, attributed, new_state,
                      overrides, reverts, changed, "; ".join(degraded), fixes, advisories,
                      timings if timed else {})


@dataclass
class Pipeline:
    """Owns the per-device state a sequence of cycles needs."""

    backend: ReasonerBackend
    profile: CapabilityProfile = field(default_factory=default_profile)
    constraints: Sequence[ConstraintRule] = ()
    toggles: Toggles = Toggles()
    stm: STM = field(default_factory=STM)
    page: LPMPage | None = None
    catalog: AppCatalog = field(default_factory=default_catalog)
    sink: Callable[[CycleTrace], None] | None = None
    cycles: int = 0

    def cycle(self, ctx: DecisionContext, trigger: str = "timer") -> CycleTrace:
        if self.stm.last_known_state is None:
            self.stm.last_known_state = ctx.device_state
        tr = run_cycle(ctx, self.stm, self.page, self.constraints, self.profile, self.backend,
                       toggles=self.toggles, cycle_id=self.cycles, trigger=trigger, catalog=self.catalog)
        self.cycles += 1
        if self.sink is not None:
            self.sink(tr)
        return tr

    def observe(self, state: DeviceState) -> tuple[list[tuple[str, int, int]], int]:
        """Pick up user changes made since the last cycle without deciding anything."""
        if not self.toggles.feedback:
            self.stm.last_known_state = state
            return [], 0
        return detect_overrides(self.stm, state)
