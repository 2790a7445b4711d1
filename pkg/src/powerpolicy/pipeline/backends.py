"""Reasoner backends: the four agent capabilities behind one interface.

The heuristic backend is a fixed lookup keyed by (activity, battery bucket)
with a few sub-activity refinements. It is tuned so that none of its
proposals break the default constraint pack, which gives the test suite a
closed loop that needs no language model.
"""
from __future__ import annotations

import random
from typing import Mapping, Protocol, Sequence

from ..constraints import ConstraintRule, DecisionCtx, applicable
from ..device import (Action, CapabilityProfile, DeviceState, Policy, Verb, check_commands,
                      render_commands)
from ..memory import ContextRule, battery_bucket
from .catalog import AppCatalog, default_catalog
from .types import IDLE, ActivityResult, Advisory, BackendError, DecisionContext


class ReasonerBackend(Protocol):
    name: str

    def recognize(self, ctx: DecisionContext) -> ActivityResult: ...

    def propose(self, activity: ActivityResult, state: DeviceState, locks: Mapping[str, int],
                rules: Sequence[ContextRule], constraints: Sequence[ConstraintRule],
                capabilities: CapabilityProfile) -> Policy: ...

    def verify_assist(self, policy: Policy, constraints: Sequence[ConstraintRule],
                      capabilities: CapabilityProfile) -> list[Advisory]: ...

    def emit_commands(self, policy: Policy, capabilities: CapabilityProfile) -> list[str]: ...


# -- heuristic table ---------------------------------------------------------------

# Savings every activity gets at a given battery bucket.
BUCKET_BASE: dict[str, dict[str, int]] = {
    "High": {"refresh_rate": 90, "nfc": 0, "bg_process_limit": 4},
    "Mid": {"refresh_rate": 60, "cpu_governor": 0, "nfc": 0, "bg_process_limit": 3,
            "brightness": 1536, "dark_mode": 1},
    "Low": {"refresh_rate": 60, "cpu_governor": 0, "cpu_cores_online": 0x0F, "nfc": 0,
            "bluetooth": 0, "bg_process_limit": 2, "auto_sync": 0, "brightness": 1024,
            "dark_mode": 1, "screen_timeout": 15, "auto_rotate": 0, "location_mode": 2},
}

# Per-activity adjustments layered on the bucket base. None removes a base entry,
# i.e. the parameter is left alone for that activity.
ACTIVITY_PATCH: dict[str, dict[str, dict[str, int | None]]] = {
    "navigation": {
        "High": {"refresh_rate": 60, "bg_process_limit": 3},
        "Mid": {"cpu_governor": 1, "brightness": 2048, "dark_mode": None},
        "Low": {"cpu_governor": 1, "cpu_cores_online": 0x3F, "brightness": 1536,
                "location_mode": None, "auto_rotate": None, "screen_timeout": None,
                "bluetooth": None},
    },
    "video": {
        "High": {"refresh_rate": 60},
        "Mid": {"brightness": 1792},
        "Low": {"brightness": 1280, "screen_timeout": None, "auto_rotate": None},
    },
    "meeting": {
        "High": {"refresh_rate": 60, "bg_process_limit": 3},
        "Mid": {"cpu_governor": 1, "brightness": 1792},
        "Low": {"cpu_governor": 1, "cpu_cores_online": 0x3F, "brightness": 1280,
                "bluetooth": None, "screen_timeout": None, "location_mode": None},
    },
    "social": {
        "Mid": {"dark_mode": None},
        "Low": {},
    },
    "music": {
        "High": {"refresh_rate": 60, "brightness": 1536},
        "Mid": {"brightness": 1024, "bluetooth": None},
        "Low": {"brightness": 768, "bluetooth": None},
    },
    "feed": {
        "High": {"bg_process_limit": 3},
        "Low": {"brightness": 1152},
    },
    "reading": {
        "High": {"refresh_rate": 60, "cpu_governor": 0, "brightness": 1536},
        "Mid": {"refresh_rate": 30, "brightness": 1280, "bluetooth": 0},
        "Low": {"refresh_rate": 30, "brightness": 1024, "wifi": 0, "screen_timeout": None},
    },
}

# Finer adjustments keyed by sub-activity, applied last.
SUB_PATCH: dict[str, dict[str, dict[str, int | None]]] = {
    # screen is rarely looked at during background playback
    "background_playback": {
        "High": {"refresh_rate": 30, "screen_timeout": 15},
        "Mid": {"refresh_rate": 30, "screen_timeout": 15, "brightness": 512},
        "Low": {"refresh_rate": 30, "screen_timeout": 15, "brightness": 256, "dark_mode": 1},
    },
    "audio_call": {
        "Mid": {"brightness": 1024},
        "Low": {"brightness": 512, "refresh_rate": 30},
    },
    "searching_destination": {
        "Low": {"cpu_cores_online": 0x0F},
    },
}


def heuristic_targets(activity: str, sub_activity: str, bucket: str) -> dict[str, int]:
    """Resolved heuristic table row: parameter id -> proposed value."""
    row: dict[str, int | None] = dict(BUCKET_BASE[bucket])
    row.update(ACTIVITY_PATCH.get(activity, {}).get(bucket, {}))
    row.update(SUB_PATCH.get(sub_activity, {}).get(bucket, {}))
    return {k: v for k, v in row.items() if v is not None}


def _respect(row: dict[str, int], activity: ActivityResult, state: DeviceState,
             constraints: Sequence[ConstraintRule], profile: CapabilityProfile) -> dict[str, int]:
    """Move table values (or untouched current values) inside applicable predicates."""
    ctx = DecisionCtx(activity.activity_type, activity.activity_type, state.battery_pct)
    row = dict(row)
    for rule in applicable(constraints, ctx):
        pred = rule.predicate
        v = row.get(pred.target, state[pred.target])
        if not pred.test(v):
            ok = [c for c in profile[pred.target].values() if pred.test(c)]
            if ok:
                row[pred.target] = min(ok, key=lambda c: (abs(c - v), c))
    return row


def fallback(bucket: str, profile: CapabilityProfile) -> Policy:
    """Conservative default: KEEP everything, except two safe savings on low battery."""
    sets = {"refresh_rate": 60, "cpu_governor": 1} if bucket == "Low" else {}
    acts = []
    for pid in profile.ids:
        if pid in sets:
            acts.append(Action(pid, Verb.SET, sets[pid], "Medium", "fallback"))
        else:
            acts.append(Action(pid, Verb.KEEP, reason="fallback"))
    return Policy(tuple(acts))


class HeuristicBackend:
    name = "heuristic"

    def __init__(self, catalog: AppCatalog | None = None, coarse: bool = False):
        self.catalog = catalog or default_catalog()
        # coarse recognition sees only the app category, no sub-activity
        self.coarse = coarse

    def recognize(self, ctx: DecisionContext) -> ActivityResult:
        desc = ctx.ui_descriptor or {}
        pkg = desc.get("package") or ctx.device_state.foreground_app
        if pkg not in self.catalog:
            return ActivityResult(IDLE, "unknown", 0.5, "low")
        info = self.catalog[pkg]
        crit = self.catalog.critical_level.get(info.category, "low")
        if self.coarse:
            return ActivityResult(info.category, info.category, 1.0, crit)
        sub = info.scenarios.get(desc.get("scenario"), info.default_sub)
        return ActivityResult(info.category, sub, 1.0, crit)

    def propose(self, activity, state, locks, rules, constraints, capabilities) -> Policy:
        row = heuristic_targets(activity.activity_type, activity.sub_activity,
                                battery_bucket(state.battery_pct))
        row = _respect(row, activity, state, constraints, capabilities)
        acts = []
        for pid in capabilities.ids:
            if pid not in row or pid in locks or state[pid] == row[pid]:
                continue
            impact = capabilities[pid].impact
            acts.append(Action(pid, Verb.SET, row[pid], impact,
                               f"{activity.activity_type}/{activity.sub_activity}"))
        return Policy(tuple(acts))

    def verify_assist(self, policy, constraints, capabilities) -> list[Advisory]:
        out = []
        for a in policy:
            if a.target not in capabilities:
                out.append(Advisory(a.target, "unknown parameter"))
                continue
            spec = capabilities[a.target]
            v = a.written_value(spec)
            if v is not None and not spec.contains(v):
                out.append(Advisory(a.target, f"value {v} outside domain"))
            elif spec.privileged and a.verb in (Verb.SET, Verb.DISABLE, Verb.ENABLE):
                out.append(Advisory(a.target, "requires elevated privileges"))
        return out

    def emit_commands(self, policy, capabilities) -> list[str]:
        return render_commands(policy, capabilities)


class AdversarialBackend(HeuristicBackend):
    """Proposes switching every parameter to the bottom of its domain."""

    name = "adversarial"

    def propose(self, activity, state, locks, rules, constraints, capabilities) -> Policy:
        return Policy(tuple(Action(pid, Verb.DISABLE, priority="High", reason="maximum saving")
                            for pid in capabilities.ids))


class MixedBackend(HeuristicBackend):
    """Heuristic proposals with a seeded fraction replaced by adversarial ones."""

    name = "mixed"

    def __init__(self, rate: float = 0.2, seed: int = 0, catalog: AppCatalog | None = None,
                 coarse: bool = False):
        super().__init__(catalog, coarse)
        self.rate = rate
        self.rng = random.Random(seed)
        self._adv = AdversarialBackend(catalog, coarse)

    def propose(self, activity, state, locks, rules, constraints, capabilities) -> Policy:
        src = self._adv if self.rng.random() < self.rate else super()
        return src.propose(activity, state, locks, rules, constraints, capabilities)


class BrokenBackend(HeuristicBackend):
    """Returns output that cannot be parsed; exercises the fallback path."""

    name = "broken"

    def propose(self, activity, state, locks, rules, constraints, capabilities) -> Policy:
        raise BackendError("unparseable policy document")


def check_emitted(commands: Sequence[str]) -> None:
    if not isinstance(commands, list) or not check_commands(commands):
        raise BackendError("emitted commands failed the template check")
