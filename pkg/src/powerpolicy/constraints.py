"""Box-modality safety constraints checked against the post-state of a policy.

A rule reads ``condition -> [policy](target cmp bound)``: whenever the
condition holds in the decision context, the state reached after executing
the whole policy must satisfy the predicate. ``verify`` repairs a proposed
policy until that holds for every applicable rule.

Constraint pack documents look like::

    {"rules": [
      {"id": "nav_location", "kind": "hard",
       "when": [{"app_category": ["navigation"]}],
       "require": {"target": "location_mode", "cmp": ">=", "bound": 3},
       "strategy": "clamp_to_boundary"}
    ]}

Condition atoms (all atoms in ``when`` must hold):

* ``{"app_category": [name, ...]}``
* ``{"activity_type": [name, ...]}``
* ``{"battery_pct": {"cmp": "<" | "<=" | ">" | ">=", "value": 0..100}}``
* ``{"always_true": true}``
"""
from __future__ import annotations

import json
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple

from .device import (Action, CapabilityProfile, DeviceState, Policy,
                     ProfileError, Verb, apply_policy, canonical_json, data_path,
                     default_profile, schema_check)

BATTERY_CMPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}
PREDICATE_CMPS = (">=", "<=", "=", "in")


class ConstraintError(ProfileError):
    """Constraint pack document failed validation."""


class ContradictionError(ValueError):
    """Applicable predicates on one parameter admit no common value."""


class DecisionCtx(NamedTuple):
    app_category: str
    activity_type: str
    battery_pct: int


@dataclass(frozen=True)
class Atom:
    kind: str  # app_category | activity_type | battery_pct | always_true
    names: frozenset[str] = frozenset()
    cmp: str = ""
    threshold: int = 0

    def holds(self, ctx: DecisionCtx) -> bool:
        if self.kind == "app_category":
            return ctx.app_category in self.names
        if self.kind == "activity_type":
            return ctx.activity_type in self.names
        if self.kind == "battery_pct":
            return BATTERY_CMPS[self.cmp](ctx.battery_pct, self.threshold)
        return True

    def to_dict(self) -> dict:
        if self.kind in ("app_category", "activity_type"):
            return {self.kind: sorted(self.names)}
        if self.kind == "battery_pct":
            return {"battery_pct": {"cmp": self.cmp, "value": self.threshold}}
        return {"always_true": True}


@dataclass(frozen=True)
class Condition:
    atoms: tuple[Atom, ...]

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("a condition needs at least one atom")
        for a in self.atoms:
            if a.kind == "battery_pct" and not 0 <= a.threshold <= 100:
                raise ValueError("battery threshold outside 0-100")

    def holds(self, ctx: DecisionCtx) -> bool:
        return all(a.holds(ctx) for a in self.atoms)

    def kinds(self) -> set[str]:
        return {a.kind for a in self.atoms}


@dataclass(frozen=True)
class StatePredicate:
    target: str
    cmp: str
    bound: int | tuple[int, ...]

    def __post_init__(self):
        if self.cmp not in PREDICATE_CMPS:
            raise ValueError(f"unknown comparison {self.cmp!r}")
        if self.cmp == "in":
            object.__setattr__(self, "bound", tuple(sorted(self.bound)))

    def test(self, v: int) -> bool:
        if self.cmp == ">=":
            return v >= self.bound
        if self.cmp == "<=":
            return v <= self.bound
        if self.cmp == "=":
            return v == self.bound
        return v in self.bound

    def __call__(self, state: DeviceState) -> bool:
        return self.test(state[self.target])

    def to_dict(self) -> dict:
        b = list(self.bound) if self.cmp == "in" else self.bound
        return {"target": self.target, "cmp": self.cmp, "bound": b}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "StatePredicate":
        b = d["bound"]
        return cls(d["target"], d["cmp"], tuple(b) if d["cmp"] == "in" else b)

    def __str__(self):
        return f"{self.target} {self.cmp} {self.bound}"


@dataclass(frozen=True)
class ConstraintRule:
    id: str
    kind: str  # hard | contextual
    condition: Condition
    predicate: StatePredicate
    strategy: str = "clamp_to_boundary"  # or reject_action

    def __post_init__(self):
        kinds = self.condition.kinds()
        if self.kind == "hard" and kinds == {"activity_type"}:
            raise ValueError(f"{self.id}: hard rules bind to app category or battery, not activity alone")
        if self.kind == "contextual" and not kinds & {"app_category", "activity_type"}:
            raise ValueError(f"{self.id}: contextual rules need a category or activity atom")
        if self.strategy not in ("clamp_to_boundary", "reject_action"):
            raise ValueError(f"{self.id}: unknown strategy {self.strategy!r}")


# -- verdicts ------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    target: str
    status: str  # approved | corrected | rejected
    old: int | None = None
    new: int | None = None
    rule_id: str = ""


@dataclass
class VerificationReport:
    verdicts: list[Verdict] = field(default_factory=list)
    violated_rules: list[str] = field(default_factory=list)
    injected: list[Action] = field(default_factory=list)
    lock_conflicts: list[str] = field(default_factory=list)

    def count(self, status: str) -> int:
        return sum(v.status == status for v in self.verdicts)

    @property
    def interventions(self) -> int:
        return self.count("corrected") + self.count("rejected") + len(self.injected)

    def to_dict(self) -> dict:
        return {
            "verdicts": [v.__dict__ for v in self.verdicts],
            "violated_rules": list(self.violated_rules),
            "injected": [a.to_dict() for a in self.injected],
            "lock_conflicts": list(self.lock_conflicts),
        }


def applicable(rules: Iterable[ConstraintRule], ctx: DecisionCtx) -> list[ConstraintRule]:
    return [r for r in rules if r.condition.holds(ctx)]


def violations(state: DeviceState, rules: Iterable[ConstraintRule], ctx: DecisionCtx) -> list[ConstraintRule]:
    """Applicable rules whose predicate fails on `state`."""
    return [r for r in applicable(rules, ctx) if not r.predicate(state)]


_FEASIBLE_CACHE: dict = {}


def _feasible(target: str, preds: list[StatePredicate], profile: CapabilityProfile) -> list[int]:
    key = (id(profile), target, tuple(preds))
    vals = _FEASIBLE_CACHE.get(key)
    if vals is None:
        vals = [v for v in profile[target].values() if all(p.test(v) for p in preds)]
        _FEASIBLE_CACHE[key] = vals
    if not vals:
        raise ContradictionError(f"{target}: {' and '.join(map(str, preds))} is unsatisfiable")
    return vals


def _nearest(vals: list[int], x: int) -> int:
    return min(vals, key=lambda v: (abs(v - x), v))


def verify(policy: Policy, state: DeviceState, ctx: DecisionCtx, rules: Iterable[ConstraintRule],
           profile: CapabilityProfile | None = None,
           locks: Mapping[str, int] | None = None) -> tuple[Policy, VerificationReport]:
    """Repair `policy` so its post-state satisfies every applicable rule.

    Offending actions are clamped to the nearest compliant value (which is the
    predicate boundary for inequalities) or dropped, per the rule's strategy.
    Parameters the policy does not touch but which already violate a rule get
    a synthetic SET. Contextual rules are suspended on parameters the user has
    locked this session; hard rules are not, and such clashes are reported.
    """
    profile = profile or default_profile()
    locks = locks or {}
    report = VerificationReport()
    active = [r for r in applicable(rules, ctx)
              if not (r.kind == "contextual" and r.predicate.target in locks)]

    by_target: dict[str, list[ConstraintRule]] = {}
    for r in active:
        by_target.setdefault(r.predicate.target, []).append(r)
    feasible = {t: _feasible(t, [r.predicate for r in rs], profile) for t, rs in by_target.items()}

    post = apply_policy(state, policy, profile)
    failing = [r for r in active if not r.predicate(post)]
    report.violated_rules = [r.id for r in failing]
    failed_targets: dict[str, ConstraintRule] = {}
    for r in failing:
        failed_targets.setdefault(r.predicate.target, r)

    out = []
    for a in policy:
        rule = failed_targets.get(a.target)
        if rule is None:
            out.append(a)
            report.verdicts.append(Verdict(a.target, "approved"))
            continue
        spec = profile[a.target]
        written = a.written_value(spec)
        current = state[a.target]
        proposed = current if written is None else written
        fix = _nearest(feasible[a.target], proposed)
        # dropping the action is only sound if the untouched value already complies
        if rule.strategy == "reject_action" and all(r.predicate.test(current) for r in by_target[a.target]):
            report.verdicts.append(Verdict(a.target, "rejected", proposed, None, rule.id))
        else:
            out.append(Action(a.target, Verb.SET, fix, a.priority,
                              f"{a.reason} [corrected by {rule.id}]".strip()))
            report.verdicts.append(Verdict(a.target, "corrected", proposed, fix, rule.id))
        if a.verb is Verb.LOCK and rule.kind == "hard":
            report.lock_conflicts.append(f"{rule.id} overrides lock on {a.target}")

    for target, rule in failed_targets.items():
        if policy.get(target) is None:
            fix = _nearest(feasible[target], state[target])
            inj = Action(target, Verb.SET, fix, "High", f"enforce {rule.id}")
            out.append(inj)
            report.injected.append(inj)
            if target in locks:
                report.lock_conflicts.append(f"{rule.id} overrides lock on {target}")
    return Policy(tuple(out)), report


# -- pack documents --------------------------------------------------------------

_ATOM_SCHEMA = {
    "oneOf": [
        {"type": "object", "required": ["app_category"], "additionalProperties": False,
         "properties": {"app_category": {"type": "array", "items": {"type": "string"}, "minItems": 1}}},
        {"type": "object", "required": ["activity_type"], "additionalProperties": False,
         "properties": {"activity_type": {"type": "array", "items": {"type": "string"}, "minItems": 1}}},
        {"type": "object", "required": ["battery_pct"], "additionalProperties": False,
         "properties": {"battery_pct": {
             "type": "object", "required": ["cmp", "value"], "additionalProperties": False,
             "properties": {"cmp": {"enum": list(BATTERY_CMPS)},
                            "value": {"type": "integer", "minimum": 0, "maximum": 100}}}}},
        {"type": "object", "required": ["always_true"], "additionalProperties": False,
         "properties": {"always_true": {"const": True}}},
    ]
}

PACK_SCHEMA = {
    "type": "object",
    "required": ["rules"],
    "additionalProperties": False,
    "properties": {
        "rules": {"type": "array", "items": {
            "type": "object",
            "required": ["id", "kind", "when", "require", "strategy"],
            "additionalProperties": False,
            "properties": {
                "id": {"type": "string"},
                "kind": {"enum": ["hard", "contextual"]},
                "when": {"type": "array", "minItems": 1, "items": _ATOM_SCHEMA},
                "require": {
                    "type": "object", "required": ["target", "cmp", "bound"],
                    "additionalProperties": False,
                    "properties": {
                        "target": {"type": "string"},
                        "cmp": {"enum": list(PREDICATE_CMPS)},
                        "bound": {"oneOf": [{"type": "integer"},
                                            {"type": "array", "items": {"type": "integer"}, "minItems": 1}]},
                    }},
                "strategy": {"enum": ["clamp_to_boundary", "reject_action"]},
            }}},
    },
}


def _atom_from_dict(d: Mapping[str, Any]) -> Atom:
    if "app_category" in d:
        return Atom("app_category", frozenset(d["app_category"]))
    if "activity_type" in d:
        return Atom("activity_type", frozenset(d["activity_type"]))
    if "battery_pct" in d:
        return Atom("battery_pct", cmp=d["battery_pct"]["cmp"], threshold=d["battery_pct"]["value"])
    return Atom("always_true")


def load_constraints(doc: Mapping[str, Any] | str | Path,
                     profile: CapabilityProfile | None = None) -> tuple[ConstraintRule, ...]:
    if isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc).read_text(encoding="utf-8"))
    schema_check(doc, PACK_SCHEMA, ConstraintError)
    profile = profile or default_profile()
    rules, seen = [], set()
    for i, d in enumerate(doc["rules"]):
        base = f"rules/{i}"
        if d["id"] in seen:
            raise ConstraintError(f"{base}/id", f"duplicate rule id {d['id']!r}")
        seen.add(d["id"])
        req = d["require"]
        if req["target"] not in profile:
            raise ConstraintError(f"{base}/require/target", f"unknown parameter {req['target']!r}")
        if (req["cmp"] == "in") != isinstance(req["bound"], list):
            raise ConstraintError(f"{base}/require/bound", "'in' takes a list bound, other comparisons a scalar")
        spec = profile[req["target"]]
        bounds = req["bound"] if isinstance(req["bound"], list) else [req["bound"]]
        if not all(spec.contains(b) for b in bounds):
            raise ConstraintError(f"{base}/require/bound", f"bound outside the domain of {spec.id}")
        try:
            rules.append(ConstraintRule(d["id"], d["kind"],
                                        Condition(tuple(_atom_from_dict(a) for a in d["when"])),
                                        StatePredicate.from_dict(req), d["strategy"]))
        except ValueError as e:
            raise ConstraintError(base, str(e)) from None
    return tuple(rules)


def constraints_to_dict(rules: Iterable[ConstraintRule]) -> dict:
    return {"rules": [{"id": r.id, "kind": r.kind,
                       "when": [a.to_dict() for a in r.condition.atoms],
                       "require": r.predicate.to_dict(), "strategy": r.strategy} for r in rules]}


def serialize_constraints(rules: Iterable[ConstraintRule]) -> bytes:
    return canonical_json(constraints_to_dict(rules)).encode("utf-8")


_DEFAULT_PACK: tuple[ConstraintRule, ...] | None = None


def default_constraints() -> tuple[ConstraintRule, ...]:
    global _DEFAULT_PACK
    if _DEFAULT_PACK is None:
        _DEFAULT_PACK = load_constraints(data_path("constraints.json"))
    return _DEFAULT_PACK


def hard_only(rules: Iterable[ConstraintRule]) -> tuple[ConstraintRule, ...]:
    return tuple(r for r in rules if r.kind == "hard")
