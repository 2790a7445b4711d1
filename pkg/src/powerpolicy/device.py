"""Parameter space, device state and policy application.

Every parameter value is an integer: binaries are 0/1, the core mask is an
8-bit integer, and enumerations such as the CPU governor are stored as
indices with human-readable labels kept alongside in the profile.
"""
from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import jsonschema

CATEGORIES = ("Display", "Connectivity", "Compute", "Audio", "Sync")
KINDS = ("continuous_range", "discrete_set", "binary", "bitmask")
IMPACTS = ("High", "Medium", "Low")


class ProfileError(ValueError):
    """A capability profile document failed validation."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class InvalidValueError(ValueError):
    pass


class Verb(str, Enum):
    KEEP = "KEEP"
    SET = "SET"
    ENABLE = "ENABLE"
    DISABLE = "DISABLE"
    LOCK = "LOCK"
    DEFER = "DEFER"


WRITING_VERBS = frozenset({Verb.SET, Verb.LOCK, Verb.ENABLE, Verb.DISABLE})


@dataclass(frozen=True)
class ParameterSpec:
    id: str
    category: str
    kind: str
    domain: Mapping[str, Any]
    default: int
    impact: str
    privileged: bool = False
    power_weight: float = 1.0
    labels: Mapping[str, str] = field(default_factory=dict)
    note: str = ""

    @property
    def bounds(self) -> tuple[int, int]:
        if self.kind == "continuous_range":
            return self.domain["min"], self.domain["max"]
        if self.kind == "binary":
            return 0, 1
        if self.kind == "bitmask":
            return 0, 2 ** self.domain["bits"] - 1
        vals = self.domain["values"]
        return min(vals), max(vals)

    @property
    def size(self) -> int:
        """Number of distinct admissible values."""
        if self.kind == "discrete_set":
            return len(self.domain["values"])
        lo, hi = self.bounds
        return hi - lo + 1

    def values(self) -> list[int]:
        if self.kind == "discrete_set":
            return sorted(self.domain["values"])
        lo, hi = self.bounds
        return list(range(lo, hi + 1))

    def contains(self, v: Any) -> bool:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
            return False
        v = int(v)
        if self.kind == "discrete_set":
            return v in self.domain["values"]
        lo, hi = self.bounds
        return lo <= v <= hi

    def label(self, v: int) -> str:
        return self.labels.get(str(v), str(v))


@dataclass(frozen=True)
class Validation:
    valid: bool
    nearest: int | None = None


def validate_value(spec: ParameterSpec, v: Any) -> Validation:
    """Check `v` against the domain; when invalid, report the closest admissible value.

    Distance ties go to the lower value.
    """
    if spec.contains(v):
        return Validation(True)
    x = float(v)
    if spec.kind == "discrete_set":
        candidates = sorted(spec.domain["values"])
    else:
        lo, hi = spec.bounds
        if x <= lo:
            return Validation(False, lo)
        if x >= hi:
            return Validation(False, hi)
        candidates = [math.floor(x), math.ceil(x)]
    best = min(candidates, key=lambda c: (abs(c - x), c))
    return Validation(False, int(best))


@dataclass(frozen=True)
class CapabilityProfile:
    device: str
    parameters: tuple[ParameterSpec, ...]
    command_templates: Mapping[str, str]

    def __post_init__(self):
        ids = [p.id for p in self.parameters]
        if len(set(ids)) != len(ids):
            raise ProfileError("parameters", "duplicate parameter id")
        for pid, tmpl in self.command_templates.items():
            if pid not in ids:
                raise ProfileError(f"command_templates/{pid}", "unknown parameter")
            if pid not in _placeholders(tmpl):
                raise ProfileError(f"command_templates/{pid}", "template does not reference its parameter")
        object.__setattr__(self, "_by_id", {p.id: p for p in self.parameters})

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.parameters)

    def __getitem__(self, pid: str) -> ParameterSpec:
        return self._by_id[pid]

    def __contains__(self, pid: str) -> bool:
        return pid in self._by_id

    def state_space_size(self) -> int:
        return math.prod(p.size for p in self.parameters)


@dataclass(frozen=True, order=True)
class SimClock:
    """Simulated wall clock. Day 0 is a Monday."""

    day: int = 0
    minute: int = 0

    def advance(self, minutes: int) -> "SimClock":
        total = self.day * 1440 + self.minute + minutes
        return SimClock(total // 1440, total % 1440)

    @property
    def weekend(self) -> bool:
        return self.day % 7 in (5, 6)


@dataclass(frozen=True)
class DeviceState:
    values: Mapping[str, int]
    battery_pct: int
    foreground_app: str
    clock: SimClock = SimClock()

    def __getitem__(self, pid: str) -> int:
        return self.values[pid]

    def replace(self, **changes) -> "DeviceState":
        kw = dict(values=self.values, battery_pct=self.battery_pct,
                  foreground_app=self.foreground_app, clock=self.clock)
        kw.update(changes)
        return DeviceState(**kw)

    def with_values(self, updates: Mapping[str, int]) -> "DeviceState":
        vals = dict(self.values)
        vals.update(updates)
        return self.replace(values=vals)

    def check(self, profile: CapabilityProfile) -> None:
        if set(self.values) != set(profile.ids):
            raise InvalidValueError("state parameters do not match the capability profile")
        for p in profile.parameters:
            if not p.contains(self.values[p.id]):
                raise InvalidValueError(f"{p.id}={self.values[p.id]!r} outside its domain")
        if not 0 <= self.battery_pct <= 100:
            raise InvalidValueError(f"battery_pct={self.battery_pct} outside 0-100")


@dataclass(frozen=True)
class Action:
    target: str
    verb: Verb
    value: int | None = None
    priority: str = "Medium"
    reason: str = ""

    def __post_init__(self):
        object.__setattr__(self, "verb", Verb(self.verb))
        if self.verb in (Verb.SET, Verb.LOCK):
            if self.value is None:
                raise ValueError(f"{self.verb.value} {self.target} needs a value")
        elif self.value is not None:
            raise ValueError(f"{self.verb.value} {self.target} must not carry a value")
        if self.priority not in IMPACTS:
            raise ValueError(f"unknown priority {self.priority!r}")

    def written_value(self, spec: ParameterSpec) -> int | None:
        """Value this action writes, or None for non-mutating verbs.

        ENABLE/DISABLE write 1/0 on binaries and the top/bottom of the domain otherwise.
        """
        if self.verb in (Verb.SET, Verb.LOCK):
            return self.value
        lo, hi = spec.bounds
        if self.verb is Verb.ENABLE:
            return hi
        if self.verb is Verb.DISABLE:
            return lo
        return None

    def to_dict(self) -> dict:
        d = {"target": self.target, "verb": self.verb.value, "priority": self.priority,
             "reason": self.reason}
        if self.value is not None:
            d["value"] = self.value
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Action":
        return cls(d["target"], Verb(d["verb"]), d.get("value"),
                   d.get("priority", "Medium"), d.get("reason", ""))


@dataclass(frozen=True)
class Policy:
    actions: tuple[Action, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        targets = [a.target for a in self.actions]
        if len(set(targets)) != len(targets):
            dup = next(t for t in targets if targets.count(t) > 1)
            raise ValueError(f"policy holds more than one action for {dup}")

    def __iter__(self):
        return iter(self.actions)

    def __len__(self):
        return len(self.actions)

    def get(self, target: str) -> Action | None:
        for a in self.actions:
            if a.target == target:
                return a
        return None

    @property
    def targets(self) -> frozenset[str]:
        return frozenset(a.target for a in self.actions)

    def to_list(self) -> list[dict]:
        return [a.to_dict() for a in self.actions]

    @classmethod
    def from_list(cls, items: Iterable[Mapping[str, Any]]) -> "Policy":
        return cls(tuple(Action.from_dict(d) for d in items))


def apply_policy(state: DeviceState, policy: Policy, profile: CapabilityProfile) -> DeviceState:
    """Pure state transition: write every mutating action, leave the rest alone."""
    updates = {}
    for a in policy:
        if a.target not in profile:
            raise InvalidValueError(f"{a.verb.value} {a.target}: unknown parameter")
        spec = profile[a.target]
        v = a.written_value(spec)
        if v is None:
            continue
        if not spec.contains(v):
            raise InvalidValueError(f"{a.verb.value} {a.target}={v!r}: outside domain")
        updates[a.target] = int(v)
    if not updates:
        return state
    return state.with_values(updates)


def default_state(profile: CapabilityProfile, battery_pct: int = 100, app: str = "",
                  clock: SimClock = SimClock()) -> DeviceState:
    return DeviceState({p.id: p.default for p in profile.parameters}, battery_pct, app, clock)


# -- profile documents -------------------------------------------------------

_PARAM_SCHEMA = {
    "type": "object",
    "required": ["id", "category", "kind", "domain", "default", "impact", "privileged",
                 "power_weight", "command_template"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "pattern": "^[a-z][a-z0-9_]*$"},
        "category": {"enum": list(CATEGORIES)},
        "kind": {"enum": list(KINDS)},
        "domain": {"type": "object"},
        "default": {"type": "integer"},
        "impact": {"enum": list(IMPACTS)},
        "privileged": {"type": "boolean"},
        "power_weight": {"type": "number", "minimum": 0},
        "command_template": {"type": "string"},
        "labels": {"type": "object", "additionalProperties": {"type": "string"}},
        "note": {"type": "string"},
    },
}

PROFILE_SCHEMA = {
    "type": "object",
    "required": ["device", "parameters"],
    "additionalProperties": False,
    "properties": {
        "device": {"type": "string"},
        "parameters": {"type": "array", "minItems": 1, "items": _PARAM_SCHEMA},
    },
}


def schema_check(doc: Any, schema: Mapping, error=ProfileError) -> None:
    """Raise `error(path, message)` for the first schema violation, deepest path first."""
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc),
                    key=lambda e: (-len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path)
        msg = e.message
        if e.validator == "required":
            missing = [r for r in e.validator_value if r not in e.instance]
            path = "/".join([path, missing[0]]) if path else missing[0]
            msg = f"required field {missing[0]!r} is missing"
        raise error(path, msg)


def _placeholders(template: str) -> set[str]:
    return {f for _, f, _, _ in string.Formatter().parse(template) if f}


def _check_domain(kind: str, domain: Mapping, path: str) -> None:
    if kind == "continuous_range":
        if set(domain) != {"min", "max"} or not all(isinstance(domain[k], int) for k in domain):
            raise ProfileError(path, "continuous_range needs integer min and max")
        if domain["min"] > domain["max"]:
            raise ProfileError(path, "min exceeds max")
    elif kind == "discrete_set":
        vals = domain.get("values")
        if set(domain) != {"values"} or not isinstance(vals, list) or not vals:
            raise ProfileError(path, "discrete_set needs a non-empty values list")
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
            raise ProfileError(path, "discrete_set values must be integers")
        if len(set(vals)) != len(vals):
            raise ProfileError(path, "discrete_set values must be unique")
    elif kind == "bitmask":
        if set(domain) != {"bits"} or not isinstance(domain["bits"], int) or domain["bits"] < 1:
            raise ProfileError(path, "bitmask needs a positive bit width")
    elif kind == "binary" and domain not in ({}, {"values": [0, 1]}):
        raise ProfileError(path, "binary domain must be empty")


def load_capability_profile(doc: Mapping[str, Any] | str | Path) -> CapabilityProfile:
    if isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc).read_text(encoding="utf-8"))
    schema_check(doc, PROFILE_SCHEMA)
    specs, templates = [], {}
    for i, d in enumerate(doc["parameters"]):
        base = f"parameters/{i}"
        _check_domain(d["kind"], d["domain"], f"{base}/domain")
        spec = ParameterSpec(d["id"], d["category"], d["kind"], dict(d["domain"]), d["default"],
                             d["impact"], d["privileged"], d["power_weight"],
                             dict(d.get("labels", {})), d.get("note", ""))
        if not spec.contains(spec.default):
            raise ProfileError(f"{base}/default", f"default {spec.default} outside domain")
        if _placeholders(d["command_template"]) != {spec.id}:
            raise ProfileError(f"{base}/command_template", f"template must reference only {{{spec.id}}}")
        specs.append(spec)
        templates[spec.id] = d["command_template"]
    return CapabilityProfile(doc["device"], tuple(specs), templates)


def profile_to_dict(profile: CapabilityProfile) -> dict:
    params = []
    for p in profile.parameters:
        d = {"id": p.id, "category": p.category, "kind": p.kind, "domain": dict(p.domain),
             "default": p.default, "impact": p.impact, "privileged": p.privileged,
             "power_weight": p.power_weight, "command_template": profile.command_templates[p.id]}
        if p.labels:
            d["labels"] = dict(p.labels)
        if p.note:
            d["note"] = p.note
        params.append(d)
    return {"device": profile.device, "parameters": params}


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def serialize_capability_profile(profile: CapabilityProfile) -> bytes:
    return canonical_json(profile_to_dict(profile)).encode("utf-8")


def data_path(name: str) -> Path:
    return Path(str(resources.files("powerpolicy") / "data" / name))


_DEFAULT_PROFILE: CapabilityProfile | None = None


def default_profile() -> CapabilityProfile:
    global _DEFAULT_PROFILE
    if _DEFAULT_PROFILE is None:
        _DEFAULT_PROFILE = load_capability_profile(data_path("capability_profile.json"))
    return _DEFAULT_PROFILE


def render_commands(policy: Policy, profile: CapabilityProfile) -> list[str]:
    """Fill command templates for every mutating action in `policy`."""
    out = []
    for a in policy:
        spec = profile[a.target]
        v = a.written_value(spec)
        if v is None:
            continue
        out.append(profile.command_templates[a.target].format(**{a.target: spec.label(v)}))
    return out


def check_commands(commands: Sequence[str]) -> bool:
    """Template-validity check for simulated execution: no unfilled placeholders."""
    return all(isinstance(c, str) and c and not _placeholders(c) for c in commands)
