"""Synthetic users: ground-truth preferences and override behavior."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from ..device import (CapabilityProfile, DeviceState, ProfileError, data_path, default_profile,
                      default_state, schema_check)
from ..memory.signature import BUCKETS
from ..pipeline.types import CATEGORIES

DEFAULT_TOLERANCE = 0.10
DEFAULT_OVERRIDE_PROB = 0.5
PRESETS = ("power_user", "student", "commuter", "professional", "traveler")

PROFILE_SCHEMA = {
    "type": "object",
    "required": ["name", "gt"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "gt": {"type": "object", "additionalProperties": {
            "type": "object", "additionalProperties": {"type": "integer"}}},
        "override_prob": {"type": "object", "additionalProperties": {
            "type": "number", "minimum": 0, "maximum": 1}},
        "tolerance": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "stock": {"type": "object", "additionalProperties": {"type": "integer"}},
        "shifts": {"type": "array", "items": {
            "type": "object", "required": ["day", "patch"], "additionalProperties": False,
            "properties": {"day": {"type": "integer", "minimum": 0},
                           "patch": {"type": "object", "additionalProperties": {
                               "type": "object", "additionalProperties": {"type": "integer"}}}}}},
    },
}


@dataclass(frozen=True)
class Override:
    param: str
    old: int
    new: int


@dataclass
class UserProfile:
    name: str
    gt: dict[tuple[str, str], dict[str, int]]
    override_prob: dict[str, float] = field(default_factory=dict)
    tolerance: dict[str, float] = field(default_factory=dict)
    stock: dict[str, int] = field(default_factory=dict)
    shift_schedule: list[tuple[int, dict[tuple[str, str], dict[str, int]]]] = field(default_factory=list)

    def prob(self, pid: str) -> float:
        return self.override_prob.get(pid, DEFAULT_OVERRIDE_PROB)

    def tol(self, pid: str) -> float:
        return self.tolerance.get(pid, DEFAULT_TOLERANCE)

    def gt_for(self, category: str, bucket: str) -> dict[str, int]:
        return self.gt[(category, bucket)]

    def apply_shifts(self, day: int) -> bool:
        """Patch GT with every shift scheduled for `day`; True if anything changed."""
        hit = False
        for d, patch in self.shift_schedule:
            if d == day:
                for cell, vals in patch.items():
                    self.gt[cell] = {**self.gt[cell], **vals}
                hit = True
        return hit

    def copy(self) -> "UserProfile":
        return UserProfile(self.name, {k: dict(v) for k, v in self.gt.items()}, dict(self.override_prob),
                           dict(self.tolerance), dict(self.stock),
                           [(d, {c: dict(v) for c, v in p.items()}) for d, p in self.shift_schedule])

    def with_probs(self, value: float) -> "UserProfile":
        p = self.copy()
        p.override_prob = {pid: value for pid in self.override_prob}
        p.override_prob.update({pid: value for cell in p.gt.values() for pid in cell})
        return p


def _cell(key: str, path: str) -> tuple[str, str]:
    cat, _, bucket = key.partition("/")
    if cat not in CATEGORIES or bucket not in BUCKETS:
        raise ProfileError(path, f"GT cell {key!r} is not <category>/<bucket>")
    return cat, bucket


def load_user_profile(doc: Mapping[str, Any] | str | Path,
                      capabilities: CapabilityProfile | None = None) -> UserProfile:
    if isinstance(doc, (str, Path)):
        p = Path(doc)
        if not p.exists() and (data_path("profiles") / f"{doc}.json").exists():
            p = data_path("profiles") / f"{doc}.json"
        doc = json.loads(p.read_text(encoding="utf-8"))
    schema_check(doc, PROFILE_SCHEMA)
    caps = capabilities or default_profile()
    gt = {}
    for key, vec in doc["gt"].items():
        cell = _cell(key, f"gt/{key}")
        if set(vec) != set(caps.ids):
            raise ProfileError(f"gt/{key}", "GT vector must cover every parameter")
        for pid, v in vec.items():
            if not caps[pid].contains(v):
                raise ProfileError(f"gt/{key}/{pid}", f"{v} outside domain")
        gt[cell] = dict(vec)
    for section in ("override_prob", "tolerance", "stock"):
        for pid in doc.get(section, {}):
            if pid not in caps:
                raise ProfileError(f"{section}/{pid}", "unknown parameter")
    for pid, v in doc.get("stock", {}).items():
        if not caps[pid].contains(v):
            raise ProfileError(f"stock/{pid}", f"{v} outside domain")
    shifts = []
    for i, s in enumerate(doc.get("shifts", [])):
        patch = {_cell(k, f"shifts/{i}/patch/{k}"): dict(v) for k, v in s["patch"].items()}
        shifts.append((s["day"], patch))
    return UserProfile(doc["name"], gt, dict(doc.get("override_prob", {})), dict(doc.get("tolerance", {})),
                       dict(doc.get("stock", {})), shifts)


def profile_to_doc(p: UserProfile) -> dict:
    return {"name": p.name, "gt": {f"{c}/{b}": dict(v) for (c, b), v in sorted(p.gt.items())},
            "override_prob": dict(sorted(p.override_prob.items())),
            "tolerance": dict(sorted(p.tolerance.items())), "stock": dict(sorted(p.stock.items())),
            "shifts": [{"day": d, "patch": {f"{c}/{b}": dict(v) for (c, b), v in patch.items()}}
                       for d, patch in p.shift_schedule]}


def preset_profiles(capabilities: CapabilityProfile | None = None) -> list[UserProfile]:
    return [load_user_profile(data_path("profiles") / f"{n}.json", capabilities) for n in PRESETS]


def within_tolerance(kind: str, value: int, gt: int, tol: float = DEFAULT_TOLERANCE) -> bool:
    """Continuous parameters match within a relative band around GT, others exactly."""
    if kind == "continuous_range":
        return abs(value - gt) <= tol * abs(gt)
    return value == gt


def stock_state(user: UserProfile, capabilities: CapabilityProfile | None = None, battery_pct: int = 100,
                app: str = "", clock=None) -> DeviceState:
    caps = capabilities or default_profile()
    kw = {"clock": clock} if clock is not None else {}
    return default_state(caps, battery_pct, app, **kw).with_values(user.stock)


def simulate_user_response(user: UserProfile, state: DeviceState, category: str, bucket: str,
                           rng: random.Random, capabilities: CapabilityProfile | None = None) -> list[Override]:
    """Overrides the user makes on seeing `state`: out-of-band parameters snap back to GT
    with the parameter's override probability. One draw per out-of-band parameter, in
    profile order, so runs are reproducible from the seed."""
    caps = capabilities or default_profile()
    gt = user.gt_for(category, bucket)
    out = []
    for spec in caps.parameters:
        v, g = state[spec.id], gt[spec.id]
        if within_tolerance(spec.kind, v, g, user.tol(spec.id)):
            continue
        if rng.random() < user.prob(spec.id):
            out.append(Override(spec.id, v, g))
    return out
