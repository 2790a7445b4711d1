"""Benchmark grid: tasks x battery contexts x user profiles."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..device import ProfileError, data_path, schema_check
from .profiles import PRESETS, UserProfile, load_user_profile
from .scenarios import ScenarioPack, load_scenarios

BATTERY_LEVELS = {"High": 80, "Mid": 45, "Low": 15}

GRID_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "profiles": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "scenarios": {"type": ["string", "null"]},
        "batteries": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0, "maximum": 100}},
        "seed": {"type": "integer"},
        "train_days": {"type": "integer", "minimum": 0},
        "eval_day": {"type": "integer", "minimum": 0},
    },
}


@dataclass(frozen=True)
class Instance:
    id: int
    profile: str
    task: str
    bucket: str
    battery: int
    seed: int


@dataclass
class BenchGrid:
    profiles: list[UserProfile]
    scenarios: ScenarioPack
    instances: list[Instance]
    batteries: dict[str, int] = field(default_factory=lambda: dict(BATTERY_LEVELS))
    seed: int = 0
    train_days: int = 7
    eval_day: int = 7

    def user(self, name: str) -> UserProfile:
        return next(p for p in self.profiles if p.name == name)

    def __len__(self):
        return len(self.instances)


def build_bench_grid(profiles: Sequence[UserProfile], scenarios: ScenarioPack,
                     batteries: Mapping[str, int] | None = None, seed: int = 0,
                     train_days: int = 7, eval_day: int = 7) -> BenchGrid:
    """Full cross product; every instance gets its own seed derived from the grid seed."""
    batteries = dict(batteries or BATTERY_LEVELS)
    insts = []
    for prof in profiles:
        for task in scenarios.tasks:
            for bucket, level in batteries.items():
                i = len(insts)
                insts.append(Instance(i, prof.name, task.id, bucket, level, seed * 1_000_003 + i))
    return BenchGrid(list(profiles), scenarios, insts, batteries, seed, train_days, eval_day)


def load_grid(doc: Mapping[str, Any] | str | Path | None = None) -> BenchGrid:
    base = None
    if doc is None or isinstance(doc, (str, Path)):
        path = Path(doc or data_path("grid.json"))
        base = path.parent
        doc = json.loads(path.read_text(encoding="utf-8"))
    schema_check(doc, GRID_SCHEMA)

    def resolve(ref: str) -> Path | str:
        if base is not None and (base / ref).exists():
            return base / ref
        return ref

    try:
        profiles = [load_user_profile(resolve(p)) for p in doc.get("profiles", list(PRESETS))]
    except FileNotFoundError as e:
        raise ProfileError("profiles", f"cannot read {e.filename}") from None
    scen = doc.get("scenarios")
    scenarios = load_scenarios(resolve(scen) if scen else None)
    return build_bench_grid(profiles, scenarios, doc.get("batteries"), doc.get("seed", 0),
                            doc.get("train_days", 7), doc.get("eval_day", 7))
