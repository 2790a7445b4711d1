"""Task scenarios and daily usage schedules."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from ..device import ProfileError, data_path, schema_check
from ..pipeline.types import CATEGORIES

PACK_SCHEMA = {
    "type": "object",
    "required": ["tasks"],
    "additionalProperties": False,
    "properties": {
        "tasks": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["id", "app", "category", "script", "duration"],
            "additionalProperties": False,
            "properties": {
                "id": {"type": "string"}, "app": {"type": "string"},
                "category": {"enum": list(CATEGORIES)},
                "script": {"type": "array", "minItems": 1, "items": {
                    "type": "array", "prefixItems": [{"type": "integer", "minimum": 0}, {"type": "string"}],
                    "minItems": 2, "maxItems": 2}},
                "duration": {"type": "integer", "minimum": 1},
                "start_minute": {"type": "integer", "minimum": 0, "maximum": 1439}}}},
        "schedule": {"type": "object", "additionalProperties": False, "properties": {
            "weekday": {"$ref": "#/$defs/day"}, "weekend": {"$ref": "#/$defs/day"}}},
    },
    "$defs": {"day": {"type": "array", "items": {
        "type": "array", "prefixItems": [{"type": "integer", "minimum": 0, "maximum": 1439},
                                         {"type": "string"}], "minItems": 2, "maxItems": 2}}},
}


@dataclass(frozen=True)
class TaskScenario:
    id: str
    app: str
    category: str
    script: tuple[tuple[int, str], ...]
    duration: int = 30
    start_minute: int = 600

    def descriptor_at(self, offset: int) -> str:
        label = self.script[0][1]
        for t, lab in self.script:
            if t <= offset:
                label = lab
        return label

    def ui_descriptor(self, offset: int) -> dict:
        return {"package": self.app, "scenario": self.descriptor_at(offset),
                "nodes": [{"class": "android.widget.TextView", "text": f"{self.category} task {self.id}"}]}


@dataclass(frozen=True)
class ScenarioPack:
    tasks: tuple[TaskScenario, ...]
    weekday: tuple[tuple[int, str], ...] = ()
    weekend: tuple[tuple[int, str], ...] = ()

    def __getitem__(self, task_id: str) -> TaskScenario:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    def day_schedule(self, day: int) -> list[tuple[int, TaskScenario]]:
        rows = self.weekend if day % 7 in (5, 6) else self.weekday
        return [(m, self[tid]) for m, tid in sorted(rows)]


def load_scenarios(doc: Mapping[str, Any] | str | Path | None = None) -> ScenarioPack:
    if doc is None or isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc or data_path("scenarios.json")).read_text(encoding="utf-8"))
    schema_check(doc, PACK_SCHEMA)
    tasks = []
    for i, t in enumerate(doc["tasks"]):
        script = tuple((int(m), str(lab)) for m, lab in sorted(t["script"]))
        if script[0][0] != 0:
            raise ProfileError(f"tasks/{i}/script", "script must start at offset 0")
        tasks.append(TaskScenario(t["id"], t["app"], t["category"], script, t["duration"],
                                  t.get("start_minute", 600)))
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ProfileError("tasks", "duplicate task id")
    sched = doc.get("schedule", {})
    for kind in ("weekday", "weekend"):
        for j, (_, tid) in enumerate(sched.get(kind, [])):
            if tid not in ids:
                raise ProfileError(f"schedule/{kind}/{j}", f"unknown task {tid!r}")
    return ScenarioPack(tuple(tasks), tuple(map(tuple, sched.get("weekday", []))),
                        tuple(map(tuple, sched.get("weekend", []))))
