"""Value types exchanged between the pipeline stages."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from ..constraints import VerificationReport
from ..device import DeviceState, Policy
from ..memory import ContextSignature

CATEGORIES = ("navigation", "video", "meeting", "social", "music", "feed", "reading")
IDLE = "idle"
CRITICAL_LEVELS = ("high", "medium", "low")


class BackendError(RuntimeError):
    """A reasoner backend failed or produced output that does not parse."""


@dataclass(frozen=True)
class ActivityResult:
    activity_type: str
    sub_activity: str
    certainty: float = 1.0
    critical_level: str = "low"

    def __post_init__(self):
        if self.activity_type not in CATEGORIES + (IDLE,):
            raise ValueError(f"unknown activity type {self.activity_type!r}")
        if not 0.0 <= self.certainty <= 1.0:
            raise ValueError("certainty outside [0, 1]")
        if self.critical_level not in CRITICAL_LEVELS:
            raise ValueError(f"unknown critical level {self.critical_level!r}")
        if not self.sub_activity:
            raise ValueError("empty sub-activity")

    def to_dict(self) -> dict:
        return {"activity_type": self.activity_type, "sub_activity": self.sub_activity,
                "certainty": self.certainty, "critical_level": self.critical_level}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ActivityResult":
        return cls(d["activity_type"], d["sub_activity"], float(d.get("certainty", 1.0)),
                   d.get("critical_level", "low"))


@dataclass(frozen=True)
class DecisionContext:
    device_state: DeviceState
    ui_descriptor: Mapping[str, Any] = field(default_factory=dict)
    app_history: Sequence[tuple[str, int]] = ()


@dataclass(frozen=True)
class Advisory:
    target: str
    advice: str


def digest(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def state_to_dict(s: DeviceState) -> dict:
    return {"values": dict(sorted(s.values.items())), "battery_pct": s.battery_pct,
            "app": s.foreground_app, "day": s.clock.day, "minute": s.clock.minute}


@dataclass
class CycleTrace:
    cycle_id: int
    trigger: str
    inputs_digest: str
    activity: ActivityResult
    signature: ContextSignature
    retrieval_level: str
    matched_rules: tuple[tuple, ...]
    raw_policy: Policy
    arbitrated_policy: Policy
    report: VerificationReport | None
    executed_policy: Policy
    commands: list[str]
    attributed: frozenset[str]
    state_after: DeviceState
    overrides: list[tuple[str, int, int]] = field(default_factory=list)
    reverts: int = 0
    changed: tuple[str, ...] = ()
    degraded: str = ""
    legality_fixes: list[str] = field(default_factory=list)
    advisories: list[Advisory] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def lock_conflicts(self) -> list[str]:
        return list(self.report.lock_conflicts) if self.report else []

    def to_dict(self) -> dict:
        d = {
            "cycle_id": self.cycle_id,
            "trigger": self.trigger,
            "inputs_digest": self.inputs_digest,
            "activity": self.activity.to_dict(),
            "signature": self.signature.to_list(),
            "retrieval_level": self.retrieval_level,
            "matched_rules": [[list(sig), list(t)] for sig, t in self.matched_rules],
            "raw_policy": self.raw_policy.to_list(),
            "arbitrated_policy": self.arbitrated_policy.to_list(),
            "report": self.report.to_dict() if self.report else None,
            "executed_policy": self.executed_policy.to_list(),
            "commands": list(self.commands),
            "attributed": sorted(self.attributed),
            "state_after": state_to_dict(self.state_after),
            "overrides": [list(o) for o in self.overrides],
            "reverts": self.reverts,
            "changed": list(self.changed),
            "degraded": self.degraded,
            "legality_fixes": list(self.legality_fixes),
            "advisories": [[a.target, a.advice] for a in self.advisories],
        }
        if self.timings:
            d["timings"] = dict(self.timings)
        return d
