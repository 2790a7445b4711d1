"""Per-app long-term preference memory: stable rules, candidates, general profile."""
from __future__ import annotations

import json
import os
import statistics
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from ..constraints import StatePredicate
from ..device import CapabilityProfile, canonical_json
from .signature import ContextSignature

LEVELS = ("exact", "relax_time", "relax_time_battery", "general")
PAGE_VERSION = 1

Fragment = tuple[StatePredicate, ...]


class CorruptPageError(ValueError):
    pass


@dataclass
class ContextRule:
    signature: ContextSignature
    fragment: Fragment
    confidence: float
    last_update_day: int

    @property
    def targets(self) -> tuple[str, ...]:
        return tuple(p.target for p in self.fragment)

    @property
    def key(self) -> tuple:
        return (self.signature.as_tuple(), self.targets)

    def to_dict(self) -> dict:
        return {"signature": self.signature.to_list(),
                "fragment": [p.to_dict() for p in self.fragment],
                "confidence": self.confidence, "last_update_day": self.last_update_day}

    @classmethod
    def from_dict(cls, d) -> "ContextRule":
        return cls(ContextSignature.from_list(d["signature"]),
                   tuple(StatePredicate.from_dict(p) for p in d["fragment"]),
                   float(d["confidence"]), int(d["last_update_day"]))


@dataclass
class CandidateRule(ContextRule):
    observations_today: int = 0

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["observations_today"] = self.observations_today
        return d

    @classmethod
    def from_dict(cls, d) -> "CandidateRule":
        base = ContextRule.from_dict(d)
        return cls(base.signature, base.fragment, base.confidence, base.last_update_day,
                   int(d.get("observations_today", 0)))


@dataclass
class LPMPage:
    app: str
    rules: list[ContextRule] = field(default_factory=list)
    candidates: list[CandidateRule] = field(default_factory=list)
    general: dict[str, int] = field(default_factory=dict)
    version: int = PAGE_VERSION

    def rule_for(self, key: tuple) -> ContextRule | None:
        return next((r for r in self.rules if r.key == key), None)

    def candidate_for(self, key: tuple) -> CandidateRule | None:
        return next((c for c in self.candidates if c.key == key), None)

    def promote(self, cand: CandidateRule) -> ContextRule:
        """Move a candidate into the stable set, replacing the rule with its exact signature."""
        self.candidates.remove(cand)
        rule = ContextRule(cand.signature, cand.fragment, cand.confidence, cand.last_update_day)
        self.rules = [r for r in self.rules if r.key != rule.key]
        self.rules.append(rule)
        return rule

    def to_dict(self) -> dict:
        return {"app": self.app, "version": self.version,
                "rules": [r.to_dict() for r in sorted(self.rules, key=lambda r: r.key)],
                "candidates": [c.to_dict() for c in sorted(self.candidates, key=lambda c: c.key)],
                "general": dict(sorted(self.general.items()))}

    @classmethod
    def from_dict(cls, d) -> "LPMPage":
        return cls(d["app"], [ContextRule.from_dict(r) for r in d["rules"]],
                   [CandidateRule.from_dict(c) for c in d["candidates"]],
                   {k: int(v) for k, v in d["general"].items()}, int(d.get("version", PAGE_VERSION)))


@dataclass(frozen=True)
class Retrieval:
    rules: tuple[ContextRule, ...]
    level: str


def retrieve(page: LPMPage, sig: ContextSignature) -> Retrieval:
    """Progressively relaxed lookup: exact, then without time, then without time and battery."""
    for level in LEVELS[:-1]:
        query = sig.relaxed(level)
        hits = [r for r in page.rules if r.signature.relaxed(level).matches(query)]
        if hits:
            return Retrieval(tuple(hits), level)
    return Retrieval((), "general")


def aggregate_general_profile(page: LPMPage, observations: Iterable[Mapping[str, int]],
                              profile: CapabilityProfile) -> dict[str, int]:
    """Mode (discrete) or lower median (continuous) of session-end values per parameter."""
    seen: dict[str, list[int]] = {}
    for obs in observations:
        for pid, v in obs.items():
            seen.setdefault(pid, []).append(int(v))
    out = dict(page.general)
    for pid, vals in seen.items():
        if pid not in profile:
            continue
        if profile[pid].kind == "continuous_range":
            out[pid] = statistics.median_low(vals)
        else:
            counts = Counter(vals)
            top = max(counts.values())
            out[pid] = min(v for v, n in counts.items() if n == top)
    return out


def page_path(app: str, root: str | Path) -> Path:
    return Path(root) / f"{app}.json"


def persist_page(page: LPMPage, root: str | Path) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    target = page_path(page.app, root)
    fd, tmp = tempfile.mkstemp(dir=root, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(page.to_dict()))
    os.replace(tmp, target)
    return target


def load_page(app: str, root: str | Path) -> LPMPage:
    path = page_path(app, root)
    if not path.exists():
        return LPMPage(app)
    return read_page_file(path)


def read_page_file(path: str | Path) -> LPMPage:
    try:
        page = LPMPage.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (ValueError, KeyError, TypeError) as e:
        raise CorruptPageError(f"{path}: {e}") from None
    return page
