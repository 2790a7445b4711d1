"""Benchmark metrics: action accuracy, user experience, energy saving, violations."""
from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ..constraints import ConstraintRule, applicable
from ..device import CapabilityProfile, DeviceState, default_profile
from ..simulator.profiles import DEFAULT_TOLERANCE, UserProfile, within_tolerance


def _kinds(capabilities: CapabilityProfile | Mapping[str, str] | None) -> Mapping[str, str]:
    if isinstance(capabilities, Mapping):
        return capabilities
    caps = capabilities or default_profile()
    return {p.id: p.kind for p in caps.parameters}


def _values(s: DeviceState | Mapping[str, int]) -> Mapping[str, int]:
    return s.values if isinstance(s, DeviceState) else s


def _normalize(w: Mapping[str, float]) -> dict[str, float]:
    total = sum(w.values())
    if total <= 0:
        raise ValueError("weights sum to zero")
    return {k: v / total for k, v in w.items()}


def matches(executed, gt: Mapping[str, int], kinds=None,
            tolerance: Mapping[str, float] | None = None) -> dict[str, bool]:
    kinds = _kinds(kinds)
    vals = _values(executed)
    tol = tolerance or {}
    return {p: within_tolerance(kinds[p], vals[p], gt[p], tol.get(p, DEFAULT_TOLERANCE)) for p in gt}


def action_accuracy(executed, gt: Mapping[str, int], weights: Mapping[str, float], kinds=None,
                    tolerance: Mapping[str, float] | None = None) -> float:
    """Weighted share of parameters matching GT, in percent."""
    m = matches(executed, {p: gt[p] for p in weights}, kinds, tolerance)
    total = sum(weights.values())
    if total <= 0:
        raise ValueError("weights sum to zero")
    return 100.0 * sum(w for p, w in weights.items() if m[p]) / total


def compute_acc_weights(profiles: Sequence[UserProfile],
                        capabilities: CapabilityProfile | None = None) -> dict[str, float]:
    """Weights proportional to how much GT varies across profiles.

    Per (category, bucket) cell the population variance of each parameter's GT
    across profiles is divided by the squared domain span, then averaged over
    cells and normalized. Parameters that never vary get weight 0; if nothing
    varies at all (a single profile) every parameter weighs the same.
    """
    caps = capabilities or default_profile()
    cells = sorted(set.intersection(*(set(p.gt) for p in profiles)))
    raw = {}
    for spec in caps.parameters:
        lo, hi = spec.bounds
        span2 = float(hi - lo) ** 2 or 1.0
        per_cell = [statistics.pvariance([p.gt[c][spec.id] for p in profiles]) / span2 for c in cells]
        raw[spec.id] = sum(per_cell) / len(per_cell) if per_cell else 0.0
    if not any(raw.values()):
        raw = dict.fromkeys(raw, 1.0)
    return _normalize(raw)


def ues_weights(probs: Mapping[str, float] | UserProfile, capabilities: CapabilityProfile | None = None) -> dict[str, float]:
    """Weights proportional to override probability."""
    if isinstance(probs, UserProfile):
        caps = capabilities or default_profile()
        probs = {pid: probs.prob(pid) for pid in caps.ids}
    return _normalize(dict(probs))


def ues(executed, gt: Mapping[str, int], weights: Mapping[str, float], kinds=None,
        tolerance: Mapping[str, float] | None = None) -> float:
    """User experience score on a 0-5 scale: 5 minus the weighted share of out-of-band parameters."""
    m = matches(executed, {p: gt[p] for p in weights}, kinds, tolerance)
    return 5.0 * (1.0 - sum(w for p, w in weights.items() if not m[p]))


def energy_saving(e_method: float, e_stock: float) -> float:
    if e_stock <= 0:
        raise ValueError("stock energy must be positive")
    return 100.0 * (e_stock - e_method) / e_stock


@dataclass(frozen=True)
class ViolationStat:
    violating: int
    total: int

    @property
    def empty(self) -> bool:
        return self.total == 0

    @property
    def rate(self) -> float:
        return 100.0 * self.violating / self.total if self.total else 0.0

    def __add__(self, other: "ViolationStat") -> "ViolationStat":
        return ViolationStat(self.violating + other.violating, self.total + other.total)


def count_violations(records: Iterable, constraints: Sequence[ConstraintRule], stage: str = "post",
                     capabilities: CapabilityProfile | None = None) -> ViolationStat:
    """Writing actions that break an applicable rule on their own target.

    ``pre`` judges the value the raw (unverified) policy writes; ``post`` judges
    the target's value in the executed post-state. Records need ``ctx``,
    ``raw_policy``, ``executed_policy`` and ``state_after``.
    """
    if stage not in ("pre", "post"):
        raise ValueError(f"unknown stage {stage!r}")
    caps = capabilities or default_profile()
    bad = total = 0
    for rec in records:
        preds: dict[str, list] = {}
        for r in applicable(constraints, rec.ctx):
            preds.setdefault(r.predicate.target, []).append(r.predicate)
        policy = rec.raw_policy if stage == "pre" else rec.executed_policy
        for a in policy:
            if a.target not in caps:
                continue
            v = a.written_value(caps[a.target])
            if v is None:
                continue
            total += 1
            if stage == "post":
                v = rec.state_after[a.target]
            if any(not p.test(v) for p in preds.get(a.target, ())):
                bad += 1
    return ViolationStat(bad, total)


def violation_rate(records: Iterable, constraints: Sequence[ConstraintRule], stage: str = "post",
                   capabilities: CapabilityProfile | None = None) -> float:
    return count_violations(records, constraints, stage, capabilities).rate
