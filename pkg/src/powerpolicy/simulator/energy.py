"""Category-budget energy model.

Per-minute power is ``sum_p budget[cat(p)] * w_p / W_cat(p) * load_p(value)``
where ``w_p`` is the parameter's impact weight and ``W_cat`` the sum of
weights in its category. Units are percent-of-device-power minutes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from ..device import CapabilityProfile, DeviceState, data_path, default_profile


@dataclass(frozen=True)
class LoadFn:
    type: str  # linear | popcount | table
    scale: float = 1.0
    table: Mapping[int, float] | None = None

    def __call__(self, v: int) -> float:
        if self.type == "linear":
            return v / self.scale
        if self.type == "popcount":
            return bin(v).count("1") / self.scale
        return self.table[v]


@dataclass(frozen=True)
class EnergyModel:
    budgets: Mapping[str, float]
    impact_weights: Mapping[str, float]
    loads: Mapping[str, LoadFn]
    drain_pct_per_unit: float
    coef: Mapping[str, float]  # budget share per unit load, per parameter

    def power(self, values: Mapping[str, int]) -> float:
        return sum(c * self.loads[p](values[p]) for p, c in self.coef.items())

    def energy(self, state: DeviceState | Mapping[str, int], minutes: float) -> float:
        values = state.values if isinstance(state, DeviceState) else state
        return self.power(values) * minutes

    def drain(self, energy: float) -> float:
        return energy * self.drain_pct_per_unit


def load_energy_model(doc: Mapping | str | Path | None = None,
                      profile: CapabilityProfile | None = None) -> EnergyModel:
    if doc is None or isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc or data_path("energy_model.json")).read_text(encoding="utf-8"))
    profile = profile or default_profile()
    budgets = {k: float(v) for k, v in doc["budgets"].items()}
    if abs(sum(budgets.values()) - 100.0) > 1e-9:
        raise ValueError("category budgets must sum to 100")
    weights = {k: float(v) for k, v in doc["impact_weights"].items()}
    loads = {}
    for pid, d in doc["loads"].items():
        table = {int(k): float(v) for k, v in d["table"].items()} if "table" in d else None
        loads[pid] = LoadFn(d["type"], float(d.get("scale", 1.0)), table)
    missing = set(profile.ids) - set(loads)
    if missing:
        raise ValueError(f"no load function for {sorted(missing)}")
    totals: dict[str, float] = {}
    for p in profile.parameters:
        totals[p.category] = totals.get(p.category, 0.0) + weights[p.impact]
    coef = {p.id: budgets[p.category] * weights[p.impact] / totals[p.category] for p in profile.parameters}
    return EnergyModel(budgets, weights, loads, float(doc["drain_pct_per_unit"]), coef)


@lru_cache(maxsize=1)
def default_energy_model() -> EnergyModel:
    return load_energy_model()


def energy(state: DeviceState, minutes: float, model: EnergyModel | None = None) -> float:
    return (model or default_energy_model()).energy(state, minutes)
