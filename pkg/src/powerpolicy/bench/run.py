"""Run a baseline over the benchmark grid and collect accuracy, energy, violation and UES metrics."""
from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from typing import Sequence

from ..constraints import ConstraintRule, default_constraints
from ..device import CapabilityProfile, SimClock, default_profile
from ..memory import LPMPage
from ..pipeline import Toggles, trigger_walk
from ..simulator.energy import EnergyModel, default_energy_model
from ..simulator.grid import BenchGrid, Instance
from ..simulator.profiles import UserProfile, stock_state
from ..simulator.session import (NullController, StaticController, SystemController,
                                 battery_saver_policy, make_backend, rule_based_policy, simulate_session)
from .metrics import (ViolationStat, action_accuracy, compute_acc_weights, count_violations, energy_saving,
                      ues, ues_weights)

BASELINES = ("stock", "battery_saver", "rule_based", "single_agent", "pipeline")
SINGLE_AGENT = Toggles(memory=False, pdl=False, feedback=True, multi_agent=False)


@dataclass
class InstanceResult:
    instance: Instance
    category: str
    acc: float
    ues: float
    es: float
    energy: float
    stock_energy: float
    pre: ViolationStat
    post: ViolationStat
    overrides: int
    reverts: int

    ROW_COLUMNS = ("instance", "profile", "task", "category", "bucket", "battery", "seed", "acc", "ues",
                   "es", "energy", "stock_energy", "viol_pre", "actions_pre", "viol_post", "actions_post",
                   "overrides", "reverts")

    def row(self) -> tuple:
        i = self.instance
        return (i.id, i.profile, i.task, self.category, i.bucket, i.battery, i.seed, _f(self.acc),
                _f(self.ues), _f(self.es), _f(self.energy), _f(self.stock_energy), self.pre.violating,
                self.pre.total, self.post.violating, self.post.total, self.overrides, self.reverts)


@dataclass
class BenchReport:
    baseline: str
    toggles: Toggles
    adversarial: bool
    results: list[InstanceResult] = field(default_factory=list)

    def _mean(self, attr, rows=None) -> float:
        rows = self.results if rows is None else rows
        return sum(getattr(r, attr) for r in rows) / len(rows) if rows else 0.0

    @property
    def acc(self) -> float:
        return self._mean("acc")

    @property
    def ues(self) -> float:
        return self._mean("ues")

    @property
    def es(self) -> float:
        return self._mean("es")

    def violations(self, stage: str = "post") -> ViolationStat:
        total = ViolationStat(0, 0)
        for r in self.results:
            total = total + (r.pre if stage == "pre" else r.post)
        return total

    def es_by(self, key: str) -> dict[str, float]:
        groups: dict[str, list] = {}
        for r in self.results:
            k = r.instance.bucket if key == "bucket" else r.category
            groups.setdefault(k, []).append(r)
        return {k: self._mean("es", rows) for k, rows in groups.items()}

    def acc_by_category(self) -> dict[str, float]:
        groups: dict[str, list] = {}
        for r in self.results:
            groups.setdefault(r.category, []).append(r)
        return {k: self._mean("acc", rows) for k, rows in groups.items()}

    SUMMARY_COLUMNS = ("baseline", "memory", "pdl", "feedback", "multi_agent", "adversarial", "instances",
                       "acc", "es", "viol_pre", "viol_post", "ues")

    def summary_row(self) -> tuple:
        t = self.toggles
        return (self.baseline, int(t.memory), int(t.pdl), int(t.feedback), int(t.multi_agent),
                int(self.adversarial), len(self.results), _f(self.acc), _f(self.es),
                _f(self.violations("pre").rate), _f(self.violations("post").rate), _f(self.ues))

    def instances_csv(self) -> str:
        return _csv(InstanceResult.ROW_COLUMNS, [r.row() for r in self.results])

    def summary_csv(self) -> str:
        return _csv(self.SUMMARY_COLUMNS, [self.summary_row()])

    def buckets_csv(self) -> str:
        cats = sorted({r.category for r in self.results})
        buckets = [b for b in ("High", "Mid", "Low") if any(r.instance.bucket == b for r in self.results)]
        rows = []
        for c in cats + ["all"]:
            row = [c]
            for b in buckets:
                sel = [r for r in self.results if r.instance.bucket == b and (c == "all" or r.category == c)]
                row.append(_f(self._mean("es", sel)))
            rows.append(row)
        return _csv(("category", *buckets), rows)


def _f(x: float) -> str:
    return f"{x:.6f}"


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _controller(baseline: str, toggles: Toggles, inst: Instance, caps, constraints, backend_kind: str,
                adversarial: bool, pages: dict[str, LPMPage] | None):
    if baseline == "stock":
        return NullController()
    if baseline == "battery_saver":
        return StaticController("battery_saver", battery_saver_policy, caps)
    if baseline == "rule_based":
        return StaticController("rule_based", rule_based_policy, caps)
    if baseline == "single_agent":
        toggles = SINGLE_AGENT
    backend = make_backend(backend_kind, adversarial, inst.seed, coarse=not toggles.multi_agent)
    return SystemController(backend, caps, constraints, toggles, pages=pages, name=baseline)


def train_pages(user: UserProfile, grid: BenchGrid, toggles: Toggles, *, backend_kind: str = "heuristic",
                adversarial: bool = False, capabilities: CapabilityProfile | None = None,
                constraints: Sequence[ConstraintRule] | None = None,
                model: EnergyModel | None = None) -> dict[str, LPMPage]:
    """Live with the system for `grid.train_days` days over every task and battery context."""
    caps = capabilities or default_profile()
    seed = grid.seed * 7919 + sum(map(ord, user.name))
    backend = make_backend(backend_kind, adversarial, seed, coarse=not toggles.multi_agent)
    ctl = SystemController(backend, caps, constraints, toggles)
    rng = random.Random(seed)
    for day in range(grid.train_days):
        for task in grid.scenarios.tasks:
            for level in grid.batteries.values():
                s = stock_state(user, caps, level, task.app, SimClock(day, task.start_minute))
                simulate_session(user, task, ctl, s, rng, capabilities=caps, model=model)
        ctl.night(day)
    return ctl.pages


def stock_energy(start, duration: int, model: EnergyModel) -> float:
    """Energy of an untouched device over the same cycle intervals a session uses."""
    fires = [m for m, _ in trigger_walk([0], duration)] + [duration]
    return sum(model.energy(start, b - a) for a, b in zip(fires, fires[1:]))


def _copy_pages(pages: dict[str, LPMPage]) -> dict[str, LPMPage]:
    return {k: LPMPage.from_dict(v.to_dict()) for k, v in pages.items()}


def run_bench(grid: BenchGrid, baseline: str = "pipeline", toggles: Toggles = Toggles(), *,
              backend_kind: str = "heuristic", adversarial: bool = False,
              capabilities: CapabilityProfile | None = None,
              constraints: Sequence[ConstraintRule] | None = None, model: EnergyModel | None = None,
              acc_weights: dict[str, float] | None = None) -> BenchReport:
    if baseline not in BASELINES:
        raise ValueError(f"unknown baseline {baseline!r}; choose from {', '.join(BASELINES)}")
    caps = capabilities or default_profile()
    constraints = default_constraints() if constraints is None else tuple(constraints)
    model = model or default_energy_model()
    acc_w = acc_weights or compute_acc_weights(grid.profiles, caps)
    if baseline == "single_agent":
        toggles = SINGLE_AGENT
    elif baseline != "pipeline":
        toggles = Toggles(memory=False, pdl=False, feedback=False, multi_agent=False)
    report = BenchReport(baseline, toggles, adversarial)
    trained: dict[str, dict[str, LPMPage]] = {}
    kinds = {p.id: p.kind for p in caps.parameters}
    for inst in grid.instances:
        user = grid.user(inst.profile)
        task = grid.scenarios[inst.task]
        pages = None
        if baseline == "pipeline" and toggles.memory:
            if user.name not in trained:
                trained[user.name] = train_pages(user, grid, toggles, backend_kind=backend_kind,
                                                 adversarial=adversarial, capabilities=caps,
                                                 constraints=constraints, model=model)
            pages = _copy_pages(trained[user.name])
        ctl = _controller(baseline, toggles, inst, caps, constraints, backend_kind, adversarial, pages)
        start = stock_state(user, caps, inst.battery, task.app, SimClock(grid.eval_day, task.start_minute))
        st = simulate_session(user, task, ctl, start, random.Random(inst.seed), capabilities=caps, model=model,
                              user_active=baseline != "stock")
        gt = user.gt_for(task.category, inst.bucket)
        e_stock = stock_energy(start, task.duration, model)
        report.results.append(InstanceResult(
            inst, task.category,
            action_accuracy(st.first_state, gt, acc_w, kinds, user.tolerance),
            ues(st.first_state, gt, ues_weights(user, caps), kinds, user.tolerance),
            energy_saving(st.energy, e_stock), st.energy, e_stock,
            count_violations(st.cycles, constraints, "pre", caps),
            count_violations(st.cycles, constraints, "post", caps),
            st.overrides, st.reverts))
    return report
