"""Synthetic world: users, tasks, energy, and multi-day runs."""
from .energy import EnergyModel, LoadFn, default_energy_model, energy, load_energy_model
from .grid import BATTERY_LEVELS, BenchGrid, Instance, build_bench_grid, load_grid
from .profiles import (PRESETS, Override, UserProfile, load_user_profile, preset_profiles,
                       profile_to_doc, simulate_user_response, stock_state, within_tolerance)
from .scenarios import ScenarioPack, TaskScenario, load_scenarios
from .session import (BATTERY_SAVER, RULE_TABLE, CycleRecord, LongitudinalTrace, NullController,
                      SessionTrace, SimRun, StaticController, SystemController, battery_saver_policy,
                      make_backend, rule_based_policy, run_days, simulate_session)

__all__ = [
    "EnergyModel", "LoadFn", "default_energy_model", "energy", "load_energy_model",
    "BATTERY_LEVELS", "BenchGrid", "Instance", "build_bench_grid", "load_grid",
    "PRESETS", "Override", "UserProfile", "load_user_profile", "preset_profiles", "profile_to_doc",
    "simulate_user_response", "stock_state", "within_tolerance",
    "ScenarioPack", "TaskScenario", "load_scenarios",
    "BATTERY_SAVER", "RULE_TABLE", "CycleRecord", "LongitudinalTrace", "NullController",
    "SessionTrace", "SimRun", "StaticController", "SystemController", "battery_saver_policy",
    "make_backend", "rule_based_policy", "run_days", "simulate_session",
]
