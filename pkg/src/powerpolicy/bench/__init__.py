"""Benchmark metrics, baselines and reports."""
from .metrics import (ViolationStat, action_accuracy, compute_acc_weights, count_violations, energy_saving,
                      matches, ues, ues_weights, violation_rate)
from .report import config_tag, emit_plots, emit_report
from .run import BASELINES, BenchReport, InstanceResult, run_bench, stock_energy, train_pages

__all__ = [
    "ViolationStat", "action_accuracy", "compute_acc_weights", "count_violations", "energy_saving",
    "matches", "ues", "ues_weights", "violation_rate", "config_tag", "emit_plots", "emit_report",
    "BASELINES", "BenchReport", "InstanceResult", "run_bench", "stock_energy", "train_pages",
]
