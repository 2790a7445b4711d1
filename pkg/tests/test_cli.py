from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from powerpolicy.cli import EXIT_BREACH, EXIT_CONFIG, EXIT_OK, check_invariants, main
from powerpolicy.constraints import default_constraints
from powerpolicy.memory import CandidateRule, LPMPage
from powerpolicy.memory.signature import ContextSignature
from powerpolicy.pipeline import Toggles
from powerpolicy.simulator import SimRun, load_scenarios, load_user_profile, run_days


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["sim", "run", "--profile", "student", "--days", "3", "--seed", "5", "--out", str(out)]) == EXIT_OK
    return out


def _rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_sim_run_outputs(sim_dir):
    names = {p.name for p in sim_dir.iterdir()}
    assert {"days.csv", "cycles.csv", "confidence.csv", "events.csv", "trace.jsonl", "run.json", "lpm",
            "confidence.png", "adaptation.png"} <= names
    days = _rows(sim_dir / "days.csv")
    assert [int(d["day"]) for d in days] == [0, 1, 2]
    lines = (sim_dir / "trace.jsonl").read_text().splitlines()
    assert len(lines) == sum(int(d["cycles"]) for d in days)
    rec = json.loads(lines[0])
    assert {"cycle_id", "inputs_digest", "executed_policy", "state_after"} <= set(rec)
    assert json.loads((sim_dir / "run.json").read_text())["seed"] == 5


def test_sim_run_deterministic(sim_dir, tmp_path):
    assert main(["sim", "run", "--profile", "student", "--days", "3", "--seed", "5", "--out", str(tmp_path),
                 "--no-plots"]) == EXIT_OK
    for name in ("days.csv", "cycles.csv", "confidence.csv", "events.csv", "trace.jsonl"):
        assert (tmp_path / name).read_bytes() == (sim_dir / name).read_bytes(), name


def test_replay_matches(sim_dir, capsys):
    assert main(["replay", str(sim_dir / "trace.jsonl")]) == EXIT_OK
    assert "0 mismatches" in capsys.readouterr().out


def test_replay_detects_tampering(sim_dir, tmp_path):
    for name in ("run.json", "trace.jsonl"):
        (tmp_path / name).write_bytes((sim_dir / name).read_bytes())
    lines = (tmp_path / "trace.jsonl").read_text().splitlines()
    rec = json.loads(lines[3])
    rec["state_after"]["values"]["brightness"] += 1
    lines[3] = json.dumps(rec, sort_keys=True)
    (tmp_path / "trace.jsonl").write_text("\n".join(lines) + "\n")
    assert main(["replay", str(tmp_path)]) == EXIT_BREACH


def test_memory_inspect(sim_dir, capsys):
    pages = sorted((sim_dir / "lpm").glob("*.json"))
    assert pages
    assert main(["memory", "inspect", str(pages[0])]) == EXIT_OK
    assert "rules" in capsys.readouterr().out


def test_plots_command(sim_dir, capsys):
    assert main(["plots", str(sim_dir)]) == EXIT_OK
    assert "confidence.png" in capsys.readouterr().out


def test_config_errors(tmp_path, capsys, monkeypatch):
    assert main(["sim", "run", "--profile", "nobody", "--days", "1", "--out", str(tmp_path)]) == EXIT_CONFIG
    bad = tmp_path / "page.json"
    bad.write_text("{not json")
    assert main(["memory", "inspect", str(bad)]) == EXIT_CONFIG
    monkeypatch.delenv("POWERPOLICY_GATEWAY_URL", raising=False)
    assert main(["sim", "run", "--profile", "student", "--days", "1", "--backend", "remote",
                 "--out", str(tmp_path / "r")]) == EXIT_CONFIG
    pack = tmp_path / "pack.json"
    pack.write_text(json.dumps({"rules": [{"id": "x", "kind": "hard", "when": [{"always_true": True}],
                                           "require": {"target": "warp", "cmp": ">=", "bound": 1},
                                           "strategy": "clamp_to_boundary"}]}))
    assert main(["bench", "run", "--baseline", "stock", "--constraints", str(pack),
                 "--out", str(tmp_path / "b")]) == EXIT_CONFIG
    assert main(["bench", "run", "--baseline", "magic", "--out", str(tmp_path / "b")]) == EXIT_CONFIG
    assert main(["plots", str(tmp_path / "missing")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_invariant_checker_flags_breaches():
    tr = run_days(SimRun(seed=0, days=1, user=load_user_profile("student"), scenarios=load_scenarios()),
                  keep_traces=True)
    assert check_invariants(tr, default_constraints(), Toggles()) == []
    sig = ContextSignature("social", "feed", "Mid", "weekday", "evening")
    from powerpolicy.constraints import StatePredicate
    tr.pages["x"] = LPMPage("x", candidates=[CandidateRule(sig, (StatePredicate("nfc", "<=", 0),), 0.05, 0)])
    assert any("eviction" in b for b in check_invariants(tr, default_constraints(), Toggles()))


def test_bench_cli(tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"profiles": ["student"], "seed": 1, "train_days": 1, "eval_day": 1}))
    assert main(["bench", "run", "--grid", str(grid), "--baseline", "all", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert all(b in out for b in ("stock", "battery_saver", "rule_based", "single_agent", "pipeline"))
    assert len(_rows(tmp_path / "summary.csv")) == 5
    assert (tmp_path / "ablation.png").exists()


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "powerpolicy.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "sim" in res.stdout and "bench" in res.stdout
