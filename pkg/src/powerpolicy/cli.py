"""Command-line entry point: longitudinal simulation, benchmark runs, memory inspection, replay.

Exit codes: 0 success, 1 configuration error, 2 invariant breach detected during a run.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import jsonschema

from .constraints import DecisionCtx, default_constraints, hard_only, load_constraints, violations
from .device import ProfileError, canonical_json, default_profile, load_capability_profile
from .memory import EVICT_BELOW, read_page_file
from .memory.lpm import CorruptPageError, persist_page
from .memory.stm import events_to_csv
from .pipeline import GatewayConfigError, Toggles
from .simulator import SimRun, load_grid, load_scenarios, load_user_profile, run_days

log = logging.getLogger("powerpolicy")

EXIT_OK, EXIT_CONFIG, EXIT_BREACH = 0, 1, 2
CONFIG_ERRORS = (ProfileError, GatewayConfigError, CorruptPageError, jsonschema.ValidationError,
                 OSError, KeyError, ValueError)


class InvariantBreach(RuntimeError):
    pass


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _toggles(args) -> Toggles:
    return Toggles(memory=not args.no_memory, pdl=not args.no_pdl, feedback=not args.no_feedback,
                   multi_agent=not args.no_multi_agent)


def _add_toggle_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-memory", action="store_true", help="disable memory retrieval and distillation")
    p.add_argument("--no-pdl", action="store_true", help="skip constraint verification")
    p.add_argument("--no-feedback", action="store_true", help="skip override detection")
    p.add_argument("--no-multi-agent", action="store_true",
                   help="coarse single-stage recognition, no verify assist")
    p.add_argument("--backend", choices=("heuristic", "remote"), default="heuristic")
    p.add_argument("--adversarial", action="store_true", help="mix adversarial proposals into the backend")
    p.add_argument("--capabilities", help="capability profile JSON (default: shipped profile)")
    p.add_argument("--constraints", help="constraint pack JSON (default: shipped pack)")
    p.add_argument("--no-plots", action="store_true", help="write CSV only")


def _load_env(args):
    caps = load_capability_profile(args.capabilities) if args.capabilities else default_profile()
    cons = load_constraints(args.constraints, caps) if args.constraints else default_constraints()
    return caps, cons


# -- sim run ---------------------------------------------------------------------------

def _sim_config(args) -> dict:
    return {"profile": str(Path(args.profile).resolve()) if Path(args.profile).exists() else args.profile,
            "scenarios": str(Path(args.scenarios).resolve()) if args.scenarios else None,
            "days": args.days, "seed": args.seed, "backend": args.backend, "adversarial": args.adversarial,
            "toggles": {"memory": not args.no_memory, "pdl": not args.no_pdl,
                        "feedback": not args.no_feedback, "multi_agent": not args.no_multi_agent},
            "capabilities": str(Path(args.capabilities).resolve()) if args.capabilities else None,
            "constraints": str(Path(args.constraints).resolve()) if args.constraints else None}


def _run_from_config(cfg: dict):
    caps = load_capability_profile(cfg["capabilities"]) if cfg.get("capabilities") else default_profile()
    cons = load_constraints(cfg["constraints"], caps) if cfg.get("constraints") else default_constraints()
    run = SimRun(seed=int(cfg["seed"]), days=int(cfg["days"]), user=load_user_profile(cfg["profile"], caps),
                 scenarios=load_scenarios(cfg.get("scenarios")), toggles=Toggles(**cfg["toggles"]),
                 backend=cfg["backend"], adversarial=bool(cfg["adversarial"]), capabilities=caps,
                 constraints=cons)
    return run, run_days(run, keep_traces=True), cons


def check_invariants(trace, constraints, toggles: Toggles) -> list[str]:
    """Post-run safety and memory-consistency checks; returns breach descriptions."""
    breaches = []
    if toggles.pdl:
        rules = hard_only(constraints)
        for tr in trace.traces:
            ctx = DecisionCtx(tr.signature.app_category, tr.activity.activity_type, tr.state_after.battery_pct)
            for r in violations(tr.state_after, rules, ctx):
                breaches.append(f"cycle {tr.cycle_id}: hard rule {r.id} violated after execution")
    for app, page in trace.pages.items():
        for r in page.rules + page.candidates:
            if not 0.0 <= r.confidence <= 1.0:
                breaches.append(f"{app}: confidence {r.confidence} out of range")
        for c in page.candidates:
            if c.confidence < EVICT_BELOW:
                breaches.append(f"{app}: candidate below eviction threshold survived the night")
    return breaches


def cmd_sim_run(args) -> int:
    cfg = _sim_config(args)
    run, trace, cons = _run_from_config(cfg)
    out = Path(args.out)
    _write(out / "days.csv", trace.days_csv())
    _write(out / "cycles.csv", trace.cycles_csv())
    _write(out / "confidence.csv", trace.confidence_csv())
    _write(out / "events.csv", events_to_csv(trace.events))
    _write(out / "trace.jsonl", "".join(json.dumps(t.to_dict(), sort_keys=True) + "\n" for t in trace.traces))
    _write(out / "run.json", canonical_json(cfg))
    for page in trace.pages.values():
        persist_page(page, out / "lpm")
    if not args.no_plots:
        from .bench.report import plot_longitudinal
        plot_longitudinal(out)
    d0, dn = trace.days[0], trace.days[-1]
    print(f"{len(trace.days)} days, {sum(d.cycles for d in trace.days)} cycles; revert rate "
          f"{d0.revert_rate:.1f}% (day {d0.day}) -> {dn.revert_rate:.1f}% (day {dn.day}); "
          f"{dn.rules} rules, {dn.candidates} candidates")
    breaches = check_invariants(trace, cons, run.toggles)
    for b in breaches:
        print(f"INVARIANT BREACH: {b}", file=sys.stderr)
    return EXIT_BREACH if breaches else EXIT_OK


# -- bench run -------------------------------------------------------------------------

def cmd_bench_run(args) -> int:
    from .bench import BASELINES, emit_plots, emit_report, run_bench

    caps, cons = _load_env(args)
    grid = load_grid(args.grid)
    names = BASELINES if args.baseline == "all" else (args.baseline,)
    if any(n not in BASELINES for n in names):
        raise ValueError(f"unknown baseline {args.baseline!r}; choose from all, {', '.join(BASELINES)}")
    reports = [run_bench(grid, n, _toggles(args), backend_kind=args.backend, adversarial=args.adversarial,
                         capabilities=caps, constraints=cons) for n in names]
    out = Path(args.out)
    emit_report(reports, out)
    if not args.no_plots:
        emit_plots(out)
    breaches = []
    for rep in reports:
        post = rep.violations("post")
        print(f"{rep.baseline:14s} acc {rep.acc:6.2f}  es {rep.es:6.2f}  viol_pre "
              f"{rep.violations('pre').rate:5.2f}  viol_post {post.rate:5.2f}  ues {rep.ues:4.2f}")
        if rep.toggles.pdl and post.violating:
            breaches.append(f"{rep.baseline}: {post.violating} post-execution violations with verification on")
    for b in breaches:
        print(f"INVARIANT BREACH: {b}", file=sys.stderr)
    return EXIT_BREACH if breaches else EXIT_OK


# -- memory / replay / plots ---------------------------------------------------------

def cmd_memory_inspect(args) -> int:
    page = read_page_file(args.file)
    print(f"app {page.app} (format v{page.version}): {len(page.rules)} rules, "
          f"{len(page.candidates)} candidates, {len(page.general)} general-profile entries")
    for kind, items in (("rule", page.rules), ("cand", page.candidates)):
        for r in sorted(items, key=lambda r: r.key):
            frag = "; ".join(str(p) for p in r.fragment)
            print(f"  {kind:4s} {r.confidence:.4f}  day {r.last_update_day:3d}  {r.signature}  {frag}")
    for pid, v in sorted(page.general.items()):
        print(f"  general {pid} = {v}")
    return EXIT_OK


def cmd_replay(args) -> int:
    path = Path(args.trace)
    cfg_path = path.parent / "run.json" if path.is_file() else path / "run.json"
    trace_path = path if path.is_file() else path / "trace.jsonl"
    cfg = json.loads(cfg_path.read_text(encoding="utf-8"))
    recorded = [json.loads(line) for line in trace_path.read_text(encoding="utf-8").splitlines() if line]
    _, trace, _ = _run_from_config(cfg)
    fresh = [t.to_dict() for t in trace.traces]
    mismatches = 0
    if len(fresh) != len(recorded):
        print(f"cycle count differs: recorded {len(recorded)}, replayed {len(fresh)}", file=sys.stderr)
        mismatches += 1
    for a, b in zip(recorded, fresh):
        for key in ("inputs_digest", "executed_policy", "state_after"):
            if a[key] != b[key]:
                print(f"cycle {a['cycle_id']}: {key} differs", file=sys.stderr)
                mismatches += 1
                break
    print(f"replayed {len(fresh)} cycles, {mismatches} mismatches")
    return EXIT_BREACH if mismatches else EXIT_OK


def cmd_plots(args) -> int:
    from .bench.report import emit_plots
    out = Path(args.dir)
    if not out.is_dir():
        raise FileNotFoundError(f"{out} is not a directory")
    for p in emit_plots(out):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="powerpolicy", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="group", required=True)

    sim = sub.add_parser("sim").add_subparsers(dest="action", required=True)
    p = sim.add_parser("run", help="multi-day simulation of one user profile")
    p.add_argument("--profile", required=True, help="profile JSON or preset name")
    p.add_argument("--scenarios", help="scenario pack JSON (default: shipped pack)")
    p.add_argument("--days", type=int, default=14)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_toggle_flags(p)
    p.set_defaults(func=cmd_sim_run)

    bench = sub.add_parser("bench").add_subparsers(dest="action", required=True)
    p = bench.add_parser("run", help="evaluate a baseline over a benchmark grid")
    p.add_argument("--grid", help="grid JSON (default: shipped grid)")
    p.add_argument("--baseline", default="pipeline", help="baseline name or 'all'")
    p.add_argument("--out", required=True)
    _add_toggle_flags(p)
    p.set_defaults(func=cmd_bench_run)

    mem = sub.add_parser("memory").add_subparsers(dest="action", required=True)
    p = mem.add_parser("inspect", help="print an LPM page")
    p.add_argument("file")
    p.set_defaults(func=cmd_memory_inspect)

    p = sub.add_parser("replay", help="re-run a recorded simulation and compare cycle traces")
    p.add_argument("trace", help="trace.jsonl or its run directory")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("plots", help="render figures from CSVs in a run directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_plots)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CONFIG_ERRORS as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
