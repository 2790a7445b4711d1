"""CSV and figure output for bench and longitudinal runs."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from .run import BenchReport

SUMMARY_FILE = "summary.csv"
INSTANCES_FILE = "instances.csv"
BUCKETS_FILE = "buckets.csv"


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def emit_report(reports: Sequence[BenchReport], out: str | Path) -> list[Path]:
    """summary.csv (one row per configuration) plus per-configuration instance and bucket tables."""
    out = Path(out)
    written = []
    header = None
    rows = []
    for rep in reports:
        lines = rep.summary_csv().splitlines()
        header = lines[0]
        rows.append(lines[1])
    written.append(_write(out / SUMMARY_FILE, "\n".join([header, *rows]) + "\n"))
    for rep in reports:
        tag = config_tag(rep)
        written.append(_write(out / f"instances_{tag}.csv", rep.instances_csv()))
        written.append(_write(out / f"buckets_{tag}.csv", rep.buckets_csv()))
    return written


def config_tag(rep: BenchReport) -> str:
    t = rep.toggles
    parts = [rep.baseline]
    if rep.baseline == "pipeline":
        for flag, on in (("memory", t.memory), ("pdl", t.pdl), ("feedback", t.feedback),
                         ("multiagent", t.multi_agent)):
            if not on:
                parts.append(f"no-{flag}")
    if rep.adversarial:
        parts.append("adversarial")
    return "_".join(parts)


def _read(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_bench(out: str | Path) -> list[Path]:
    """Savings-by-category bars per configuration and an accuracy/violation comparison."""
    out = Path(out)
    plt = _pyplot()
    written = []
    bucket_files = sorted(out.glob("buckets_*.csv"))
    if bucket_files:
        fig, ax = plt.subplots(figsize=(8, 4))
        width = 0.8 / len(bucket_files)
        cats = None
        for i, f in enumerate(bucket_files):
            rows = [r for r in _read(f) if r["category"] != "all"]
            cats = [r["category"] for r in rows]
            cols = [c for c in rows[0] if c != "category"]
            means = [sum(float(r[c]) for c in cols) / len(cols) for r in rows]
            ax.bar([j + i * width for j in range(len(cats))], means, width,
                   label=f.stem.removeprefix("buckets_"))
        ax.set_xticks([j + 0.4 - width / 2 for j in range(len(cats))], cats, rotation=20)
        ax.set_ylabel("energy saving vs stock (%)")
        ax.legend(fontsize=7)
        fig.tight_layout()
        written.append(out / "savings_by_category.png")
        fig.savefig(written[-1], dpi=100)
        plt.close(fig)
    if (out / SUMMARY_FILE).exists():
        rows = _read(out / SUMMARY_FILE)
        labels = [_label(r) for r in rows]
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.5))
        for ax, col, name in zip(axes, ("acc", "es", "viol_pre"), ("accuracy (%)", "energy saving (%)",
                                                                    "raw violation rate (%)")):
            ax.barh(labels, [float(r[col]) for r in rows])
            ax.set_xlabel(name)
            ax.tick_params(axis="y", labelsize=7)
        fig.tight_layout()
        written.append(out / "ablation.png")
        fig.savefig(written[-1], dpi=100)
        plt.close(fig)
    return written


def _label(r: dict) -> str:
    parts = [r["baseline"]]
    if r["baseline"] == "pipeline":
        parts += [f"-{k}" for k in ("memory", "pdl", "feedback", "multi_agent") if r[k] == "0"]
    if r["adversarial"] == "1":
        parts.append("+adv")
    return " ".join(parts)


def plot_longitudinal(out: str | Path) -> list[Path]:
    """Confidence trajectories per rule/candidate and the daily revert rate."""
    out = Path(out)
    plt = _pyplot()
    written = []
    conf = out / "confidence.csv"
    if conf.exists():
        series: dict[str, list[tuple[int, float]]] = {}
        for r in _read(conf):
            series.setdefault(f"{r['app']}|{r['rule']}", []).append((int(r["day"]), float(r["confidence"])))
        fig, ax = plt.subplots(figsize=(7, 4))
        for pts in series.values():
            ax.plot([d for d, _ in pts], [c for _, c in pts], lw=0.8, alpha=0.6)
        ax.axhline(0.8, ls="--", c="k", lw=0.8)
        ax.axhline(0.1, ls=":", c="k", lw=0.8)
        ax.set_xlabel("day")
        ax.set_ylabel("confidence")
        fig.tight_layout()
        written.append(out / "confidence.png")
        fig.savefig(written[-1], dpi=100)
        plt.close(fig)
    days = out / "days.csv"
    if days.exists():
        rows = _read(days)
        fig, ax = plt.subplots(figsize=(7, 3.5))
        ax.plot([int(r["day"]) for r in rows], [float(r["revert_rate"]) for r in rows], marker="o")
        ax2 = ax.twinx()
        ax2.plot([int(r["day"]) for r in rows], [int(r["rules"]) for r in rows], c="tab:orange", marker="s")
        ax.set_xlabel("day")
        ax.set_ylabel("revert rate (%)")
        ax2.set_ylabel("stable rules")
        fig.tight_layout()
        written.append(out / "adaptation.png")
        fig.savefig(written[-1], dpi=100)
        plt.close(fig)
    return written


def emit_plots(out: str | Path) -> list[Path]:
    return plot_bench(out) + plot_longitudinal(out)
