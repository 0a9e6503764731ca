"""Delimited report files and the figures rendered from them.

Reports are tab-separated text: fitting and evaluation reports carry
one metric per row, benchmark output is a small table with a header.
The figure functions parse those files back, never the in-memory
objects, so a report written yesterday plots the same as a fresh one
and downstream tooling can regenerate figures without refitting.
"""

from __future__ import annotations

import csv
import re
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = [
    "format_table",
    "read_tsv",
    "render_bench_figures",
    "render_eval_figures",
    "render_fit_figures",
    "write_tsv",
]

_DELTA_RE = re.compile(r"^delta_sweep_(\d+)$")
_ALPHA_RE = re.compile(r"^alpha_sweep_(\d+)\[(.+)\]$")
_COUNT_RE = re.compile(r"^count\[(.*)\]\[(.*)\]$")
_F1_RE = re.compile(r"^f1\[(.+)\]$")


def write_tsv(path: str | Path, rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        for row in rows:
            writer.writerow(list(row))


def read_tsv(path: str | Path) -> list[tuple[str, ...]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [tuple(row) for row in csv.reader(fh, delimiter="\t")]


def format_table(rows: Sequence[Sequence[str]], indent: str = "  ") -> str:
    """Align columns of a small table for terminal output."""
    rows = [tuple(str(c) for c in row) for row in rows]
    if not rows:
        return ""
    widths = [0] * max(len(r) for r in rows)
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        indent + "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        for row in rows
    ]
    return "\n".join(lines)


def _metric_map(path: str | Path) -> dict[str, str]:
    out = {}
    for row in read_tsv(path):
        if len(row) >= 2:
            out[row[0]] = row[1]
    return out


def render_fit_figures(report_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Plot the change-count curve and prior trajectories of a fit report."""
    metrics = _metric_map(report_path)
    deltas: list[tuple[int, int]] = []
    alphas: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for key, value in metrics.items():
        if m := _DELTA_RE.match(key):
            deltas.append((int(m.group(1)), int(value)))
        elif m := _ALPHA_RE.match(key):
            alphas[m.group(2)].append((int(m.group(1)), float(value)))
    if not deltas and not alphas:
        raise ValueError(f"{report_path}: no plottable fit metrics found")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    ax = axes[0]
    if deltas:
        deltas.sort()
        ax.plot([s for s, _ in deltas], [d for _, d in deltas], marker="o", ms=3)
    ax.set_xlabel("sweeps")
    ax.set_ylabel("tokens changing topic")
    ax.set_title("assignment churn")
    ax = axes[1]
    for label in sorted(alphas):
        pts = sorted(alphas[label])
        ax.plot([s for s, _ in pts], [a for _, a in pts], label=label)
    ax.set_xlabel("sweeps")
    ax.set_ylabel("alpha")
    ax.set_title("topic priors")
    if alphas:
        ax.legend(fontsize=7)
    fig.tight_layout()
    out = out_dir / "fit_report.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [out]


def render_eval_figures(report_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Plot label frequencies by group and per-class F1 from an
    evaluation report."""
    metrics = _metric_map(report_path)
    counts: dict[str, dict[str, int]] = defaultdict(dict)
    f1s: dict[str, float] = {}
    for key, value in metrics.items():
        if m := _COUNT_RE.match(key):
            counts[m.group(1)][m.group(2)] = int(value)
        elif m := _F1_RE.match(key):
            f1s[m.group(1)] = float(value)
    if not counts and not f1s:
        raise ValueError(f"{report_path}: no plottable evaluation metrics found")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    if counts:
        groups = sorted(counts)
        labels = sorted({lab for g in counts.values() for lab in g})
        fig, ax = plt.subplots(figsize=(8, 4.5))
        if len(groups) > 1:
            for lab in labels:
                totals = [sum(counts[g].values()) or 1 for g in groups]
                ys = [counts[g].get(lab, 0) / t for g, t in zip(groups, totals)]
                ax.plot(groups, ys, marker="o", ms=3, label=lab)
            ax.set_ylabel("share of documents")
            ax.set_xlabel("group")
            step = max(1, len(groups) // 12)
            ax.set_xticks(range(0, len(groups), step))
            ax.tick_params(axis="x", rotation=45)
        else:
            g = groups[0]
            ys = [counts[g].get(lab, 0) for lab in labels]
            ax.bar(range(len(labels)), ys)
            ax.set_xticks(range(len(labels)))
            ax.set_xticklabels(labels, rotation=30, ha="right")
            ax.set_ylabel("documents")
        ax.set_title("predicted label frequency")
        if len(groups) > 1:
            ax.legend(fontsize=7)
        fig.tight_layout()
        out = out_dir / "topic_frequency.png"
        fig.savefig(out, dpi=120)
        plt.close(fig)
        written.append(out)

    if f1s:
        labels = sorted(f1s)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.bar(range(len(labels)), [f1s[lab] for lab in labels])
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, ha="right")
        ax.set_ylim(0, 1)
        ax.set_ylabel("F1")
        ax.set_title("per-class F1")
        fig.tight_layout()
        out = out_dir / "f1_per_class.png"
        fig.savefig(out, dpi=120)
        plt.close(fig)
        written.append(out)
    return written


def render_bench_figures(bench_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Plot wall-clock time against worker count, one line per k."""
    rows = read_tsv(bench_path)
    if not rows or rows[0][:4] != ("k", "workers", "rep", "elapsed_seconds"):
        raise ValueError(f"{bench_path}: not a benchmark table")
    samples: dict[tuple[int, int], list[float]] = defaultdict(list)
    for row in rows[1:]:
        k, workers, _rep, seconds = row[:4]
        samples[(int(k), int(workers))].append(float(seconds))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(6, 4))
    ks = sorted({k for k, _ in samples})
    for k in ks:
        workers = sorted(w for kk, w in samples if kk == k)
        med = [sorted(samples[(k, w)])[len(samples[(k, w)]) // 2] for w in workers]
        ax.plot(workers, med, marker="o", label=f"k={k}")
    ax.set_xlabel("workers")
    ax.set_ylabel("median seconds per fit")
    ax.set_title("sampling time vs workers")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = out_dir / "bench_scaling.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [out]
