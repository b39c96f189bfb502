"""SVG chart rendering.

Charts are pure renderings of already-written CSV files: each function
parses a CSV produced by the report writers and plots it, computing nothing
new. Rendering uses the Agg backend so no display is required.
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_rows(csv_path) -> list[dict]:
    with open(csv_path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _save(fig, out_path) -> None:
    tmp = f"{out_path}.tmp"
    fig.savefig(tmp, format="svg", bbox_inches="tight")
    os.replace(tmp, out_path)
    plt.close(fig)


def render_sweep_chart(csv_path, out_path, metric: str = "context_at_k", k: str = "5") -> None:
    """Metric-vs-alpha curves, one line per query category."""
    rows = [r for r in _read_rows(csv_path) if r["metric"] == metric and r["K"] in (k, "")]
    series: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for row in rows:
        if not row["value"]:
            continue
        series[row["category"]].append((float(row["alpha"]), float(row["value"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for category, points in sorted(series.items()):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=category)
    ax.set_xlabel("fusion weight alpha")
    label = f"{metric}@{k}" if k else metric
    ax.set_ylabel(label)
    ax.set_title(f"{label} across fusion weights")
    ax.legend()
    ax.grid(True, alpha=0.3)
    _save(fig, out_path)


def render_ablation_chart(csv_path, out_path, metric: str = "title_at_k") -> None:
    """Metric-vs-K curves, one line per ablation condition (categories pooled
    by unweighted mean, purely for display)."""
    rows = [r for r in _read_rows(csv_path) if r["metric"] == metric and r["K"]]
    buckets: dict[tuple[str, int], list[float]] = defaultdict(list)
    for row in rows:
        if row["value"]:
            buckets[(row["condition"], int(row["K"]))].append(float(row["value"]))
    series: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for (condition, k), values in buckets.items():
        series[condition].append((k, sum(values) / len(values)))
    fig, ax = plt.subplots(figsize=(6, 4))
    for condition, points in sorted(series.items()):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=condition)
    ax.set_xlabel("K")
    ax.set_ylabel(metric)
    ax.set_title(f"{metric} by ablation condition")
    ax.legend()
    ax.grid(True, alpha=0.3)
    _save(fig, out_path)


def render_separation_chart(csv_path, out_path) -> None:
    """Grouped bars: one group per separation statistic, one bar per variant."""
    rows = _read_rows(csv_path)
    stats = [
        "mean_margin",
        "cohens_d",
        "fisher_f",
        "auc",
        "ks_distance",
        "tail_pos",
        "tail_neg",
    ]
    variants = sorted({r["variant"] for r in rows})
    values = {
        (r["variant"], r["statistic"]): float(r["value"])
        for r in rows
        if r["statistic"] in stats and r["value"]
    }
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / max(len(variants), 1)
    for vi, variant in enumerate(variants):
        xs = [si + vi * width for si in range(len(stats))]
        ys = [values.get((variant, s), 0.0) for s in stats]
        ax.bar(xs, ys, width=width, label=variant)
    ax.set_xticks([si + width * (len(variants) - 1) / 2 for si in range(len(stats))])
    ax.set_xticklabels(stats, rotation=30, ha="right")
    ax.set_ylabel("value")
    ax.set_title("pairwise separation by embedding variant")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    _save(fig, out_path)
