"""Matplotlib figures rendered next to evaluation reports.

Figures are written with fixed size, dpi and metadata so repeated runs
produce byte-identical PNG files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .keypoints import ThresholdSweep
from .metrics import EvalReport

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": "toothseg"}}


def plot_threshold_sweep(sweep: ThresholdSweep, path: str | Path) -> None:
    """Precision / recall / F1 against the distance threshold."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(sweep.thresholds, sweep.precision, label="precision", color="#1b7837")
    ax.plot(sweep.thresholds, sweep.recall, label="recall", color="#2166ac")
    ax.plot(sweep.thresholds, sweep.f1, label="f1", color="#b2182b")
    ax.set_xlabel("distance threshold (px)")
    ax.set_ylabel("score")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def plot_view_scores(report: EvalReport, path: str | Path) -> None:
    """Grouped bars of per-view mean IoU / precision / recall / F1."""
    views = list(report.per_view)
    metrics = ("iou", "precision", "recall", "f1")
    colors = ("#4d4d4d", "#1b7837", "#2166ac", "#b2182b")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    width = 0.8 / len(metrics)
    for k, (metric, color) in enumerate(zip(metrics, colors)):
        xs = [i + (k - (len(metrics) - 1) / 2) * width for i in range(len(views))]
        ys = [getattr(report.per_view[v], metric) for v in views]
        ax.bar(xs, ys, width=width, label=metric, color=color)
    ax.set_xticks(range(len(views)))
    ax.set_xticklabels(views)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("mean score")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(loc="lower right", ncol=2)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
