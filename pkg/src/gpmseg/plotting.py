"""Report figures.  Uses the non-interactive Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    # fixed metadata keeps repeated renders byte-stable
    "svg.hashsalt": "gpmseg",
}


def _save(fig, path) -> None:
    meta = {"Software": None} if str(path).endswith(".png") else None
    fig.savefig(path, bbox_inches="tight", metadata=meta)
    plt.close(fig)


def confusion_figure(report, names, path) -> None:
    """Row-normalized confusion matrix (truth on rows)."""
    conf = report.confusion.astype(float)
    rows = conf.sum(axis=1, keepdims=True)
    norm = np.divide(conf, rows, out=np.zeros_like(conf), where=rows > 0)
    with plt.rc_context(STYLE):
        size = 1.5 + 0.45 * len(names)
        fig, ax = plt.subplots(figsize=(size, size))
        im = ax.imshow(norm, vmin=0.0, vmax=1.0, cmap="Blues")
        ax.set_xticks(range(len(names)), names, rotation=60, ha="right")
        ax.set_yticks(range(len(names)), names)
        ax.set_xlabel("predicted")
        ax.set_ylabel("truth")
        ax.set_title(f"avg per-class {report.average_per_class:.3f}, global {report.global_accuracy:.3f}")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        _save(fig, path)


def trace_figure(trace, path) -> None:
    """Labeling and total energy per iteration."""
    it = [r["iteration"] for r in trace]
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(7, 2.8))
        a1.plot(it, [r["labeling_energy"] for r in trace], "o-", label="labeling")
        a1.plot(it, [r["total_energy"] for r in trace], "s--", label="total")
        a1.set_xlabel("iteration")
        a1.set_ylabel("energy")
        a1.legend(frameon=False)
        a2.bar(it, [r["labels_changed"] for r in trace], color="0.5")
        a2.set_xlabel("iteration")
        a2.set_ylabel("labels changed")
        _save(fig, path)


def bench_figure(samples: dict, path) -> None:
    """Box plot of per-phase wall times."""
    phases = list(samples)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(phases), 2.8))
        ax.boxplot([samples[p] for p in phases])
        ax.set_xticks(range(1, len(phases) + 1), phases)
        ax.set_ylabel("seconds")
        _save(fig, path)
