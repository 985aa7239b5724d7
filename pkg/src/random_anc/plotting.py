"""Figures written next to the CSV reports.

Every function takes the in-memory report object and an output path, draws
with the non-interactive Agg backend and closes its figure.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def figure_path(csv_path) -> Path:
    """``report.csv`` -> ``report.png``."""
    return Path(csv_path).with_suffix(".png")


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_training(report, path) -> Path:
    """Accuracy and loss per iteration for Alice, Bob and Eve."""
    with plt.rc_context(STYLE):
        fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(9, 3.4))
        it = np.arange(1, report.iterations + 1)
        ax_acc.plot(it, 100 * np.asarray(report.acc_bob), label="Bob")
        ax_acc.plot(it, 100 * np.asarray(report.acc_eve), label="Eve")
        ax_acc.axhline(50, color="grey", lw=0.8, ls="--")
        ax_acc.set_xlabel("iteration")
        ax_acc.set_ylabel("bit accuracy (%)")
        ax_acc.set_ylim(0, 102)
        ax_acc.legend(loc="lower right")
        for name, series in (("Alice", report.loss_alice), ("Bob", report.loss_bob), ("Eve", report.loss_eve)):
            ax_loss.plot(it, series, label=name)
        ax_loss.set_xlabel("iteration")
        ax_loss.set_ylabel("loss")
        ax_loss.legend(loc="upper right")
        fig.suptitle(f"seed {report.seed}: {report.outcome.value if report.outcome else 'running'}, "
                     f"{report.epochs_used} epochs")
        return _save(fig, path)


def plot_uniqueness(report, path) -> Path:
    """Per-message uniqueness with the mean marked."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7, 3))
        u = np.array([s.uniqueness_pct for s in report.scores])
        ax.plot(np.arange(u.size), u, ".", ms=3)
        ax.axhline(report.mean_uniqueness, color="C1", lw=1, label=f"mean {report.mean_uniqueness:.2f}%")
        ax.set_xlabel("message (integer value)")
        ax.set_ylabel("uniqueness (%)")
        ax.set_ylim(-2, 102)
        ax.legend(loc="lower right")
        return _save(fig, path)


def plot_sweep(sweep, path) -> Path:
    """Convergence rate (with 95% interval) and mean epochs per projection width."""
    with plt.rc_context(STYLE):
        fig, (ax_rate, ax_ep) = plt.subplots(1, 2, figsize=(8, 3))
        dims = [r.n_proj for r in sweep.rows]
        pos = np.arange(len(dims))
        rates = np.array([r.convergence_rate for r in sweep.rows])
        lo = np.array([r.rate_interval[0] for r in sweep.rows])
        hi = np.array([r.rate_interval[1] for r in sweep.rows])
        ax_rate.bar(pos, rates, yerr=[rates - lo, hi - rates], capsize=3, color="C0")
        ax_rate.set_xticks(pos, [str(d) for d in dims])
        ax_rate.set_xlabel("projection width N_w")
        ax_rate.set_ylabel("convergence rate")
        ax_ep.bar(pos, [r.mean_epochs for r in sweep.rows], color="C2")
        ax_ep.set_xticks(pos, [str(d) for d in dims])
        ax_ep.set_xlabel("projection width N_w")
        ax_ep.set_ylabel("mean epochs to converge")
        fig.suptitle(f"verdict: {sweep.verdict()}")
        return _save(fig, path)


def plot_bench(results, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        sizes = [r.message_bytes for r in results]
        ax.plot(sizes, [8 * r.throughput / 1e6 for r in results], "o-")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("message size (bytes)")
        ax.set_ylabel("throughput (Mb/s)")
        return _save(fig, path)
