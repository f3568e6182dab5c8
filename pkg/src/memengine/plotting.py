"""PNG figures for ablation and robustness reports.

Figures are written next to the JSON/CSV report they summarize. The Agg
backend is selected explicitly so the CLI works without a display.
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

if TYPE_CHECKING:
    from .experiments import AblationReport, RobustnessReport

_DPI = 120


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def ablation_figure(report: AblationReport, path: str | Path) -> Path:
    """Bar chart of mean accuracy per system, seed std as error bars."""
    systems = list(report.accuracy)
    means = np.array([np.mean(report.accuracy[s]) for s in systems]) * 100.0
    stds = np.array([np.std(report.accuracy[s], ddof=1) if len(report.accuracy[s]) > 1 else 0.0
                     for s in systems]) * 100.0
    colors = ["#2b6cb0" if s == "full" else "#a0aec0" for s in systems]
    fig, ax = plt.subplots(figsize=(max(5.0, 0.9 * len(systems) + 1.5), 3.6))
    x = np.arange(len(systems))
    ax.bar(x, means, yerr=stds, color=colors, capsize=3)
    ax.set_xticks(x)
    ax.set_xticklabels([s.replace("disable_", "w/o ").replace("_", " ") for s in systems],
                       rotation=30, ha="right")
    ax.set_ylabel("accuracy (%)")
    lo = max(0.0, float((means - stds).min()) - 3.0)
    ax.set_ylim(lo, min(100.0, float((means + stds).max()) + 2.0))
    ax.set_title(f"ablations over {len(report.seeds)} seeds")
    return _save(fig, Path(path))


def robustness_figure(report: RobustnessReport, path: str | Path) -> Path:
    """Grouped bars: one group per modality condition, one bar per system."""
    systems = list(report.accuracy)
    conditions = list(next(iter(report.accuracy.values())))
    width = 0.8 / len(systems)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    x = np.arange(len(conditions))
    for j, s in enumerate(systems):
        vals = [report.accuracy[s][c] for c in conditions]
        means = [100.0 * np.mean(v) for v in vals]
        stds = [100.0 * np.std(v, ddof=1) if len(v) > 1 else 0.0 for v in vals]
        ax.bar(x + (j - (len(systems) - 1) / 2) * width, means, width, yerr=stds, capsize=2,
               label=f"{s} (ret. {report.retention(s):.1f}%)")
    ax.set_xticks(x)
    ax.set_xticklabels(conditions)
    ax.set_ylabel("accuracy (%)")
    ax.legend(fontsize=8, loc="lower left")
    ax.set_title(f"modality robustness over {len(report.seeds)} seeds")
    return _save(fig, Path(path))
