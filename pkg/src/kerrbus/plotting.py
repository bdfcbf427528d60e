"""Static figures for experiment results. Uses the non-interactive Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # fixed metadata keeps repeated renders stable
    "svg.hashsalt": "kerrbus",
}


def _hist(ax, plot):
    values = np.asarray(plot["values"], dtype=float)
    values = values[np.isfinite(values)]
    if values.size:
        ax.hist(values, bins=min(100, max(10, int(np.sqrt(values.size)))), color="0.35")
    ax.set_ylabel("count")


def _bars(ax, plot):
    values = np.asarray(plot["values"], dtype=float)
    pos = np.arange(len(values))
    ax.bar(pos, values, color="0.6", label="empirical")
    if plot.get("reference") is not None:
        ax.plot(pos, plot["reference"], "k_", markersize=18, mew=2, label="predicted")
        ax.legend(frameon=False)
    if plot.get("labels"):
        ax.set_xticks(pos, plot["labels"])
    ax.set_ylabel("frequency")


def _sweep(ax, plot):
    keys, rows = plot["keys"], plot["rows"]
    x = np.array([r[0] for r in rows], dtype=float)
    analytic = np.array([r[-3] for r in rows], dtype=float)
    empirical = np.array([r[-2] for r in rows], dtype=float)
    err = np.array([r[-1] for r in rows], dtype=float)
    groups = sorted({r[1] for r in rows}) if len(keys) == 2 else [None]
    for g in groups:
        sel = np.ones(len(rows), bool) if g is None else np.array([r[1] == g for r in rows])
        tag = "" if g is None else f" {keys[1]}={g:g}"
        ax.plot(x[sel], analytic[sel], "-", label="analytic" + tag)
        ax.errorbar(x[sel], empirical[sel], yerr=err[sel], fmt="o", ms=4, capsize=2, label="empirical" + tag)
    if np.all(analytic > 0) and np.all(empirical >= 0) and analytic.max() / analytic.min() > 100:
        ax.set_yscale("log")
    ax.set_xlabel(keys[0])
    ax.set_ylabel(rows[0][-4] if rows else "")
    ax.legend(frameon=False, fontsize=8)


_DRAW = {"hist": _hist, "bars": _bars, "sweep": _sweep}


def render(plot: dict, path: str) -> None:
    """Write the figure described by ``plot`` (an ExperimentResult.plot dict) to ``path``."""
    if not plot:
        raise ValueError("this experiment has no figure")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        _DRAW[plot["kind"]](ax, plot)
        if "xlabel" in plot:
            ax.set_xlabel(plot["xlabel"])
        ax.set_title(plot.get("title", ""))
        fig.savefig(path, metadata={"Software": None} if path.endswith(".png") else None)
        plt.close(fig)
