"""CSV tables and standalone SVG figures for experiment output."""
from __future__ import annotations

import csv
import math
from fractions import Fraction
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed ids and no timestamp, so identical data gives identical files
plt.rcParams["svg.hashsalt"] = "holderint"
plt.rcParams["svg.fonttype"] = "none"
_META = {"Date": None, "Creator": "holderint"}


def _cell(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def convergence_plot(path, series: dict, title: str, ylabel: str = "magnitude", xlabel: str = "level j",
                     log: bool = True) -> Path:
    """One line per entry ``name -> (xs, ys)``; non-positive values are dropped on log axes."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (xs, ys) in series.items():
        pts = [(x, abs(float(y))) for x, y in zip(xs, ys)
               if math.isfinite(float(y)) and (not log or float(y) != 0)]
        if pts:
            ax.plot(*zip(*pts), marker="o", label=name)
    if log:
        ax.set_yscale("log", base=2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def slope_plot(path, rows, title: str) -> Path:
    """Fitted against predicted exponents; ``rows`` are (label, predicted, fitted)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    pred = [r[1] for r in rows]
    fit = [r[2] for r in rows]
    ax.scatter(pred, fit)
    for label, p, f in rows:
        ax.annotate(label, (p, f), fontsize=7, xytext=(3, 3), textcoords="offset points")
    lo, hi = min(pred + fit) - 0.2, max(pred + fit) + 0.2
    ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
    ax.set_xlabel("predicted exponent")
    ax.set_ylabel("fitted exponent")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def arcs_plot(path, arcs, title: str = "horizontal arcs") -> Path:
    """xy and xz projections of piecewise linear arcs given in matrix coordinates."""
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 4))
    for arc in arcs:
        pts = [[float(c) for c in v] for v in arc.vertices]
        xs, ys, zs = zip(*pts)
        a1.plot(xs, ys, marker=".", lw=1)
        a2.plot(xs, zs, marker=".", lw=1)
    a1.set_xlabel("x")
    a1.set_ylabel("y")
    a1.set_title("xy projection")
    a2.set_xlabel("x")
    a2.set_ylabel("z")
    a2.set_title("xz projection")
    fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def heatmap(path, grid, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid.T, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("s")
    ax.set_ylabel("t")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
