"""Report output: delimited files with full-precision floats plus figures.

Every CLI report path writes machine-readable output (CSV for grids and
sweeps, JSON for traces and bound summaries) and renders a matplotlib
figure next to it with the same stem.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def fmt_float(x: float) -> str:
    """17-significant-digit decimal so a reader recovers the exact double."""
    return format(float(x), ".17g")


def write_csv(path: str | Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [fmt_float(v) if isinstance(v, float) else v for v in row]
            )


def write_json(path: str | Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def figure_path(out: str | Path) -> Path:
    """The figure file rendered alongside a data output file."""
    out = Path(out)
    return out.with_suffix(".png")


def save_heatmap(
    theta_deg: np.ndarray,
    phi_deg: np.ndarray,
    values: np.ndarray,
    out: str | Path,
    title: str,
) -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    mesh = ax.pcolormesh(theta_deg, phi_deg, values, shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="serving ratio C/N (bits/use)")
    ax.set_xlabel("longitude offset from user (deg)")
    ax.set_ylabel("polar angle (deg)")
    ax.set_title(title)
    ax.invert_yaxis()
    path = figure_path(out)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def save_sweep(
    x: np.ndarray,
    series: dict[str, np.ndarray],
    xlabel: str,
    out: str | Path,
    title: str,
    errors: dict[str, np.ndarray] | None = None,
) -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    for name, y in series.items():
        if errors and name in errors:
            ax.errorbar(x, y, yerr=errors[name], label=name, capsize=2)
        else:
            ax.plot(x, y, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("persistent capacity (bits/use)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    path = figure_path(out)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def save_trace(iterates: list[tuple[float, float]], out: str | Path, title: str) -> Path:
    its = np.arange(1, len(iterates) + 1)
    cs = np.array([c for c, _ in iterates])
    qs = np.array([q for _, q in iterates])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(its, cs, marker="o")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("capacity iterate (bits/use)")
    ax1.grid(True, alpha=0.3)
    ax2.semilogy(its, np.maximum(qs, 1e-300), marker="o")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("residual q(c)")
    ax2.grid(True, alpha=0.3)
    fig.suptitle(title)
    path = figure_path(out)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path
