"""Publication-style figures from tcm output files."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from tcmviz.readers import (
    FIELD_NAMES,
    FormatError,
    read_diagnostics_csv,
    read_manifest,
    read_snapshot,
)

_PNG_META = {"Software": "tcm-viz"}     # keeps output bytes reproducible
_FLOOR = 1e-18                          # plot floor for exactly-zero data


def plot_fields(
    snapshot_path,
    out_dir,
    fields: Optional[Sequence[str]] = None,
    q_s: float = 0.02,
) -> list[Path]:
    """One heatmap per requested field (default: all six), with the
    saturation contour q = q_s overlaid on the humidity panel whenever the
    field actually crosses it."""
    snap = read_snapshot(snapshot_path)
    names = tuple(fields) if fields else FIELD_NAMES
    unknown = [f for f in names if f not in FIELD_NAMES]
    if unknown:
        raise ValueError(
            f"unknown field name(s) {unknown}; valid names: {list(FIELD_NAMES)}"
        )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n, length = snap["n"], snap["length"]
    x = np.arange(n) * (length / n)
    written = []
    for name in names:
        data = snap["fields"][name]
        fig, ax = plt.subplots(figsize=(5.0, 4.2))
        im = ax.pcolormesh(x, x, data.T, shading="auto", cmap="RdBu_r")
        fig.colorbar(im, ax=ax)
        if name == "q" and data.min() < q_s < data.max():
            ax.contour(x, x, data.T, levels=[q_s], colors="k", linewidths=1.0)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_title(f"{name}  (t = {snap['time']:g}, {snap['variant']})")
        path = out_dir / f"{name}.png"
        fig.savefig(path, dpi=120, metadata=_PNG_META)
        plt.close(fig)
        written.append(path)
    return written


def compare_energy_decay(csv_path, rate: float) -> float:
    """Max relative deviation of E(t) from E(0) * exp(-rate * t)."""
    data = read_diagnostics_csv(csv_path)
    t = data["time"]
    analytic = data["E"][0] * np.exp(-rate * t)
    scale = np.maximum(np.abs(analytic), _FLOOR)
    return float(np.max(np.abs(data["E"] - analytic) / scale))


def plot_diagnostics(
    csv_path,
    out_path,
    decay_rate: Optional[float] = None,
    xi0: Optional[float] = None,
) -> Optional[float]:
    """Multi-panel time series: E (optionally with an exp(-rate t) overlay),
    dissipation, sup_T (with a xi0 reference line when given), saturation
    fractions, and the energy residual on a log scale.

    Returns the max relative overlay deviation when decay_rate is given.
    """
    data = read_diagnostics_csv(csv_path)
    t = data["time"]
    overlay_dev = None

    fig, axes = plt.subplots(5, 1, figsize=(7.0, 11.0), sharex=True)

    axes[0].plot(t, data["E"], marker="." if len(t) < 40 else None, label="E")
    if decay_rate is not None:
        analytic = data["E"][0] * np.exp(-decay_rate * t)
        axes[0].plot(t, analytic, "k--", label=f"E(0) exp(-{decay_rate:g} t)")
        overlay_dev = compare_energy_decay(csv_path, decay_rate)
        axes[0].legend()
    axes[0].set_ylabel("energy")

    axes[1].plot(t, data["dissipation"], marker="." if len(t) < 40 else None)
    axes[1].set_ylabel("dissipation")

    axes[2].plot(t, data["sup_T"], marker="." if len(t) < 40 else None)
    if xi0 is not None:
        axes[2].axhline(xi0, color="r", linestyle=":", label=f"xi0 = {xi0:g}")
        axes[2].legend()
    axes[2].set_ylabel("sup |T|")

    for key, label in (("sat_below", "q < q_s"), ("sat_at", "q = q_s"),
                       ("sat_above", "q > q_s")):
        axes[3].plot(t, data[key], label=label)
    axes[3].set_ylabel("area fraction")
    axes[3].set_ylim(-0.05, 1.05)
    axes[3].legend(loc="center right")

    axes[4].semilogy(t, np.maximum(data["energy_residual"], _FLOOR),
                     marker="." if len(t) < 40 else None)
    axes[4].set_ylabel("energy residual")
    axes[4].set_xlabel("time")

    fig.align_ylabels(axes)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return overlay_dev


def plot_convergence(manifest_path, out_path) -> Path:
    """Log-log plot of the sweep difference table with the fitted slope
    annotated; exactly-zero tables are drawn at the plot floor with a note."""
    manifest = read_manifest(manifest_path)
    diffs = manifest.get("differences", [])
    if len(diffs) < 2:
        raise ValueError(
            f"manifest {manifest_path} has {len(diffs)} difference entries; "
            "need at least 2 to plot convergence"
        )
    parameter = manifest.get("parameter", "parameter")

    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    times = sorted({d["time"] for d in diffs})
    all_zero = all(d["difference"] == 0.0 for d in diffs)
    for tcmp in times:
        rows = [d for d in diffs if d["time"] == tcmp]
        xs = np.array([d["coarse"] for d in rows])
        ys = np.array([max(d["difference"], _FLOOR) for d in rows])
        ax.loglog(xs, ys, "o-", label=f"t = {tcmp:g}")
        if len(xs) >= 2 and not all_zero:
            slope = np.polyfit(np.log(xs), np.log(ys), 1)[0]
            ax.annotate(f"slope {slope:.2f}", xy=(xs[-1], ys[-1]),
                        xytext=(5, 5), textcoords="offset points")
    if all_zero:
        ax.annotate("all differences exactly zero (plotted at floor)",
                    xy=(0.05, 0.5), xycoords="axes fraction")
    ax.set_xlabel(parameter)
    ax.set_ylabel("difference")
    ax.set_title(f"{parameter}-sweep convergence")
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return out_path
