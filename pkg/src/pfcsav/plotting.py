"""Matplotlib figures written next to the CSV reports."""

from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import ConvergenceRow, TimeSeries  # noqa: E402

RC = {
    "font.size": 10,
    "axes.labelsize": 11,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def energy_figure(series: TimeSeries, path, title: str | None = None) -> None:
    t = series.array("t")
    with plt.rc_context(RC):
        fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
        ax.plot(t, series.array("E_modified"), label="modified")
        ax.plot(t, series.array("E_original"), "--", label="original")
        ax.set_xlabel("t")
        ax.set_ylabel("energy")
        ax.legend()
        drift = series.array("sav_drift")
        ax2.semilogy(t[drift > 0], drift[drift > 0])
        ax2.set_xlabel("t")
        ax2.set_ylabel(r"$|R^2 - E_1(\phi)|$")
        if title:
            fig.suptitle(title)
        fig.savefig(path)
        plt.close(fig)


def energy_comparison_figure(curves: dict[str, tuple[np.ndarray, np.ndarray]], path) -> None:
    """Overlay several energy trajectories, e.g. different ``dt`` and ``S``."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3.4))
        for label, (t, e) in curves.items():
            ax.plot(t, e, label=label)
        ax.set_xlabel("t")
        ax.set_ylabel("modified energy")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)


def temporal_convergence_figure(rows: Sequence[ConvergenceRow], path, title: str | None = None) -> None:
    dt = np.array([r.dt for r in rows])
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.6, 3.6))
        ax.loglog(dt, [r.err_phi for r in rows], "o-", label=r"$\|e_\phi\|$")
        ax.loglog(dt, [r.err_r for r in rows], "s-", label=r"$|e_r|$")
        ref = rows[-1].err_phi
        for order in (1, 2):
            ax.loglog(dt, ref * (dt / dt[-1]) ** order, ":", color="gray")
            ax.annotate(f"order {order}", (dt[0], ref * (dt[0] / dt[-1]) ** order), fontsize=8)
        ax.set_xlabel(r"$\Delta t$")
        ax.set_ylabel("Cauchy error")
        ax.legend()
        if title:
            ax.set_title(title)
        fig.savefig(path)
        plt.close(fig)


def spatial_convergence_figure(rows: Sequence[tuple[int, float]], path) -> None:
    Ns = [n for n, _ in rows]
    errs = [max(e, 1e-300) for _, e in rows]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.6, 3.6))
        ax.semilogy(Ns, errs, "o-")
        ax.set_xlabel("N")
        ax.set_ylabel(r"$\|\phi_N - \phi_{2N}\|$")
        fig.savefig(path)
        plt.close(fig)


def snapshot_panel(fields: Sequence[tuple[float, np.ndarray]], path, extent=None) -> None:
    n = len(fields)
    cols = min(n, 3)
    rows = math.ceil(n / cols)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 3 * rows), squeeze=False)
        for ax in axes.flat[n:]:
            ax.axis("off")
        for ax, (t, phi) in zip(axes.flat, fields):
            ax.imshow(phi.T, origin="lower", cmap="gray", extent=extent)
            ax.set_title(f"t = {t:g}")
            ax.set_xticks([])
            ax.set_yticks([])
            ax.grid(False)
        fig.savefig(path)
        plt.close(fig)
