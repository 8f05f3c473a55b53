"""Figures rendered next to the CSV artifacts of a run.

The CSV files are the contract; these PNGs are a convenience for reading a
run at a glance and are always regenerated from the CSVs.
"""

from __future__ import annotations

from math import sqrt
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (sqrt(5.0) - 1.0) / 2.0
WIDTH = 6.0
STYLE = {
    "figure.figsize": (WIDTH, WIDTH * GOLDEN),
    "figure.dpi": 110,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.3,
}
# no timestamps in the PNG metadata, so reruns give identical files
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_trace(trace: dict, path: Path, title: str = "") -> Path:
    x, u, phi, contact = trace["x"], trace["u"], trace["phi"], trace["contact"] > 0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(x, phi, color="0.55", ls="--", label=r"obstacle $\varphi$")
        ax.plot(x, u, color="C0", label="solution $u$")
        if contact.any():
            ax.plot(x[contact], u[contact], ".", color="C3", ms=2.5, label="contact set")
        ax.set_xlabel("$x$")
        ax.legend(loc="upper right")
        ax.set_title(title)
        return _save(fig, path)


def plot_frequency(curves: dict[str, dict], threshold: float, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, c in curves.items():
            ax.semilogx(c["r"], c["Phi"], marker="o", ms=2.5, label=label)
        ax.axhline(threshold, color="0.4", ls=":", lw=1, label=f"threshold {threshold:.3g}")
        ax.set_xlabel("$r$")
        ax.set_ylabel(r"$\Phi(r)$")
        ax.legend()
        return _save(fig, path)


def plot_mc(mc: dict, trace: dict, path: Path) -> Path:
    x0, rule, mean, se = mc["x0"], mc["rule"], mc["mean"], mc["stdErr"]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(trace["x"], trace["u"], color="0.3", lw=1, label="$u$ (PDE)")
        for k, name in enumerate(sorted(set(rule), key=lambda r: (r != "contact-set", r))):
            sel = rule == name
            ax.errorbar(x0[sel] + 0.015 * k, mean[sel], yerr=4 * se[sel], fmt="o", ms=3,
                        capsize=2, label=name)
        ax.set_xlim(np.min(x0) - 0.5, np.max(x0) + 0.5)
        ax.set_xlabel("$x_0$")
        ax.set_ylabel("estimate $\\pm$ 4 s.e.")
        ax.legend(ncol=2)
        return _save(fig, path)


def plot_growth(fits: list[dict], s: float, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for f in fits:
            r, sup = np.asarray(f["radii"]), np.asarray(f["sups"])
            ax.loglog(r, sup, "o", ms=3, label=f"x={f['x']:.3g}, fit {f['kappaHat']:.3f}")
            ax.loglog(r, sup[-1] * (r / r[-1]) ** f["kappaHat"], lw=0.8, color="0.5")
        ax.set_xlabel("distance $d$")
        ax.set_ylabel(r"$\sup_{B_d}\,(u-\varphi)$")
        ax.set_title(f"reference slope 1+s = {1 + s:.3g}")
        ax.legend()
        return _save(fig, path)
