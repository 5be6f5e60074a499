"""Report figures (PNG, headless Agg backend)."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import atomic_write  # noqa: E402

_STYLE = {"figure.figsize": (6.4, 4.0), "axes.grid": True, "grid.alpha": 0.3, "font.size": 9}


def _save(fig, path) -> Path:
    buf = io.BytesIO()
    # no Software/date chunks, so identical data gives identical files
    fig.savefig(buf, format="png", dpi=120, metadata={"Software": None}, bbox_inches="tight")
    plt.close(fig)
    return atomic_write(path, buf.getvalue())


def excess_figure(rows: list[dict], path) -> Path:
    r = [int(x["r"]) for x in rows]
    mean = [float(x["mean_excess"]) for x in rows]
    with plt.rc_context(_STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2)
        ax0.plot(r, mean, "o-", ms=3)
        ax0.axhline(0.0, color="k", lw=0.6)
        ax0.set_xlabel("r")
        ax0.set_ylabel("mean excess in B(w0, r)")
        ax1.semilogy(r, [max(int(x["n_minus"]), 1) for x in rows], "o-", ms=3, label="n-")
        ax1.semilogy(r, [max(int(x["n_plus"]), 1) for x in rows], "s-", ms=3, label="n+")
        ax1.set_xlabel("r")
        ax1.legend()
        fig.tight_layout()
        return _save(fig, path)


def resistance_figure(radii, resistance, nw_lower, path) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(radii, resistance, "o-", ms=3, label="R_eff(w0, sphere r)")
        ax.step(radii, nw_lower, where="post", label="Nash-Williams lower bound")
        ax.set_xlabel("r")
        ax.set_ylabel("resistance")
        ax.legend()
        return _save(fig, path)


def walk_figure(horizons, freq, low, high, path) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        err = [[f - lo for f, lo in zip(freq, low)], [hi - f for f, hi in zip(freq, high)]]
        ax.errorbar(horizons, freq, yerr=err, fmt="o-", ms=3, capsize=2)
        ax.set_xscale("log")
        ax.set_xlabel("horizon (steps)")
        ax.set_ylabel("return frequency")
        return _save(fig, path)


def surface_figure(rows: list[dict], path) -> Path:
    r = [float(x["r"]) for x in rows]
    with plt.rc_context(_STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2)
        ax0.semilogy(r, [float(x["area_P"]) for x in rows], label="area P")
        ax0.semilogy(r, [float(x["area_Q"]) for x in rows], label="area Q")
        ax0.semilogy(r, [float(x["length_beta_r"]) for x in rows], "--", label="length beta_r")
        ax0.set_xlabel("r")
        ax0.legend()
        ax1.plot(r, [float(x["ratio"]) for x in rows], "o-", ms=3)
        ax1.set_ylim(0.0, 0.6)
        ax1.set_xlabel("r")
        ax1.set_ylabel("area P / area D(a, r)")
        fig.tight_layout()
        return _save(fig, path)
