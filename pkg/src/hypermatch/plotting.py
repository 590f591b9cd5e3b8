"""Minimal, byte-reproducible SVG plots of the stat tables."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "hypermatch", "svg.fonttype": "none", "path.simplify": False}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def plot_eccdf(table, path, d: int, fit=None):
    """Semi-log tail against ``r^d``: a straight line means a stretched
    exponential tail."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        keep = table.tail > 0
        ax.semilogy(table.r[keep] ** d, table.tail[keep], ".", ms=2)
        if fit is not None:
            x = np.linspace(0, table.r.max() ** d, 50)
            ax.semilogy(x, np.exp(fit[1] + fit[0] * x), "-", lw=1)
        ax.set_xlabel(f"r^{d}")
        ax.set_ylabel("ECCDF")
        fig.tight_layout()
        return _save(fig, path)


def plot_loglog(x, y, path, xlabel: str, ylabel: str, err=None, guide=None):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        x, y = np.asarray(x), np.asarray(y)
        ok = (x > 0) & (y > 0)
        if err is not None:
            ax.errorbar(x[ok], y[ok], yerr=np.asarray(err)[ok], fmt=".", ms=3, lw=0.8)
        else:
            ax.plot(x[ok], y[ok], ".", ms=3)
        if guide is not None:
            exponent, prefactor = guide
            ax.plot(x[ok], prefactor * x[ok] ** exponent, "-", lw=1)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        return _save(fig, path)


def plot_lines(x, y, path, xlabel: str, ylabel: str, err=None):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        if err is not None:
            ax.errorbar(x, y, yerr=err, fmt=".-", ms=3, lw=0.8)
        else:
            ax.plot(x, y, ".-", ms=3)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        return _save(fig, path)
