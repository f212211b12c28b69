"""Matplotlib figures written next to the CSV outputs (SVG by default)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp: identical inputs give identical SVG bytes
matplotlib.rcParams["svg.hashsalt"] = "jumpmfg"
STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.frameon": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    plt.close(fig)
    return path


LABELS = {"gamma": r"mean of $\gamma$", "sigma0": r"mean of $\sigma^0$", "lambda": r"mean of $\lambda$"}


def plot_sweep(rows, param, path, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = [r[param] for r in rows]
        ax.plot(x, [r["mean_pi"] for r in rows], "o-", label=r"$E[\pi^*]$")
        ax.plot(x, [r["mean_type_pi"] for r in rows], "s--", ms=4, label=r"$\pi^*$ (mean type)")
        ax.set_xlabel(LABELS.get(param, param))
        ax.set_ylabel("equilibrium allocation")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_sweep_overlay(curves: dict, param, path):
    """Several scenarios' E[pi*] on one axis; ``curves`` maps label -> rows."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, rows in curves.items():
            ax.plot([r[param] for r in rows], [r["mean_pi"] for r in rows], "o-", ms=4, label=label)
        ax.set_xlabel(LABELS.get(param, param))
        ax.set_ylabel(r"$E[\pi^*]$")
        ax.legend()
        return _save(fig, path)


def plot_surface(rows, path):
    u = np.unique([r["u"] for r in rows])
    v = np.unique([r["v"] for r in rows])
    pi = np.array([r["pi"] for r in rows]).reshape(len(u), len(v))
    ref = np.array([r["pi_gamma0"] for r in rows]).reshape(len(u), len(v))
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=(10, 4))
        ax = fig.add_subplot(1, 3, 1)
        cs = ax.contourf(u, v, pi.T, levels=20, cmap="viridis")
        fig.colorbar(cs, ax=ax)
        ax.set_xlabel("u")
        ax.set_ylabel("v")
        ax.set_title(r"$\pi^*(u,v)$")
        ax = fig.add_subplot(1, 3, 2)
        j = len(v) // 2
        ax.plot(u, pi[:, j], label=rf"$v={v[j]:.3g}$")
        ax.plot(u, ref[:, j], "g--", label=r"$\gamma=0$")
        ax.set_xlabel("u")
        ax.legend()
        ax = fig.add_subplot(1, 3, 3)
        i = len(u) // 2
        ax.plot(v, pi[i, :], label=rf"$u={u[i]:.3g}$")
        ax.set_xlabel("v")
        ax.legend()
        return _save(fig, path)


def plot_convergence(rows, path):
    rows = [r for r in rows if r["n"] > 0]
    n = [r["n"] for r in rows]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.6))
        for key in ("x1", "x2", "y"):
            axes[0].plot(n, [r[key] for r in rows], "o-", ms=3, label=key)
        axes[0].set_xscale("log")
        axes[0].set_xlabel("n")
        axes[0].legend()
        axes[1].plot(n, [r["pi1_mean_type"] for r in rows], "o-", ms=3, label="population 1")
        axes[1].plot(n, [r["pi2_mean_type"] for r in rows], "o-", ms=3, label="population 2")
        axes[1].set_xscale("log")
        axes[1].set_xlabel("n")
        axes[1].set_ylabel(r"$\pi^*$ (mean type)")
        axes[1].legend()
        d = np.array([r["distance"] for r in rows])
        axes[2].loglog(n, np.where(d > 0, d, np.nan), "o-", ms=3)
        axes[2].set_xlabel("n")
        axes[2].set_ylabel("distance to MFE")
        return _save(fig, path)


def plot_trace(trace, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        it = [t[0] for t in trace]
        res = np.array([t[4] for t in trace])
        ax.semilogy(it, np.where(res > 0, res, np.nan), "o-", ms=3)
        ax.set_xlabel("iteration")
        ax.set_ylabel(r"$\|R(z)-z\|_2$")
        return _save(fig, path)


def plot_wealth(times, paths, terminal, path, title=None):
    """Sample intermediate paths (left) and the terminal-wealth histogram (right)."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(10, 3.8))
        for p in paths:
            axes[0].plot(times, p, lw=0.8, alpha=0.7)
        axes[0].set_xlabel("t")
        axes[0].set_ylabel("wealth")
        axes[1].hist(terminal, bins=60, density=True, alpha=0.8)
        axes[1].set_xlabel(r"$X_T$")
        if title:
            fig.suptitle(title)
        return _save(fig, path)
