"""PNG figures written next to the CSV output (matplotlib, Agg backend)."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.colors import LogNorm  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_timeseries",
    "plot_heatmap",
    "plot_pullback",
    "plot_decay",
    "plot_forward",
    "plot_decomposition",
    "plot_dimension",
    "plot_oracle",
]


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def _positive(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 0, y, np.nan)


def plot_timeseries(rows, path: str) -> str:
    t = np.array([r.t for r in rows])
    fig, (a, b) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for name in ("E_Xt", "E_mech", "Lambda1", "vL2sq"):
        a.semilogy(t, _positive([getattr(r, name) for r in rows]), label=name)
    a.set_ylabel("energy")
    a.legend(fontsize=8)
    b.semilogy(t, _positive([r.identity_residual for r in rows]), color="k", lw=0.8)
    b.set_ylabel("identity residual")
    b.set_xlabel("t")
    return _save(fig, path)


def plot_heatmap(frames, path: str) -> str:
    """Energy density against position and time."""
    if not frames:
        return ""
    x = frames[0].x
    t = np.array([f.t for f in frames])
    D = np.array([f.density for f in frames])
    top = float(np.nanmax(D)) if D.size else 1.0
    floor = max(top * 1e-4, float(np.min(D[D > 0])) if (D > 0).any() else 1e-300)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    mesh = ax.pcolormesh(x, t, np.clip(D, floor, None), shading="auto", cmap="inferno",
                         norm=LogNorm(vmin=floor, vmax=max(top, floor * 10)))
    fig.colorbar(mesh, ax=ax, label="energy density")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    return _save(fig, path)


def plot_pullback(rows, path: str) -> str:
    el = np.array([r.t - r.s for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(el, _positive([r.E_end for r in rows]), "o-", label="E_Xt(end)")
    ax.semilogy(el, _positive([r.dist_prev for r in rows]), "s--", label="distance to previous s")
    if np.isfinite([r.bound_rhs for r in rows]).any():
        ax.semilogy(el, _positive([r.bound_rhs for r in rows]), ":", label="dissipative bound")
    ax.set_xlabel("t - s")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_decay(elapsed, energies, rate, path: str) -> str:
    el = np.asarray(elapsed, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(el, _positive(energies), "o", label="E_Xt(end)")
    if rate is not None and len(el):
        i = int(np.argmin(el))
        ax.semilogy(el, energies[i] * np.exp(-rate * (el - el[i])), "-", label=f"fit, rate {rate:.4g}")
    ax.set_xlabel("t - s")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_forward(reports, path: str) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    for seed, rep in reports:
        line, = ax.semilogy(rep.times, _positive(rep.vL2sq), lw=0.8, label=f"|v|^2 seed {seed}")
        ax.semilogy(rep.times, _positive(rep.bound), "--", lw=0.8, color=line.get_color())
    ax.set_xlabel("t")
    if len(reports) <= 5:
        ax.legend(fontsize=7)
    return _save(fig, path)


def plot_decomposition(reports, path: str) -> str:
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 4))
    for rep in reports:
        a.semilogy(rep.times, _positive(rep.P_energy), lw=0.8)
        b.semilogy(rep.times, _positive(rep.N_ratio), lw=0.8)
    a.set_title("E_Xt(p)")
    b.set_title("|n|_Y^2 / (1 + e^(qHt))")
    for ax in (a, b):
        ax.set_xlabel("t")
    return _save(fig, path)


def plot_dimension(est, path: str) -> str:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(1.0 / est.eps, est.counts, "o-", ms=3)
    if est.window.any():
        ax.loglog(1.0 / est.eps[est.window], est.counts[est.window], "o", color="C3", label="fit window")
        ax.legend(fontsize=8)
    ax.set_xlabel("1 / eps")
    ax.set_ylabel("N_eps")
    ax.set_title(f"dimension ~ {est.dimension:.3f}")
    return _save(fig, path)


def plot_oracle(M, errors, path: str) -> str:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(M, errors, "o-", label="L2 difference")
    M = np.asarray(M, dtype=float)
    ax.loglog(M, errors[0] * (M[0] / M) ** 2, "--", label="second order")
    ax.set_xlabel("M")
    ax.legend(fontsize=8)
    return _save(fig, path)
