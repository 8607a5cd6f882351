"""Static SVG figures with deterministic output.

Plots never gate numeric results: callers catch failures and carry on.
"""

from __future__ import annotations

import numpy as np

_STYLE = {
    "svg.hashsalt": "cavityband",
    "svg.fonttype": "none",
    "font.size": 9,
    "figure.figsize": (6.0, 4.0),
    "axes.grid": False,
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return matplotlib, plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def _figure():
    matplotlib, plt = _pyplot()
    with matplotlib.rc_context(_STYLE):
        fig, ax = plt.subplots()
    return matplotlib, plt, fig, ax


def bands_svg(path, k, energies, bands, bare=None, title=""):
    """Dressed bands as lines; optional bare parabolas ``{mu: (k, E)}``
    as crosses (odd mu, upper state) and diamonds (even mu, lower state)."""
    matplotlib, plt = _pyplot()
    with matplotlib.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for j, nu in enumerate(bands):
            ax.plot(k, energies[:, j], color="black", lw=1.0)
        if bare:
            lo = float(np.min(energies))
            hi = float(np.max(energies))
            pad = 0.1 * (hi - lo or 1.0)
            for mu, (kb, eb) in sorted(bare.items()):
                keep = (eb >= lo - pad) & (eb <= hi + pad)
                ax.plot(kb[keep], eb[keep], ls="none", marker="x" if mu % 2 else "D", ms=2.5, color="0.45")
            ax.set_ylim(lo - pad, hi + pad)
        ax.set_xlabel("k / q")
        ax.set_ylabel("E")
        ax.set_title(title)
        _save(fig, path)
        plt.close(fig)


def heatmap_svg(path, xs, ys, values, xlabel, ylabel, title="", panels=None):
    """One or more heatmaps over a (g0, delta) style grid.

    ``values`` is ``len(ys) x len(xs)``; ``panels`` optionally lists
    ``(title, values)`` pairs drawn side by side instead.
    """
    matplotlib, plt = _pyplot()
    panels = panels or [(title, values)]
    with matplotlib.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.6), squeeze=False)
        for ax, (ttl, vals) in zip(axes[0], panels):
            vals = np.asarray(vals, dtype=float)
            mesh = ax.pcolormesh(xs, ys, np.ma.masked_invalid(vals), shading="nearest", cmap="viridis")
            fig.colorbar(mesh, ax=ax)
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            ax.set_title(ttl)
        fig.tight_layout()
        _save(fig, path)
        plt.close(fig)


def spacetime_svg(path, snapshots, x_lines=()):
    """Contours of |psi_-|^2 and |psi_+|^2 over (x, t) from stored snapshots."""
    matplotlib, plt = _pyplot()
    t = np.array([s[0] for s in snapshots])
    x = snapshots[0][1]
    rho_m = np.array([s[3] for s in snapshots])
    rho_p = np.array([s[2] for s in snapshots])
    with matplotlib.rc_context(_STYLE):
        fig, axes = plt.subplots(2, 1, figsize=(6.0, 6.0), sharex=True)
        for ax, rho, label in ((axes[0], rho_m, "|psi_-|^2"), (axes[1], rho_p, "|psi_+|^2")):
            top = rho.max() or 1.0
            mesh = ax.pcolormesh(x, t, rho / top, shading="nearest", cmap="magma_r", vmin=0.0, vmax=1.0)
            fig.colorbar(mesh, ax=ax)
            for xl in x_lines:
                ax.axvline(xl, color="0.5", ls="--", lw=0.8)
            ax.set_ylabel("t")
            ax.set_title(label)
        axes[1].set_xlabel("x")
        fig.tight_layout()
        _save(fig, path)
        plt.close(fig)


def series_svg(path, t, curves, ylabel=""):
    """Line plot of ``{label: values}`` against ``t``."""
    matplotlib, plt = _pyplot()
    with matplotlib.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, y in curves.items():
            ax.plot(t, y, lw=1.0, label=label)
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        if len(curves) > 1:
            ax.legend(frameon=False)
        _save(fig, path)
        plt.close(fig)


def momentum_svg(path, k, curves, xlim=None):
    matplotlib, plt = _pyplot()
    with matplotlib.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, y in curves.items():
            ax.plot(k, y, lw=1.0, label=label)
        if xlim:
            ax.set_xlim(*xlim)
        ax.set_xlabel("k / q")
        ax.set_ylabel("density")
        ax.legend(frameon=False)
        _save(fig, path)
        plt.close(fig)
