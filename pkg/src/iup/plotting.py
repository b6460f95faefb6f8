"""Report figures rendered next to the delimited outputs.

Headless matplotlib only; every function writes a file and returns its path.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_orbit(points: np.ndarray, labels, d: int, path, title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(6, 6))
    if d == 1:
        ax.plot(points[:, 0], np.arange(len(points)), ",", ms=1)
        ax.set_xlabel("x1")
        ax.set_ylabel("t")
    else:
        uniq = sorted(set(labels))
        cmap = plt.get_cmap("tab10")
        for idx, lab in enumerate(uniq):
            mask = np.array([l == lab for l in labels])
            ax.plot(
                points[mask, 0], points[mask, 1], ".", ms=1.5,
                color=cmap(idx % 10), label=lab,
            )
        for v in (0.5,):
            ax.axvline(v, color="k", lw=0.4, alpha=0.5)
            ax.axhline(v, color="k", lw=0.4, alpha=0.5)
        if d == 2:
            xs = np.linspace(0, 1, 2)
            for c in (0.5, 1.5):
                ax.plot(xs, c - xs, "k-", lw=0.4, alpha=0.5)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        if len(uniq) <= 12:
            ax.legend(markerscale=8, fontsize=7, loc="upper right")
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_threshold_sweep(rows, bracket, path, title: str = "") -> str:
    """rows: (eps_float, min_margin_float, passed) triples."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    eps = [r[0] for r in rows]
    margins = [r[1] for r in rows]
    ok = [r[2] for r in rows]
    ax.axhline(0.0, color="k", lw=0.6)
    ax.plot(eps, margins, "-", color="0.6", lw=0.8)
    ax.plot([e for e, o in zip(eps, ok) if o], [m for m, o in zip(margins, ok) if o],
            "o", ms=4, color="tab:green", label="pass")
    ax.plot([e for e, o in zip(eps, ok) if not o], [m for m, o in zip(margins, ok) if not o],
            "o", ms=4, color="tab:red", label="fail")
    if bracket is not None:
        ax.axvspan(float(bracket[0]), float(bracket[1]), color="tab:blue", alpha=0.25,
                   label="threshold bracket")
    ax.set_xlabel("coupling eps")
    ax.set_ylabel("minimal margin")
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_cluster_trace(trace, plateau, path, title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ts = [t for t, _ in trace]
    cs = [c for _, c in trace]
    ax.step(ts, cs, where="post")
    ax.set_xscale("log")
    ax.set_yscale("log")
    if plateau and plateau[1] > 0:
        ax.axvspan(plateau[0], plateau[1], color="tab:orange", alpha=0.3, label="accepted plateau")
        ax.legend(fontsize=8)
    ax.set_xlabel("linkage threshold")
    ax.set_ylabel("cluster count")
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
