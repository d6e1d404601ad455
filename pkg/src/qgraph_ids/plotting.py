"""Optional figures for CLI runs (matplotlib, Agg backend).

Each renderer takes the rows written to CSV and returns a figure; the CLI
saves it next to the data. Nothing in the numerical modules imports this.
"""

from __future__ import annotations

import io

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ImportError("figures need matplotlib; install the 'figures' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def png_bytes(fig) -> bytes:
    """Render to PNG without timestamps or version metadata."""
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, metadata={"Software": None})
    _pyplot().close(fig)
    return buf.getvalue()


def floquet_figure(rows):
    plt = _pyplot()
    a = np.asarray(rows, float)
    diag = a[np.isclose(a[:, 0], a[:, 1])]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for j, name in ((3, "mu_-"), (4, "mu_+"), (2, "mu_1")):
        ax.plot(diag[:, 0], diag[:, j], label=name)
    ax.set_xlabel("theta_1 = theta_2")
    ax.set_ylabel("mu")
    ax.legend()
    fig.tight_layout()
    return fig


def ids_figure(rows, reference=None):
    plt = _pyplot()
    a = np.asarray(rows, float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.step(a[:, 0], a[:, 1], where="post", label="N(lambda)")
    if reference is not None:
        ax.plot(a[:, 0], reference, "--", label="sqrt(lambda)/pi")
    ax.set_xlabel("lambda")
    ax.legend()
    fig.tight_layout()
    return fig


def exhaustion_figure(energies, curves, sizes):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for n, c in zip(sizes, curves):
        ax.plot(energies, c, "o-", ms=3, label=f"n={n}")
    ax.set_xlabel("lambda")
    ax.set_ylabel("N^n(lambda)")
    ax.legend()
    fig.tight_layout()
    return fig


def comb_jump_figure(rows, target):
    plt = _pyplot()
    a = np.asarray(rows, float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.fill_between(a[:, 0], a[:, 4], a[:, 5], alpha=0.3, label="sandwich")
    ax.axhline(target, color="k", lw=0.8)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.legend()
    fig.tight_layout()
    return fig


def wegner_figure(rows_by_model):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, rows in rows_by_model.items():
        a = np.asarray(rows, float)
        ax.errorbar(a[:, 1], a[:, 4], yerr=a[:, 3] / a[:, 1] / a[:, 5], fmt="o-", label=name)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("interval width")
    ax.set_ylabel("E tr P(I) / (|I| |E|)")
    ax.legend()
    fig.tight_layout()
    return fig


def jump_figure(eps, increments, stderr=None, label="increment"):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(eps, increments, yerr=stderr, fmt="o-", label=label)
    ax.set_xlabel("eps")
    ax.set_ylabel("N(lam+eps) - N(lam-eps)")
    ax.legend()
    fig.tight_layout()
    return fig
