"""Figure rendering for simulation and echo reports.

Renders to files only (Agg backend), one PNG per run, next to the CSV.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bounds import BoundReport
from .dynamics import TimeGrid

_COLORS = {
    "general": "tab:blue",
    "adiabatic": "tab:green",
    "gap": "tab:olive",
    "generator": "tab:purple",
    "pfeifer": "tab:orange",
    "loschmidt": "tab:red",
}


def render_simulation(path: str, grid: TimeGrid, fexact: np.ndarray,
                      reports: list[BoundReport], title: str = "") -> None:
    fig, (ax_f, ax_i) = plt.subplots(2, 1, sharex=True, figsize=(7.2, 6.4),
                                     gridspec_kw={"height_ratios": [2, 1]})
    t = grid.nodes
    ax_f.plot(t, fexact, color="k", lw=1.6, label="exact fidelity")
    for rep in reports:
        c = _COLORS.get(rep.kind, "gray")
        ax_f.plot(t, rep.lower, color=c, ls="--", lw=1.2, label=f"{rep.kind} lower")
        if rep.upper is not None:
            ax_f.plot(t, rep.upper, color=c, ls=":", lw=1.2, label=f"{rep.kind} upper")
        if rep.t_plus is not None:
            ax_f.axvline(rep.t_plus, color=c, lw=0.6, alpha=0.5)
        ax_i.plot(t, rep.integrand, color=c, lw=1.2, label=rep.kind)
    ax_f.set_ylabel("fidelity")
    ax_f.set_ylim(-0.02, 1.02)
    ax_f.legend(loc="best", fontsize=8)
    ax_i.set_ylabel("integrand")
    ax_i.set_xlabel("t")
    ax_i.legend(loc="best", fontsize=8)
    if title:
        ax_f.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_echo(path: str, grid: TimeGrid, echo: np.ndarray,
                rep: BoundReport, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(7.2, 4.4))
    t = grid.nodes
    ax.plot(t, echo, color="k", lw=1.6, label="exact echo")
    ax.plot(t, rep.lower, color=_COLORS["loschmidt"], ls="--", lw=1.2,
            label="echo lower bound")
    if rep.t_plus is not None:
        ax.axvline(rep.t_plus, color=_COLORS["loschmidt"], lw=0.6, alpha=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("echo")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
