"""Log-log decay figures with theorem reference slopes, plus field snapshots."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import load_norm_series, load_table

__all__ = ["FigureSpec", "MissingSeriesError", "render_decay_figure",
           "render_profile_figure", "render_correction_figure"]

#: theorem blocks: one decay figure each
BLOCKS = {
    "perturbation-l2": [
        "Phi_L2", "Phi_x_L2", "Phi_xx_L2",
        "psi_L2", "psi_x_L2", "psi_xx_L2",
        "zeta_L2", "zeta_x_L2",
    ],
    "supnorm-gaps": ["rho_gap_sup", "m_gap_sup", "phi_gap_sup"],
}


class MissingSeriesError(ValueError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__("missing series: " + ", ".join(self.missing))


@dataclass
class FigureSpec:
    """One decay figure: series to draw, their reference slopes, outputs."""

    norms_csv: Path
    series: list[str]
    reference_slopes: dict[str, float]
    outputs: list[Path]
    caption: str = "{name}: measured decay with reference slope {slope:+.2f}"
    fit_windows: dict[str, tuple[float, float]] = field(default_factory=dict)


def _guide_line(times, values, slope, window):
    """Reference-slope line anchored at the last point inside the fit
    window, so the visual comparison is not biased by transients."""
    sel = (times >= window[0]) & (times <= window[1]) & (values > 0)
    if not np.any(sel):
        return None
    t_anchor = times[sel][-1]
    v_anchor = values[sel][-1]
    tt = np.geomspace(max(window[0], times[times > 0].min()), window[1], 64)
    return tt, v_anchor * ((1.0 + tt) / (1.0 + t_anchor)) ** slope


def render_decay_figure(spec: FigureSpec) -> dict[str, float]:
    """Render one log-log decay figure; returns the guide slopes drawn."""
    series = load_norm_series(spec.norms_csv)
    missing = [s for s in spec.series if s not in series]
    if missing:
        raise MissingSeriesError(missing)

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    drawn: dict[str, float] = {}
    any_fit = False
    for name in spec.series:
        t, v = series[name]
        pos = v > 0
        ax.loglog(1.0 + t[pos], v[pos], marker=".", ms=3, lw=1, label=name)
        slope = spec.reference_slopes.get(name)
        if slope is None or not np.isfinite(slope):
            continue
        window = spec.fit_windows.get(name, (t[pos].min(), t[pos].max()))
        guide = _guide_line(t, v, slope, window)
        if guide is not None:
            ax.loglog(1.0 + guide[0], guide[1], "k--", lw=0.8, alpha=0.7)
            drawn[name] = slope
            any_fit = True
    if not any_fit:
        ax.annotate("no fit", xy=(0.5, 0.5), xycoords="axes fraction",
                    ha="center", fontsize=14, color="crimson")
    ax.set_xlabel("1 + t")
    ax.set_ylabel("norm")
    ax.legend(fontsize=7, ncol=2)
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    for out in spec.outputs:
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=150)
    plt.close(fig)
    return drawn


def render_profile_figure(profile_csv: Path, outputs: list[Path]) -> None:
    table = load_table(profile_csv)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    if "xi" in table:
        ax.plot(table["xi"], table["rho_bar"], lw=1.2)
        ax.set_xlabel("xi")
    else:
        times = np.unique(table["t"])
        for t in times:
            sel = table["t"] == t
            ax.plot(table["x"][sel], table["rho_bar"][sel], lw=1.0, label=f"t = {t:g}")
        ax.set_xlabel("x")
        ax.legend(fontsize=8)
    ax.set_ylabel("rho_bar")
    ax.grid(alpha=0.25)
    fig.tight_layout()
    for out in outputs:
        fig.savefig(out, dpi=150)
    plt.close(fig)


def render_correction_figure(correction_csv: Path, outputs: list[Path]) -> None:
    table = load_table(correction_csv)
    t0 = table["t"].min()
    sel = table["t"] == t0
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 6.5), sharex=True)
    for ax, name in zip(axes, ("rho_hat", "m_hat", "phi_hat")):
        ax.plot(table["x"][sel], table[name][sel], lw=1.2)
        ax.set_ylabel(name)
        ax.grid(alpha=0.25)
    axes[-1].set_xlabel("x")
    axes[0].set_title(f"correction fields at t = {t0:g}")
    fig.tight_layout()
    for out in outputs:
        fig.savefig(out, dpi=150)
    plt.close(fig)
