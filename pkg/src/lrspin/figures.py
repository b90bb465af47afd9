"""Figure rendering for verification reports.

Figures are a convenience view of the CSV data and are excluded from the
byte-identity guarantee; everything here draws through the Agg backend so
it works headless.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["render_figure"]

# floor for log-scale axes
_LOG_FLOOR = 1e-16


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _clip(values):
    return np.maximum(np.asarray(values, dtype=float), _LOG_FLOOR)


def _lightcone_figure(plt, spec):
    """Measured values per separation vs time, with dashed fitted envelopes."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ts = np.asarray(spec["t_grid"], dtype=float)
    series = spec["series"]
    envelopes = spec.get("envelope", {})
    cmap = plt.get_cmap("viridis")
    n = max(len(series), 1)
    for idx, (r_label, vals) in enumerate(series.items()):
        color = cmap(idx / n)
        ax.semilogy(ts, _clip(vals), "o-", color=color, ms=3,
                    label=f"r={r_label}")
        env = envelopes.get(r_label)
        if env is not None:
            ax.semilogy(ts, _clip(env), "--", color=color, lw=1)
    ax.set_xlabel("t")
    ax.set_ylabel(spec.get("ylabel", "value"))
    ax.set_title(spec.get("title", spec["name"]))
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    return fig


def _decay_figure(plt, spec):
    """Quantities vs separation on a log-log scale."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    rs = np.asarray(spec["r"], dtype=float)
    envelopes = spec.get("envelope", {})
    for label, vals in spec["series"].items():
        line, = ax.loglog(rs, _clip(vals), "o-", ms=4, label=label)
        env = envelopes.get(label)
        if env is not None:
            ax.loglog(rs, _clip(env), "--", lw=1, color=line.get_color())
    ax.set_xlabel("r")
    ax.set_ylabel(spec.get("ylabel", "value"))
    ax.set_title(spec.get("title", spec["name"]))
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render_figure(spec: dict, out_dir: str) -> str:
    """Render one figure spec to ``out_dir/<name>.png`` and return the path."""
    plt = _pyplot()
    kind = spec["kind"]
    if kind == "lightcone":
        fig = _lightcone_figure(plt, spec)
    elif kind == "decay":
        fig = _decay_figure(plt, spec)
    else:
        raise ValueError(f"unknown figure kind {kind!r}")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, spec["name"] + ".png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
