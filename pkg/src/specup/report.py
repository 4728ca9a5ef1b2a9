"""Figure rendering for experiment results.

Each experiment kind gets one PNG next to its CSV: log-log error decay for
the synthetic sweep, singular-value decay against k for the graph study,
grouped error bars for the extension comparison, and timing curves for the
scaling ladder.
"""

from __future__ import annotations

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .labbench import (
    KIND_EXTENSION,
    KIND_GRAPH_SIGMA,
    KIND_SCALING,
    KIND_SYNTHETIC,
)

_RC = {
    "figure.figsize": (9.0, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
}


def _new_axes(ncols=1):
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, ncols, squeeze=False)
    return fig, axes[0]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _median_by(rows, variant, key, metric):
    per = {}
    for r in rows:
        if r.variant != variant:
            continue
        per.setdefault(r.params[key], []).append(getattr(r, metric))
    xs = sorted(per)
    return xs, [float(np.median(per[x])) for x in xs]


def render_synthetic(rows, path):
    fig, (ax_val, ax_vec) = _new_axes(2)
    for variant, label in (("first_mu0", "first order, mu=0"),
                           ("second_mu0", "second order, mu=0"),
                           ("first_star", "first order, mu=star"),
                           ("second_star", "second order, mu=star")):
        for ax, metric in ((ax_val, "eigenvalue_abs_err"),
                           (ax_vec, "eigenvector_angle_deg")):
            xs, ys = _median_by(rows, variant, "mu_hat", metric)
            ax.plot(np.log2(xs), np.log2(np.maximum(ys, 1e-300)), "o-",
                    label=label)
    ax_val.set_xlabel("log2 tail mean")
    ax_val.set_ylabel("log2 max eigenvalue error")
    ax_vec.set_xlabel("log2 tail mean")
    ax_vec.set_ylabel("log2 max eigenvector angle (deg)")
    ax_val.legend()
    return _save(fig, path)


def render_graph_sigma(rows, path):
    fig, (ax1, ax2) = _new_axes(2)
    ks, one_minus_s1 = [], []
    per_k = {}
    for r in rows:
        if r.variant != "singular_values":
            continue
        per_k.setdefault(r.params["k"], []).append(r.extras)
    ks = sorted(per_k)
    log_k = np.log2(ks)
    one_minus_s1 = [np.mean([1.0 - e["sigma1"] for e in per_k[k]]) for k in ks]
    ax1.plot(log_k, np.log2(one_minus_s1), "o-")
    ax1.set_xlabel("log2 k")
    ax1.set_ylabel("log2 (1 - sigma1)")
    for name in ("sigma2", "sigma3", "sigma4"):
        ys = [np.mean([e[name] for e in per_k[k]]) for k in ks]
        ax2.plot(log_k, np.log2(ys), "o-", label=name)
    ax2.set_xlabel("log2 k")
    ax2.set_ylabel("log2 sigma_i")
    ax2.legend()
    return _save(fig, path)


def render_extension(rows, path):
    fig, (ax_val, ax_vec) = _new_axes(2)
    variants = ("no_update", "first_mu0", "first_mu0_corrected",
                "second_star", "second_star_corrected")
    idx = np.arange(len(variants))
    for ax, metric, label in (
            (ax_val, "eigenvalue_abs_err", "median eigenvalue error"),
            (ax_vec, "eigenvector_angle_deg", "median max angle (deg)")):
        meds = []
        for v in variants:
            vals = [getattr(r, metric) for r in rows if r.variant == v]
            meds.append(float(np.median(vals)) if vals else np.nan)
        ax.bar(idx, meds)
        ax.set_xticks(idx)
        ax.set_xticklabels(variants, rotation=30, ha="right")
        ax.set_ylabel(label)
        ax.set_yscale("log")
    return _save(fig, path)


def render_scaling(rows, path):
    fig, (ax_n, ax_m) = _new_axes(2)
    for ax, sweep in ((ax_n, "n"), (ax_m, "m")):
        for variant in ("first_mu0", "second_star"):
            pts = sorted((r.params[sweep], r.wall_time) for r in rows
                         if r.params.get("sweep") == sweep and r.variant == variant
                         and r.wall_time is not None)
            if not pts:
                continue
            xs = np.log2([p[0] for p in pts])
            ys = np.log2([max(p[1], 1e-9) for p in pts])
            ax.plot(xs, ys, "o-", label=variant)
        ax.set_xlabel(f"log2 {sweep}")
        ax.set_ylabel("log2 wall time (s)")
        ax.legend()
    return _save(fig, path)


_RENDERERS = {
    KIND_SYNTHETIC: render_synthetic,
    KIND_GRAPH_SIGMA: render_graph_sigma,
    KIND_EXTENSION: render_extension,
    KIND_SCALING: render_scaling,
}


def render(kind, rows, path):
    """Render the figure for an experiment kind; returns the written path."""
    return _RENDERERS[kind](rows, path)
