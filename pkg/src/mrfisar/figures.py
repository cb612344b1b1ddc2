"""Matplotlib renders of experiment outputs: metric curves versus sampling
ratio, reconstruction panel grids, and convergence traces.

All figures are written to files (Agg backend); PNG metadata is stripped
so identical runs produce identical bytes.
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_sweep_figures", "render_panels", "render_trace_figure"]

_SAVE_KW = dict(dpi=120, metadata={"Software": None})

_STYLE = {
    "mrf-fista": dict(color="tab:red", marker="o"),
    "fista": dict(color="tab:blue", marker="s"),
    "bp": dict(color="tab:gray", marker="^"),
}


def _style(algorithm: str) -> dict:
    return _STYLE.get(algorithm, dict(marker="x"))


def _mean_by_ratio(results, algorithm: str, snr: float, attr: str):
    groups: dict[float, list[float]] = defaultdict(list)
    for r in results:
        if r.algorithm != algorithm or r.snr_db != snr or r.report is None:
            continue
        value = getattr(r.report, attr)
        if math.isfinite(value):
            groups[r.ratio].append(value)
    ratios = sorted(groups)
    return ratios, [float(np.mean(groups[x])) for x in ratios]


def render_sweep_figures(results, outdir) -> list[Path]:
    """Mean RMSE (dB) and entropy versus sampling ratio, one pair of files
    per SNR value present in the results."""
    outdir = Path(outdir)
    written: list[Path] = []
    algorithms = sorted({r.algorithm for r in results})
    snrs = sorted({r.snr_db for r in results})
    for snr in snrs:
        for attr, label, stem in (("rmse_db", "RMSE (dB)", "rmse_db_vs_ratio"),
                                  ("entropy_bits", "entropy (bits)", "entropy_vs_ratio")):
            fig, ax = plt.subplots(figsize=(5.0, 3.6))
            plotted = False
            for algorithm in algorithms:
                ratios, means = _mean_by_ratio(results, algorithm, snr, attr)
                if ratios:
                    ax.plot(ratios, means, label=algorithm, **_style(algorithm))
                    plotted = True
            if not plotted:
                plt.close(fig)
                continue
            ax.set_xlabel("sampling ratio")
            ax.set_ylabel(label)
            ax.set_title(f"SNR = {snr:g} dB")
            ax.grid(True, alpha=0.3)
            ax.legend()
            fig.tight_layout()
            path = outdir / f"{stem}_snr{snr:g}.png"
            fig.savefig(path, **_SAVE_KW)
            plt.close(fig)
            written.append(path)
    return written


def render_panels(truth, images: dict[str, np.ndarray], path,
                  truth_label: str = "truth") -> Path:
    """Side-by-side magnitude panels: ground truth plus one reconstruction
    per algorithm."""
    names = [truth_label] + sorted(images)
    n = len(names)
    fig, axes = plt.subplots(1, n, figsize=(2.6 * n, 2.9))
    if n == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        mag = np.abs(truth.values) if name == truth_label else images[name]
        ax.imshow(mag, cmap="gray", origin="lower", interpolation="nearest")
        ax.set_title(name, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def render_trace_figure(traces: dict[str, object], path) -> Path:
    """Objective value versus iteration for one or more solver runs."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for name, trace in sorted(traces.items()):
        ax.semilogy(np.arange(1, trace.iterations + 1), trace.objective,
                    label=name, **{k: v for k, v in _style(name).items() if k == "color"})
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path
