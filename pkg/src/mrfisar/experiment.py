"""Experiment orchestration: paired Monte-Carlo sweeps over sampling ratio
and SNR.

Every (ratio, snr, trial) cell derives its own seed from the master seed
(see seeds.mix_seed), generates one mask and one noise realization, and
runs every requested algorithm on those same measurements, so that
per-trial metric differences between algorithms are paired.  Output files
are a pure function of (config, master seed).
"""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .grid import ComplexImage, RealImage, make_phantom
from .io import emit_csv, emit_pgm, write_image
from .metrics import MetricReport, compute_report
from .mrf import SupportMask
from .operator import SensingOperator, estimate_lipschitz, make_mask, simulate_measurements
from .seeds import mix_seed
from .solvers import SolveTrace, back_projection, fista_l1tv, mrf_fista

__all__ = ["TrialResult", "run_experiment", "trial_seed", "cell_tag"]


@dataclass
class TrialResult:
    """One (algorithm, ratio, snr, trial) outcome.

    wall_seconds is kept for in-process consumers only; it never reaches
    the CSV outputs (those must be reproducible byte-for-byte).
    """

    algorithm: str
    ratio: float
    snr_db: float
    trial: int
    seed: int
    status: str
    iterations: int
    report: MetricReport | None
    support_size: int | None
    wall_seconds: float

    def csv_row(self) -> dict:
        row = {
            "algorithm": self.algorithm,
            "ratio": self.ratio,
            "snr_db": self.snr_db,
            "trial": self.trial,
            "seed": self.seed,
            "status": self.status,
            "iterations": self.iterations,
            "support_size": self.support_size,
        }
        if self.report is not None:
            row.update(rmse=self.report.rmse, rmse_db=self.report.rmse_db,
                       entropy_bits=self.report.entropy_bits)
        return row


def trial_seed(master: int, ratio_index: int, snr_index: int, trial_index: int) -> int:
    """Documented child-seed rule: a 64-bit hash of master and the cell indices."""
    return mix_seed(master, "trial", ratio_index, snr_index, trial_index)


def cell_tag(ratio: float, snr_db: float, trial: int | None = None) -> str:
    tag = f"r{ratio:g}_snr{snr_db:g}"
    return tag if trial is None else f"{tag}_t{trial}"


def _run_algorithm(algorithm: str, op: SensingOperator, meas, lipschitz: float,
                   config: ExperimentConfig, seed: int):
    """Returns (image, trace | None, support | None)."""
    if algorithm == "bp":
        return back_projection(op, meas), None, None
    params = config.solver_params(algorithm, seed)
    params.lipschitz = lipschitz
    if algorithm == "fista":
        image, trace = fista_l1tv(op, meas, params)
        return image, trace, None
    image, trace, support = mrf_fista(op, meas, params)
    return image, trace, support


def _run_cell(config: ExperimentConfig, truth: RealImage, ri: int, si: int, ti: int,
              outdir: str):
    """Run all algorithms for one (ratio, snr, trial) cell."""
    import time

    ratio = config.ratios[ri]
    snr = config.snrs[si]
    seed = trial_seed(config.seed, ri, si, ti)
    radar = config.radar()
    grid = truth.grid
    mask = make_mask(radar.n_freq, radar.n_angle, ratio, mix_seed(seed, "mask"))
    op = SensingOperator(radar, grid, mask, mode=config.operator_mode)
    meas = simulate_measurements(op, truth, snr, mix_seed(seed, "noise"))
    lipschitz = estimate_lipschitz(op, seed=mix_seed(seed, "lipschitz")).value

    out = Path(outdir)
    results: list[TrialResult] = []
    panel_images: dict[str, np.ndarray] = {}
    for algorithm in config.algorithms:
        tag = cell_tag(ratio, snr, ti)
        t0 = time.perf_counter()
        try:
            image, trace, support = _run_algorithm(
                algorithm, op, meas, lipschitz, config, mix_seed(seed, algorithm))
            wall = time.perf_counter() - t0
            report = compute_report(truth, image)
            emit_pgm(image, out / f"recon_{algorithm}_{tag}.pgm",
                     scale=config.image_scale, db_floor=config.db_floor)
            if trace is not None:
                emit_csv(trace, out / f"trace_{algorithm}_{tag}.csv")
            results.append(TrialResult(
                algorithm, ratio, snr, ti, seed, "ok",
                trace.iterations if trace else 0, report,
                support.n_active if support is not None else None, wall))
            if ti == 0:
                panel_images[algorithm] = np.abs(image.values)
        except Exception as exc:  # record, keep the sweep going
            wall = time.perf_counter() - t0
            results.append(TrialResult(
                algorithm, ratio, snr, ti, seed,
                f"error: {type(exc).__name__}: {exc}", 0, None, None, wall))
    return results, (ri, si), panel_images


def run_experiment(config: ExperimentConfig, progress: bool = False) -> list[TrialResult]:
    """Run the full sweep; writes images, traces, results CSV and (when
    enabled) summary figures under config.output_dir."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    grid = config.build_grid()
    truth = make_phantom(grid, config.phantom, mix_seed(config.seed, "phantom"))
    write_image(truth, out / "truth.img")
    emit_pgm(truth, out / "truth.pgm", scale="linear")

    cells = [(ri, si, ti)
             for ri in range(len(config.ratios))
             for si in range(len(config.snrs))
             for ti in range(config.trials)]
    results: list[TrialResult] = []
    panels: dict[tuple[int, int], dict[str, np.ndarray]] = {}

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_cell, config, truth, ri, si, ti, str(out))
                       for ri, si, ti in cells]
            for fut in futures:
                rows, key, imgs = fut.result()
                results.extend(rows)
                if imgs:
                    panels[key] = imgs
    else:
        for ri, si, ti in cells:
            rows, key, imgs = _run_cell(config, truth, ri, si, ti, str(out))
            results.extend(rows)
            if imgs:
                panels[key] = imgs
            if progress:
                for r in rows:
                    print(f"  {r.algorithm:10s} ratio={r.ratio:g} snr={r.snr_db:g} "
                          f"trial={r.trial} {r.status} iters={r.iterations}",
                          file=sys.stderr, flush=True)

    emit_csv(results, out / "results.csv")

    if config.figures:
        from . import figures
        figures.render_sweep_figures(results, out)
        for (ri, si), imgs in sorted(panels.items()):
            figures.render_panels(
                truth, imgs, out / f"panels_{cell_tag(config.ratios[ri], config.snrs[si])}.png")
    return results
