"""Command-line interface.

Subcommands:
    simulate     scene -> measurement file (plus optional ground truth)
    reconstruct  measurement file + params -> image, trace, figure
    experiment   config -> full Monte-Carlo sweep with CSV/PGM/figures
    metrics      image pair -> one-row metric report

Every subcommand accepts `--config FILE` and repeated `--set key=value`
overrides using the config-file key names.  Exit codes: 0 success, 1
usage or configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import (ConfigError, ExperimentConfig, KNOWN_ALGORITHMS, build_config,
                     parse_values, serialize_config)
from .grid import ComplexImage, RealImage, make_phantom
from .io import emit_csv, emit_pgm, read_image, read_measurements, format_float, \
    write_image, write_measurements
from .metrics import compute_report
from .operator import SensingOperator, default_grid, estimate_lipschitz, make_mask, \
    simulate_measurements
from .seeds import mix_seed
from .experiment import run_experiment


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors must exit 1, not argparse's 2
        raise UsageError(message)


def _load_config(args) -> ExperimentConfig:
    values: dict[str, str] = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config!r}: {exc}") from exc
        values = parse_values(text)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        values[key.strip()] = value.strip()
    return build_config(values)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="configuration file (key = value lines)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a configuration key (repeatable)")


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    radar = config.radar()
    grid = config.build_grid()
    truth = make_phantom(grid, config.phantom, mix_seed(config.seed, "phantom"))
    mask = make_mask(radar.n_freq, radar.n_angle, config.ratios[0],
                     mix_seed(config.seed, "mask"))
    op = SensingOperator(radar, grid, mask, mode=config.operator_mode)
    meas = simulate_measurements(op, truth, config.snrs[0], mix_seed(config.seed, "noise"))
    write_measurements(meas, args.out)
    print(f"wrote {args.out}: {mask.n_kept}/{radar.n_cells} cells "
          f"(ratio {mask.ratio:.4f}), snr {config.snrs[0]:g} dB, "
          f"scene nonzero fraction {truth.nonzero_fraction:.4f}")
    if args.truth_image:
        write_image(truth, args.truth_image)
    if args.truth_pgm:
        emit_pgm(truth, args.truth_pgm, scale="linear")
    return 0


def _cmd_reconstruct(args) -> int:
    config = _load_config(args)
    meas = read_measurements(args.measurements)
    radar = meas.config
    grid = default_grid(radar, config.grid_nx, config.grid_ny,
                        config.grid_dx, config.grid_dy)
    op = SensingOperator(radar, grid, meas.mask, mode=config.operator_mode)

    algorithm = args.algorithm
    from .solvers import back_projection, fista_l1tv, mrf_fista
    trace = None
    support = None
    if algorithm == "bp":
        image = back_projection(op, meas)
    else:
        params = config.solver_params(algorithm, mix_seed(config.seed, algorithm))
        params.lipschitz = estimate_lipschitz(
            op, seed=mix_seed(config.seed, "lipschitz")).value
        if algorithm == "fista":
            image, trace = fista_l1tv(op, meas, params)
        else:
            image, trace, support = mrf_fista(op, meas, params)

    if args.out_image:
        write_image(image, args.out_image)
    if args.out_pgm:
        emit_pgm(image, args.out_pgm, scale=config.image_scale, db_floor=config.db_floor)
    if args.out_trace and trace is not None:
        emit_csv(trace, args.out_trace)
    if args.figure:
        from . import figures
        if trace is not None:
            figures.render_trace_figure({algorithm: trace}, args.figure)
        else:
            figures.render_panels(image, {}, args.figure, truth_label=algorithm)

    from .metrics import entropy
    parts = [f"algorithm={algorithm}", f"entropy={format_float(entropy(image))}"]
    if trace is not None:
        parts.append(f"iterations={trace.iterations}")
        parts.append(f"converged={trace.converged}")
    if support is not None:
        parts.append(f"support={support.n_active}")
    print(" ".join(parts))
    return 0


def _cmd_experiment(args) -> int:
    config = _load_config(args)
    if args.out_dir:
        from dataclasses import replace
        config = replace(config, output_dir=args.out_dir)
    results = run_experiment(config, progress=not args.quiet)
    n_err = sum(1 for r in results if r.status != "ok")
    print(f"wrote {Path(config.output_dir) / 'results.csv'} "
          f"({len(results)} rows, {n_err} errors)")
    return 0


def _cmd_metrics(args) -> int:
    reference = read_image(args.reference)
    if isinstance(reference, ComplexImage):
        reference = RealImage(reference.grid, abs(reference.values))
    estimate = read_image(args.estimate)
    report = compute_report(reference, estimate, bins=args.bins)
    lines = ["rmse,rmse_db,entropy_bits,bins",
             ",".join([format_float(report.rmse), format_float(report.rmse_db),
                       format_float(report.entropy_bits), str(report.bins)])]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_print_config(args) -> int:
    sys.stdout.write(serialize_config(_load_config(args)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mrfisar",
                     description="Clustered-sparse ISAR reconstruction toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a noisy measurement file")
    _add_common(p)
    p.add_argument("-o", "--out", required=True, help="output measurement file")
    p.add_argument("--truth-image", help="also write the ground-truth image (binary)")
    p.add_argument("--truth-pgm", help="also write the ground-truth image (PGM)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct an image from measurements")
    _add_common(p)
    p.add_argument("measurements", help="measurement file from `simulate`")
    p.add_argument("-a", "--algorithm", choices=KNOWN_ALGORITHMS, default="mrf-fista")
    p.add_argument("--out-image", help="output image file (binary)")
    p.add_argument("--out-pgm", help="output image render (PGM)")
    p.add_argument("--out-trace", help="output convergence trace (CSV)")
    p.add_argument("--figure", help="output convergence/panel figure (PNG)")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("experiment", help="run the full Monte-Carlo sweep")
    _add_common(p)
    p.add_argument("--out-dir", help="override output.dir")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress progress lines")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("metrics", help="compare an estimate against a reference image")
    p.add_argument("--reference", required=True, help="ground-truth image file")
    p.add_argument("--estimate", required=True, help="reconstruction image file")
    p.add_argument("--bins", type=int, default=256, help="entropy histogram bins")
    p.add_argument("--out", help="write the CSV row here instead of stdout")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("print-config", help="print the fully resolved configuration")
    _add_common(p)
    p.set_defaults(func=_cmd_print_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
