"""Command-line entry point: ``qmagnus study | complexity | inspect``.

Exit codes: 0 success, 1 numerical failure, 2 a proven bound was violated,
3 invalid configuration or arguments.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from .complexity import complexity_table, format_table
from .config import load_config
from .discretization import PotentialSpec, SpatialGrid, build_hamiltonian, quantize_momentum_symbol, unit_stencil
from .errors import BoundViolation, ConfigError, DomainError, QMagnusError
from .linalg import max_abs, opnorm
from .report import to_csv, write_report
from .study import resolve_workers, run_study

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_BOUND = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _print_summary(report, out=None):
    out = sys.stderr if out is None else out
    for key, fit in report.fits.items():
        if fit is None:
            print(f"fit {key}: skipped", file=out)
        else:
            print(f"fit {key}: slope={fit.slope:.4f} ci95={fit.ci95:.3g} max_residual={fit.max_residual:.3g}", file=out)
    for key, ratio in report.uniformity_ratios.items():
        print(f"ratio {key}: {ratio:.4f}", file=out)
    for flag in report.flags:
        print(f"flag: {flag}", file=out)


def _emit(report, cfg, output: Path | None, fmt: str):
    if output is None:
        sys.stdout.write(to_csv(report))
        return
    write_report(report, output, fmt)
    if cfg.json_mirror and fmt == "csv":
        write_report(report, output.with_suffix(".json"), "json")
    print(f"wrote {output}", file=sys.stderr)


def cmd_study(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    output = Path(args.output) if args.output else cfg.output_path
    fmt = args.format or cfg.output_format
    try:
        workers = resolve_workers(args.workers if args.workers is not None else cfg.workers)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            report = run_study(cfg.study, workers)
    except BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        if exc.report is not None:
            _emit(exc.report, cfg, output, fmt)
        return EXIT_BOUND
    except (QMagnusError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit(report, cfg, output, fmt)
    _print_summary(report)
    return EXIT_OK


def cmd_complexity(args) -> int:
    try:
        table = complexity_table(args.T, args.delta, args.N, args.cv, args.alpha, args.dh)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(format_table(table))
    return EXIT_OK


def _potential_from_args(args) -> PotentialSpec:
    if args.potential == "zero":
        return PotentialSpec.zero()
    if args.potential == "constant":
        return PotentialSpec.const(args.constant)
    if args.potential == "cos_mode":
        return PotentialSpec.cos_mode(args.k, args.amplitude)
    if args.potential == "exp_sin":
        return PotentialSpec.exp_sin(args.amplitude)
    if args.potential_file is None:
        raise ConfigError("--potential tabulated needs --potential-file")
    return PotentialSpec.from_csv(args.potential_file)


def inspect_summary(grid: SpatialGrid, potential: PotentialSpec, t_samples=(0.0, 0.1, 0.5, 1.0)) -> dict:
    """Operator norms and identities the error theory relies on."""
    h = build_hamiltonian(grid, potential, materialize=False)
    out = {
        "N": grid.n,
        "d": grid.d,
        "interval": (grid.a, grid.b),
        "potential": potential.describe(),
        "norm_A": h.a_norm,
        "norm_B": h.b_norm,
        "spectrum_min": float(np.min(h.kinetic_spectrum)),
        "spectrum_max": float(np.max(h.kinetic_spectrum)),
        "norm_AB": None,
        "h_interaction_defect": None,
        "quantization_residual": None,
    }
    if grid.dense_ok:
        from .propagators import InteractionHamiltonianEvaluator

        ev = InteractionHamiltonianEvaluator(h, "dense")
        out["norm_AB"] = ev.commutator_ab_norm()
        if h.b_norm > 0:
            out["h_interaction_defect"] = max(abs(opnorm(ev.h_fourier(t)) - h.b_norm) / h.b_norm for t in t_samples)
        else:
            out["h_interaction_defect"] = 0.0
    if grid.d == 1 and grid.n >= 3:
        op = quantize_momentum_symbol(grid, lambda xi: 1.0 - np.cos(xi))
        out["quantization_residual"] = max_abs(op - unit_stencil(grid.n))
    return out


def cmd_inspect(args) -> int:
    try:
        grid = SpatialGrid(n=args.n, d=args.d, a=args.a, b=args.b)
        pot = _potential_from_args(args)
        info = inspect_summary(grid, pot)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QMagnusError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    labels = {
        "norm_A": "||A||",
        "norm_B": "||B||",
        "norm_AB": "||[A,B]||",
        "spectrum_min": "min spec(A)",
        "spectrum_max": "max spec(A)",
        "h_interaction_defect": "max_t | ||H_I(t)|| - ||B|| | / ||B||",
        "quantization_residual": "max|op_N(1-cos xi) - stencil/2|",
    }
    print(f"grid N={info['N']} d={info['d']} on ({grid.a:g}, {grid.b:g}), potential {info['potential']}")
    for key, lbl in labels.items():
        v = info[key]
        print(f"{lbl:<38} {'n/a' if v is None else format(v, '.10g')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qmagnus", description="Interaction-picture Magnus integrator studies.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("study", help="run a study from a config file")
    s.add_argument("config")
    s.add_argument("--output", help="override [output] path")
    s.add_argument("--format", choices=("csv", "json"))
    s.add_argument("--workers", type=int, help="worker processes (QMAGNUS_WORKERS overrides)")
    s.set_defaults(func=cmd_study)

    c = sub.add_parser("complexity", help="evaluate the algorithm's cost formulas")
    c.add_argument("--T", type=float, required=True)
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--cv", type=float, required=True, help="measured local error constant")
    c.add_argument("--alpha", type=float, required=True, help="block-encoding subnormalization ||B||")
    c.add_argument("--dh", type=float, default=None, help="sup ||H'|| (default N)")
    c.set_defaults(func=cmd_complexity)

    i = sub.add_parser("inspect", help="print operator norms for one grid and potential")
    i.add_argument("--n", type=int, required=True)
    i.add_argument("--d", type=int, default=1)
    i.add_argument("--a", type=float, default=0.0)
    i.add_argument("--b", type=float, default=1.0)
    i.add_argument(
        "--potential", choices=("zero", "constant", "cos_mode", "exp_sin", "tabulated"), default="cos_mode"
    )
    i.add_argument("--k", type=int, default=1)
    i.add_argument("--amplitude", type=float, default=1.0)
    i.add_argument("--constant", type=float, default=0.0)
    i.add_argument("--potential-file")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
