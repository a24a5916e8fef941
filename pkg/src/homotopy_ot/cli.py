"""Command-line interface: ``homotopy-ot gen|solve|study|bench``.

Exit codes: 0 success, 2 usage error, 3 file read/write or format error,
4 source/target clouds do not match, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import statistics
import sys
import time

import numpy as np

from ._checks import DimensionError
from .assignment import cost, cost_matrix, exact_assign
from .data import (
    FLOAT_FORMAT,
    CloudFormatError,
    InstanceSpec,
    generate,
    load_cloud,
    save_cloud,
    save_report,
    save_trace,
)
from .homotopy import (
    DEFAULT_STEPS,
    HomotopyConfig,
    is_power_of_two,
    parse_svd_mode,
    relative_close,
    solve,
)
from .linalg import ConvergenceError

EXIT_USAGE = 2
EXIT_FILE = 3
EXIT_MISMATCH = 4
EXIT_NUMERIC = 5
ORACLE_REL_TOL = 1e-9

class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _int_list(text: str) -> list[int]:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("list must not be empty")
    return [_positive_int(t.strip()) for t in items]


def _svd_mode(text: str):
    try:
        return parse_svd_mode(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fmt(value: float) -> str:
    return format(value, FLOAT_FORMAT)


def _load_pair(source, target):
    try:
        x = load_cloud(source)
        y = load_cloud(target)
    except (OSError, CloudFormatError) as exc:
        raise CliError(str(exc), EXIT_FILE) from exc
    if x.shape != y.shape:
        raise CliError(
            f"source has d={x.shape[0]}, n={x.shape[1]} but target has d={y.shape[0]}, n={y.shape[1]}",
            EXIT_MISMATCH,
        )
    return x, y


def _check_steps(h: int) -> None:
    if not is_power_of_two(h):
        print(f"warning: steps={h} is not a power of 2", file=sys.stderr)


def _oracle_kappa(x, y) -> float:
    return cost(x, y, exact_assign(cost_matrix(x, y)))


def cmd_gen(args) -> int:
    try:
        spec = InstanceSpec(args.family, args.n, args.d, args.seed,
                            noise=args.noise, angle=args.angle)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    x, y = generate(spec)
    try:
        save_cloud(x, args.out_x)
        save_cloud(y, args.out_y)
    except OSError as exc:
        raise CliError(str(exc), EXIT_FILE) from exc
    print(f"family={spec.family} n={spec.n} d={spec.d} seed={spec.seed}")
    return 0


def cmd_solve(args) -> int:
    x, y = _load_pair(args.source, args.target)
    _check_steps(args.steps)
    config = HomotopyConfig(steps=args.steps, f_strategy=args.solver, svd_mode=args.svd,
                            greedy_init=not args.no_greedy)
    report = solve(x, y, config)

    if args.compare_oracle:
        start = time.perf_counter()
        oracle = _oracle_kappa(x, y)
        report.timings["oracle"] = time.perf_counter() - start
        scale = math.sqrt(float(np.sum(x**2) + np.sum(y**2)))
        agree = relative_close(report.kappa, oracle, ORACLE_REL_TOL, ORACLE_REL_TOL * scale)
        report.extras.update(oracle_kappa=oracle, oracle_agrees=agree)

    try:
        if args.out_report:
            save_report(report, args.out_report)
        if args.out_trace:
            save_trace(report.trace, args.out_trace)
    except OSError as exc:
        raise CliError(str(exc), EXIT_FILE) from exc

    print(f"lower_bound {_fmt(report.lower_bound)}")
    print(f"kappa {_fmt(report.kappa)}")
    if args.compare_oracle:
        print(f"oracle_kappa {_fmt(report.extras['oracle_kappa'])}")
        print(f"oracle_agrees {str(report.extras['oracle_agrees']).lower()}")
    for w in report.warnings:
        print(f"warning {w}")
    for phase, seconds in report.timings.items():
        print(f"time_{phase} {seconds:.6f}")
    return 0


def cmd_study(args) -> int:
    x, y = _load_pair(args.source, args.target)
    for h in args.steps_list:
        _check_steps(h)
    results = []
    for h in args.steps_list:
        cfg = HomotopyConfig(steps=h, f_strategy=args.solver, svd_mode=args.svd,
                             greedy_init=not args.no_greedy)
        results.append((h, solve(x, y, cfg).trace))
    try:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["h", "path_position", "kappa"])
            for h, trace in results:
                for pos, kappa in trace.plot_points():
                    writer.writerow([h, _fmt(pos), _fmt(kappa)])
    except OSError as exc:
        raise CliError(str(exc), EXIT_FILE) from exc
    for h, trace in results:
        print(f"h={h} max_jump {_fmt(trace.max_jump())} kappa {_fmt(trace.records[-1].kappa_after)}")
    return 0


def scaling_exponent(ns, times) -> float:
    """Slope of log(time) against log(n)."""
    if len(ns) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(ns), np.log(np.maximum(times, 1e-9)), 1)
    return float(slope)


def cmd_bench(args) -> int:
    _check_steps(args.steps)
    rows = []
    for n in args.n_list:
        try:
            spec = InstanceSpec(args.family, n, args.d, args.seed)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_USAGE) from exc
        x, y = generate(spec)
        config = HomotopyConfig(steps=args.steps, f_strategy=args.solver, svd_mode=args.svd)
        t_hom, t_exact = [], []
        for _ in range(args.repeats):
            start = time.perf_counter()
            kappa_h = solve(x, y, config).kappa
            t_hom.append(time.perf_counter() - start)
            start = time.perf_counter()
            kappa_e = _oracle_kappa(x, y)
            t_exact.append(time.perf_counter() - start)
        scale = math.sqrt(float(np.sum(x**2) + np.sum(y**2)))
        match = relative_close(kappa_h, kappa_e, ORACLE_REL_TOL, ORACLE_REL_TOL * scale)
        rows.append((n, statistics.median(t_hom), statistics.median(t_exact), kappa_h, kappa_e, match))

    try:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "t_homotopy", "t_exact", "kappa_homotopy", "kappa_exact", "match"])
            for n, th, te, kh, ke, match in rows:
                writer.writerow([n, f"{th:.6f}", f"{te:.6f}", _fmt(kh), _fmt(ke), str(match).lower()])
    except OSError as exc:
        raise CliError(str(exc), EXIT_FILE) from exc

    print("n t_homotopy t_exact kappa_homotopy kappa_exact match")
    for n, th, te, kh, ke, match in rows:
        print(f"{n} {th:.6f} {te:.6f} {_fmt(kh)} {_fmt(ke)} {str(match).lower()}")
    ns = [r[0] for r in rows]
    print(f"exponent_homotopy {scaling_exponent(ns, [r[1] for r in rows]):.3f}")
    print(f"exponent_exact {scaling_exponent(ns, [r[2] for r in rows]):.3f}")
    return 0


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=("local", "exact"), default="local")
    p.add_argument("--svd", type=_svd_mode, default="full", metavar="{full|randomized:K:SEED}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homotopy-ot",
        description="Homotopy solver for assignment-form optimal transport.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a source/target instance")
    gen.add_argument("--family", default="gaussian-toy",
                     choices=("gaussian-toy", "uniform-random", "rotated-copy"))
    gen.add_argument("--n", type=_positive_int, required=True)
    gen.add_argument("--d", type=_positive_int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noise", type=float, default=0.0)
    gen.add_argument("--angle", type=float, default=None)
    gen.add_argument("--out-x", required=True)
    gen.add_argument("--out-y", required=True)
    gen.set_defaults(func=cmd_gen)

    sol = sub.add_parser("solve", help="run the homotopy solver")
    sol.add_argument("--source", required=True)
    sol.add_argument("--target", required=True)
    sol.add_argument("--steps", type=_positive_int, default=DEFAULT_STEPS)
    _add_solver_flags(sol)
    sol.add_argument("--no-greedy", action="store_true", help="skip the greedy pre-alignment")
    sol.add_argument("--out-report")
    sol.add_argument("--out-trace")
    sol.add_argument("--compare-oracle", action="store_true")
    sol.set_defaults(func=cmd_solve)

    study = sub.add_parser("study", help="compare step counts on one instance")
    study.add_argument("--source", required=True)
    study.add_argument("--target", required=True)
    study.add_argument("--steps-list", type=_int_list, default=[2, 4, 8])
    _add_solver_flags(study)
    study.add_argument("--no-greedy", action="store_true")
    study.add_argument("--out", required=True)
    study.set_defaults(func=cmd_study)

    bench = sub.add_parser("bench", help="time homotopy against the direct exact solve")
    bench.add_argument("--n-list", type=_int_list, required=True)
    bench.add_argument("--d", type=_positive_int, default=50)
    bench.add_argument("--family", default="uniform-random",
                       choices=("gaussian-toy", "uniform-random", "rotated-copy"))
    bench.add_argument("--steps", type=_positive_int, default=DEFAULT_STEPS)
    _add_solver_flags(bench)
    bench.add_argument("--repeats", type=_positive_int, default=1)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", required=True)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (ConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
