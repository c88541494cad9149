"""Command-line entry point: ``tibo bench | solve | gradcheck | interp-order``.

Exit codes: 0 success, 2 invalid input, 3 a scenario or solve crashed.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .checks import gradient_check, interpolation_order_table
from .core import BoundaryConditions, residual_max, solve
from .errors import ConfigError, TiboError
from .harness import (
    BENCH_OPTIONS,
    C_DEFAULT,
    BenchConfig,
    ExampleFamily,
    emit_report,
    initial_z,
    manufactured_base,
    parse_constraint,
    pinned_start,
    run_batch,
    summary_text,
    write_curves,
    xcos_base,
)
from .periodic_extension import make_grid

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_CRASH = 3

THETAS = {"pi2": 0.5 * math.pi, "3pi2": 1.5 * math.pi}

logger = logging.getLogger("tibo")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tibo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run the 25-scenario benchmark for one boundary type")
    b.add_argument("--case", required=True, choices=("neumann", "dirichlet", "mix"))
    b.add_argument("--theta", required=True, choices=tuple(THETAS))
    b.add_argument("--q", type=_positive_int, default=7)
    b.add_argument("--eval-q", type=_positive_int, default=10)
    b.add_argument("--constraint", default="none", help="none | dwindow | dwindow:C,R | lbound:L")
    b.add_argument("--out", type=Path, help="CSV report path")
    b.add_argument("--curves", type=Path, help="directory for per-scenario curve CSVs")
    b.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")

    s = sub.add_parser("solve", help="solve one problem described by a key = value config file")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--out", type=Path, help="write x, y, y' samples as CSV")

    g = sub.add_parser("gradcheck", help="finite-difference audit of the FFT gradient")
    g.add_argument("--m", type=int, choices=(8, 16), default=8)
    g.add_argument("--trials", type=_positive_int, default=20)
    g.add_argument("--seed", type=int, default=0)

    sub.add_parser("interp-order", help="empirical convergence orders of odd interpolation")
    return parser


def _cmd_bench(args) -> int:
    theta = THETAS[args.theta]
    # validate the constraint string before spending time on the batch
    parse_constraint(args.constraint, xcos_base(theta))
    make_grid(1.0, 3.0, None, args.q)
    config = BenchConfig(q=args.q, eval_q=args.eval_q, constraint=args.constraint)
    outcomes = run_batch(args.case, theta, config, jobs=args.jobs)
    reports = [o.report for o in outcomes]
    print(f"case={args.case} theta={args.theta} q={args.q} constraint={args.constraint}")
    print(summary_text(reports))
    if args.out:
        emit_report(reports, args.out)
        print(f"report written to {args.out}")
    if args.curves:
        write_curves(outcomes, args.curves)
        print(f"curves written to {args.curves}/")
    crashed = [r for r in reports if r.error]
    for r in crashed:
        print(f"scenario {r.scenario_id} crashed: {r.error}", file=sys.stderr)
    return EXIT_CRASH if crashed else EXIT_OK


_REQUIRED = ("s", "e")


def load_solve_config(path) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments allowed)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string("[solve]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    cfg = dict(parser["solve"])
    missing = [k for k in _REQUIRED if k not in cfg]
    if missing:
        raise ConfigError(f"config {path} is missing {', '.join(missing)}")
    return cfg


def _float(cfg, key, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"config key {key!r} is required")
        return default
    try:
        return float(eval_number(cfg[key]))
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


def eval_number(text: str) -> float:
    """A float, optionally written with ``pi`` (``3pi/2``, ``0.5*pi``)."""
    t = text.strip().lower().replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    head = num.replace("*", "").replace("pi", "")
    factor = float(head) if head not in ("", "+", "-") else float(head + "1")
    value = factor * math.pi
    return value / float(den) if den else value


def problem_from_config(cfg: dict):
    """Build ``(problem, bc, base, grid, guess, constraints)`` from a parsed config."""
    s, e = _float(cfg, "s"), _float(cfg, "e")
    rhs = cfg.get("rhs", "example").strip().lower()
    if rhs == "example":
        base = xcos_base(_float(cfg, "theta", 0.5 * math.pi))
    elif rhs.startswith("manufactured:"):
        base = manufactured_base(rhs.partition(":")[2])
    else:
        raise ConfigError(f"rhs must be 'example' or 'manufactured:NAME', got {rhs!r}")
    if "c" in cfg:
        C = tuple(float(t) for t in cfg["c"].split(","))
        if len(C) != 5:
            raise ConfigError(f"C needs 5 comma-separated values, got {len(C)}")
    else:
        C = C_DEFAULT
    fam = ExampleFamily(base, C, s, e)
    D = np.array([[_float(cfg, f"d{r}{c}", 0.0) for c in range(1, 5)] for r in (1, 2)])
    bc = fam.boundary(D)
    if "alpha" in cfg or "beta" in cfg:
        bc = BoundaryConditions(D, _float(cfg, "alpha", bc.alpha), _float(cfg, "beta", bc.beta))
    delta = _float(cfg, "delta") if "delta" in cfg else None
    q = int(_float(cfg, "q", 7.0))
    grid = make_grid(s, e, delta, q)
    guess = (_float(cfg, "init_vs", float(base.f(s))), _float(cfg, "init_us", float(base.d1(s))))
    constraints = parse_constraint(cfg.get("constraint", "none"), base, s)
    return fam.problem(), bc, base, grid, guess, constraints


def _cmd_solve(args) -> int:
    cfg = load_solve_config(args.config)
    problem, bc, base, grid, guess, constraints = problem_from_config(cfg)
    z0 = initial_z(problem, grid, *pinned_start(bc, *guess))
    sol = solve(problem, bc, grid, z0, constraints, BENCH_OPTIONS)
    resid = residual_max(sol, problem)
    x = np.linspace(problem.s, problem.e, 201)
    dev = float(np.max(np.abs(sol.v(x) - base.f(x))))
    bres = bc.residual(*sol.boundary_values())
    print(f"problem: {problem.name} on [{problem.s:g}, {problem.e:g}], M={grid.M}, delta={grid.delta:g}")
    print(f"status: {sol.status.value} after {sol.iterations} iterations ({sol.wall_time:.2f} s)")
    print(f"objective: {sol.objective_final:.3e}")
    print(f"max|y''-f|: {resid:.3e}")
    print(f"max|y-y_base|: {dev:.3e}")
    print(f"boundary residual: {np.max(np.abs(bres)):.3e}")
    print(f"y(s)={sol.v(problem.s):.12g} y'(s)={sol.u(problem.s):.12g}")
    if args.out:
        data = np.column_stack([x, sol.v(x), sol.u(x)])
        np.savetxt(args.out, data, delimiter=",", header="x,y,yp", comments="", fmt="%.16e")
        print(f"samples written to {args.out}")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    ok = True
    for bc_type in ("neumann", "dirichlet", "mix"):
        res = gradient_check(args.m, args.trials, bc_type, seed=args.seed)
        flag = "PASS" if res.passed else "FAIL"
        print(f"{flag} M={res.M} bc={bc_type:<9} trials={res.trials} worst rel err={res.worst_rel_err:.2e}")
        ok &= res.passed
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_interp_order(args) -> int:
    print(interpolation_order_table())
    return EXIT_OK


_COMMANDS = {
    "bench": _cmd_bench,
    "solve": _cmd_solve,
    "gradcheck": _cmd_gradcheck,
    "interp-order": _cmd_interp_order,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (TiboError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # anything else is a crash
        print(f"crash: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CRASH


if __name__ == "__main__":
    sys.exit(main())
