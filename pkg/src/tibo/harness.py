"""Benchmark scenarios: the ``x cos(theta x)`` test family, 25 starting guesses
per boundary type, status classification and CSV/text reporting.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import BoundaryConditions, OdeProblem, residual_max, solve
from .errors import IntegrationError, TiboError
from .optimizer import ConstraintSet, DerivativeWindow, LowerBound, OptimizerOptions
from .periodic_extension import CutoffFn, GridSpec, extend_rhs, make_grid
from .rk_shooting import rk4_ivp, shoot_dirichlet, shoot_mixed

__all__ = [
    "C_DEFAULT",
    "BC_MATRICES",
    "INIT_Y",
    "INIT_YP",
    "GROUP_MULTIPLIERS",
    "BaseSolution",
    "ExampleFamily",
    "ScenarioSpec",
    "Status",
    "RunReport",
    "BenchConfig",
    "ScenarioOutcome",
    "xcos_base",
    "manufactured_base",
    "build_example",
    "make_scenarios",
    "initial_z",
    "pinned_start",
    "rk4_benchmark",
    "classify",
    "run_scenario",
    "run_batch",
    "emit_report",
    "summary_text",
    "write_curves",
    "CSV_FIELDS",
]

logger = logging.getLogger(__name__)

C_DEFAULT = (0.1, 0.1, 1.0, 0.1, 1.0)

BC_MATRICES = {
    "neumann": ((1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0)),
    "dirichlet": ((1.0, 0.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0)),
    "mix": ((1.0, 1.0, 0.0, 0.0), (0.0, 0.0, 1.0, 1.0)),
}

INIT_Y = (0.41, 0.41, -0.40, 0.05, 0.47)
INIT_YP = (0.31, -0.37, 0.13, -0.22, 0.46)
GROUP_MULTIPLIERS = (1, 2, -2, 3, -3)

TAU_RESID = 1e-4
TAU_DEV = 1e-4

TRAJECTORY_BOUND = 1e4

# Tight floor so the optimizer keeps going to round-off; benchmark accuracy
# needs the residual well below what obj_tol=1e-16 allows.
BENCH_OPTIONS = OptimizerOptions(max_iters=3000, grad_tol=1e-12, obj_tol=1e-28)


@dataclass(frozen=True)
class BaseSolution:
    """A known function and its first two derivatives."""

    name: str
    f: Callable
    d1: Callable
    d2: Callable


def xcos_base(theta: float) -> BaseSolution:
    """``y_b(x) = x cos(theta x)``."""
    return BaseSolution(
        name=f"xcos({theta:.6g})",
        f=lambda x: x * np.cos(theta * x),
        d1=lambda x: np.cos(theta * x) - theta * x * np.sin(theta * x),
        d2=lambda x: -2.0 * theta * np.sin(theta * x) - theta**2 * x * np.cos(theta * x),
    )


def _sine_base(k: float = 0.5 * math.pi) -> BaseSolution:
    return BaseSolution(
        name="sine",
        f=lambda x: np.sin(k * x),
        d1=lambda x: k * np.cos(k * x),
        d2=lambda x: -(k**2) * np.sin(k * x),
    )


def _poly_base() -> BaseSolution:
    return BaseSolution(
        name="poly",
        f=lambda x: 0.25 * x**3 - x**2 + 0.5,
        d1=lambda x: 0.75 * x**2 - 2.0 * x,
        d2=lambda x: 1.5 * x - 2.0,
    )


def _exp_base() -> BaseSolution:
    return BaseSolution(
        name="exp",
        f=lambda x: np.exp(-0.5 * x) * np.sin(2.0 * x),
        d1=lambda x: np.exp(-0.5 * x) * (2.0 * np.cos(2.0 * x) - 0.5 * np.sin(2.0 * x)),
        d2=lambda x: np.exp(-0.5 * x) * (-3.75 * np.sin(2.0 * x) - 2.0 * np.cos(2.0 * x)),
    )


_MANUFACTURED = {"sine": _sine_base, "poly": _poly_base, "exp": _exp_base}


def manufactured_base(name: str) -> BaseSolution:
    try:
        return _MANUFACTURED[name]()
    except KeyError:
        raise TiboError(f"unknown manufactured case {name!r}; choose from {sorted(_MANUFACTURED)}") from None


@dataclass(frozen=True)
class ExampleFamily:
    """``y'' = y_b'' - g(y_b, y_b') + g(y, y')`` with the quadratic

    ``g(v, u) = c_uu u^2 + c_uv v u + c_vv v^2 + c_u u + c_v v``,
    so that ``y_b`` solves it for every coefficient vector ``C``.
    """

    base: BaseSolution
    C: tuple = C_DEFAULT
    s: float = 1.0
    e: float = 3.0

    def g(self, v, u):
        cuu, cuv, cvv, cu, cv = self.C
        return cuu * u * u + cuv * v * u + cvv * v * v + cu * u + cv * v

    def rhs(self, x, v, u):
        fb = self.base
        return fb.d2(x) - self.g(fb.f(x), fb.d1(x)) + self.g(v, u)

    def d_dv(self, x, v, u):
        cuu, cuv, cvv, cu, cv = self.C
        return cuv * u + 2.0 * cvv * v + cv + 0.0 * np.asarray(x)

    def d_du(self, x, v, u):
        cuu, cuv, cvv, cu, cv = self.C
        return 2.0 * cuu * u + cuv * v + cu + 0.0 * np.asarray(x)

    def problem(self) -> OdeProblem:
        return OdeProblem(self.rhs, self.d_dv, self.d_du, self.s, self.e, name=self.base.name)

    def boundary(self, D) -> BoundaryConditions:
        fb = self.base
        vec = np.array([fb.f(self.s), fb.d1(self.s), fb.f(self.e), fb.d1(self.e)], dtype=float)
        D = np.asarray(D, dtype=float)
        alpha, beta = D @ vec
        return BoundaryConditions(D, alpha, beta)


def _bc_matrix(bc_type: str) -> np.ndarray:
    try:
        return np.array(BC_MATRICES[bc_type.lower()])
    except KeyError:
        raise TiboError(f"unknown boundary type {bc_type!r}; choose from {sorted(BC_MATRICES)}") from None


def build_example(theta: float, C=C_DEFAULT, bc_type: str = "neumann"):
    """The ``x cos(theta x)`` benchmark problem on ``[1, 3]``: returns ``(problem, bc, base)``."""
    fam = ExampleFamily(xcos_base(theta), tuple(C))
    return fam.problem(), fam.boundary(_bc_matrix(bc_type)), fam.base


class Status(str, enum.Enum):
    TO_YB = "to_yb"
    TO_YS = "to_ys"
    DIVERGE = "diverge"


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    bc_type: str
    theta: float
    init_vs: float
    init_us: float
    group: int
    position: int
    C: tuple = C_DEFAULT


def make_scenarios(bc_type: str, theta: float, C=C_DEFAULT) -> list[ScenarioSpec]:
    """25 starting guesses ``(f(s) + i*init_y[j], f'(s) + i*init_y'[j])``.

    Groups use ``i = 1, 2, -2, 3, -3``; id is ``(group-1)*5 + position``.
    For Dirichlet the value guess is pinned to ``f(s)``.
    """
    bc_type = bc_type.lower()
    _bc_matrix(bc_type)
    base = xcos_base(theta)
    s = 1.0
    fs, fps = float(base.f(s)), float(base.d1(s))
    out = []
    for gi, mult in enumerate(GROUP_MULTIPLIERS, start=1):
        for pj in range(1, 6):
            dv = 0.0 if bc_type == "dirichlet" else mult * INIT_Y[pj - 1]
            du = mult * INIT_YP[pj - 1]
            out.append(
                ScenarioSpec(
                    id=(gi - 1) * 5 + pj,
                    bc_type=bc_type,
                    theta=theta,
                    init_vs=fs + dv,
                    init_us=fps + du,
                    group=gi,
                    position=pj,
                    C=tuple(C),
                )
            )
    return out


def classify(max_resid: float, max_dev_base: float, tau_r: float = TAU_RESID, tau_d: float = TAU_DEV) -> Status:
    if not (np.isfinite(max_resid) and max_resid <= tau_r):
        return Status.DIVERGE
    if np.isfinite(max_dev_base) and max_dev_base <= tau_d:
        return Status.TO_YB
    return Status.TO_YS


def initial_z(problem: OdeProblem, grid: GridSpec, v_s: float, u_s: float) -> np.ndarray:
    """Starting ``Z`` from RK4 on the cut-off rhs through ``(v_s, u_s)`` at ``s``.

    The trajectory is integrated back to ``x = o`` and forward to ``o + b`` on
    the grid spacing, then ``z_k = F(x_k, v_k, u_k)`` on the right half.  Slots
    past the point where the trajectory blew up (overflow, or ``|y|`` or
    ``|y'|`` above ``TRAJECTORY_BOUND``) are set to 0.
    """
    ext = extend_rhs(problem, CutoffFn.for_grid(grid))
    x = grid.x_right + grid.o
    z = np.zeros(grid.M)

    def rhs(xx, v, u):
        return float(ext.F(xx, v, u))

    def fill(x_end, steps, forward):
        try:
            traj = rk4_ivp(rhs, grid.s, x_end, v_s, u_s, steps)
            ys, yps, nodes = traj.y, traj.yp, traj.nodes
        except IntegrationError as exc:
            good = exc.step - 1
            if good < 1:
                return
            x_stop = grid.s + good * (x_end - grid.s) / steps
            traj = rk4_ivp(rhs, grid.s, x_stop, v_s, u_s, good)
            ys, yps, nodes = traj.y, traj.yp, traj.nodes
        # a finite but runaway trajectory is as useless as an overflowed one
        runaway = np.flatnonzero((np.abs(ys) > TRAJECTORY_BOUND) | (np.abs(yps) > TRAJECTORY_BOUND))
        if runaway.size:
            ys, yps, nodes = ys[: runaway[0]], yps[: runaway[0]], nodes[: runaway[0]]
        idx = grid.m + (np.arange(nodes.size) if forward else -np.arange(nodes.size))
        keep = (idx >= 0) & (idx < grid.M)
        with np.errstate(all="ignore"):
            vals = ext.F(x[idx[keep]], ys[keep], yps[keep])
        vals = np.where(np.isfinite(vals), vals, 0.0)
        z[idx[keep]] = vals

    fill(grid.o, grid.m, forward=False)
    fill(grid.o + grid.b, grid.M - grid.m, forward=True)
    return z


def pinned_start(bc: BoundaryConditions, v_s: float, u_s: float) -> tuple[float, float]:
    """Replace guesses that a boundary row fixes outright (``d*y(s) = alpha``
    or ``d*y'(s) = beta``) by the value that row implies."""
    for row, target in zip(bc.D, (bc.alpha, bc.beta)):
        nz = np.flatnonzero(row)
        if nz.size == 1 and nz[0] == 0:
            v_s = target / row[0]
        elif nz.size == 1 and nz[0] == 1:
            u_s = target / row[1]
    return float(v_s), float(u_s)


def rk4_benchmark(problem: OdeProblem, bc: BoundaryConditions, bc_type: str, guess, steps: int):
    """Shooting + RK4 trajectory on ``[s, e]``; returns ``(nodes, y)`` or ``None`` on failure."""
    s, e = problem.s, problem.e

    def rhs(x, v, u):
        return float(problem.rhs(x, v, u))

    if bc_type == "neumann":
        v_s, u_s = bc.alpha, bc.beta
    elif bc_type == "dirichlet":
        res = shoot_dirichlet(rhs, s, e, bc.alpha, bc.beta, guess[1], steps)
        if not res.converged:
            return None
        v_s, u_s = res.v_s, res.u_s
    else:
        res = shoot_mixed(rhs, bc, s, e, guess, steps)
        if not res.converged:
            return None
        v_s, u_s = res.v_s, res.u_s
    try:
        traj = rk4_ivp(rhs, s, e, v_s, u_s, steps)
    except IntegrationError:
        return None
    return traj.nodes, traj.y


@dataclass
class RunReport:
    scenario_id: int
    bc_type: str
    theta: float
    status: Status
    max_resid: float
    max_dev_base: float
    max_dev_alt: float = float("nan")
    rk4_dev: float = float("nan")
    iterations: int = 0
    wall_ms: float = 0.0
    solver_status: str = ""
    max_violation: float = 0.0
    error: str = ""

    def row(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "bc_type": self.bc_type,
            "theta": repr(float(self.theta)),
            "status": self.status.value,
            "max_resid": _fmt(self.max_resid),
            "max_dev_base": _fmt(self.max_dev_base),
            "max_dev_alt": _fmt(self.max_dev_alt),
            "rk4_dev": _fmt(self.rk4_dev),
            "iterations": self.iterations,
            "wall_ms": f"{self.wall_ms:.1f}",
        }


CSV_FIELDS = (
    "scenario_id",
    "bc_type",
    "theta",
    "status",
    "max_resid",
    "max_dev_base",
    "max_dev_alt",
    "rk4_dev",
    "iterations",
    "wall_ms",
)


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6e}"


@dataclass(frozen=True)
class BenchConfig:
    q: int = 7
    eval_q: int = 10
    constraint: str = "none"
    opts: OptimizerOptions = BENCH_OPTIONS
    tau_r: float = TAU_RESID
    tau_d: float = TAU_DEV
    rk4_benchmark: bool = True


@dataclass
class ScenarioOutcome:
    report: RunReport
    x_eval: np.ndarray = field(repr=False)
    y_opt: np.ndarray = field(repr=False)
    y_base: np.ndarray = field(repr=False)
    interior: np.ndarray = field(repr=False)


def parse_constraint(text: str, base: BaseSolution, s: float = 1.0) -> Optional[ConstraintSet]:
    """``none``, ``dwindow:C,R``, ``dwindow`` (window ``f'(s) +- 0.1|f'(s)|``) or ``lbound:L``."""
    text = (text or "none").strip().lower()
    if text == "none":
        return None
    kind, _, arg = text.partition(":")
    if kind == "dwindow":
        if arg:
            c, r = (float(t) for t in arg.split(","))
        else:
            c = float(base.d1(s))
            r = 0.1 * abs(c)
        return ConstraintSet([DerivativeWindow(c, r)])
    if kind == "lbound":
        return ConstraintSet([LowerBound(float(arg))])
    raise TiboError(f"unrecognised constraint {text!r}")


def run_scenario(scenario: ScenarioSpec, config: BenchConfig = BenchConfig()) -> ScenarioOutcome:
    """Solve one scenario and measure it.  Failures become ``diverge`` reports."""
    t0 = time.perf_counter()
    problem, bc, base = build_example(scenario.theta, scenario.C, scenario.bc_type)
    grid = make_grid(problem.s, problem.e, None, config.q)
    x_eval = np.linspace(0.0, grid.b, 2**config.eval_q + 1) + grid.o
    interior = (x_eval >= problem.s - 1e-12) & (x_eval <= problem.e + 1e-12)
    y_base = base.f(x_eval)
    report = RunReport(scenario.id, scenario.bc_type, scenario.theta, Status.DIVERGE, np.inf, np.inf)
    y_opt = np.full_like(x_eval, np.nan)
    try:
        constraints = parse_constraint(config.constraint, base, problem.s)
        z0 = initial_z(problem, grid, *pinned_start(bc, scenario.init_vs, scenario.init_us))
        sol = solve(problem, bc, grid, z0, constraints, config.opts)
        y_opt = sol.v(x_eval)
        report.max_resid = residual_max(sol, problem, config.eval_q)
        dev = np.abs(y_opt[interior] - y_base[interior])
        report.max_dev_base = float(np.max(dev)) if np.all(np.isfinite(dev)) else np.inf
        report.iterations = sol.iterations
        report.solver_status = sol.status.value
        report.max_violation = sol.max_violation
        report.status = classify(report.max_resid, report.max_dev_base, config.tau_r, config.tau_d)
    except Exception as exc:  # captured into the report by design
        logger.warning("scenario %d failed: %s", scenario.id, exc)
        report.error = f"{type(exc).__name__}: {exc}"
    if config.rk4_benchmark:
        try:
            bench = rk4_benchmark(problem, bc, scenario.bc_type, (scenario.init_vs, scenario.init_us), grid.n)
        except Exception as exc:
            logger.warning("rk4 benchmark for scenario %d failed: %s", scenario.id, exc)
            bench = None
        if bench is not None:
            nodes, y = bench
            report.rk4_dev = float(np.max(np.abs(y - base.f(nodes))))
        else:
            report.rk4_dev = np.inf
    report.wall_ms = 1e3 * (time.perf_counter() - t0)
    return ScenarioOutcome(report, x_eval, y_opt, y_base, interior)


def _run_one(args):
    scenario, config = args
    return run_scenario(scenario, config)


def run_batch(
    bc_type: str,
    theta: float,
    config: BenchConfig = BenchConfig(),
    jobs: int = 1,
    alt_reference: Optional[np.ndarray] = None,
    ids: Optional[Sequence[int]] = None,
) -> list[ScenarioOutcome]:
    """Run the 25 scenarios (or the subset ``ids``) ordered by scenario id.

    ``max_dev_alt`` is measured against ``alt_reference`` (``y_s`` sampled on
    the evaluation grid) when given, otherwise against the first scenario
    classified ``to_ys`` in this batch.
    """
    specs = make_scenarios(bc_type, theta)
    if ids is not None:
        wanted = set(ids)
        specs = [sp for sp in specs if sp.id in wanted]
    work = [(sp, config) for sp in specs]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, work))
    else:
        outcomes = [_run_one(w) for w in work]
    outcomes.sort(key=lambda o: o.report.scenario_id)
    ref = alt_reference
    if ref is None:
        for o in outcomes:
            if o.report.status == Status.TO_YS:
                ref = o.y_opt
                break
    if ref is not None:
        for o in outcomes:
            if o.report.status != Status.DIVERGE:
                d = np.abs(o.y_opt[o.interior] - ref[o.interior])
                o.report.max_dev_alt = float(np.max(d))
    return outcomes


def emit_report(reports: Sequence[RunReport], path) -> Path:
    """Write the reports as CSV (header only when empty)."""
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            writer.writeheader()
            for r in sorted(reports, key=lambda r: r.scenario_id):
                writer.writerow(r.row())
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


def _ranges(ids: Sequence[int]) -> str:
    ids = sorted(ids)
    if not ids:
        return "-"
    parts = []
    start = prev = ids[0]
    for i in ids[1:] + [None]:
        if i is not None and i == prev + 1:
            prev = i
            continue
        parts.append(str(start) if start == prev else f"{start}-{prev}")
        if i is not None:
            start = prev = i
    return ",".join(parts)


def summary_text(reports: Sequence[RunReport]) -> str:
    """Aligned per-status table: count, worst residual and deviations, ids."""
    resid_col = "max|y''-f|"
    header = f"{'status':<8} {'number':>6} {resid_col:>11} {'max|yopt-yb|':>13} {'max|yopt-ys|':>13} {'max|yrk4-yb|':>13}  scenarios"
    lines = [header, "-" * len(header)]
    for st in Status:
        group = [r for r in reports if r.status == st]
        ids = [r.scenario_id for r in group]
        if not group:
            lines.append(f"{st.value:<8} {0:>6} {'NA':>11} {'NA':>13} {'NA':>13} {'NA':>13}  -")
            continue
        if st == Status.DIVERGE:
            cols = ("diverge",) * 3
        else:
            alt = [r.max_dev_alt for r in group if np.isfinite(r.max_dev_alt)]
            cols = (
                f"{max(r.max_resid for r in group):.1e}",
                f"{max(r.max_dev_base for r in group):.1e}",
                f"{max(alt):.1e}" if alt else "NA",
            )
        rk = [r.rk4_dev for r in group if np.isfinite(r.rk4_dev)]
        rk_col = f"{max(rk):.1e}" if rk else "NA"
        lines.append(f"{st.value:<8} {len(group):>6} {cols[0]:>11} {cols[1]:>13} {cols[2]:>13} {rk_col:>13}  {_ranges(ids)}")
    lines.append(f"{'total':<8} {len(reports):>6}")
    return "\n".join(lines)


def write_curves(outcomes: Sequence[ScenarioOutcome], directory) -> list[Path]:
    """One ``scenario_XX.csv`` per run with columns ``x, y_opt, y_b``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for o in outcomes:
        p = directory / f"{o.report.bc_type}_scenario_{o.report.scenario_id:02d}.csv"
        data = np.column_stack([o.x_eval, o.y_opt, o.y_base])
        np.savetxt(p, data, delimiter=",", header="x,y_opt,y_b", comments="", fmt="%.16e")
        paths.append(p)
    return paths
