"""Limited-memory quasi-Newton minimization and quadratic penalties.

The penalties target constraints that are affine in the optimization
variable, so their gradients are exact and cheap.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "OptimizerOptions",
    "OptimizeResult",
    "DerivativeWindow",
    "LowerBound",
    "ConstraintSet",
    "AffineMaps",
    "minimize",
    "penalized",
    "constraint_violation",
    "minimize_penalized",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerOptions:
    max_iters: int = 50000
    grad_tol: float = 1e-12
    obj_tol: float = 1e-16
    memory: int = 10
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5

    def __post_init__(self):
        for name in ("max_iters", "grad_tol", "obj_tol", "memory", "armijo_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    grad_inf: float
    iterations: int
    status: str
    n_fev: int = 0
    max_violation: float = 0.0
    penalty_weight: float = 0.0
    history: list = field(default_factory=list, repr=False)


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        beta = rho * (y @ q)
        q += (a - beta) * s
    return -q


def minimize(
    obj: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    init,
    opts: Optional[OptimizerOptions] = None,
) -> OptimizeResult:
    """L-BFGS with Armijo backtracking.

    Stops with ``status="converged"`` once ``||grad||_inf <= grad_tol`` or
    ``obj <= obj_tol``, ``"stalled"`` when backtracking cannot decrease the
    objective even along steepest descent, and ``"iteration_cap"`` after
    ``max_iters`` accepted steps.  ``obj`` may return ``inf`` to reject a
    trial point.

    Raises
    ------
    ValueError
        If the objective is not finite at ``init``.
    """
    opts = opts or OptimizerOptions()
    x = np.array(init, dtype=float)
    f = float(obj(x))
    n_fev = 1
    if not np.isfinite(f):
        raise ValueError(f"objective is not finite at the initial point ({f})")
    g = np.asarray(grad(x), dtype=float)
    pairs: deque = deque(maxlen=opts.memory)
    history = [f]
    status = "iteration_cap"
    it = 0
    while True:
        g_inf = float(np.max(np.abs(g))) if g.size else 0.0
        if g_inf <= opts.grad_tol or f <= opts.obj_tol:
            status = "converged"
            break
        if it >= opts.max_iters:
            break
        d = _two_loop(g, pairs) if pairs else -g / max(g_inf, 1.0)
        slope = float(g @ d)
        if not slope < 0.0:
            pairs.clear()
            d = -g / max(g_inf, 1.0)
            slope = float(g @ d)
        step = 1.0
        accepted = False
        while True:
            x_new = x + step * d
            # below round-off x_new == x and Armijo would pass trivially
            if np.array_equal(x_new, x):
                break
            f_new = float(obj(x_new))
            n_fev += 1
            if np.isfinite(f_new) and f_new <= f + opts.armijo_c * step * slope:
                accepted = True
                break
            step *= opts.backtrack_factor
            if step * float(np.max(np.abs(d))) <= 1e-17 * (1.0 + float(np.max(np.abs(x)))):
                break
        if not accepted:
            if pairs:
                pairs.clear()
                continue
            status = "stalled"
            break
        g_new = np.asarray(grad(x_new), dtype=float)
        s_vec = x_new - x
        y_vec = g_new - g
        sy = float(s_vec @ y_vec)
        if sy > 1e-12 * float(np.sqrt((s_vec @ s_vec) * (y_vec @ y_vec))):
            pairs.append((s_vec, y_vec, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        history.append(f)
        it += 1
    return OptimizeResult(
        x=x,
        fun=f,
        grad_inf=float(np.max(np.abs(g))) if g.size else 0.0,
        iterations=it,
        status=status,
        n_fev=n_fev,
        history=history,
    )


@dataclass(frozen=True)
class DerivativeWindow:
    """Keep ``|u(s) - center| <= radius``."""

    center: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class LowerBound:
    """Keep ``v(x_k) >= level`` on every grid point inside ``[s, e]``."""

    level: float


Constraint = Union[DerivativeWindow, LowerBound]


@dataclass(frozen=True)
class ConstraintSet:
    constraints: Sequence[Constraint] = ()
    penalty_weight: float = 1e4
    weight_growth: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")
        if not self.weight_growth >= 1.0:
            raise ValueError("weight_growth must be >= 1")


@dataclass(frozen=True)
class AffineMaps:
    """Affine functionals of ``Z`` that the constraints act on.

    ``u_s(z)`` is ``u(s)`` with constant gradient ``u_s_grad``;
    ``v_select(z)`` returns ``v`` at the constrained grid points and
    ``v_select_vjp(w)`` returns ``sum_i w_i * grad v_i``.
    """

    u_s: Callable[[np.ndarray], float]
    u_s_grad: np.ndarray
    v_select: Callable[[np.ndarray], np.ndarray]
    v_select_vjp: Callable[[np.ndarray], np.ndarray]


def _violations(con: Constraint, z, maps: AffineMaps):
    if isinstance(con, DerivativeWindow):
        dev = maps.u_s(z) - con.center
        return np.array([max(0.0, abs(dev) - con.radius)]), dev
    if isinstance(con, LowerBound):
        return np.maximum(0.0, con.level - maps.v_select(z)), None
    raise TypeError(f"unknown constraint {con!r}")


def constraint_violation(constraints: ConstraintSet, z, maps: AffineMaps) -> float:
    """Largest violation over all constraints (0 when feasible)."""
    worst = 0.0
    for con in constraints.constraints:
        viol, _ = _violations(con, z, maps)
        if viol.size:
            worst = max(worst, float(np.max(viol)))
    return worst


def penalized(obj, grad, constraints: ConstraintSet, maps: AffineMaps, weight: Optional[float] = None):
    """Return ``(obj', grad')`` with ``weight * sum(violation^2)`` added.

    When no constraint is violated the original value and gradient are
    returned unchanged.
    """
    w = constraints.penalty_weight if weight is None else weight

    def pen_obj(z):
        f = obj(z)
        if not np.isfinite(f):
            return f
        extra = 0.0
        for con in constraints.constraints:
            viol, _ = _violations(con, z, maps)
            extra += float(viol @ viol)
        return f + w * extra if extra > 0.0 else f

    def pen_grad(z):
        g = grad(z)
        for con in constraints.constraints:
            viol, dev = _violations(con, z, maps)
            if not np.any(viol > 0.0):
                continue
            if isinstance(con, DerivativeWindow):
                g = g + (2.0 * w * viol[0] * np.sign(dev)) * maps.u_s_grad
            else:
                g = g - 2.0 * w * maps.v_select_vjp(viol)
        return g

    return pen_obj, pen_grad


def minimize_penalized(
    obj,
    grad,
    init,
    opts: Optional[OptimizerOptions] = None,
    constraints: Optional[ConstraintSet] = None,
    maps: Optional[AffineMaps] = None,
    viol_tol: float = 1e-9,
    max_rounds: int = 6,
) -> OptimizeResult:
    """Quadratic-penalty outer loop around :func:`minimize`.

    The weight is multiplied by ``weight_growth`` while the final violation
    exceeds ``viol_tol``; each round warm-starts from the previous one.
    Without constraints this is a single call to :func:`minimize`.
    """
    opts = opts or OptimizerOptions()
    if constraints is None or not constraints.constraints:
        return minimize(obj, grad, init, opts)
    if maps is None:
        raise ValueError("constraints need affine maps")
    w = constraints.penalty_weight
    x = np.array(init, dtype=float)
    total_iters = 0
    n_fev = 0
    history: list = []
    res = None
    for _ in range(max_rounds):
        p_obj, p_grad = penalized(obj, grad, constraints, maps, weight=w)
        res = minimize(p_obj, p_grad, x, opts)
        total_iters += res.iterations
        n_fev += res.n_fev
        history.extend(res.history)
        x = res.x
        viol = constraint_violation(constraints, x, maps)
        logger.debug("penalty round: weight=%.1e violation=%.3e status=%s", w, viol, res.status)
        if viol <= viol_tol or constraints.weight_growth == 1.0:
            break
        # a heavier weight will not help a run that never settled
        if res.status == "iteration_cap":
            break
        w *= constraints.weight_growth
    return replace(
        res,
        fun=float(obj(x)),
        iterations=total_iters,
        n_fev=n_fev,
        max_violation=constraint_violation(constraints, x, maps),
        penalty_weight=w,
        history=history,
    )
