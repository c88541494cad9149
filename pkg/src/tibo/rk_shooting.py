"""Classic RK4 for ``v'' = f(x, v, v')`` and shooting for two-point conditions.

This is the reference solver the spectral method is compared against, and
it also produces starting trajectories for the optimizer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import IntegrationError

__all__ = [
    "IvpResult",
    "ShootingResult",
    "rk4_ivp",
    "shoot_dirichlet",
    "shoot_mixed",
    "boundary_residual",
]

Rhs = Callable[[float, float, float], float]


@dataclass(frozen=True)
class IvpResult:
    h: float
    nodes: np.ndarray
    y: np.ndarray
    yp: np.ndarray

    def at_end(self) -> tuple[float, float]:
        return float(self.y[-1]), float(self.yp[-1])


@dataclass(frozen=True)
class ShootingResult:
    v_s: float
    u_s: float
    converged: bool
    iterations: int
    residual: float
    message: str = ""


def rk4_ivp(rhs: Rhs, x0: float, x1: float, v0: float, u0: float, steps: int) -> IvpResult:
    """Integrate ``v' = u, u' = rhs(x, v, u)`` from ``x0`` to ``x1`` in ``steps`` RK4 steps.

    ``x1 < x0`` integrates backwards.

    Raises
    ------
    IntegrationError
        If the state turns non-finite; ``.step`` holds the step index.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    h = (x1 - x0) / steps
    nodes = x0 + h * np.arange(steps + 1)
    nodes[-1] = x1
    y = np.empty(steps + 1)
    yp = np.empty(steps + 1)
    v, u = float(v0), float(u0)
    y[0], yp[0] = v, u
    with np.errstate(all="ignore"):
        for i in range(steps):
            x = nodes[i]
            try:
                k1v, k1u = u, rhs(x, v, u)
                k2v, k2u = u + 0.5 * h * k1u, rhs(x + 0.5 * h, v + 0.5 * h * k1v, u + 0.5 * h * k1u)
                k3v, k3u = u + 0.5 * h * k2u, rhs(x + 0.5 * h, v + 0.5 * h * k2v, u + 0.5 * h * k2u)
                k4v, k4u = u + h * k3u, rhs(x + h, v + h * k3v, u + h * k3u)
                v = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
                u = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            except OverflowError:
                # python floats raise instead of returning inf
                v = u = np.inf
            if not (np.isfinite(v) and np.isfinite(u)):
                raise IntegrationError(f"RK4 state became non-finite at step {i + 1} (x={nodes[i + 1]:.6g})", step=i + 1)
            y[i + 1], yp[i + 1] = v, u
    return IvpResult(h=h, nodes=nodes, y=y, yp=yp)


def _end_state(rhs, s, e, v_s, u_s, steps):
    try:
        return rk4_ivp(rhs, s, e, v_s, u_s, steps).at_end()
    except IntegrationError:
        return np.nan, np.nan


def shoot_dirichlet(
    rhs: Rhs,
    s: float,
    e: float,
    alpha: float,
    beta: float,
    guess_up: float,
    steps: int,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> ShootingResult:
    """Find ``y'(s)`` with ``y(s) = alpha`` and ``y(e) = beta`` by the secant method."""

    def g(gamma):
        return _end_state(rhs, s, e, alpha, gamma, steps)[0] - beta

    g0_x, g1_x = guess_up, guess_up * (1.0 + 1e-3) + 1e-3
    g0, g1 = g(g0_x), g(g1_x)
    for it in range(1, max_iter + 1):
        if not (np.isfinite(g0) and np.isfinite(g1)):
            return ShootingResult(alpha, g1_x, False, it, np.inf, "non-finite trajectory")
        if abs(g1) <= tol:
            return ShootingResult(alpha, g1_x, True, it, abs(g1))
        denom = g1 - g0
        if denom == 0.0:
            return ShootingResult(alpha, g1_x, False, it, abs(g1), "secant made no progress")
        g0_x, g1_x = g1_x, g1_x - g1 * (g1_x - g0_x) / denom
        g0, g1 = g1, g(g1_x)
    ok = bool(np.isfinite(g1) and abs(g1) <= tol)
    return ShootingResult(alpha, g1_x, ok, max_iter, abs(g1) if np.isfinite(g1) else np.inf, "" if ok else "iteration limit")


def boundary_residual(rhs: Rhs, D, target, s: float, e: float, v_s: float, u_s: float, steps: int) -> np.ndarray:
    """``D @ (v(s), u(s), v(e), u(e)) - target`` for the trajectory started at ``(v_s, u_s)``."""
    v_e, u_e = _end_state(rhs, s, e, v_s, u_s, steps)
    return np.asarray(D) @ np.array([v_s, u_s, v_e, u_e]) - np.asarray(target)


def shoot_mixed(
    rhs: Rhs,
    bc,
    s: float,
    e: float,
    guess: tuple[float, float],
    steps: int,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> ShootingResult:
    """Find ``(y(s), y'(s))`` meeting both rows of ``bc`` by damped Newton.

    The Jacobian is taken by forward differences with step ``1e-6*(1+|x|)``.
    ``iterations`` counts Newton steps taken.
    """
    D = np.asarray(bc.D, dtype=float)
    target = np.array([bc.alpha, bc.beta])
    x = np.array(guess, dtype=float)

    def res(p):
        return boundary_residual(rhs, D, target, s, e, p[0], p[1], steps)

    r = res(x)
    for it in range(max_iter + 1):
        if not np.all(np.isfinite(r)):
            return ShootingResult(x[0], x[1], False, it, np.inf, "non-finite trajectory")
        norm = float(np.max(np.abs(r)))
        if norm <= tol:
            return ShootingResult(x[0], x[1], True, it, norm)
        if it == max_iter:
            break
        jac = np.empty((2, 2))
        for k in range(2):
            xp = x.copy()
            xp[k] += 1e-6 * (1.0 + abs(x[k]))
            dx = xp[k] - x[k]  # exactly representable step
            jac[:, k] = (res(xp) - r) / dx
        if not np.all(np.isfinite(jac)):
            return ShootingResult(x[0], x[1], False, it, norm, "non-finite Jacobian")
        try:
            delta = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            return ShootingResult(x[0], x[1], False, it, norm, "singular Jacobian")
        lam = 1.0
        while lam > 1e-10:
            x_try = x + lam * delta
            r_try = res(x_try)
            if np.all(np.isfinite(r_try)) and np.max(np.abs(r_try)) < norm:
                break
            lam *= 0.5
        else:
            return ShootingResult(x[0], x[1], False, it, norm, "Newton stagnated")
        x, r = x_try, r_try
    norm = float(np.max(np.abs(r))) if np.all(np.isfinite(r)) else np.inf
    return ShootingResult(x[0], x[1], norm <= tol, max_iter, norm, "" if norm <= tol else "iteration limit")
