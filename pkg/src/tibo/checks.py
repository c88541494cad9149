"""Numerical self-checks: finite-difference gradient audit and empirical
interpolation orders."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TiboObjective
from .harness import build_example
from .periodic_extension import make_grid
from .trig_interp import grid_points, odd_interpolate

__all__ = [
    "GradCheckResult",
    "central_difference_gradient",
    "gradient_check",
    "odd_test_polynomial",
    "interpolation_error",
    "empirical_orders",
    "interpolation_order_table",
]


def central_difference_gradient(fun, z, step: float = 1e-3) -> np.ndarray:
    """Fourth-order central differences of a scalar function, one coordinate at a time."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = step
        out[i] = (8.0 * (fun(z + e) - fun(z - e)) - (fun(z + 2 * e) - fun(z - 2 * e))) / (12.0 * step)
    return out


@dataclass
class GradCheckResult:
    M: int
    bc_type: str
    trials: int
    worst_rel_err: float
    passed: bool


def gradient_check(M: int = 8, trials: int = 20, bc_type: str = "neumann", theta: float = np.pi / 2,
                   rtol: float = 1e-6, seed: int = 0, scale: float = 1.0) -> GradCheckResult:
    """Compare the FFT gradient with central differences at random ``Z``.

    The error is relative per coordinate, ``max_i |g_i - fd_i| / |fd_i|``.
    """
    q = int(np.log2(M))
    if 2**q != M:
        raise ValueError(f"M must be a power of two, got {M}")
    problem, bc, _ = build_example(theta, bc_type=bc_type)
    grid = make_grid(problem.s, problem.e, None, q)
    obj = TiboObjective(problem, bc, grid)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        z = scale * rng.standard_normal(M)
        obj.value(z)
        g = obj.gradient(z)
        fd = central_difference_gradient(obj.value, z)
        worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-300))))
    return GradCheckResult(M, bc_type, trials, worst, worst <= rtol)


def odd_test_polynomial(K: int, b: float):
    """Odd ``2b``-periodic function with ``K+1`` bounded derivatives (K odd).

    On ``[-b, b]`` it is the odd polynomial of degree ``K+2`` whose even
    derivatives of order ``< K+1`` vanish at ``+-b``. The periodic
    extension is ``C^K`` and its ``(K+1)``-th derivative is bounded but
    jumps at ``x = +-b``.
    """
    if K % 2 != 1 or K < 1:
        raise ValueError("K must be a positive odd integer")
    deg = K + 2
    powers = np.arange(1, deg + 1, 2)  # odd monomials x, x^3, ..., x^deg
    # conditions: f^(2i)(b) = 0 for i = 0..(K-1)/2, leading coefficient 1
    rows, rhs = [], []
    for i in range((K + 1) // 2):
        order = 2 * i
        row = []
        for p in powers:
            if p < order:
                row.append(0.0)
            else:
                c = np.prod(np.arange(p - order + 1, p + 1)) if order else 1.0
                row.append(c * b ** (p - order))
        rows.append(row)
        rhs.append(0.0)
    lead = np.zeros(len(powers))
    lead[-1] = 1.0
    rows.append(lead)
    rhs.append(1.0)
    coef = np.linalg.solve(np.array(rows), np.array(rhs))

    def f(x):
        x = np.asarray(x, dtype=float)
        # wrap into [-b, b)
        xw = (x + b) % (2.0 * b) - b
        return sum(c * xw**p for c, p in zip(coef, powers))

    return f


def interpolation_error(fun, b: float, N: int, n_eval: int = 4001) -> float:
    """Max error of the odd interpolant of ``fun`` on ``N`` points over ``[-b, b]``."""
    p = odd_interpolate(fun(grid_points(N, b)), b)
    x = np.linspace(-b, b, n_eval)
    return float(np.max(np.abs(p(x) - fun(x))))


def empirical_orders(fun, b: float, sizes=(32, 64, 128)) -> tuple[list[float], list[float]]:
    errs = [interpolation_error(fun, b, N) for N in sizes]
    orders = [float(np.log2(errs[i] / errs[i + 1])) for i in range(len(errs) - 1)]
    return errs, orders


def interpolation_order_table(b: float = 1.0, Ks=(1, 3, 5), sizes=(32, 64, 128)) -> str:
    lines = [f"{'K':>3} " + " ".join(f"{'err N=' + str(n):>12}" for n in sizes) + "   orders (log2 ratio)"]
    for K in Ks:
        errs, orders = empirical_orders(odd_test_polynomial(K, b), b, sizes)
        lines.append(
            f"{K:>3} " + " ".join(f"{e:>12.3e}" for e in errs) + "   " + ", ".join(f"{o:.2f}" for o in orders)
        )
    smooth = lambda x: np.sin(np.pi * x / b) ** 3
    lines.append(f"sin^3 at N=32: max error {interpolation_error(smooth, b, 32):.2e}")
    return "\n".join(lines)
