"""Grid bookkeeping and the smooth cut-off used to periodize a right-hand side.

The interval ``[s, e]`` is padded by ``delta`` on both sides and shifted by
``o = s - delta`` so the working domain becomes ``[0, b]`` with
``b = e + delta - o``.  The interpolation grid lives on ``[-b, b)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GridError

__all__ = [
    "GridSpec",
    "CutoffFn",
    "ExtendedRhs",
    "make_grid",
    "default_delta",
    "smooth_step",
    "cutoff_value",
    "extend_rhs",
]

_INTEGRALITY_TOL = 1e-9
# exp(-c/t) with c=2 keeps the q=7 interpolation error of the cut-off near 1e-8;
# c=1 leaves it near 1e-6.
DEFAULT_SHARPNESS = 2.0


@dataclass(frozen=True)
class GridSpec:
    s: float
    e: float
    delta: float
    q: int
    o: float
    b: float
    M: int
    N: int
    lam: float
    m: int
    n: int

    @property
    def x(self) -> np.ndarray:
        """Full shifted grid ``x_k = -b + k*lam``, ``0 <= k < N``."""
        return -self.b + self.lam * np.arange(self.N)

    @property
    def x_right(self) -> np.ndarray:
        """Right half ``x_M .. x_{N-1}``, i.e. ``[0, b)`` in shifted units."""
        return self.lam * np.arange(self.M)

    @property
    def s_shift(self) -> float:
        return self.m * self.lam

    @property
    def e_shift(self) -> float:
        return (self.m + self.n) * self.lam

    def to_original(self, x):
        return np.asarray(x) + self.o

    def to_shifted(self, x):
        return np.asarray(x) - self.o


def default_delta(s: float, e: float) -> float:
    """``(e - s)/2``: makes ``m = N/8`` and ``n = N/4`` for every ``q >= 3``."""
    return 0.5 * (e - s)


def _as_index(value: float, name: str, hint: str) -> int:
    k = round(value)
    if abs(value - k) > _INTEGRALITY_TOL * max(1.0, abs(value)):
        raise GridError(f"{name} = {value:.6g} is not an integer; {hint}")
    return int(k)


def make_grid(s: float, e: float, delta: float | None = None, q: int = 7) -> GridSpec:
    """Build the grid for ``[s, e]`` padded by ``delta`` with ``M = 2**q``.

    Raises
    ------
    GridError
        If ``s >= e``, ``delta <= 0``, ``q < 3`` or the grid indices of
        ``s`` and ``e`` are not integers.
    """
    if not s < e:
        raise GridError(f"need s < e, got s={s}, e={e}")
    if delta is None:
        delta = default_delta(s, e)
    if not delta > 0:
        raise GridError(f"delta must be positive, got {delta}")
    if int(q) != q or q < 3:
        raise GridError(f"q must be an integer >= 3, got {q}")
    q = int(q)
    o = s - delta
    b = e + delta - o
    M = 2**q
    N = 2 * M
    lam = 2.0 * b / N
    hint = f"choose delta so that s and e land on grid points, e.g. delta = {default_delta(s, e):g}"
    m = _as_index(delta / lam, "m = delta*N/(2b)", hint)
    n = _as_index((e - s) / lam, "n = (e-s)*N/(2b)", hint)
    return GridSpec(s=s, e=e, delta=delta, q=q, o=o, b=b, M=M, N=N, lam=lam, m=m, n=n)


def _sigma(t: np.ndarray, sharpness: float) -> np.ndarray:
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-sharpness / t[pos])
    return out


def smooth_step(t, sharpness: float = DEFAULT_SHARPNESS):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``, and 1/2 at ``t = 1/2``.

    Built as ``sigma(t) / (sigma(t) + sigma(1-t))`` with
    ``sigma(t) = exp(-sharpness/t)`` for ``t > 0``.
    """
    t_arr = np.asarray(t, dtype=float)
    flat = np.atleast_1d(t_arr)
    a = _sigma(flat, sharpness)
    c = _sigma(1.0 - flat, sharpness)
    out = a / (a + c)
    return float(out[0]) if t_arr.ndim == 0 else out.reshape(t_arr.shape)


@dataclass(frozen=True)
class CutoffFn:
    """Cut-off equal to 1 on ``[s, e]`` and 0 outside ``(s-delta, e+delta)``."""

    s: float
    e: float
    delta: float
    sharpness: float = DEFAULT_SHARPNESS

    def __call__(self, x):
        return cutoff_value(self, x)

    @classmethod
    def for_grid(cls, grid: GridSpec, shifted: bool = False, sharpness: float = DEFAULT_SHARPNESS) -> "CutoffFn":
        if shifted:
            return cls(grid.s_shift, grid.e_shift, grid.delta, sharpness)
        return cls(grid.s, grid.e, grid.delta, sharpness)


def cutoff_value(h: CutoffFn, x):
    d = h.delta
    x = np.asarray(x, dtype=float)
    out = smooth_step((x - h.s + d) / d, h.sharpness) * smooth_step((h.e + d - x) / d, h.sharpness)
    return float(out) if np.ndim(out) == 0 else out


Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ExtendedRhs:
    """``F = f*h`` and its partials, in the same x coordinates as ``f``."""

    cutoff: CutoffFn
    F: Evaluator
    dF_dv: Evaluator
    dF_du: Evaluator


def extend_rhs(problem, h: CutoffFn) -> ExtendedRhs:
    """Multiply ``problem.rhs`` and its partials by the cut-off ``h``.

    ``problem`` needs ``rhs``, ``d_dv`` and ``d_du`` evaluators of
    ``(x, v, u)``.  Outside the support of ``h`` the extension is exactly 0
    and ``f`` is not consulted there.
    """

    def wrap(fn):
        def extended(x, v, u):
            x = np.asarray(x, dtype=float)
            w = np.asarray(cutoff_value(h, x))
            with np.errstate(invalid="ignore", over="ignore"):
                vals = np.asarray(fn(x, v, u), dtype=float)
                return np.where(w > 0.0, vals * w, 0.0)

        return extended

    return ExtendedRhs(h, wrap(problem.rhs), wrap(problem.d_dv), wrap(problem.d_du))
