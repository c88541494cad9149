"""Odd trigonometric interpolation on a uniform periodic grid.

An odd function with period ``2b`` sampled at ``x_k = -b + k*2b/N`` is fitted
by the sine polynomial ``sum_{0<=j<M} c_j sin(j*pi*x/b)`` with ``N = 2M``.
Coefficients come from one inverse FFT of the sample vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError, SymmetryError

__all__ = [
    "TrigPolyOdd",
    "grid_points",
    "odd_interpolate",
    "odd_coefficients",
    "evaluate",
    "eval_derivative",
    "eval_antiderivative",
    "check_odd_samples",
]

MAX_DERIVATIVE_ORDER = 4


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TrigPolyOdd:
    """Sine polynomial ``sum_j coeffs[j] * sin(j*pi*x/half_period)``.

    ``coeffs[0]`` is kept for index alignment and is always zero.
    """

    half_period: float
    coeffs: np.ndarray

    def __post_init__(self):
        if not self.half_period > 0:
            raise ValueError(f"half_period must be positive, got {self.half_period}")
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-d vector")
        c[0] = 0.0
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree_bound(self) -> int:
        """M, the number of stored coefficients."""
        return self.coeffs.size

    def __call__(self, x):
        return evaluate(self, x)


def grid_points(n: int, b: float) -> np.ndarray:
    """The interpolation grid ``-b + k*2b/n`` for ``0 <= k < n``."""
    return -b + (2.0 * b / n) * np.arange(n)


def check_odd_samples(values: np.ndarray, rtol: float = 1e-9) -> None:
    """Raise :class:`SymmetryError` unless ``values`` are odd-symmetric on the grid.

    Slot 0 sits at ``x=-b`` and slot ``M`` at ``x=0``; both must vanish, and
    ``values[k] == -values[N-k]`` for ``0 < k < M``.
    """
    y = np.asarray(values, dtype=float)
    n = y.size
    if not _is_power_of_two(n) or n < 4:
        raise GridError(f"sample count must be a power of two >= 4, got {n}")
    m = n // 2
    k = np.arange(1, m + 1)
    asym = np.abs(y[k] + y[n - k]) / 2.0
    worst = max(abs(y[0]), float(asym.max()))
    scale = 1.0 + float(np.max(np.abs(y)))
    if worst > rtol * scale:
        raise SymmetryError(
            f"samples are not odd-symmetric: max asymmetry {worst:.3e} "
            f"exceeds {rtol:.1e} * (1 + max|y|)",
            max_asymmetry=worst,
        )


def odd_coefficients(values: np.ndarray) -> np.ndarray:
    """Sine coefficients of odd grid data, without validation.

    Uses ``(-1)^j a_j = 2 * Im(ifft(y))_j`` and keeps ``j < M``.
    """
    y = np.asarray(values, dtype=float)
    n = y.size
    m = n // 2
    signed = 2.0 * np.fft.ifft(y).imag[:m]
    signs = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    a = signs * signed
    a[0] = 0.0
    return a


def odd_interpolate(samples, b: float) -> TrigPolyOdd:
    """Interpolate odd-symmetric grid samples by a sine polynomial.

    Parameters
    ----------
    samples : array_like
        Values at ``grid_points(N, b)``; ``N`` must be a power of two.
    b : float
        Half period.

    Raises
    ------
    GridError
        If the sample count is not a power of two.
    SymmetryError
        If the samples are not odd-symmetric (the asymmetry is reported).
    """
    y = np.asarray(samples, dtype=float)
    check_odd_samples(y)
    return TrigPolyOdd(b, odd_coefficients(y))


def _modes(p: TrigPolyOdd) -> np.ndarray:
    return np.arange(p.degree_bound) * (np.pi / p.half_period)


def evaluate(p: TrigPolyOdd, x):
    """Value of the sine polynomial at ``x`` (scalar or array)."""
    return eval_derivative(p, x, 0)


def eval_derivative(p: TrigPolyOdd, x, order: int = 1):
    """Term-wise derivative of ``p`` of the given order (0..4) at ``x``."""
    if not (0 <= order <= MAX_DERIVATIVE_ORDER) or int(order) != order:
        raise ValueError(f"derivative order must be in 0..{MAX_DERIVATIVE_ORDER}, got {order}")
    w = _modes(p)
    x_arr = np.asarray(x, dtype=float)
    phase = np.multiply.outer(x_arr, w)
    # d^k/dx^k sin(wx) = w^k sin(wx + k*pi/2)
    basis = np.sin(phase + order * np.pi / 2.0)
    out = basis @ (p.coeffs * w**order)
    return float(out) if x_arr.ndim == 0 else out


def eval_antiderivative(p: TrigPolyOdd, x, times: int = 1):
    """Repeated antiderivative of ``p`` with zero constant terms.

    ``times=1`` gives ``-sum c_j/w_j cos(w_j x)`` and ``times=2`` gives
    ``-sum c_j/w_j^2 sin(w_j x)``; the ``j=0`` mode is dropped.
    """
    if times not in (1, 2):
        raise ValueError(f"times must be 1 or 2, got {times}")
    w = _modes(p)[1:]
    c = p.coeffs[1:]
    x_arr = np.asarray(x, dtype=float)
    phase = np.multiply.outer(x_arr, w)
    if times == 1:
        out = -(np.cos(phase) @ (c / w))
    else:
        out = -(np.sin(phase) @ (c / w**2))
    return float(out) if x_arr.ndim == 0 else out
