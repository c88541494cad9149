"""TIBO: boundary value problems solved by optimizing sine-interpolated ``y''``.

The unknown is ``z = v''`` sampled on the right half of the grid,
``Z = (z_M, ..., z_{N-1})``.  From ``Z`` we get the sine coefficients of the
interpolant of ``z``, the integrated ``u = v'`` and ``v`` up to two
constants ``a0`` and ``a1``, and those constants are fixed so that both
linear boundary equations hold exactly.  The residual
``phi(Z) = sum_k (z_k - F_k)^2 / (2M)`` is minimized with an FFT gradient.

All routines work in shifted coordinates (``s - delta`` mapped to 0) unless
noted; :class:`TiboSolution` evaluators take original coordinates.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import NonFiniteResidualError, SingularBoundaryError, TiboError
from .optimizer import (
    AffineMaps,
    ConstraintSet,
    OptimizerOptions,
    minimize_penalized,
)
from .periodic_extension import CutoffFn, ExtendedRhs, GridSpec, extend_rhs
from .trig_interp import TrigPolyOdd, eval_antiderivative, eval_derivative, odd_coefficients

__all__ = [
    "OdeProblem",
    "BoundaryConditions",
    "BoundarySums",
    "TiboObjective",
    "TiboSolution",
    "SolveStatus",
    "symmetrize",
    "coeffs_from_z",
    "boundary_sums",
    "boundary_matrix",
    "solve_a0_a1",
    "boundary_sum_gradients",
    "grad_a0_a1",
    "reconstruct_u",
    "reconstruct_v",
    "objective",
    "gradient",
    "solve",
    "residual_max",
    "evaluation_points",
]

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OdeProblem:
    """``y'' = rhs(x, y, y')`` on ``[s, e]`` with partials in ``v = y`` and ``u = y'``.

    Evaluators must accept numpy arrays and broadcast.
    """

    rhs: Evaluator
    d_dv: Evaluator
    d_du: Evaluator
    s: float
    e: float
    name: str = ""


@dataclass(frozen=True)
class BoundaryConditions:
    """``D @ (y(s), y'(s), y(e), y'(e)) = (alpha, beta)``."""

    D: np.ndarray
    alpha: float
    beta: float

    def __post_init__(self):
        D = np.array(self.D, dtype=float)
        if D.shape != (2, 4):
            raise TiboError(f"boundary matrix must be 2x4, got shape {D.shape}")
        sv = np.linalg.svd(D, compute_uv=False)
        if not sv[-1] > 1e-10 * sv[0]:
            raise SingularBoundaryError(f"boundary matrix has rank < 2:\n{D}", matrix=D)
        D.setflags(write=False)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    def residual(self, vs, us, ve, ue) -> np.ndarray:
        return self.D @ np.array([vs, us, ve, ue]) - np.array([self.alpha, self.beta])


class BoundarySums(NamedTuple):
    S_m: float
    S_mn: float
    C_m: float
    C_mn: float


class SolveStatus(str, enum.Enum):
    CONVERGED = "converged"
    STALLED = "stalled"
    ITERATION_CAP = "iteration_cap"


def _check_z(z, grid: GridSpec) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (grid.M,):
        raise TiboError(f"Z must have length M={grid.M}, got shape {z.shape}")
    return z


def symmetrize(z, grid: GridSpec) -> np.ndarray:
    """Odd extension of the right-half values to the full length-N grid."""
    z = _check_z(z, grid)
    M = grid.M
    full = np.empty(grid.N)
    full[M:] = z
    full[0] = 0.0
    # full[k] = -full[N-k] for 0 < k < M
    full[1:M] = -z[::-1][: M - 1]
    return full


def _inv_j(grid: GridSpec, power: int = 1) -> np.ndarray:
    """Length-N vector ``(0, 1, 1/2^p, ..., 1/(M-1)^p, 0_M)``."""
    out = np.zeros(grid.N)
    j = np.arange(1, grid.M)
    out[1 : grid.M] = 1.0 / j**power
    return out


def coeffs_from_z(z, grid: GridSpec) -> np.ndarray:
    """Sine coefficients ``b_j`` of the interpolant of ``z`` (length M, ``b_0 = 0``)."""
    return odd_coefficients(symmetrize(z, grid))


def boundary_sums(coeffs, grid: GridSpec) -> BoundarySums:
    """Series parts of ``v`` and ``u`` at the grid anchors of ``s`` and ``e``.

    ``v(s) = a1 + a0*s - S_m`` and ``u(s) = a0 - C_m``; likewise at ``e``
    with the ``m+n`` sums.
    """
    c = np.asarray(coeffs, dtype=float)
    j = np.arange(1, grid.M)
    cj = c[1 : grid.M]
    k_s = grid.b / np.pi
    th_m = 2.0 * np.pi * j * grid.m / grid.N
    th_mn = 2.0 * np.pi * j * (grid.m + grid.n) / grid.N
    return BoundarySums(
        S_m=k_s**2 * float(np.sum(cj / j**2 * np.sin(th_m))),
        S_mn=k_s**2 * float(np.sum(cj / j**2 * np.sin(th_mn))),
        C_m=k_s * float(np.sum(cj / j * np.cos(th_m))),
        C_mn=k_s * float(np.sum(cj / j * np.cos(th_mn))),
    )


def boundary_matrix(bc: BoundaryConditions, grid: GridSpec) -> np.ndarray:
    """Coefficients of ``(a0, a1)`` in the two boundary equations (shifted s, e)."""
    d = bc.D
    s, e = grid.s_shift, grid.e_shift
    return np.array(
        [
            [d[0, 0] * s + d[0, 1] + d[0, 2] * e + d[0, 3], d[0, 0] + d[0, 2]],
            [d[1, 0] * s + d[1, 1] + d[1, 2] * e + d[1, 3], d[1, 0] + d[1, 2]],
        ]
    )


def _inverse_boundary_matrix(bc: BoundaryConditions, grid: GridSpec) -> np.ndarray:
    m = boundary_matrix(bc, grid)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    scale = float(np.max(np.abs(m)))
    if not abs(det) > 1e-12 * max(scale * scale, 1e-300):
        raise SingularBoundaryError(
            f"boundary system for (a0, a1) is singular (det={det:.3e}); "
            f"boundary matrix D=\n{bc.D}",
            matrix=bc.D,
        )
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


def _mu_nu(bc: BoundaryConditions, sums) -> np.ndarray:
    vec = np.array([sums[0], sums[2], sums[1], sums[3]])  # S_m, C_m, S_mn, C_mn
    return bc.D @ vec


def solve_a0_a1(bc: BoundaryConditions, sums, grid: GridSpec) -> tuple[float, float]:
    """Integration constants making both boundary equations hold.

    Raises
    ------
    SingularBoundaryError
        If the 2x2 system is singular.
    """
    inv = _inverse_boundary_matrix(bc, grid)
    mu, nu = _mu_nu(bc, sums)
    a0, a1 = inv @ np.array([bc.alpha + mu, bc.beta + nu])
    return float(a0), float(a1)


def boundary_sum_gradients(grid: GridSpec) -> BoundarySums:
    """Gradients of ``S_m, S_{m+n}, C_m, C_{m+n}`` w.r.t. ``Z`` (constant vectors).

    With ``d b_j / d z_t = (4/N) (-1)^j sin(2 pi j t / N)`` each sum maps to
    ``Im(ifft(A * Phi * J^p))`` over the right half, where the S sums carry
    ``4 b^2/pi^2`` and ``J^2`` and the C sums carry ``4 b/pi`` and ``J``.
    """
    N, M = grid.N, grid.M
    j = np.arange(N)
    alt = np.where(j % 2 == 0, 1.0, -1.0)
    J1, J2 = _inv_j(grid, 1), _inv_j(grid, 2)
    th_m = 2.0 * np.pi * j * grid.m / N
    th_mn = 2.0 * np.pi * j * (grid.m + grid.n) / N
    ks = grid.b / np.pi

    def assemble(w):
        return np.fft.ifft(w).imag[M:]

    return BoundarySums(
        S_m=4.0 * ks**2 * assemble(alt * np.sin(th_m) * J2),
        S_mn=4.0 * ks**2 * assemble(alt * np.sin(th_mn) * J2),
        C_m=4.0 * ks * assemble(alt * np.cos(th_m) * J1),
        C_mn=4.0 * ks * assemble(alt * np.cos(th_mn) * J1),
    )


def grad_a0_a1(bc: BoundaryConditions, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Constant gradient vectors of ``a0`` and ``a1`` w.r.t. ``Z``."""
    inv = _inverse_boundary_matrix(bc, grid)
    g = boundary_sum_gradients(grid)
    stack = np.vstack([g.S_m, g.C_m, g.S_mn, g.C_mn])
    grad_mu, grad_nu = bc.D @ stack
    ga0 = inv[0, 0] * grad_mu + inv[0, 1] * grad_nu
    ga1 = inv[1, 0] * grad_mu + inv[1, 1] * grad_nu
    return ga0, ga1


def _series_u(zfull, grid: GridSpec) -> np.ndarray:
    """Cosine-series part of ``u`` on the right half, i.e. ``u_k - a0``."""
    N, M = grid.N, grid.M
    half = np.fft.ifft(zfull).imag
    return -(2.0 * grid.b * N / np.pi) * np.fft.ifft(_inv_j(grid, 1) * half).real[M:]


def _series_v(zfull, grid: GridSpec) -> np.ndarray:
    """Sine-series part of ``v`` on the right half, i.e. ``v_k - a1 - a0 x_k``."""
    N, M = grid.N, grid.M
    half = np.fft.ifft(zfull).imag
    return -(2.0 * grid.b**2 * N / np.pi**2) * np.fft.ifft(_inv_j(grid, 2) * half).imag[M:]


def reconstruct_u(z, a0: float, grid: GridSpec) -> np.ndarray:
    """``u_k = u(x_k)`` for ``M <= k < N``."""
    return a0 + _series_u(symmetrize(z, grid), grid)


def reconstruct_v(z, a0: float, a1: float, grid: GridSpec) -> np.ndarray:
    """``v_k = v(x_k)`` for ``M <= k < N``."""
    return a1 + a0 * grid.x_right + _series_v(symmetrize(z, grid), grid)


class TiboState(NamedTuple):
    z: np.ndarray
    coeffs: np.ndarray
    a0: float
    a1: float
    U: np.ndarray
    V: np.ndarray
    F: np.ndarray
    resid: np.ndarray


class TiboObjective:
    """Objective, gradient and affine maps for one (problem, bc, grid) triple.

    Constant pieces (the cut-off extension, ``grad a0``, ``grad a1``) are
    built once.  The last evaluated state is cached so that ``value`` and
    ``gradient`` at the same ``Z`` share the reconstruction.
    """

    def __init__(self, problem: OdeProblem, bc: BoundaryConditions, grid: GridSpec):
        self.problem = problem
        self.bc = bc
        self.grid = grid
        self.ext: ExtendedRhs = extend_rhs(problem, CutoffFn.for_grid(grid))
        self.x_orig = grid.x_right + grid.o
        self._inv = _inverse_boundary_matrix(bc, grid)
        self.grad_a0, self.grad_a1 = grad_a0_a1(bc, grid)
        self._J1 = _inv_j(grid, 1)
        self._J2 = _inv_j(grid, 2)
        self._cache_key: Optional[bytes] = None
        self._cache: Optional[TiboState] = None

    # reconstruction ------------------------------------------------------
    def constants(self, coeffs) -> tuple[float, float]:
        mu, nu = _mu_nu(self.bc, boundary_sums(coeffs, self.grid))
        a0, a1 = self._inv @ np.array([self.bc.alpha + mu, self.bc.beta + nu])
        return float(a0), float(a1)

    def state(self, z) -> TiboState:
        z = _check_z(z, self.grid)
        key = z.tobytes()
        if key == self._cache_key:
            return self._cache
        g = self.grid
        zfull = symmetrize(z, g)
        coeffs = odd_coefficients(zfull)
        a0, a1 = self.constants(coeffs)
        U = a0 + _series_u(zfull, g)
        V = a1 + a0 * g.x_right + _series_v(zfull, g)
        with np.errstate(all="ignore"):
            F = np.asarray(self.ext.F(self.x_orig, V, U), dtype=float) * np.ones(g.M)
        st = TiboState(z, coeffs, a0, a1, U, V, F, z - F)
        self._cache_key, self._cache = key, st
        return st

    def boundary_values(self, z) -> tuple[float, float, float, float]:
        """``(v(s), u(s), v(e), u(e))`` implied by ``Z``."""
        st = self.state(z)
        sums = boundary_sums(st.coeffs, self.grid)
        s, e = self.grid.s_shift, self.grid.e_shift
        return (
            st.a1 + st.a0 * s - sums.S_m,
            st.a0 - sums.C_m,
            st.a1 + st.a0 * e - sums.S_mn,
            st.a0 - sums.C_mn,
        )

    # objective -----------------------------------------------------------
    def value(self, z) -> float:
        st = self.state(z)
        bad = np.flatnonzero(~np.isfinite(st.resid))
        if bad.size:
            k = int(bad[0]) + self.grid.M
            raise NonFiniteResidualError(f"right-hand side is not finite at grid slot k={k}", index=k)
        with np.errstate(over="ignore"):
            return float(st.resid @ st.resid) / (2.0 * self.grid.M)

    def safe_value(self, z) -> float:
        """Objective with non-finite residuals mapped to ``+inf``."""
        try:
            val = self.value(z)
        except NonFiniteResidualError:
            return np.inf
        return val if np.isfinite(val) else np.inf

    def adjoint_u(self, w) -> np.ndarray:
        """``sum_k w_k d u_k / d z_t`` for all ``t`` (``w`` on the right half)."""
        g = self.grid
        wfull = np.zeros(g.N)
        wfull[g.M :] = w
        inner = np.fft.ifft(wfull).real
        series = (4.0 * g.b * g.N / np.pi) * np.fft.ifft(self._J1 * inner).imag[g.M :]
        return float(np.sum(w)) * self.grad_a0 - series

    def adjoint_v(self, w) -> np.ndarray:
        """``sum_k w_k d v_k / d z_t`` for all ``t``."""
        g = self.grid
        wfull = np.zeros(g.N)
        wfull[g.M :] = w
        inner = np.fft.ifft(wfull).imag
        series = (4.0 * g.b**2 * g.N / np.pi**2) * np.fft.ifft(self._J2 * inner).imag[g.M :]
        return float(np.sum(w)) * self.grad_a1 + float(w @ g.x_right) * self.grad_a0 - series

    def phi_parts(self, z) -> tuple[np.ndarray, np.ndarray]:
        """The ``u`` and ``v`` chain-rule terms of ``M * grad(phi)``."""
        st = self.state(z)
        with np.errstate(all="ignore"):
            dFu = np.asarray(self.ext.dF_du(self.x_orig, st.V, st.U), dtype=float) * np.ones(self.grid.M)
            dFv = np.asarray(self.ext.dF_dv(self.x_orig, st.V, st.U), dtype=float) * np.ones(self.grid.M)
        return self.adjoint_u(st.resid * dFu), self.adjoint_v(st.resid * dFv)

    def gradient(self, z) -> np.ndarray:
        st = self.state(z)
        phi_u, phi_v = self.phi_parts(z)
        return (st.resid - phi_u - phi_v) / self.grid.M

    # constraint plumbing -------------------------------------------------
    def affine_maps(self, x_lo: float, x_hi: float) -> AffineMaps:
        """Affine maps of ``u(s)`` and of ``v_k`` at grid slots inside ``[x_lo, x_hi]``.

        Bounds are in original coordinates.
        """
        g = self.grid
        grads = boundary_sum_gradients(g)
        mask = (self.x_orig >= x_lo - 1e-12) & (self.x_orig <= x_hi + 1e-12)

        def u_s(z):
            return self.boundary_values(z)[1]

        def v_sel(z):
            return self.state(z).V[mask]

        def v_vjp(w):
            full = np.zeros(g.M)
            full[mask] = w
            return self.adjoint_v(full)

        return AffineMaps(
            u_s=u_s,
            u_s_grad=self.grad_a0 - grads.C_m,
            v_select=v_sel,
            v_select_vjp=v_vjp,
        )


def objective(z, problem: OdeProblem, bc: BoundaryConditions, grid: GridSpec) -> float:
    """Mean squared residual ``sum_{M<=k<N} (z_k - F_k)^2 / (2M)``.

    Raises
    ------
    NonFiniteResidualError
        If ``F`` is not finite at some slot; the slot index is attached.
    """
    return TiboObjective(problem, bc, grid).value(z)


def gradient(z, problem: OdeProblem, bc: BoundaryConditions, grid: GridSpec) -> np.ndarray:
    obj = TiboObjective(problem, bc, grid)
    obj.value(z)
    return obj.gradient(z)


def evaluation_points(b: float, eval_q: int) -> np.ndarray:
    """``2**eval_q`` equal intervals over ``[0, b]`` (shifted), endpoints included."""
    return np.linspace(0.0, b, 2**eval_q + 1)


@dataclass
class TiboSolution:
    """Optimized state and closed-form evaluators in original coordinates."""

    grid: GridSpec
    z: np.ndarray
    poly: TrigPolyOdd
    a0: float
    a1: float
    objective_final: float
    iterations: int
    status: SolveStatus
    grad_inf: float = float("nan")
    max_violation: float = 0.0
    penalty_weight: float = 0.0
    wall_time: float = 0.0
    history: list = field(default_factory=list, repr=False)

    @property
    def coeffs(self) -> np.ndarray:
        return self.poly.coeffs

    def _shift(self, x):
        return np.asarray(x, dtype=float) - self.grid.o

    def v(self, x):
        xs = self._shift(x)
        return self.a1 + self.a0 * xs + eval_antiderivative(self.poly, xs, 2)

    def u(self, x):
        xs = self._shift(x)
        return self.a0 + eval_antiderivative(self.poly, xs, 1)

    def z_eval(self, x):
        return eval_derivative(self.poly, self._shift(x), 0)

    def boundary_values(self) -> tuple[float, float, float, float]:
        s, e = self.grid.s, self.grid.e
        return float(self.v(s)), float(self.u(s)), float(self.v(e)), float(self.u(e))


def solve(
    problem: OdeProblem,
    bc: BoundaryConditions,
    grid: GridSpec,
    init=None,
    constraints: Optional[ConstraintSet] = None,
    opts: Optional[OptimizerOptions] = None,
) -> TiboSolution:
    """Minimize the residual objective and assemble the solution.

    ``init`` is the starting ``Z`` (zeros when omitted).  Optimizer trouble
    is reported through ``status``; this function does not raise for it.
    """
    opts = opts or OptimizerOptions()
    obj = TiboObjective(problem, bc, grid)
    z0 = np.zeros(grid.M) if init is None else _check_z(init, grid).copy()
    z0[~np.isfinite(z0)] = 0.0
    t0 = time.perf_counter()
    maps = None
    if constraints is not None and constraints.constraints:
        maps = obj.affine_maps(problem.s, problem.e)
    if not np.isfinite(obj.safe_value(z0)):
        logger.debug("non-finite objective at the initial guess; restarting from Z=0")
        z0 = np.zeros(grid.M)
    res = minimize_penalized(obj.safe_value, obj.gradient, z0, opts, constraints, maps)
    z = res.x
    st = obj.state(z)
    return TiboSolution(
        grid=grid,
        z=z,
        poly=TrigPolyOdd(grid.b, st.coeffs),
        a0=st.a0,
        a1=st.a1,
        objective_final=obj.safe_value(z),
        iterations=res.iterations,
        status=SolveStatus(res.status),
        grad_inf=res.grad_inf,
        max_violation=res.max_violation,
        penalty_weight=res.penalty_weight,
        wall_time=time.perf_counter() - t0,
    )


def residual_max(sol: TiboSolution, problem: OdeProblem, eval_q: int = 10) -> float:
    """``max |v'' - F(x, v, u)|`` over ``2**eval_q`` intervals of ``[0, b]``."""
    g = sol.grid
    x = evaluation_points(g.b, eval_q) + g.o
    ext = extend_rhs(problem, CutoffFn.for_grid(g))
    with np.errstate(all="ignore"):
        r = sol.z_eval(x) - ext.F(x, sol.v(x), sol.u(x))
    if not np.all(np.isfinite(r)):
        return float("inf")
    return float(np.max(np.abs(r)))
