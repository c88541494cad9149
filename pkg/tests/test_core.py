from dataclasses import replace

import numpy as np
import pytest

from oracles import central_diff, direct_coeffs_from_z, direct_jacobians, direct_state, rel_err, series_u, series_v
from tibo.core import (
    BoundaryConditions,
    OdeProblem,
    SolveStatus,
    TiboObjective,
    boundary_sum_gradients,
    boundary_sums,
    coeffs_from_z,
    grad_a0_a1,
    gradient,
    objective,
    reconstruct_u,
    reconstruct_v,
    residual_max,
    solve,
    solve_a0_a1,
    symmetrize,
)
from tibo.errors import NonFiniteResidualError, SingularBoundaryError, TiboError
from tibo.harness import BC_MATRICES, ExampleFamily, build_example, manufactured_base
from tibo.optimizer import OptimizerOptions
from tibo.periodic_extension import make_grid

TIGHT = OptimizerOptions(max_iters=3000, obj_tol=1e-28)


def zero_problem(s=1.0, e=3.0):
    zero = lambda x, v, u: 0.0 * np.asarray(x) + 0.0 * np.asarray(v)
    return OdeProblem(zero, zero, zero, s, e, "zero")


def random_bc(rng):
    return BoundaryConditions(rng.standard_normal((2, 4)), rng.standard_normal(), rng.standard_normal())


NEUMANN = BoundaryConditions(BC_MATRICES["neumann"], 0.0, 0.0)


class TestSymmetrize:
    def test_odd_extension(self):
        g = make_grid(1.0, 3.0, None, 3)
        z = np.arange(1.0, 9.0)
        full = symmetrize(z, g)
        assert full[0] == 0.0
        np.testing.assert_array_equal(full[8:], z)
        for k in range(1, 8):
            assert full[k] == -full[16 - k]

    def test_length_checked(self):
        with pytest.raises(TiboError):
            symmetrize(np.zeros(5), make_grid(1.0, 3.0, None, 3))


class TestCoefficients:
    def test_zero(self):
        g = make_grid(1.0, 3.0, None, 3)
        assert np.all(coeffs_from_z(np.zeros(8), g) == 0.0)

    def test_single_mode(self):
        g = make_grid(1.0, 3.0, None, 4)
        c = coeffs_from_z(np.sin(np.pi * g.x_right / g.b), g)
        expect = np.zeros(g.M)
        expect[1] = 1.0
        np.testing.assert_allclose(c, expect, atol=1e-14)

    @pytest.mark.parametrize("q", [3, 4])
    def test_matches_direct(self, q):
        g = make_grid(1.0, 3.0, None, q)
        z = np.random.default_rng(q).standard_normal(g.M)
        np.testing.assert_allclose(coeffs_from_z(z, g), direct_coeffs_from_z(z, g), atol=1e-12)


class TestBoundarySums:
    def test_zero(self):
        g = make_grid(1.0, 3.0, None, 3)
        assert boundary_sums(np.zeros(8), g) == (0.0, 0.0, 0.0, 0.0)

    def test_single_term(self):
        g = make_grid(1.0, 3.0, None, 3)
        g = replace(g, m=g.N // 4)  # 2*pi*m/N = pi/2
        c = np.zeros(g.M)
        c[1] = 1.0
        assert boundary_sums(c, g).S_m == pytest.approx(g.b**2 / np.pi**2)

    def test_match_series(self):
        g = make_grid(1.0, 3.0, None, 3)
        c = np.random.default_rng(0).standard_normal(g.M)
        sums = boundary_sums(c, g)
        assert sums.S_m == pytest.approx(-series_v(c, np.array(g.s_shift), g.b), abs=1e-12)
        assert sums.S_mn == pytest.approx(-series_v(c, np.array(g.e_shift), g.b), abs=1e-12)
        assert sums.C_m == pytest.approx(-series_u(c, np.array(g.s_shift), g.b), abs=1e-12)
        assert sums.C_mn == pytest.approx(-series_u(c, np.array(g.e_shift), g.b), abs=1e-12)

    @pytest.mark.parametrize("q", [3, 4])
    def test_gradients_match_finite_differences(self, q):
        g = make_grid(1.0, 3.0, None, q)
        grads = boundary_sum_gradients(g)
        z = np.random.default_rng(1).standard_normal(g.M)
        for name in ("S_m", "S_mn", "C_m", "C_mn"):
            fd = central_diff(lambda zz: getattr(boundary_sums(coeffs_from_z(zz, g), g), name), z)
            assert rel_err(getattr(grads, name), fd) <= 1e-6

    def test_gradient_component_formula(self):
        g = make_grid(1.0, 3.0, None, 3)
        j = np.arange(1, g.M)
        t = np.arange(g.M, g.N)
        alt = (-1.0) ** j
        # d b_j / d z_t = (4/N) (-1)^j sin(2 pi j t / N)
        expect = [
            4 * g.b**2 / (g.N * np.pi**2) * np.sum(alt / j**2 * np.sin(2 * np.pi * j * g.m / g.N) * np.sin(2 * np.pi * j * tt / g.N))
            for tt in t
        ]
        np.testing.assert_allclose(boundary_sum_gradients(g).S_m, expect, atol=1e-13)


class TestConstants:
    def test_neumann_hand_solve(self):
        g = make_grid(1.0, 3.0, None, 3)
        bc = BoundaryConditions(BC_MATRICES["neumann"], 2.0, 3.0)
        a0, a1 = solve_a0_a1(bc, (0.0, 0.0, 0.0, 0.0), g)
        assert a0 == pytest.approx(3.0)
        assert a1 == pytest.approx(2.0 - 3.0 * g.s_shift)

    def test_dirichlet_zero(self):
        g = make_grid(1.0, 3.0, None, 3)
        bc = BoundaryConditions(BC_MATRICES["dirichlet"], 0.0, 0.0)
        assert solve_a0_a1(bc, (0.0, 0.0, 0.0, 0.0), g) == (0.0, 0.0)

    def test_random_plug_back(self):
        rng = np.random.default_rng(5)
        g = make_grid(1.0, 3.0, None, 4)
        for _ in range(20):
            bc = random_bc(rng)
            sums = tuple(rng.standard_normal(4))
            a0, a1 = solve_a0_a1(bc, sums, g)
            s, e = g.s_shift, g.e_shift
            vals = np.array([a1 + a0 * s - sums[0], a0 - sums[2], a1 + a0 * e - sums[1], a0 - sums[3]])
            assert np.max(np.abs(bc.D @ vals - [bc.alpha, bc.beta])) <= 1e-12 * (1 + np.max(np.abs(vals)))

    def test_singular_system(self):
        # rows on u(s) and u(e) leave a1 undetermined
        bc = BoundaryConditions([[0, 1, 0, 0], [0, 0, 0, 1]], 0.0, 0.0)
        with pytest.raises(SingularBoundaryError) as info:
            solve_a0_a1(bc, (0.0,) * 4, make_grid(1.0, 3.0, None, 3))
        assert info.value.matrix is not None

    def test_rank_deficient_rejected(self):
        with pytest.raises(SingularBoundaryError):
            BoundaryConditions([[1, 0, 0, 0], [2, 0, 0, 0]], 0.0, 0.0)

    def test_pure_u_row_gradient(self):
        g = make_grid(1.0, 3.0, None, 3)
        bc = BoundaryConditions([[1, 0, 0, 0], [0, 1, 0, 0]], 0.0, 0.0)
        ga0, _ = grad_a0_a1(bc, g)
        np.testing.assert_allclose(ga0, boundary_sum_gradients(g).C_m, atol=1e-14)

    def test_directional_derivative(self):
        rng = np.random.default_rng(8)
        g = make_grid(1.0, 3.0, None, 4)
        bc = random_bc(rng)
        ga0, ga1 = grad_a0_a1(bc, g)
        z, dz = rng.standard_normal(g.M), rng.standard_normal(g.M)

        def a(zz):
            return np.array(solve_a0_a1(bc, boundary_sums(coeffs_from_z(zz, g), g), g))

        h = 1e-6
        fd = (a(z + h * dz) - a(z - h * dz)) / (2 * h)
        assert rel_err([ga0 @ dz, ga1 @ dz], fd) <= 1e-6


class TestReconstruction:
    g = make_grid(1.0, 3.0, None, 3)

    def test_zero(self):
        np.testing.assert_allclose(reconstruct_u(np.zeros(8), 1.5, self.g), 1.5)
        np.testing.assert_allclose(reconstruct_v(np.zeros(8), 1.5, -2.0, self.g), -2.0 + 1.5 * self.g.x_right)

    def test_single_mode(self):
        g = self.g
        x = g.x_right
        z = np.sin(np.pi * x / g.b)
        np.testing.assert_allclose(reconstruct_u(z, 0.3, g), 0.3 - g.b / np.pi * np.cos(np.pi * x / g.b), atol=1e-13)
        np.testing.assert_allclose(
            reconstruct_v(z, 0.3, 0.7, g), 0.7 + 0.3 * x - (g.b / np.pi) ** 2 * np.sin(np.pi * x / g.b), atol=1e-13
        )

    @pytest.mark.parametrize("q", [3, 4])
    def test_matches_direct(self, q):
        g = make_grid(1.0, 3.0, None, q)
        rng = np.random.default_rng(q)
        z = rng.standard_normal(g.M)
        c = direct_coeffs_from_z(z, g)
        x = g.x_right
        np.testing.assert_allclose(reconstruct_u(z, 0.4, g), 0.4 + series_u(c, x, g.b), atol=1e-10)
        np.testing.assert_allclose(reconstruct_v(z, 0.4, -1.1, g), -1.1 + 0.4 * x + series_v(c, x, g.b), atol=1e-10)

    def test_u_is_derivative_of_v(self):
        problem, bc, _ = build_example(np.pi / 2)
        g = make_grid(1.0, 3.0, None, 4)
        obj = TiboObjective(problem, bc, g)
        z = np.random.default_rng(2).standard_normal(g.M)
        sol = solve(problem, bc, g, z, opts=OptimizerOptions(max_iters=1))
        x = np.linspace(1.1, 2.9, 7)
        h = 1e-5
        np.testing.assert_allclose((sol.v(x + h) - sol.v(x - h)) / (2 * h), sol.u(x), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose((sol.u(x + h) - sol.u(x - h)) / (2 * h), sol.z_eval(x), rtol=1e-6, atol=1e-8)
        assert obj.state(sol.z).a0 == pytest.approx(sol.a0)


class TestObjective:
    def test_zero_problem(self):
        g = make_grid(1.0, 3.0, None, 3)
        assert objective(np.zeros(8), zero_problem(), NEUMANN, g) == 0.0

    def test_single_slot_perturbation(self):
        g = make_grid(1.0, 3.0, None, 4)
        z = np.zeros(g.M)
        z[5] = 1e-3
        assert objective(z, zero_problem(), NEUMANN, g) == pytest.approx(1e-6 / (2 * g.M), rel=1e-12)

    def test_fixed_point(self):
        # small Lipschitz constant: Z <- F(V(Z), U(Z)) contracts to a fixed point
        p = OdeProblem(
            lambda x, v, u: 0.05 * np.sin(v) + 0.02 * u + 0.1,
            lambda x, v, u: 0.05 * np.cos(v),
            lambda x, v, u: 0.02 + 0 * x,
            1.0,
            3.0,
        )
        bc = BoundaryConditions(BC_MATRICES["dirichlet"], 0.2, -0.1)
        g = make_grid(1.0, 3.0, None, 4)
        obj = TiboObjective(p, bc, g)
        z = np.zeros(g.M)
        for _ in range(200):
            z = obj.state(z).F
        assert obj.value(z) <= 1e-28

    def test_zero_iff_residual_zero(self):
        g = make_grid(1.0, 3.0, None, 3)
        p = zero_problem()
        assert objective(np.zeros(8), p, NEUMANN, g) <= 1e-12
        z = np.zeros(8)
        z[2] = 1e-5
        assert objective(z, p, NEUMANN, g) > 0.0

    def test_nonfinite_rhs_reports_slot(self):
        blow = lambda x, v, u: np.where(np.asarray(x) > 2.0, np.inf, 0.0)
        p = OdeProblem(blow, blow, blow, 1.0, 3.0)
        g = make_grid(1.0, 3.0, None, 3)
        with pytest.raises(NonFiniteResidualError) as info:
            objective(np.zeros(8), p, NEUMANN, g)
        assert info.value.index >= g.M
        assert np.isinf(TiboObjective(p, NEUMANN, g).safe_value(np.zeros(8)))


class TestGradient:
    @pytest.mark.parametrize("bc_type", ["neumann", "dirichlet", "mix"])
    @pytest.mark.parametrize("q", [3, 4])
    def test_matches_finite_differences(self, bc_type, q):
        problem, bc, _ = build_example(np.pi / 2, bc_type=bc_type)
        g = make_grid(1.0, 3.0, None, q)
        obj = TiboObjective(problem, bc, g)
        rng = np.random.default_rng(q)
        for _ in range(3):
            z = rng.standard_normal(g.M)
            assert rel_err(gradient(z, problem, bc, g), central_diff(obj.value, z)) <= 1e-6

    @pytest.mark.parametrize("q", [3, 4])
    def test_phi_parts_match_dense_jacobians(self, q):
        problem, bc, _ = build_example(np.pi / 2, bc_type="mix")
        g = make_grid(1.0, 3.0, None, q)
        obj = TiboObjective(problem, bc, g)
        JU, JV = direct_jacobians(bc, g)
        z = np.random.default_rng(0).standard_normal(g.M)
        st = obj.state(z)
        x = g.x_right + g.o
        ext = obj.ext
        phi_u, phi_v = obj.phi_parts(z)
        np.testing.assert_allclose(phi_u, JU.T @ (st.resid * ext.dF_du(x, st.V, st.U)), atol=1e-10)
        np.testing.assert_allclose(phi_v, JV.T @ (st.resid * ext.dF_dv(x, st.V, st.U)), atol=1e-10)

    def test_state_matches_direct(self):
        problem, bc, _ = build_example(np.pi / 2, bc_type="mix")
        g = make_grid(1.0, 3.0, None, 4)
        z = np.random.default_rng(3).standard_normal(g.M)
        st = TiboObjective(problem, bc, g).state(z)
        _, a0, a1, U, V = direct_state(z, bc, g)
        assert (st.a0, st.a1) == pytest.approx((a0, a1), abs=1e-10)
        np.testing.assert_allclose(st.U, U, atol=1e-10)
        np.testing.assert_allclose(st.V, V, atol=1e-10)

    def test_u_part_vanishes_for_v_only_rhs(self):
        p = OdeProblem(lambda x, v, u: v, lambda x, v, u: 1.0 + 0 * x, lambda x, v, u: 0 * x, 1.0, 3.0)
        g = make_grid(1.0, 3.0, None, 3)
        obj = TiboObjective(p, NEUMANN, g)
        phi_u, _ = obj.phi_parts(np.random.default_rng(0).standard_normal(8))
        assert np.all(phi_u == 0.0)

    def test_vanishes_at_solution(self):
        problem, bc, _ = build_example(np.pi / 2)
        g = make_grid(1.0, 3.0, None, 5)
        sol = solve(problem, bc, g, opts=TIGHT)
        assert np.max(np.abs(gradient(sol.z, problem, bc, g))) <= 1e-9

    def test_descent_property(self):
        problem, bc, _ = build_example(np.pi / 2, bc_type="dirichlet")
        g = make_grid(1.0, 3.0, None, 4)
        obj = TiboObjective(problem, bc, g)
        rng = np.random.default_rng(11)
        for _ in range(10):
            z = 0.5 * rng.standard_normal(g.M)
            f0, gz = obj.value(z), obj.gradient(z)
            assert obj.value(z - 1e-4 * gz / np.max(np.abs(gz))) < f0


class TestBoundaryByConstruction:
    def test_random_cases(self):
        rng = np.random.default_rng(2024)
        problem, _, _ = build_example(np.pi / 2)
        g = make_grid(1.0, 3.0, None, 4)
        checked = 0
        while checked < 100:
            try:
                bc = random_bc(rng)
                obj = TiboObjective(problem, bc, g)
            except SingularBoundaryError:
                continue
            z = 3.0 * rng.standard_normal(g.M)
            st = obj.state(z)
            s, e = g.s_shift, g.e_shift
            # boundary values rebuilt from the series, independent of the sums
            vals = [
                st.a1 + st.a0 * s + series_v(st.coeffs, np.array(s), g.b),
                st.a0 + series_u(st.coeffs, np.array(s), g.b),
                st.a1 + st.a0 * e + series_v(st.coeffs, np.array(e), g.b),
                st.a0 + series_u(st.coeffs, np.array(e), g.b),
            ]
            res = bc.D @ np.array(vals, dtype=float) - [bc.alpha, bc.beta]
            assert np.max(np.abs(res)) <= 1e-9 * (1 + abs(bc.alpha) + abs(bc.beta))
            checked += 1


class TestSolve:
    def test_zero_problem(self):
        g = make_grid(1.0, 3.0, None, 3)
        sol = solve(zero_problem(), NEUMANN, g)
        assert sol.iterations <= 1
        assert sol.objective_final == 0.0
        assert sol.status == SolveStatus.CONVERGED
        assert np.all(sol.v(np.linspace(1, 3, 5)) == 0.0)

    @pytest.mark.parametrize("bc_type", ["neumann", "dirichlet", "mix"])
    def test_manufactured_sine(self, bc_type):
        fam = ExampleFamily(manufactured_base("sine"), s=1.0, e=3.0)
        problem = fam.problem()
        bc = fam.boundary(BC_MATRICES[bc_type])
        g = make_grid(1.0, 3.0, None, 7)
        sol = solve(problem, bc, g, opts=TIGHT)
        x = np.linspace(1.0, 3.0, 101)
        assert np.max(np.abs(sol.v(x) - fam.base.f(x))) <= 1e-8
        assert residual_max(sol, problem) <= 1e-6
        assert np.max(np.abs(bc.residual(*sol.boundary_values()))) <= 1e-9

    def test_residual_max_zero(self):
        g = make_grid(1.0, 3.0, None, 3)
        sol = solve(zero_problem(), NEUMANN, g)
        assert residual_max(sol, zero_problem()) == 0.0

    def test_nonfinite_start_recovers(self):
        problem, bc, _ = build_example(np.pi / 2)
        g = make_grid(1.0, 3.0, None, 4)
        sol = solve(problem, bc, g, np.full(g.M, 1e200), opts=OptimizerOptions(max_iters=5))
        assert np.isfinite(sol.objective_final)

    def test_iteration_cap_is_status_not_error(self):
        problem, bc, _ = build_example(np.pi / 2)
        g = make_grid(1.0, 3.0, None, 4)
        sol = solve(problem, bc, g, opts=OptimizerOptions(max_iters=1))
        assert sol.status == SolveStatus.ITERATION_CAP
        assert sol.iterations == 1
