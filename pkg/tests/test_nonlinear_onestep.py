import math

import numpy as np
import pytest

from safelearn import conic, geometry, linear_onestep as lo, nonlinear_onestep as nl
from safelearn.geometry import Polyhedron
from safelearn.linear_onestep import MatrixPolytope, MeasurementSet
from safelearn.nonlinear_onestep import NonlinearUncertainty

from instances import random_onestep_instance
from oracles import lifted_vertices

S4 = Polyhedron.box(4)
U0A_52 = MatrixPolytope.entrywise_box(4, -4.0, 8.0)
A_STAR = np.array([[2., 1, 4, 2],
                   [2, -3, -1, -2],
                   [-2, -3, 1, 0],
                   [2, 0, -2, 2]])


def g_star_52(x):
    return 0.05 * np.array([
        x[1] ** 2 - x[2] * x[3],
        np.sqrt(x[0] ** 4 + x[2] ** 4),
        x[2] * np.sin(x[0]) ** 2,
        np.sin(x[1]) ** 2,
    ])


def f_star_52(x):
    return A_STAR @ x + g_star_52(x)


def free_data():
    return MeasurementSet(enforce_independence=False)


class TestBuildNonlinearSocp:
    def test_gamma_zero_matches_linear_lp(self):
        rng = np.random.default_rng(41)
        for _ in range(6):
            S, U0, A_star, data_lin = random_onestep_instance(rng)
            data_nl = free_data()
            for x, y in data_lin:
                data_nl.append(x, y)
            c = rng.normal(size=2)
            U = NonlinearUncertainty(U0, 0.0, math.inf, 0)
            _, v_lin, _ = lo.min_cost_safe_point(S, U0, data_lin, c)
            _, v_nl, _ = nl.min_cost_safe_point(S, U, data_nl, c)
            assert v_nl == pytest.approx(v_lin, abs=1e-7)

    def test_scalar_constant_bound(self):
        # worst case 2|x| + 0.5 <= 1 forces |x| <= 1/4
        S = Polyhedron.box(1)
        U = NonlinearUncertainty(MatrixPolytope.entrywise_box(1, -2.0, 2.0),
                                 0.5, 2, 0)
        x, v, src = nl.min_cost_safe_point(S, U, free_data(), [-1.0])
        assert v == pytest.approx(-0.25, abs=1e-8)
        assert src == "region"

    def test_gamma_monotonicity_of_region(self):
        c = np.array([-1.0, 0.0, 0.0, 0.0])
        values = []
        for gamma in (0.0, 0.4, 0.8):
            U = NonlinearUncertainty(U0A_52, gamma, 2, 0)
            _, v, _ = nl.min_cost_safe_point(S4, U, free_data(), c)
            values.append(v)
        assert values[0] < values[1] < values[2]

    def test_gamma_monotone_over_many_directions(self):
        rng = np.random.default_rng(6)
        U_small = NonlinearUncertainty(U0A_52, 0.2, 2, 0)
        U_big = NonlinearUncertainty(U0A_52, 0.6, 2, 0)
        for _ in range(16):
            c = rng.normal(size=4)
            c /= np.linalg.norm(c)
            _, v_small, _ = nl.min_cost_safe_point(S4, U_small, free_data(), c)
            _, v_big, _ = nl.min_cost_safe_point(S4, U_big, free_data(), c)
            assert v_small <= v_big + 1e-9

    @pytest.mark.parametrize("p", [math.inf, 1.0])
    def test_degree_one_norms_lifted_agrees_with_program(self, p):
        S = Polyhedron.box(2)
        U = NonlinearUncertainty(MatrixPolytope.entrywise_box(2, -1.0, 1.0),
                                 0.3, p, 1)
        c = np.array([-1.0, -0.4])
        x, v, _ = nl.min_cost_safe_point(S, U, free_data(), c)
        lifted = nl.nonlinear_lifted(S, U, free_data())
        assert lifted.satisfied_by(x, tol=1e-7)
        assert -geometry.support(lifted, -c) == pytest.approx(v, abs=1e-7)

    def test_degree_two_socp_against_grid(self):
        # n=1, |a| <= 1, gamma=0.5, p=2, d=2: need |a x| + 0.5 x^2 <= 1
        S = Polyhedron.box(1)
        U = NonlinearUncertainty(MatrixPolytope.entrywise_box(1, -1.0, 1.0),
                                 0.5, 2, 2)
        x, v, _ = nl.min_cost_safe_point(S, U, free_data(), [-1.0])
        grid = np.linspace(0.0, 1.0, 200001)
        feasible = grid[grid + 0.5 * grid ** 2 <= 1.0 + 1e-12]
        assert v == pytest.approx(-feasible.max(), abs=1e-6)

    def test_patch_argument_duals_upper_bound_consistent_systems(self):
        rng = np.random.default_rng(92)
        S, U0, A_star, _ = random_onestep_instance(rng, with_data_prob=0.0)
        gamma = 0.15
        U = NonlinearUncertainty(U0, gamma, 2, 0)
        data = free_data()
        x1 = rng.uniform(-0.2, 0.2, size=2)
        data.append(x1, A_star @ x1 + rng.uniform(-gamma, gamma, size=2))
        c = rng.normal(size=2)
        prog = nl.build_nonlinear_socp(S, U, data, c)
        sol = conic.solve(prog)
        assert sol.status == conic.SolveStatus.OPTIMAL
        x = sol.primal["x"]
        uk = nl.uncertainty_polyhedron(U, data)
        verts = [v.reshape(2, 2) for v in lifted_vertices(uk)]
        assert verts
        for i in range(S.num_facets):
            mu = sol.primal[f"mu[{i}]"]
            etap = np.atleast_2d(sol.primal["eta_plus[%d]" % i])
            etam = np.atleast_2d(sol.primal["eta_minus[%d]" % i])
            w = np.array([U.g_bound(xk) for xk in data.xs])
            ys = np.array(data.ys)
            value = float(mu @ U0.offsets
                          + np.sum((w[:, None] + ys) * etap)
                          + np.sum((w[:, None] - ys) * etam)
                          + gamma * np.abs(S.H[i]).sum())
            for _ in range(250):
                A = verts[rng.integers(0, len(verts))]
                lam = rng.dirichlet(np.ones(len(verts)))
                A = np.tensordot(lam, np.array(verts), axes=1)
                gval = rng.uniform(-gamma, gamma, size=2)
                assert S.H[i] @ (A @ x) + S.H[i] @ gval <= value + 1e-5

    def test_infeasible_without_data_raises(self):
        S = Polyhedron.from_inequalities([[1.0], [-1.0]], [2.0, -1.0])
        U = NonlinearUncertainty(MatrixPolytope.entrywise_box(1, -5.0, 5.0),
                                 0.1, 2, 0)
        with pytest.raises(lo.InfeasibleRegionError):
            nl.min_cost_safe_point(S, U, free_data(), [-1.0])

    def test_measured_point_wins_when_cheaper(self):
        # data point far in the cost direction beats the certified region
        S = Polyhedron.box(1)
        U = NonlinearUncertainty(MatrixPolytope.entrywise_box(1, -2.0, 2.0),
                                 0.5, 2, 0)
        data = free_data()
        data.append(np.array([0.4]), np.array([0.6]))  # observed safe pair
        x, v, src = nl.min_cost_safe_point(S, U, data, [-1.0])
        assert src == "measured"
        assert x[0] == pytest.approx(0.4)


class TestSafeExplore:
    def test_thirty_safe_steps(self):
        U = NonlinearUncertainty(U0A_52, 0.1, 2, 0)
        rng = np.random.default_rng(9)

        def sampler(_):
            d = rng.normal(size=4)
            return d / np.linalg.norm(d)

        log = nl.safe_explore(S4, U, sampler, 30, f_star_52)
        assert len(log.steps) == 30
        for rec in log.steps:
            assert geometry.margin(S4, rec.query) >= -1e-6
            assert geometry.margin(S4, rec.observations[0]) >= -1e-6

    def test_regions_nest_as_data_grows(self):
        U = NonlinearUncertainty(U0A_52, 0.1, 2, 0)
        rng = np.random.default_rng(9)
        log = nl.safe_explore(S4, U, lambda _: rng.normal(size=4), 10, f_star_52)
        polys = []
        for k in range(len(log.steps) + 1):
            data = MeasurementSet(
                ((r.query, r.observations[0]) for r in log.steps[:k]),
                enforce_independence=False)
            polys.append(nl.region_polygon(S4, U, data, (0, 1), K=32))
        for k in range(1, len(polys)):
            assert polys[k].contains_polygon(polys[k - 1], tol=1e-6)

    def test_logged_points_stay_feasible_for_longer_prefixes(self):
        U = NonlinearUncertainty(U0A_52, 0.1, 2, 0)
        rng = np.random.default_rng(9)
        log = nl.safe_explore(S4, U, lambda _: rng.normal(size=4), 8, f_star_52)
        queries = [r.query for r in log.steps]
        obs = [r.observations[0] for r in log.steps]
        for k in range(len(queries) + 1):
            data = MeasurementSet(zip(queries[:k], obs[:k]),
                                  enforce_independence=False)
            lifted = nl.nonlinear_lifted(S4, U, data)
            for j in range(min(k + 1, len(queries))):
                assert lifted.satisfied_by(queries[j], tol=1e-6), (k, j)

    def test_single_step_singleton_prior_is_one_lp(self):
        U = NonlinearUncertainty(MatrixPolytope.exactly(np.eye(2) * 0.5),
                                 0.0, 2, 0)
        log = nl.safe_explore(Polyhedron.box(2), U,
                              lambda _: np.array([-1.0, 0.0]), 1,
                              lambda x: 0.5 * x)
        assert len(log.steps) == 1
        assert log.steps[0].query[0] == pytest.approx(1.0, abs=1e-7)


class TestFits:
    def exact_quadratic_data(self, rng, count=12):
        A = rng.normal(size=(3, 3)) * 0.3
        G = [np.diag(rng.normal(size=3)) * 0.1 for _ in range(3)]
        model = nl.QuadraticVectorModel(A, G)
        data = free_data()
        for _ in range(count):
            x = rng.uniform(-1, 1, size=3)
            data.append(x, model.predict(x))
        return model, data

    def test_exact_data_recovered_with_zero_loss(self):
        rng = np.random.default_rng(14)
        model, data = self.exact_quadratic_data(rng)
        fit = nl.fit_least_squares(data)
        for x, y in data:
            np.testing.assert_allclose(fit.predict(x), y, atol=1e-8)

    def test_single_point_interpolates(self):
        data = free_data()
        data.append(np.array([0.5, -0.25]), np.array([1.0, 2.0]))
        fit = nl.fit_least_squares(data)
        np.testing.assert_allclose(fit.predict([0.5, -0.25]), [1.0, 2.0],
                                   atol=1e-9)

    def test_eight_point_underdetermined_interpolation(self):
        rng = np.random.default_rng(10)
        data = free_data()
        for _ in range(8):
            x = rng.uniform(-0.5, 0.5, size=4)
            data.append(x, f_star_52(x))
        fit = nl.fit_least_squares(data)
        loss = sum(np.sum((fit.predict(x) - y) ** 2) for x, y in data)
        assert loss < 1e-10

    def test_sos_fit_on_true_system_is_feasible_and_bounded(self):
        U = NonlinearUncertainty(U0A_52, 0.1, 2, 0)
        rng = np.random.default_rng(9)
        log = nl.safe_explore(S4, U, lambda _: rng.normal(size=4), 8, f_star_52)
        data = MeasurementSet(((r.query, r.observations[0]) for r in log.steps),
                              enforce_independence=False)
        model, cert = nl.fit_sos_constrained(data, S4, U)
        eig, resid = nl.validate_sos_certificate(model, cert, S4, U.gamma)
        assert eig >= -1e-8 and resid <= 1e-7
        samples = rng.uniform(-1, 1, size=(1000, 4))
        for z in samples:
            assert np.max(np.abs(model.g(z))) <= U.gamma + 1e-6

    def test_large_gamma_matches_unconstrained_loss(self):
        rng = np.random.default_rng(15)
        _, data = self.exact_quadratic_data(rng, count=14)
        S3 = Polyhedron.box(3)
        U = NonlinearUncertainty(MatrixPolytope.entrywise_box(3, -10.0, 10.0),
                                 10.0, 2, 0)
        fit_ls = nl.fit_least_squares(data)
        loss_ls = sum(np.sum((fit_ls.predict(x) - y) ** 2) for x, y in data)
        fit_sos, _ = nl.fit_sos_constrained(data, S3, U)
        loss_sos = sum(np.sum((fit_sos.predict(x) - y) ** 2) for x, y in data)
        assert loss_sos <= loss_ls + 1e-6

    def test_contradictory_data_infeasible(self):
        S = Polyhedron.box(2)
        U = NonlinearUncertainty(MatrixPolytope.entrywise_box(2, -1.0, 1.0),
                                 0.05, 2, 0)
        data = free_data()
        data.append(np.array([1.0, 0.0]), np.array([5.0, 0.0]))  # unreachable
        with pytest.raises(lo.InfeasibleRegionError):
            nl.fit_sos_constrained(data, S, U)

    def test_sos_rmse_beats_unconstrained_on_safe_data(self):
        U = NonlinearUncertainty(U0A_52, 0.1, 2, 0)
        rng = np.random.default_rng(9)
        log = nl.safe_explore(S4, U, lambda _: rng.normal(size=4), 8, f_star_52)
        data = MeasurementSet(((r.query, r.observations[0]) for r in log.steps),
                              enforce_independence=False)
        fit_ls = nl.fit_least_squares(data)
        fit_sos, _ = nl.fit_sos_constrained(data, S4, U)
        test_rng = np.random.default_rng(42)
        test = test_rng.uniform(-1, 1, size=(1000, 4))
        r_ls = nl.rmse(fit_ls, f_star_52, test)
        r_sos = nl.rmse(fit_sos, f_star_52, test)
        assert r_sos < r_ls


class TestRmse:
    def test_perfect_model(self):
        model = nl.QuadraticVectorModel(np.eye(2), [np.zeros((2, 2))] * 2)
        pts = np.random.default_rng(0).uniform(-1, 1, size=(50, 2))
        assert nl.rmse(model, lambda z: z, pts) == pytest.approx(0.0, abs=1e-12)

    def test_constant_offset(self):
        model = nl.QuadraticVectorModel(np.eye(2), [np.zeros((2, 2))] * 2)
        delta = 0.37
        oracle = lambda z: z - np.array([delta, 0.0])
        pts = np.random.default_rng(1).uniform(-1, 1, size=(64, 2))
        assert nl.rmse(model, oracle, pts) == pytest.approx(delta, rel=1e-12)

    def test_empty_test_set_rejected(self):
        model = nl.QuadraticVectorModel(np.eye(2), [np.zeros((2, 2))] * 2)
        with pytest.raises(ValueError):
            nl.rmse(model, lambda z: z, np.zeros((0, 2)))


class TestModelFiles:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(21)
        A = rng.normal(size=(3, 3))
        G = [(lambda M: (M + M.T) / 2)(rng.normal(size=(3, 3))) for _ in range(3)]
        model = nl.QuadraticVectorModel(A, G)
        path = tmp_path / "model.txt"
        nl.write_model(model, path)
        back = nl.read_model(path)
        np.testing.assert_allclose(back.A, model.A)
        for Gb, Gm in zip(back.G, model.G):
            np.testing.assert_allclose(Gb, Gm)

    def test_header_check(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("something else\n")
        with pytest.raises(ValueError):
            nl.read_model(path)
