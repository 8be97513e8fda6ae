"""Acceptance gate: every criterion at its stated tolerance, one
pass/fail line each (run with -s to see the lines as they pass)."""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from safelearn import (conic, geometry, harness, linear_onestep as lo,
                       linear_twostep as lt, nonlinear_onestep as nl)
from safelearn.cli import resolve_config
from safelearn.geometry import Polyhedron
from safelearn.linear_onestep import MeasurementSet

from instances import random_onestep_instance, uncertainty_vertices
from oracles import (bruteforce_onestep_optimum, singleton_by_vertices,
                     span_rank_by_vertices)


@contextmanager
def criterion(num: int, label: str):
    start = time.time()
    try:
        yield
    except Exception:
        print(f"[criterion {num}] FAIL: {label}")
        raise
    print(f"[criterion {num}] PASS: {label} ({time.time() - start:.1f}s)")


@pytest.fixture(scope="module")
def run52():
    config = resolve_config("example-5-2")
    start = time.time()
    log = harness.run(config)
    return config, log, time.time() - start


@pytest.fixture(scope="module")
def sos_fit_52(run52):
    config, log, _ = run52
    S = config.safety_polyhedron()
    U = config.nonlinear_prior()
    data = MeasurementSet(
        ((r.query, r.observations[0]) for r in log.steps[:8]),
        enforce_independence=False)
    model_ls = nl.fit_least_squares(data)
    model_sos, cert = nl.fit_sos_constrained(data, S, U)
    return model_ls, model_sos, cert, S, U


def test_criterion_1_section_3_4_reproduction():
    with criterion(1, "section 3.4 linear one-step reproduction"):
        start = time.time()
        config = resolve_config("example-3-4")
        A_star = np.asarray(config.true_system["A"], dtype=float)
        log = harness.run(config, snapshots=False)
        assert log.outcome["result"] == "learned"
        A_hat = np.asarray(log.outcome["matrix"], dtype=float)
        assert np.linalg.norm(A_hat - A_star) <= 1e-6
        assert len(log.steps) == 4

        S = config.safety_polyhedron()
        c = config.cost_vector()
        offline = lo.offline_cost_bound(S, config.matrix_prior(), c)
        lower = lo.cost_lower_bound(S, A_star, c, 4)
        online = log.total_cost
        assert offline == pytest.approx(-1.0, abs=1e-3)
        assert lower == pytest.approx(-2.2264, abs=1e-3)
        assert lower - 1e-9 <= online <= offline + 1e-9
        deviation = abs(online - (-1.6385))
        print(f"  online cost {online:.4f} "
              f"(paper -1.6385, deviation {deviation:.4f}; "
              f"sandwich [{lower:.4f}, {offline:.4f}] holds)")
        assert time.time() - start <= 10.0


def test_criterion_2_impossibility_detection():
    with criterion(2, "impossibility detected identically for every epsilon"):
        start = time.time()
        config = resolve_config("example-impossible")
        S = config.safety_polyhedron()
        U0 = config.matrix_prior()
        A_true = np.asarray(config.true_system["A"], dtype=float)
        verdicts = []
        for eps in (0.01, 0.5, 1.0):
            out = lo.learn_online(S, U0, config.cost_vector(), eps,
                                  lambda x: A_true @ x)
            verdicts.append(out.learned)
        assert verdicts == [False, False, False]
        assert time.time() - start <= 5.0


def test_criterion_3_section_4_2_reproduction():
    with criterion(3, "section 4.2 two-step reproduction"):
        start = time.time()
        config = resolve_config("example-4-2")
        A_star = np.asarray(config.true_system["A"], dtype=float)
        S = config.safety_polyhedron()
        U0 = config.ellipsoid_prior()
        c = config.cost_vector()
        out = lt.learn_two_step(S, U0, c, lambda x: (A_star @ x,
                                                     A_star @ (A_star @ x)))
        assert out.learned
        assert out.measurements_used == 2
        assert np.linalg.norm(out.matrix - A_star) <= 1e-6
        online = out.log.total_cost
        offline = lt.two_step_offline_bound(S, U0, c)
        lower = lt.two_step_lower_bound(S, A_star, c)
        assert online == pytest.approx(-0.1508, abs=1e-2)
        assert offline == pytest.approx(-0.1099, abs=1e-2)
        assert lower == pytest.approx(-0.2097, abs=1e-2)
        print(f"  online {online:.4f}, offline {offline:.4f}, lower {lower:.4f}")
        assert time.time() - start <= 60.0


def test_criterion_4_section_5_2_safety_and_nesting(run52):
    with criterion(4, "section 5.2 thirty-step safe exploration"):
        config, log, elapsed = run52
        assert len(log.steps) == 30
        S = config.safety_polyhedron()
        report = harness.audit(log, S, tol=1e-6)
        assert report.passed
        assert report.worst_margin >= -1e-6
        for k in range(1, 31):
            assert log.region_snapshots[k].contains_polygon(
                log.region_snapshots[k - 1], tol=1e-6), k
        print(f"  worst margin {report.worst_margin:.4f}, run time {elapsed:.1f}s")
        assert elapsed <= 120.0


def test_criterion_5_gamma_monotone_regions():
    with criterion(5, "initial safe region shrinks as gamma grows"):
        config = resolve_config("example-5-2")
        S = config.safety_polyhedron()
        polys = []
        for gamma in (0.0, 0.4, 0.8):
            config.uncertainty = {**config.uncertainty, "gamma": gamma}
            U = config.nonlinear_prior()
            data = MeasurementSet(enforce_independence=False)
            polys.append(nl.region_polygon(S, U, data, (0, 1), K=64))
        assert polys[0].contains_polygon(polys[1], tol=1e-6)
        assert polys[1].contains_polygon(polys[2], tol=1e-6)


def test_criterion_6_fitting_rmse_ordering(run52, sos_fit_52):
    with criterion(6, "SOS-constrained fit beats unconstrained fit"):
        config, _, _ = run52
        model_ls, model_sos, _, S, _ = sos_fit_52
        sys_ = config.system()
        rng = np.random.default_rng(int(config.seeds["test_points"]))
        test = harness.sample_in_polyhedron(S, 1000, rng)
        oracle = lambda z: harness.observe(sys_, z, 1)
        rmse_ls = nl.rmse(model_ls, oracle, test)
        rmse_sos = nl.rmse(model_sos, oracle, test)
        print(f"  RMSE unconstrained {rmse_ls:.4f}, SOS-constrained {rmse_sos:.4f} "
              f"(paper: 0.2567 / 0.0851, seed-dependent)")
        assert rmse_sos < rmse_ls
        assert 0.02 <= rmse_sos <= 0.5
        assert 0.02 <= rmse_ls <= 0.5


def test_criterion_7_oracle_equivalence():
    with criterion(7, "randomized oracle equivalence suite"):
        start = time.time()
        rng = np.random.default_rng(2024)

        # (a) singleton and span bases against vertex enumeration
        for trial in range(50):
            p = int(rng.integers(0, 2))
            dim = 2 + p
            rows = np.vstack([np.eye(dim), -np.eye(dim)])
            rhs = rng.uniform(0.4, 1.4, size=2 * dim)
            extra = int(rng.integers(0, 2))
            if extra:
                h = rng.normal(size=dim)
                rows = np.vstack([rows, h / np.linalg.norm(h)])
                rhs = np.concatenate([rhs, [rng.uniform(0.2, 1.0)]])
            if trial % 4 == 0:  # pin to a point
                z0 = rng.uniform(-0.2, 0.2, size=dim)
                rows = np.vstack([rows, np.eye(dim), -np.eye(dim)])
                rhs = np.concatenate([rhs, z0, -z0])
            if trial % 4 == 1:  # restrict to a line through the origin
                h = rng.normal(size=dim)
                rows = np.vstack([rows, h, -h])
                rhs = np.concatenate([rhs, [0.0, 0.0]])
            P = geometry.LiftedPolyhedron(rows[:, :2], rows[:, 2:], rhs)
            kind, point = singleton_by_vertices(P)
            got = geometry.is_singleton(P)
            assert got.kind == kind, f"(a) trial {trial}"
            if kind == "singleton":
                np.testing.assert_allclose(got.point, point, atol=1e-6)
            basis = geometry.span_basis(P)
            assert len(basis) == span_rank_by_vertices(P), f"(a) trial {trial}"
            for v in basis:
                assert P.satisfied_by(v, tol=1e-7)

        # (b) one-step LP against brute force over vertex-enumerated U_k
        # (d) gamma = 0 nonlinear program equals the linear LP
        for trial in range(50):
            S, U0, A_star, data = random_onestep_instance(rng)
            verts = uncertainty_vertices(U0, data)
            c = rng.normal(size=2)
            expected = bruteforce_onestep_optimum(S, verts, c)
            assert expected is not None
            x, v, _ = lo.min_cost_safe_point(S, U0, data, c)
            assert v == pytest.approx(expected[0], abs=1e-6), f"(b) trial {trial}"
            data_free = MeasurementSet(iter(data), enforce_independence=False)
            U_zero = nl.NonlinearUncertainty(U0, 0.0, math.inf, 0)
            _, v_nl, _ = nl.min_cost_safe_point(S, U_zero, data_free, c)
            assert v_nl == pytest.approx(v, abs=1e-7), f"(d) trial {trial}"

        # (c) scalar two-step SDP against the analytic safe bound
        S1 = Polyhedron.box(1)
        for trial in range(10):
            center = rng.uniform(-2.0, 2.0)
            radius = rng.uniform(0.1, 1.0)
            U = lt.EllipsoidalMatrixUncertainty(
                conic.QuadraticForm([[1.0]], [-2.0 * center],
                                    center ** 2 - radius ** 2), 1)
            amax = max(abs(center - radius), abs(center + radius))
            expected = -min(1.0, 1.0 / amax, 1.0 / amax ** 2)
            _, v, _, _ = lt.min_cost_twostep_point(S1, U, lt.TwoStepData(), [-1.0])
            assert v == pytest.approx(expected, abs=1e-4), f"(c) trial {trial}"

        assert time.time() - start <= 300.0


def test_criterion_8_certificate_suite(sos_fit_52):
    with criterion(8, "S-lemma and SOS certificates pass PSD checks"):
        # S-lemma blocks on the bundled 4.2 instance, both solves
        config = resolve_config("example-4-2")
        A_star = np.asarray(config.true_system["A"], dtype=float)
        S = config.safety_polyhedron()
        U0 = config.ellipsoid_prior()
        c = config.cost_vector()
        data = lt.TwoStepData()
        for _ in range(2):
            prog = lt.build_twostep_sdp(S, U0, data, c)
            sol = conic.solve(prog)
            assert sol.status == conic.SolveStatus.OPTIMAL
            eig = lt.validate_certificate(prog, eig_tol=1e-6)
            assert eig >= -1e-6
            cert = lt.certificate_from_solution(sol)
            assert np.all(cert.lam1 >= -1e-9) and np.all(cert.lam2 >= -1e-9)
            x = sol.primal["x"]
            data.append(x, A_star @ x, A_star @ (A_star @ x))

        # scalar instance blocks
        U1 = lt.EllipsoidalMatrixUncertainty(
            conic.QuadraticForm([[1.0]], [-3.0], 2.0), 1)
        _, _, _, prog1 = lt.min_cost_twostep_point(Polyhedron.box(1), U1,
                                                   lt.TwoStepData(), [-1.0])
        assert lt.validate_certificate(prog1, eig_tol=1e-6) >= -1e-6

        # SOS certificate from the criterion-6 fit
        _, model_sos, cert52, S52, U52 = sos_fit_52
        eig, resid = nl.validate_sos_certificate(model_sos, cert52, S52,
                                                 U52.gamma, eig_tol=1e-6,
                                                 identity_tol=1e-7)
        print(f"  SOS Gram min eig {eig:.2e}, identity residual {resid:.2e}")
        assert eig >= -1e-6
        assert resid <= 1e-7
