"""One-step safe queries for ``x+ = A x + g(x)`` with a polytopic prior on
A and a norm bound ``||g(x)||_inf <= gamma ||x||_p^d`` on the nonlinearity,
plus quadratic model fitting with sum-of-squares side constraints.

The worst case over (A, g) splits into a matrix part, dualized exactly as
in the linear one-step LP with the measurement equalities relaxed to
gamma-slabs, and a nonlinearity part whose value is the dual-norm term
``gamma ||h_i||_1 ||x||_p^d``. The resulting program is linear for d = 0
(or d = 1 with p in {1, inf}) and a second-order cone program otherwise.
Already-measured points stay safe to re-query even when the program
cannot certify them, so the optimizer reports the better of the program
optimum and the cheapest measured point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cvxpy as cp
import numpy as np
import scipy.sparse as spa

from . import conic, geometry
from .conic import ConicProgram, SolveSettings, SolveStatus
from .geometry import LiftedPolyhedron, Polygon2D, Polyhedron
from .harness import RunLog, StepRecord
from .linear_onestep import (InfeasibleRegionError, MatrixPolytope,
                             MeasurementSet, SafetyViolationError, _vt_flat)

DUPLICATE_TOL = 1e-8
MAX_RETRIES = 10


class ExplorationStalled(RuntimeError):
    def __init__(self, message: str, log: RunLog | None = None):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class NonlinearUncertainty:
    """Prior knowledge: A in a matrix polytope, g bounded on S."""

    U0A: MatrixPolytope
    gamma: float
    p: float = math.inf
    d: int = 0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.p != math.inf and self.p < 1:
            raise ValueError("p must be >= 1 or inf")
        if self.d < 0 or self.d != int(self.d):
            raise ValueError("d must be a nonnegative integer")

    @property
    def n(self) -> int:
        return self.U0A.n

    def g_bound(self, x) -> float:
        """gamma * ||x||_p^d."""
        x = np.asarray(x, dtype=float)
        if self.d == 0:
            return self.gamma
        if self.p == math.inf:
            base = float(np.max(np.abs(x)))
        else:
            base = float(np.sum(np.abs(x) ** self.p) ** (1.0 / self.p))
        return self.gamma * base ** self.d

    @property
    def lp_representable(self) -> bool:
        return (self.gamma == 0.0 or self.d == 0
                or (self.d == 1 and self.p in (1.0, math.inf)))


def build_nonlinear_socp(S: Polyhedron, U: NonlinearUncertainty,
                         data: MeasurementSet, c) -> ConicProgram:
    """Program whose x-projection F certifies one-step safety off the data.

    Per facet: multipliers mu^(i) >= 0 for the prior rows and
    eta+/-^(i) >= 0 for the per-coordinate slabs that the measurements
    impose on A, tied by the same matrix equality as the linear LP; the
    nonlinearity contributes gamma ||h_i||_1 t with t >= ||x||_p^d.
    The feasible set of the safe-query problem is F together with the
    already-measured points.
    """
    n = S.dimension
    if U.n != n:
        raise ValueError("prior dimension disagrees with safety region")
    c = np.asarray(c, dtype=float)
    H, b = S.H, S.b
    m = len(data)
    X = np.array(data.xs).reshape(m, n)
    Y = np.array(data.ys).reshape(m, n)
    w = np.array([U.g_bound(x) for x in data.xs])  # gamma ||x_k||_p^d
    vt = _vt_flat(U.U0A)
    h1 = np.abs(H).sum(axis=1)

    prog = ConicProgram("nonlinear_onestep")
    x = prog.vector("x", n)
    gamma_term = None
    if U.gamma > 0.0 and U.d > 0:
        t = conic.pnorm_power_epigraph(prog, x, U.p, U.d, name="t")
        gamma_term = lambda i: U.gamma * h1[i] * t
    elif U.gamma > 0.0:  # d == 0: ||x||^0 = 1
        gamma_term = lambda i: U.gamma * h1[i]

    prog.add_inequality("x_in_S", H @ x, b)
    for i in range(S.num_facets):
        mu = prog.vector(f"mu[{i}]", U.U0A.num_constraints, nonneg=True)
        worst = mu @ U.U0A.offsets
        match = cp.reshape(mu @ vt, (n, n), order="C")
        if m:
            etap = prog.matrix(f"eta_plus[{i}]", (m, n), nonneg=True)
            etam = prog.matrix(f"eta_minus[{i}]", (m, n), nonneg=True)
            worst = worst + cp.sum(cp.multiply(w[:, None] + Y, etap))
            worst = worst + cp.sum(cp.multiply(w[:, None] - Y, etam))
            match = match + X.T @ (etap - etam)
        if gamma_term is not None:
            worst = worst + gamma_term(i)
        prog.add_inequality(f"worst_case[{i}]", worst, b[i])
        prog.add_equality(f"dual_match[{i}]", cp.outer(x, H[i]), match)
    prog.minimize(c @ x)
    return prog


def nonlinear_lifted(S: Polyhedron, U: NonlinearUncertainty,
                     data: MeasurementSet) -> LiftedPolyhedron:
    """The feasible set F as raw inequalities, for the LP-representable
    cases (d = 0, or d = 1 with p in {1, inf}, or gamma = 0)."""
    if not U.lp_representable:
        raise ValueError("only LP-representable uncertainties have a lifted form")
    n = S.dimension
    r = S.num_facets
    s = U.U0A.num_constraints
    m = len(data)
    H, b = S.H, S.b
    X = np.array(data.xs).reshape(m, n)
    Y = np.array(data.ys).reshape(m, n)
    w = np.array([U.g_bound(x) for x in data.xs])
    h1 = np.abs(H).sum(axis=1)
    gamma_on = U.gamma > 0.0 and U.d > 0

    # Columns: x(n) | per-facet [mu(s), eta+(mn), eta-(mn)] | norm lift.
    blk = s + 2 * m * n
    aux = 0
    if gamma_on:
        aux = 1 if U.p == math.inf else 1 + n  # t, plus u >= |x| for p = 1
    width = n + r * blk + aux
    t_col = n + r * blk
    u_col = t_col + 1

    rows, cols, vals, rhs = [], [], [], []
    rid = 0

    def add(entries, rv):
        nonlocal rid
        for ccol, vv in entries:
            if vv:
                rows.append(rid)
                cols.append(ccol)
                vals.append(vv)
        rhs.append(rv)
        rid += 1

    for i in range(r):
        add([(a, H[i, a]) for a in range(n)], b[i])
    for i in range(r):
        off = n + i * blk
        scalar = [(off + j, U.U0A.offsets[j]) for j in range(s)]
        for k in range(m):
            for l in range(n):
                scalar.append((off + s + k * n + l, w[k] + Y[k, l]))
                scalar.append((off + s + m * n + k * n + l, w[k] - Y[k, l]))
        bi = b[i]
        if U.gamma > 0.0 and U.d == 0:
            bi = bi - U.gamma * h1[i]
        elif gamma_on:
            scalar.append((t_col, U.gamma * h1[i]))
        add(scalar, bi)
        for a in range(n):
            for ccol in range(n):
                ent = [(a, H[i, ccol])]
                for j in range(s):
                    ent.append((off + j, -U.U0A.mats[j][ccol, a]))
                for k in range(m):
                    ent.append((off + s + k * n + ccol, -X[k, a]))
                    ent.append((off + s + m * n + k * n + ccol, X[k, a]))
                add(list(ent), 0.0)
                add([(col, -v) for col, v in ent], 0.0)
        for j in range(s + 2 * m * n):
            add([(off + j, -1.0)], 0.0)

    if gamma_on and U.p == math.inf:  # t >= +-x_a
        for a in range(n):
            add([(a, 1.0), (t_col, -1.0)], 0.0)
            add([(a, -1.0), (t_col, -1.0)], 0.0)
    elif gamma_on:  # p == 1: u_a >= +-x_a, t >= sum u
        for a in range(n):
            add([(a, 1.0), (u_col + a, -1.0)], 0.0)
            add([(a, -1.0), (u_col + a, -1.0)], 0.0)
        add([(u_col + a, 1.0) for a in range(n)] + [(t_col, -1.0)], 0.0)

    A_full = spa.csr_matrix((vals, (rows, cols)), shape=(rid, width))
    return LiftedPolyhedron(A_full[:, :n], A_full[:, n:], np.array(rhs))


def uncertainty_polyhedron(U: NonlinearUncertainty,
                           data: MeasurementSet) -> LiftedPolyhedron:
    """Matrices consistent with the prior and the gamma-slab constraints
    ``|(A x_k - y_k)_l| <= gamma ||x_k||_p^d``, over vec(A)."""
    n = U.n
    rows = [V.ravel() for V in U.U0A.mats]
    rhs = list(U.U0A.offsets)
    for x, y in data:
        bound = U.g_bound(x)
        for l in range(n):
            row = np.zeros(n * n)
            row[l * n:(l + 1) * n] = x
            rows.append(row)
            rhs.append(y[l] + bound)
            rows.append(-row)
            rhs.append(bound - y[l])
    return LiftedPolyhedron(np.array(rows), np.zeros((len(rows), 0)),
                            np.array(rhs))


def min_cost_safe_point(S: Polyhedron, U: NonlinearUncertainty,
                        data: MeasurementSet, c,
                        settings: SolveSettings | None = None):
    """Cheapest safe query over F union the measured points.

    Returns ``(x, value, source)`` with source "region" or "measured";
    re-querying a measured point carries no new risk, so it competes with
    the program optimum on cost alone.
    """
    c = np.asarray(c, dtype=float)
    best_measured = None
    if len(data):
        costs = [float(c @ x) for x in data.xs]
        idx = int(np.argmin(costs))
        best_measured = (data.xs[idx], costs[idx])

    prog = build_nonlinear_socp(S, U, data, c)
    sol = conic.solve(prog, settings)
    if sol.status == SolveStatus.OPTIMAL:
        x, value = sol.primal["x"], sol.objective_value
        if best_measured is not None and best_measured[1] < value:
            return best_measured[0], best_measured[1], "measured"
        return x, value, "region"
    if sol.status == SolveStatus.INFEASIBLE:
        if best_measured is not None:
            return best_measured[0], best_measured[1], "measured"
        raise InfeasibleRegionError("no one-step safe query exists")
    raise conic.ConicError(f"nonlinear program not solved: {sol.status.name}")


def region_polygon(S: Polyhedron, U: NonlinearUncertainty, data: MeasurementSet,
                   dims: tuple[int, int], K: int = geometry.DEFAULT_DIRECTIONS,
                   settings: SolveSettings | None = None) -> Polygon2D:
    """2-D projection of F; LP fast path when available, else per-direction
    cone solves with a shared parametrized objective."""
    if U.lp_representable:
        return geometry.project2d(nonlinear_lifted(S, U, data), dims, K)
    prog = build_nonlinear_socp(S, U, data, np.zeros(S.dimension))
    x = prog.variables["x"]
    direction = cp.Parameter(S.dimension, name="direction")
    prog.minimize(direction @ x)
    angles = 2.0 * np.pi * np.arange(K) / K
    dirs2 = np.column_stack([np.cos(angles), np.sin(angles)])
    supports = np.empty(K)
    i, j = dims
    for k, d2 in enumerate(dirs2):
        d = np.zeros(S.dimension)
        d[i], d[j] = d2
        direction.value = -d
        sol = conic.solve(prog, settings)
        if sol.status == SolveStatus.INFEASIBLE:
            supports[k] = -math.inf
        elif sol.status == SolveStatus.OPTIMAL:
            supports[k] = -sol.objective_value
        else:
            raise conic.ConicError(f"support solve failed: {sol.status.name}")
    return geometry.polygon_from_supports(dirs2, supports)


def safe_explore(S: Polyhedron, U: NonlinearUncertainty, c_sampler, steps: int,
                 oracle, *, settings: SolveSettings | None = None,
                 safety_tol: float = 1e-6, max_retries: int = MAX_RETRIES) -> RunLog:
    """Query `steps` one-step safe points, resampling the cost direction
    whenever a step is infeasible or lands on an already-measured point."""
    if steps < 1:
        raise ValueError("need at least one exploration step")
    n = S.dimension
    data = MeasurementSet(enforce_independence=False)
    log = RunLog(mode="nonlinear1")

    for step in range(steps):
        chosen = None
        for _attempt in range(max_retries):
            cvec = np.asarray(c_sampler(step), dtype=float)
            try:
                x, value, source = min_cost_safe_point(S, U, data, cvec, settings)
            except InfeasibleRegionError:
                continue
            if source == "measured":
                continue
            if len(data) and min(np.linalg.norm(x - xk, ord=np.inf)
                                 for xk in data.xs) <= DUPLICATE_TOL:
                continue
            chosen = (x, cvec)
            break
        if chosen is None:
            raise ExplorationStalled(
                f"no informative safe query found at step {step}", log)
        x, cvec = chosen
        if not geometry.contains(S, x, safety_tol):
            raise SafetyViolationError("chosen query left the safety region", log)
        y = np.asarray(oracle(x), dtype=float)
        if not geometry.contains(S, y, safety_tol):
            raise SafetyViolationError(
                "observation left the safety region (model mismatch)", log)
        data.append(x, y)
        step_cost = float(cvec @ x)
        log.add_step(StepRecord(
            k=step, query=x, observations=(y,), step_cost=step_cost,
            cumulative_cost=log.total_cost + step_cost,
            extras={"cost_direction": cvec}))
    log.outcome = {"result": "explored", "steps": steps}
    return log


# -- model fitting -----------------------------------------------------------


def _monomial_pairs(n: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(n) for b in range(a, n)]


def _quad_features(x, pairs) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.array([x[a] * x[b] for a, b in pairs])


@dataclass
class QuadraticVectorModel:
    """``f(x) = A x + g(x)`` with each g_j a homogeneous quadratic x'G_j x."""

    A: np.ndarray
    G: list[np.ndarray]

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.G = [np.asarray(G, dtype=float) for G in self.G]
        for G in self.G:
            if not np.allclose(G, G.T, atol=1e-10):
                raise ValueError("quadratic coefficient matrices must be symmetric")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def g(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([x @ G @ x for G in self.G])

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.A @ x + self.g(x)


def fit_least_squares(data: MeasurementSet) -> QuadraticVectorModel:
    """Unconstrained least squares over (A, G); minimum-norm coefficients
    when the interpolation system is rank deficient."""
    if len(data) == 0:
        raise ValueError("need at least one measurement")
    n = data.xs[0].shape[0]
    pairs = _monomial_pairs(n)
    F = np.hstack([np.array(data.xs),
                   np.array([_quad_features(x, pairs) for x in data.xs])])
    Y = np.array(data.ys)
    theta, *_ = np.linalg.lstsq(F, Y, rcond=None)  # (n + |pairs|, n)
    A = theta[:n].T
    G = []
    for j in range(n):
        Gj = np.zeros((n, n))
        for idx, (a, b) in enumerate(pairs):
            coef = theta[n + idx, j]
            if a == b:
                Gj[a, a] = coef
            else:
                Gj[a, b] = Gj[b, a] = coef / 2.0
        G.append(Gj)
    return QuadraticVectorModel(A, G)


@dataclass(frozen=True)
class SOSCertificate:
    """Gram matrices sigma_i^{j,+-} proving |g_j| <= gamma on S."""

    grams: dict  # (j, sign, i) -> (n+1, n+1) ndarray, i = 0 meaning sigma_0

    def min_eigenvalue(self) -> float:
        return min(float(np.linalg.eigvalsh((G + G.T) / 2.0)[0])
                   for G in self.grams.values())


def _sigma_coeffs(Q, n: int) -> dict:
    """Polynomial coefficients of sigma(x) = z' Q z with z = (1, x)."""
    out = {(0,) * n: Q[0, 0]}
    for a in range(n):
        key = tuple(1 if i == a else 0 for i in range(n))
        out[key] = 2 * Q[0, a + 1]
    for a in range(n):
        for b in range(a, n):
            key = tuple((1 if i == a else 0) + (1 if i == b else 0)
                        for i in range(n))
            out[key] = Q[a + 1, a + 1] if a == b else 2 * Q[a + 1, b + 1]
    return out


def _poly_mul_affine(coeffs: dict, const: float, lin: np.ndarray, n: int) -> dict:
    """Multiply a coefficient dict by the affine polynomial const + lin . x."""
    out: dict = {}

    def acc(key, expr):
        out[key] = out.get(key, 0) + expr

    for key, expr in coeffs.items():
        if const:
            acc(key, const * expr)
        for a in range(n):
            if lin[a]:
                bumped = list(key)
                bumped[a] += 1
                acc(tuple(bumped), lin[a] * expr)
    return out


def _quadratic_coeffs(G, n: int, sign: float) -> dict:
    """Coefficients of sign * x' G x."""
    out: dict = {}
    for a in range(n):
        for b in range(a, n):
            key = tuple((1 if i == a else 0) + (1 if i == b else 0)
                        for i in range(n))
            out[key] = sign * (G[a, a] if a == b else 2 * G[a, b])
    return out


def fit_sos_constrained(data: MeasurementSet, S: Polyhedron,
                        U: NonlinearUncertainty,
                        settings: SolveSettings | None = None):
    """Least squares subject to the prior: A in the matrix polytope, the
    gamma-slabs at every data point, and |g_j(x)| <= gamma certified on S
    by sum-of-squares multipliers against the facet cuts.

    Only the d = 0 (constant bound) certificate is supported; higher d
    would need higher-degree multipliers. Returns the fitted model and
    the Gram certificate. Raises InfeasibleRegionError when the data
    contradict the prior.
    """
    if U.d != 0:
        raise ValueError("SOS-constrained fitting supports d = 0 only")
    if len(data) == 0:
        raise ValueError("need at least one measurement")
    n = S.dimension
    r = S.num_facets
    gamma = U.gamma
    H, b = S.H, S.b
    pairs = _monomial_pairs(n)

    prog = ConicProgram("sos_fit")
    A = prog.matrix("A", (n, n))
    G = [prog.symmetric(f"G[{j}]", n) for j in range(n)]

    prior_rows = cp.hstack([cp.sum(cp.multiply(V, A)) for V in U.U0A.mats])
    prog.add_inequality("A_in_prior", prior_rows, U.U0A.offsets)
    for k, (xk, yk) in enumerate(data):
        prog.add_inequality(f"data_slab[{k}]", cp.abs(A @ xk - yk), gamma)

    gram_names = {}
    for j in range(n):
        for sign, tag in ((1.0, "+"), (-1.0, "-")):
            lhs = {(0,) * n: gamma}
            for key, val in _quadratic_coeffs(G[j], n, sign).items():
                lhs[key] = lhs.get(key, 0) + val
            sigma0 = prog.symmetric(f"sigma0[{j}{tag}]", n + 1)
            prog.add_psd(f"sos_gram[{j}{tag},0]", sigma0)
            gram_names[(j, tag, 0)] = f"sigma0[{j}{tag}]"
            rhs = _sigma_coeffs(sigma0, n)
            for i in range(r):
                sigma = prog.symmetric(f"sigma[{j}{tag},{i}]", n + 1)
                prog.add_psd(f"sos_gram[{j}{tag},{i + 1}]", sigma)
                gram_names[(j, tag, i + 1)] = f"sigma[{j}{tag},{i}]"
                prod = _poly_mul_affine(_sigma_coeffs(sigma, n), b[i], -H[i], n)
                for key, val in prod.items():
                    rhs[key] = rhs.get(key, 0) + val
            diffs = [lhs.get(key, 0) - rhs.get(key, 0)
                     for key in sorted(set(lhs) | set(rhs))]
            prog.add_equality(f"sos_identity[{j}{tag}]",
                              cp.hstack([cp.reshape(d, (1,), order="C")
                                         if not np.isscalar(d) else cp.Constant([float(d)])
                                         for d in diffs]))

    residuals = []
    for xk, yk in data:
        ghat = cp.hstack([xk @ G[j] @ xk for j in range(n)])
        residuals.append(A @ xk + ghat - yk)
    t = prog.scalar("loss_root")
    prog.add_second_order("loss_epigraph", t, cp.hstack(residuals))
    prog.minimize(t)

    sol = conic.solve(prog, settings)
    if sol.status == SolveStatus.INFEASIBLE:
        raise InfeasibleRegionError("data contradict the prior (gamma, U0A)")
    if sol.status != SolveStatus.OPTIMAL:
        raise conic.ConicError(f"SOS fit not solved: {sol.status.name}")
    model = QuadraticVectorModel(sol.primal["A"],
                                 [np.asarray(sol.primal[f"G[{j}]"]) for j in range(n)])
    grams = {key: np.asarray(sol.primal[name]) for key, name in gram_names.items()}
    return model, SOSCertificate(grams)


def validate_sos_certificate(model: QuadraticVectorModel, cert: SOSCertificate,
                             S: Polyhedron, gamma: float,
                             eig_tol: float = 1e-8,
                             identity_tol: float = 1e-7) -> tuple[float, float]:
    """Recheck the certificate numerically: every Gram PSD and the
    polynomial identity satisfied coefficient-wise. Returns the worst
    (eigenvalue, identity residual)."""
    n = model.n
    min_eig = cert.min_eigenvalue()
    worst_resid = 0.0
    H, b = S.H, S.b
    for j in range(n):
        for sign, tag in ((1.0, "+"), (-1.0, "-")):
            lhs = {(0,) * n: gamma}
            for key, val in _quadratic_coeffs(model.G[j], n, sign).items():
                lhs[key] = lhs.get(key, 0) + val
            rhs = _sigma_coeffs(cert.grams[(j, tag, 0)], n)
            for i in range(S.num_facets):
                prod = _poly_mul_affine(
                    _sigma_coeffs(cert.grams[(j, tag, i + 1)], n),
                    b[i], -H[i], n)
                for key, val in prod.items():
                    rhs[key] = rhs.get(key, 0) + val
            for key in set(lhs) | set(rhs):
                worst_resid = max(worst_resid,
                                  abs(float(lhs.get(key, 0.0)) - float(rhs.get(key, 0.0))))
    if min_eig < -eig_tol:
        raise conic.ConicError(f"SOS Gram eigenvalue {min_eig:.3e} below -{eig_tol:.1e}")
    if worst_resid > identity_tol:
        raise conic.ConicError(
            f"SOS identity residual {worst_resid:.3e} above {identity_tol:.1e}")
    return min_eig, worst_resid


def rmse(model: QuadraticVectorModel, oracle, test_points) -> float:
    """Root mean squared prediction error against the oracle."""
    test_points = np.atleast_2d(np.asarray(test_points, dtype=float))
    if len(test_points) == 0:
        raise ValueError("need a nonempty test set")
    total = 0.0
    for z in test_points:
        err = model.predict(z) - np.asarray(oracle(z), dtype=float)
        total += float(err @ err)
    return math.sqrt(total / len(test_points))


# -- model files -------------------------------------------------------------

MODEL_HEADER = "safelearn-model v1"


def write_model(model: QuadraticVectorModel, path) -> None:
    """Plain-text matrix blocks: A, then one G block per output."""
    lines = [MODEL_HEADER, f"n {model.n}", "A"]
    for row in model.A:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    for j, G in enumerate(model.G):
        lines.append(f"G {j}")
        for row in G:
            lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_model(path) -> QuadraticVectorModel:
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if lines[0] != MODEL_HEADER:
        raise ValueError(f"unrecognized model header {lines[0]!r}")
    n = int(lines[1].split()[1])
    idx = 2
    if lines[idx] != "A":
        raise ValueError("expected matrix block 'A'")
    idx += 1
    A = np.array([[float(v) for v in lines[idx + i].split()] for i in range(n)])
    idx += n
    G = []
    for j in range(n):
        if lines[idx] != f"G {j}":
            raise ValueError(f"expected matrix block 'G {j}'")
        idx += 1
        G.append(np.array([[float(v) for v in lines[idx + i].split()]
                           for i in range(n)]))
        idx += n
    return QuadraticVectorModel(A, G)
