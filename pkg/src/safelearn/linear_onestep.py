"""One-step safe learning of linear dynamics.

The next cheapest one-step-safe query point is the solution of a single LP
obtained by dualizing, facet by facet, the inner worst-case maximization
over all matrices consistent with a polytopic prior and the measurements
collected so far. On top of that LP sit the online learning loop (query,
observe, refine), its offline baseline, and the two cost bounds that
bracket the realized cost of learning.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import cvxpy as cp
import numpy as np
import scipy.sparse as spa

from . import conic, geometry
from .conic import ConicProgram, SolveSettings, SolveStatus
from .geometry import BasisSet, LiftedPolyhedron, Polyhedron
from .harness import RunLog, StepRecord

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.01
CONDITION_WARN = 1e8


class InfeasibleRegionError(RuntimeError):
    """No one-step-safe query point exists (the safe region is empty)."""


class SafetyViolationError(RuntimeError):
    """An observation left the safety region; the session is aborted."""

    def __init__(self, message: str, log: RunLog | None = None):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class MatrixPolytope:
    """``{A : Tr(V_j' A) <= v_j}`` over n x n matrices."""

    mats: np.ndarray      # (s, n, n)
    offsets: np.ndarray   # (s,)

    def __post_init__(self):
        mats = np.asarray(self.mats, dtype=float)
        offsets = np.asarray(self.offsets, dtype=float).ravel()
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError("constraint matrices must be square and stacked")
        if mats.shape[0] != offsets.shape[0]:
            raise ValueError("constraint count mismatch")
        object.__setattr__(self, "mats", mats)
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def from_constraints(cls, constraints) -> "MatrixPolytope":
        mats, offsets = zip(*constraints)
        return cls(np.array(mats, dtype=float), np.array(offsets, dtype=float))

    @classmethod
    def entrywise_box(cls, n: int, low, high) -> "MatrixPolytope":
        """``low <= A_ij <= high`` (scalars or (n, n) arrays)."""
        low = np.broadcast_to(np.asarray(low, dtype=float), (n, n))
        high = np.broadcast_to(np.asarray(high, dtype=float), (n, n))
        mats, offsets = [], []
        for i in range(n):
            for j in range(n):
                E = np.zeros((n, n))
                E[i, j] = 1.0
                mats.append(E.copy())
                offsets.append(high[i, j])
                mats.append(-E)
                offsets.append(low[i, j] * -1.0)
        return cls(np.array(mats), np.array(offsets))

    @classmethod
    def exactly(cls, A) -> "MatrixPolytope":
        """The singleton {A} as paired inequalities."""
        A = np.asarray(A, dtype=float)
        return cls.entrywise_box(A.shape[0], A, A)

    @property
    def n(self) -> int:
        return self.mats.shape[1]

    @property
    def num_constraints(self) -> int:
        return self.mats.shape[0]

    def contains(self, A, tol: float = 1e-9) -> bool:
        vals = np.einsum("sij,ij->s", self.mats, np.asarray(A, dtype=float))
        return bool(np.all(vals <= self.offsets + tol))


class MeasurementSet:
    """Observed pairs (x_k, y_k).

    The one-step learning loop keeps queries linearly independent and
    :meth:`append` enforces that by default; sessions that legitimately
    revisit directions (the nonlinear explorer) opt out.
    """

    def __init__(self, pairs=(), rank_tol: float = geometry.DEFAULT_RANK_TOL,
                 enforce_independence: bool = True):
        self.rank_tol = rank_tol
        self.enforce_independence = enforce_independence
        self._xs: list[np.ndarray] = []
        self._ys: list[np.ndarray] = []
        for x, y in pairs:
            self.append(x, y)

    def append(self, x, y) -> None:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if (self.enforce_independence and self._xs
                and not geometry.independent_of(x, self.basis())):
            raise ValueError("new query is linearly dependent on earlier queries")
        self._xs.append(x)
        self._ys.append(y)

    def basis(self) -> BasisSet:
        return BasisSet(tuple(self._xs), self.rank_tol)

    @property
    def xs(self) -> list[np.ndarray]:
        return list(self._xs)

    @property
    def ys(self) -> list[np.ndarray]:
        return list(self._ys)

    def __len__(self) -> int:
        return len(self._xs)

    def __iter__(self):
        return iter(zip(self._xs, self._ys))


@dataclass
class LearnOutcome:
    """Result of a learning session: the recovered matrix or impossibility."""

    matrix: np.ndarray | None
    log: RunLog
    measurements_used: int

    @property
    def learned(self) -> bool:
        return self.matrix is not None


def _vt_flat(U0: MatrixPolytope) -> np.ndarray:
    """Row j holds vec(V_j') so that mu @ rows reshapes to sum_j mu_j V_j'."""
    return np.stack([V.T.ravel() for V in U0.mats])


def build_onestep_lp(S: Polyhedron, U0: MatrixPolytope, data: MeasurementSet,
                     c) -> ConicProgram:
    """The exact LP whose x-projection is the one-step safe region.

    For each facet h_i . x <= b_i of S, the worst case of h_i . A x over
    the data-consistent prior is replaced by its LP dual: multipliers
    mu^(i) >= 0 for the prior rows and free eta_k^(i) for the measurement
    equalities, tied together by the matrix equality
    ``x h_i' = sum_k x_k eta_k^(i)' + sum_j mu_j^(i) V_j'``.
    """
    n = S.dimension
    if U0.n != n:
        raise ValueError("prior dimension disagrees with safety region")
    c = np.asarray(c, dtype=float)
    H, b = S.H, S.b
    m = len(data)
    X = np.array(data.xs).reshape(m, n)
    Y = np.array(data.ys).reshape(m, n)
    vt = _vt_flat(U0)

    prog = ConicProgram("onestep_lp")
    x = prog.vector("x", n)
    prog.add_inequality("x_in_S", H @ x, b)
    for i in range(S.num_facets):
        mu = prog.vector(f"mu[{i}]", U0.num_constraints, nonneg=True)
        worst = mu @ U0.offsets
        match = cp.reshape(mu @ vt, (n, n), order="C")
        if m:
            eta = prog.matrix(f"eta[{i}]", (m, n))
            worst = worst + cp.sum(cp.multiply(Y, eta))
            match = match + X.T @ eta
        prog.add_inequality(f"worst_case[{i}]", worst, b[i])
        prog.add_equality(f"dual_match[{i}]", cp.outer(x, H[i]), match)
    prog.minimize(c @ x)
    return prog


def onestep_lifted(S: Polyhedron, U0: MatrixPolytope,
                   data: MeasurementSet) -> LiftedPolyhedron:
    """The LP feasible set as a lifted polyhedron with x leading.

    Used by the geometry routines (span bases, projections, membership)
    that want raw inequality data rather than a modeling-layer object.
    """
    n = S.dimension
    r = S.num_facets
    s = U0.num_constraints
    m = len(data)
    H, b = S.H, S.b
    X = np.array(data.xs).reshape(m, n)
    Y = np.array(data.ys).reshape(m, n)
    blk = s + m * n
    width = n + r * blk

    rows, cols, vals, rhs = [], [], [], []
    rid = 0

    def add(entries, rv):
        nonlocal rid
        for cc, vv in entries:
            if vv:
                rows.append(rid)
                cols.append(cc)
                vals.append(vv)
        rhs.append(rv)
        rid += 1

    for i in range(r):
        add([(a, H[i, a]) for a in range(n)], b[i])
    for i in range(r):
        off = n + i * blk
        scalar = [(off + j, U0.offsets[j]) for j in range(s)]
        for k in range(m):
            for l in range(n):
                scalar.append((off + s + k * n + l, Y[k, l]))
        add(scalar, b[i])
        for a in range(n):
            for cc in range(n):
                ent = [(a, H[i, cc])]
                for j in range(s):
                    ent.append((off + j, -U0.mats[j][cc, a]))
                for k in range(m):
                    ent.append((off + s + k * n + cc, -X[k, a]))
                add(list(ent), 0.0)
                add([(col, -v) for col, v in ent], 0.0)
        for j in range(s):
            add([(off + j, -1.0)], 0.0)

    A_full = spa.csr_matrix((vals, (rows, cols)), shape=(rid, width))
    return LiftedPolyhedron(A_full[:, :n], A_full[:, n:], np.array(rhs))


def uncertainty_polyhedron(U0: MatrixPolytope,
                           data: MeasurementSet) -> LiftedPolyhedron:
    """U_k as a polyhedron over vec(A) (row-major), equalities as row pairs."""
    n = U0.n
    rows = [V.ravel() for V in U0.mats]  # Tr(V'A) = vec(V) . vec(A)
    rhs = list(U0.offsets)
    for x, y in data:
        for l in range(n):
            row = np.zeros(n * n)
            row[l * n:(l + 1) * n] = x
            rows.append(row)
            rhs.append(y[l])
            rows.append(-row)
            rhs.append(-y[l])
    return LiftedPolyhedron(np.array(rows), np.zeros((len(rows), 0)),
                            np.array(rhs))


def min_cost_safe_point(S: Polyhedron, U0: MatrixPolytope, data: MeasurementSet,
                        c, settings: SolveSettings | None = None):
    """Cheapest point that stays safe under every consistent matrix.

    Returns ``(x, value, solution)``; raises InfeasibleRegionError when no
    one-step-safe query exists.
    """
    prog = build_onestep_lp(S, U0, data, c)
    sol = conic.solve(prog, settings)
    if sol.status == SolveStatus.INFEASIBLE:
        raise InfeasibleRegionError("one-step safe region is empty")
    if sol.status != SolveStatus.OPTIMAL:
        raise conic.ConicError(f"one-step LP not solved: {sol.status.name}")
    return sol.primal["x"], sol.objective_value, sol


def polytopic_ball(kind: str, n: int) -> Polyhedron:
    """Unit ball of the inf-norm or the 1-norm as an H-polytope."""
    if kind in ("inf", "linf"):
        return Polyhedron.box(n, 1.0)
    if kind in ("one", "l1"):
        signs = np.array(list(np.ndindex(*(2,) * n)), dtype=float) * 2.0 - 1.0
        return Polyhedron.from_inequalities(signs, np.ones(len(signs)))
    raise ValueError(f"unknown ball kind {kind!r}")


def disturbance_tighten(S: Polyhedron, W: float, ball: Polyhedron) -> Polyhedron:
    """Shrink S so one-step safety survives disturbances ``||w|| <= W``.

    Each offset becomes ``b_i - W * h_ball(h_i)`` where h_ball is the
    support function of the norm's unit ball; safe queries against the
    tightened region keep ``A x + w`` inside the original S.
    """
    if W < 0:
        raise ValueError("disturbance bound W must be nonnegative")
    if W == 0:
        return S
    lifted = LiftedPolyhedron.from_polyhedron(ball)
    new_b = []
    for hs in S.halfspaces:
        sup = geometry.support(lifted, hs.normal)
        if not math.isfinite(sup):
            raise ValueError("disturbance ball must be a bounded polytope")
        new_b.append(hs.offset - W * sup)
    return Polyhedron.from_inequalities(S.H, np.array(new_b))


def cost_lower_bound(S: Polyhedron, A_star, c, n_measurements: int) -> float:
    """``n_measurements * min { c.x : x in S, A* x in S }``.

    The bound assumes full knowledge of the dynamics, so no sequence of
    one-step safe measurements can do better.
    """
    A_star = np.asarray(A_star, dtype=float)
    c = np.asarray(c, dtype=float)
    rows = np.vstack([S.H, S.H @ A_star])
    rhs = np.concatenate([S.b, S.b])
    P = LiftedPolyhedron(rows, np.zeros((rows.shape[0], 0)), rhs)
    val = geometry.support(P, -c)
    if val == -math.inf:
        raise InfeasibleRegionError("true one-step safe region is empty")
    return n_measurements * (-val)


def offline_cost_bound(S: Polyhedron, U0: MatrixPolytope, c,
                       settings: SolveSettings | None = None) -> float:
    """``n * c . x0*``: the eps -> 0 limit of the offline algorithm's cost."""
    _, value, _ = min_cost_safe_point(S, U0, MeasurementSet(), c, settings)
    return S.dimension * value


def _finish_log(log: RunLog, outcome: str, **info) -> RunLog:
    log.outcome = {"result": outcome, **info}
    return log


def learn_online(S: Polyhedron, U0: MatrixPolytope, c, epsilon: float,
                 oracle, *, settings: SolveSettings | None = None,
                 rank_tol: float = geometry.DEFAULT_RANK_TOL,
                 singleton_tol: float = geometry.DEFAULT_SINGLETON_TOL,
                 safety_tol: float = 1e-6) -> LearnOutcome:
    """One-step safe learning loop.

    Each round checks whether the remaining uncertainty is already a
    single matrix, otherwise queries the cheapest safe point, blending it
    with a basis vector of the safe region's span whenever the optimizer
    is linearly dependent on earlier queries. Returns the recovered
    dynamics after at most n independent measurements, or declares that
    no strategy can safely learn them.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    n = S.dimension
    c = np.asarray(c, dtype=float)
    data = MeasurementSet(rank_tol=rank_tol)
    log = RunLog(mode="linear1")

    for k in range(n):
        uk = uncertainty_polyhedron(U0, data)
        verdict = geometry.is_singleton(uk, singleton_tol)
        if verdict.is_empty:
            raise SafetyViolationError(
                "no matrix is consistent with the prior and the data", log)
        width = float(np.max(verdict.widths)) if verdict.widths is not None else math.inf
        if verdict.is_singleton:
            A = verdict.point.reshape(n, n)
            _finish_log(log, "learned", matrix=A, uncertainty_width=width)
            return LearnOutcome(A, log, len(data))

        try:
            xstar, value, sol = min_cost_safe_point(S, U0, data, c, settings)
        except InfeasibleRegionError:
            _finish_log(log, "impossible", reason="safe region empty")
            return LearnOutcome(None, log, len(data))

        extras = {"lp_optimum": xstar.copy(), "uncertainty_width": width,
                  "blended": False}
        if geometry.independent_of(xstar, data.basis()):
            x_next = xstar
        else:
            region = onestep_lifted(S, U0, data)
            basis = geometry.span_basis(region, rank_tol)
            x_next = None
            for idx, z in enumerate(basis):
                if geometry.independent_of(z, data.basis()):
                    x_next = (1.0 - epsilon) * xstar + epsilon * z
                    extras.update(blended=True, basis_vector_index=idx)
                    break
            if x_next is None:
                _finish_log(log, "impossible",
                            reason="span of safe region adds no new direction",
                            measurements=len(data))
                return LearnOutcome(None, log, len(data))

        if not geometry.contains(S, x_next, safety_tol):
            raise SafetyViolationError("chosen query left the safety region", log)
        y = np.asarray(oracle(x_next), dtype=float)
        if y.shape != (n,):
            raise ValueError("oracle returned a vector of the wrong dimension")
        if not geometry.contains(S, y, safety_tol):
            raise SafetyViolationError(
                "observation left the safety region (model mismatch)", log)
        data.append(x_next, y)
        step_cost = float(c @ x_next)
        log.add_step(StepRecord(
            k=k, query=x_next, observations=(y,), step_cost=step_cost,
            cumulative_cost=log.total_cost + step_cost,
            solver_stats={"solver": sol.solver, "solve_time": sol.solve_time},
            extras=extras))

    X = np.column_stack(data.xs)
    Y = np.column_stack(data.ys)
    cond = float(np.linalg.cond(X))
    if cond > CONDITION_WARN:
        logger.warning("measurement matrix condition number %.2e", cond)
    A = Y @ np.linalg.inv(X)
    _finish_log(log, "learned", matrix=A, condition_number=cond)
    return LearnOutcome(A, log, len(data))


def learn_offline(S: Polyhedron, U0: MatrixPolytope, c, epsilon: float,
                  oracle, *, settings: SolveSettings | None = None,
                  rank_tol: float = geometry.DEFAULT_RANK_TOL,
                  safety_tol: float = 1e-6) -> LearnOutcome:
    """Offline baseline: choose all n queries before observing anything.

    Requires the initial safe region to span all of R^n; all queries are
    blends of the cheapest safe point with a precomputed basis.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    n = S.dimension
    c = np.asarray(c, dtype=float)
    log = RunLog(mode="linear1")
    empty = MeasurementSet(rank_tol=rank_tol)
    region = onestep_lifted(S, U0, empty)
    basis = geometry.span_basis(region, rank_tol)
    if len(basis) < n:
        _finish_log(log, "impossible",
                    reason=f"initial safe region spans only {len(basis)} of {n} dimensions")
        return LearnOutcome(None, log, 0)
    x0, value, sol = min_cost_safe_point(S, U0, empty, c, settings)

    xs, ys = [], []
    for k, z in enumerate(basis):
        x = (1.0 - epsilon) * x0 + epsilon * z
        if not geometry.contains(S, x, safety_tol):
            raise SafetyViolationError("offline query left the safety region", log)
        y = np.asarray(oracle(x), dtype=float)
        if not geometry.contains(S, y, safety_tol):
            raise SafetyViolationError(
                "observation left the safety region (model mismatch)", log)
        xs.append(x)
        ys.append(y)
        step_cost = float(c @ x)
        log.add_step(StepRecord(
            k=k, query=x, observations=(y,), step_cost=step_cost,
            cumulative_cost=log.total_cost + step_cost,
            solver_stats={"solver": sol.solver},
            extras={"lp_optimum": x0.copy(), "blended": True,
                    "basis_vector_index": k}))
    X = np.column_stack(xs)
    Y = np.column_stack(ys)
    cond = float(np.linalg.cond(X))
    if cond > CONDITION_WARN:
        logger.warning("offline measurement matrix condition number %.2e", cond)
    A = Y @ np.linalg.inv(X)
    _finish_log(log, "learned", matrix=A, condition_number=cond)
    return LearnOutcome(A, log, n)
