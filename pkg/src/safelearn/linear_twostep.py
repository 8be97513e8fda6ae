"""Two-step safe learning of linear dynamics under ellipsoidal uncertainty.

The two-step safe region is not polyhedral: the constraint ``A^2 x in S``
is quadratic in the unknown matrix. After eliminating the measurement
equalities by parametrizing the consistent affine subspace, each facet's
worst case becomes an implication between quadratics in the subspace
coordinates, and the S-lemma turns the implication into a linear matrix
inequality. The result is a semidefinite program whose x-projection is
exactly the two-step safe region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from . import conic, geometry
from .conic import ConicProgram, QuadraticForm, SolveSettings, SolveStatus
from .geometry import LiftedPolyhedron, Polyhedron
from .harness import RunLog, StepRecord
from .linear_onestep import (InfeasibleRegionError, LearnOutcome,
                             SafetyViolationError, _finish_log)

DEFAULT_STRICT_TOL = 1e-9
SUBSPACE_RESIDUAL_TOL = 1e-8


class InconsistentDataError(RuntimeError):
    """No matrix satisfies all trajectory equalities (or the prior)."""


@dataclass(frozen=True)
class EllipsoidalMatrixUncertainty:
    """``{A : q(vec A) <= 0}`` for a strictly convex quadratic q."""

    quadratic: QuadraticForm
    n: int

    def __post_init__(self):
        Q = np.asarray(self.quadratic.Q)
        if Q.shape != (self.n * self.n,) * 2:
            raise ValueError("quadratic must act on vec(A) of length n^2")
        eigs = np.linalg.eigvalsh(Q)
        if eigs[0] <= 0:
            raise ValueError("quadratic must be strictly convex (Q positive definite)")

    @classmethod
    def frobenius_ball(cls, A0, gamma: float) -> "EllipsoidalMatrixUncertainty":
        """``||A - A0||_F <= gamma``."""
        A0 = np.asarray(A0, dtype=float)
        if gamma <= 0:
            raise ValueError("radius must be positive")
        n = A0.shape[0]
        a0 = A0.ravel()
        qf = QuadraticForm(np.eye(n * n), -2.0 * a0, float(a0 @ a0 - gamma ** 2))
        return cls(qf, n)

    def contains(self, A, tol: float = 1e-9) -> bool:
        return self.quadratic(np.asarray(A, dtype=float).ravel()) <= tol


class TwoStepData:
    """Length-two trajectories (x_j, A* x_j, A*^2 x_j)."""

    def __init__(self, trajectories=()):
        self._trajs: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        for x, y, z in trajectories:
            self.append(x, y, z)

    def append(self, x, y, z) -> None:
        self._trajs.append(tuple(np.asarray(v, dtype=float) for v in (x, y, z)))

    def __len__(self) -> int:
        return len(self._trajs)

    def __iter__(self):
        return iter(self._trajs)


@dataclass(frozen=True)
class AffineSubspaceParam:
    """Parametrization ``A = anchor + sum_i a_i B_i`` of the data-consistent
    matrices; the basis matrices are Frobenius-orthonormal."""

    anchor: np.ndarray        # (n, n), satisfies all equalities
    basis_matrix: np.ndarray  # (n^2, nhat), columns vec(B_i)

    @property
    def nhat(self) -> int:
        return self.basis_matrix.shape[1]

    @property
    def n(self) -> int:
        return self.anchor.shape[0]

    def basis_mats(self) -> list[np.ndarray]:
        n = self.n
        return [self.basis_matrix[:, i].reshape(n, n) for i in range(self.nhat)]

    def matrix_at(self, a) -> np.ndarray:
        vec = self.anchor.ravel() + self.basis_matrix @ np.asarray(a, dtype=float)
        return vec.reshape(self.n, self.n)


def _constraint_rows(data: TwoStepData, n: int):
    """Linear system on vec(A): A x_j = y_j and A y_j = z_j."""
    rows, rhs = [], []
    for x, y, z in data:
        for inp, out in ((x, y), (y, z)):
            for l in range(n):
                row = np.zeros(n * n)
                row[l * n:(l + 1) * n] = inp
                rows.append(row)
                rhs.append(out[l])
    return np.array(rows).reshape(len(rows), n * n), np.array(rhs)


def consistent_subspace(data: TwoStepData, n: int,
                        residual_tol: float = SUBSPACE_RESIDUAL_TOL) -> AffineSubspaceParam:
    """Anchor and nullspace basis of the trajectory equalities.

    The nonlinear conditions ``A^2 x_j = z_j`` are equivalent, given
    ``A x_j = y_j``, to the linear conditions ``A y_j = z_j``; the anchor
    is the least-norm solution and the basis spans the homogeneous
    solutions. Raises InconsistentDataError when no matrix satisfies the
    equalities.
    """
    if len(data) == 0:
        return AffineSubspaceParam(np.zeros((n, n)), np.eye(n * n))
    M, rhs = _constraint_rows(data, n)
    anchor_vec, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    residual = float(np.max(np.abs(M @ anchor_vec - rhs)))
    if residual > residual_tol:
        raise InconsistentDataError(
            f"trajectory equalities are inconsistent (residual {residual:.3e})")
    _, svals, vt = np.linalg.svd(M)
    cutoff = max(M.shape) * np.finfo(float).eps * (svals[0] if len(svals) else 1.0)
    rank = int(np.sum(svals > cutoff))
    basis = vt[rank:].T
    return AffineSubspaceParam(anchor_vec.reshape(n, n), basis)


def restrict_to_subspace(q: QuadraticForm, sub: AffineSubspaceParam) -> QuadraticForm:
    """``q o g`` for the affine parametrization g of the subspace."""
    N = sub.basis_matrix
    a0 = sub.anchor.ravel()
    Q, qlin, r = np.asarray(q.Q), np.asarray(q.q), float(q.r)
    return QuadraticForm(N.T @ Q @ N,
                         N.T @ (2.0 * Q @ a0 + qlin),
                         float(a0 @ Q @ a0 + qlin @ a0 + r))


@dataclass(frozen=True)
class StrictInterior:
    """Result of minimizing the restricted quadratic in closed form."""

    point: np.ndarray
    value: float
    ok: bool


def check_strict_interior(qhat: QuadraticForm,
                          strict_tol: float = DEFAULT_STRICT_TOL) -> StrictInterior:
    """Closed-form minimum of the strictly convex restricted quadratic.

    The S-lemma needs a point with qhat < 0; when the minimum is not
    below -strict_tol the subspace meets the ellipsoid in at most one
    point and callers must branch to the singleton path.
    """
    abar = qhat.minimizer()
    value = qhat(abar)
    return StrictInterior(abar, value, value < -strict_tol)


@dataclass(frozen=True)
class SLemmaCertificate:
    """Nonnegative S-lemma multipliers per facet and per step."""

    lam1: np.ndarray
    lam2: np.ndarray


def build_twostep_sdp(S: Polyhedron, U0: EllipsoidalMatrixUncertainty,
                      data: TwoStepData, c,
                      subspace: AffineSubspaceParam | None = None) -> ConicProgram:
    """The SDP whose x-projection is the two-step safe region.

    With qhat the prior restricted to the consistent subspace and, per
    facet i, the quadratics-in-a
    ``q1_i(a; x) = h_i . g(a) x - b_i`` and ``q2_i(a; x) = h_i . g(a)^2 x - b_i``,
    the program enforces ``lam * qhat - q_{t,i}`` globally nonnegative via
    one PSD block each; coefficients are affine in x, so the blocks are
    linear matrix inequalities. Callers must have checked nhat >= 1 and
    strict interior.
    """
    n = S.dimension
    c = np.asarray(c, dtype=float)
    sub = subspace if subspace is not None else consistent_subspace(data, n)
    if sub.nhat == 0:
        raise InconsistentDataError(
            "consistent subspace is a point; the safe-query problem is an LP")
    qhat = restrict_to_subspace(U0.quadratic, sub)
    interior = check_strict_interior(qhat)
    if not interior.ok:
        raise InfeasibleRegionError(
            "no strictly interior consistent matrix; branch to the singleton path")

    anchor = sub.anchor
    mats = sub.basis_mats()
    nhat = sub.nhat
    anchor2 = anchor @ anchor
    H, b = S.H, S.b

    prog = ConicProgram("twostep_sdp")
    x = prog.vector("x", n)
    lam1 = prog.vector("lam1", S.num_facets, nonneg=True)
    lam2 = prog.vector("lam2", S.num_facets, nonneg=True)
    prog.add_inequality("x_in_S", H @ x, b)
    for i in range(S.num_facets):
        hi, bi = H[i], b[i]
        # q1: linear coefficients in a, affine in x
        C1 = np.array([hi @ B for B in mats])                  # (nhat, n)
        r1 = hi @ anchor @ x - bi
        step1 = QuadraticForm(lam1[i] * qhat.Q,
                              lam1[i] * qhat.q - C1 @ x,
                              lam1[i] * qhat.r - r1)
        prog.add_psd(f"slemma1[{i}]", conic.quadratic_nonneg_to_psd(step1))
        # q2: quadratic coefficients in a (symmetrized), affine in x
        C2 = np.array([hi @ (anchor @ B + B @ anchor) for B in mats])
        T2 = np.array([[hi @ (Bl @ Bm + Bm @ Bl) / 2.0 for Bm in mats]
                       for Bl in mats])                        # (nhat, nhat, n)
        Q2 = cp.reshape(T2.reshape(nhat * nhat, n) @ x, (nhat, nhat), order="C")
        r2 = hi @ anchor2 @ x - bi
        step2 = QuadraticForm(lam2[i] * qhat.Q - Q2,
                              lam2[i] * qhat.q - C2 @ x,
                              lam2[i] * qhat.r - r2)
        prog.add_psd(f"slemma2[{i}]", conic.quadratic_nonneg_to_psd(step2))
    prog.minimize(c @ x)
    return prog


def certificate_from_solution(sol) -> SLemmaCertificate:
    return SLemmaCertificate(np.asarray(sol.primal["lam1"]),
                             np.asarray(sol.primal["lam2"]))


def validate_certificate(prog: ConicProgram, eig_tol: float = 1e-7) -> float:
    """Smallest eigenvalue over all PSD blocks at the solved point."""
    worst = math.inf
    for blk in prog.blocks:
        if blk.kind != "psd":
            continue
        value = np.asarray(blk.constraint.args[0].value, dtype=float)
        value = (value + value.T) / 2.0
        worst = min(worst, float(np.linalg.eigvalsh(value)[0]))
    if worst < -eig_tol:
        raise conic.ConicError(f"S-lemma block eigenvalue {worst:.3e} below -{eig_tol:.1e}")
    return worst


def min_cost_twostep_point(S: Polyhedron, U0: EllipsoidalMatrixUncertainty,
                           data: TwoStepData, c,
                           settings: SolveSettings | None = None):
    """Cheapest two-step safe query; returns (x, value, solution, program)."""
    prog = build_twostep_sdp(S, U0, data, c)
    sol = conic.solve(prog, settings)
    if sol.status == SolveStatus.INFEASIBLE:
        raise InfeasibleRegionError("two-step safe region is empty")
    if sol.status != SolveStatus.OPTIMAL:
        raise conic.ConicError(f"two-step SDP not solved: {sol.status.name}")
    return sol.primal["x"], sol.objective_value, sol, prog


def learn_two_step(S: Polyhedron, U0: EllipsoidalMatrixUncertainty, c, oracle2,
                   *, settings: SolveSettings | None = None,
                   budget: int | None = None,
                   strict_tol: float = DEFAULT_STRICT_TOL,
                   safety_tol: float = 1e-6) -> LearnOutcome:
    """Query two-step safe points until the dynamics are pinned down.

    Termination is by the subspace collapsing to a point (all queried
    directions together span R^n) or by the ellipsoid meeting the subspace
    in a single matrix; exhausting the trajectory budget (default n) is
    reported as Impossible, a heuristic rather than a proof.
    """
    n = S.dimension
    c = np.asarray(c, dtype=float)
    budget = n if budget is None else budget
    data = TwoStepData()
    log = RunLog(mode="linear2")

    for count in range(budget + 1):
        sub = consistent_subspace(data, n)
        if sub.nhat == 0:
            A = sub.anchor
            if not U0.contains(A, 1e-7):
                raise InconsistentDataError("data pin a matrix outside the prior")
            _finish_log(log, "learned", matrix=A, trajectories=len(data))
            return LearnOutcome(A, log, len(data))
        qhat = restrict_to_subspace(U0.quadratic, sub)
        interior = check_strict_interior(qhat, strict_tol)
        if not interior.ok:
            if interior.value > strict_tol:
                raise InconsistentDataError(
                    "prior ellipsoid excludes every data-consistent matrix")
            A = sub.matrix_at(interior.point)
            _finish_log(log, "learned", matrix=A, trajectories=len(data),
                        via="singleton_intersection")
            return LearnOutcome(A, log, len(data))
        if count == budget:
            break

        try:
            x, value, sol, prog = min_cost_twostep_point(S, U0, data, c, settings)
        except InfeasibleRegionError:
            _finish_log(log, "impossible", reason="two-step safe region empty")
            return LearnOutcome(None, log, len(data))
        cert = certificate_from_solution(sol)
        block_eig = validate_certificate(prog)
        if not geometry.contains(S, x, safety_tol):
            raise SafetyViolationError("chosen query left the safety region", log)
        y, z = oracle2(x)
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        for state, label in ((y, "first"), (z, "second")):
            if not geometry.contains(S, state, safety_tol):
                raise SafetyViolationError(
                    f"{label} step of the trajectory left the safety region", log)
        data.append(x, y, z)
        step_cost = float(c @ x)
        log.add_step(StepRecord(
            k=count, query=x, observations=(y, z), step_cost=step_cost,
            cumulative_cost=log.total_cost + step_cost,
            solver_stats={"solver": sol.solver, "solve_time": sol.solve_time},
            extras={"lam1": cert.lam1, "lam2": cert.lam2,
                    "min_block_eig": block_eig, "subspace_dim": sub.nhat}))

    _finish_log(log, "impossible",
                reason=f"budget of {budget} trajectories exhausted",
                heuristic=True)
    return LearnOutcome(None, log, len(data))


def two_step_lower_bound(S: Polyhedron, A_star, c, n_trajectories: int = 2) -> float:
    """``n_trajectories * min { c.x : x, A*x, A*^2 x all in S }``."""
    A_star = np.asarray(A_star, dtype=float)
    c = np.asarray(c, dtype=float)
    rows = np.vstack([S.H, S.H @ A_star, S.H @ (A_star @ A_star)])
    rhs = np.concatenate([S.b, S.b, S.b])
    P = LiftedPolyhedron(rows, np.zeros((rows.shape[0], 0)), rhs)
    val = geometry.support(P, -c)
    if val == -math.inf:
        raise InfeasibleRegionError("true two-step safe region is empty")
    return n_trajectories * (-val)


def two_step_offline_bound(S: Polyhedron, U0: EllipsoidalMatrixUncertainty, c,
                           settings: SolveSettings | None = None) -> float:
    """``2 c . x1`` for the cheapest point of the data-free safe region."""
    _, value, _, _ = min_cost_twostep_point(S, U0, TwoStepData(), c, settings)
    return 2.0 * value
