"""Solver-agnostic construction and certified solution of LP/SOCP/SDP
instances, with the two standard transformations used throughout:
global nonnegativity of a quadratic as a PSD block, and epigraphs of
p-norm powers as cone constraints.

Programs are assembled from named variables and typed constraint blocks
(linear equality, linear inequality, second-order cone, PSD). Solving is
delegated to installed conic backends: HiGHS (via scipy) for pure LPs,
Clarabel for cone programs, SCS as fallback. Every optimal result is
re-certified against the requested tolerances before being reported;
duals are extracted per block and are part of the interface contract.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import cvxpy as cp
import numpy as np


class ConicError(RuntimeError):
    pass


class UnsupportedBackendError(ConicError):
    """The program needs a cone the selected backend cannot handle."""


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


class Capability(enum.IntEnum):
    """What a program (or a backend) requires (or provides)."""

    LP = 0
    SOCP = 1
    SDP = 2


@dataclass(frozen=True)
class SolveSettings:
    """Tolerances used to certify a reported optimum.

    ``None`` fields default per capability: feasibility and gap 1e-8 for
    LPs, 1e-7 for SOCP/SDP. These are the tolerances that every downstream
    safety statement is conditioned on.
    """

    feas_tol: float | None = None
    gap_tol: float | None = None

    def resolved(self, capability: Capability) -> tuple[float, float]:
        default = 1e-8 if capability == Capability.LP else 1e-7
        return (self.feas_tol if self.feas_tol is not None else default,
                self.gap_tol if self.gap_tol is not None else default)


@dataclass(frozen=True)
class ConstraintBlock:
    name: str
    kind: str  # "eq" | "ineq" | "soc" | "psd"
    constraint: cp.constraints.constraint.Constraint


@dataclass
class Solution:
    status: SolveStatus
    primal: dict[str, np.ndarray]
    dual: dict[str, np.ndarray]
    objective_value: float | None
    solver: str = ""
    solve_time: float | None = None
    certificate: dict[str, float] = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return self.status == SolveStatus.OPTIMAL


class ConicProgram:
    """A conic program over named variables.

    Variables are created through :meth:`scalar`, :meth:`vector`,
    :meth:`symmetric` and combined into constraints with ordinary cvxpy
    expression algebra; the typed ``add_*`` methods register each
    constraint as a named block so duals can be reported per block.
    """

    def __init__(self, name: str = "program"):
        self.name = name
        self._variables: dict[str, cp.Variable] = {}
        self._blocks: list[ConstraintBlock] = []
        self._objective: cp.problems.objective.Objective | None = None
        self._problem: cp.Problem | None = None

    # -- variables ---------------------------------------------------------

    def _register(self, var: cp.Variable) -> cp.Variable:
        if var.name() in self._variables:
            raise ValueError(f"duplicate variable name {var.name()!r}")
        self._variables[var.name()] = var
        self._problem = None
        return var

    def scalar(self, name: str, nonneg: bool = False) -> cp.Variable:
        return self._register(cp.Variable(name=name, nonneg=nonneg))

    def vector(self, name: str, n: int, nonneg: bool = False) -> cp.Variable:
        return self._register(cp.Variable(n, name=name, nonneg=nonneg))

    def matrix(self, name: str, shape: tuple[int, int], nonneg: bool = False) -> cp.Variable:
        return self._register(cp.Variable(shape, name=name, nonneg=nonneg))

    def symmetric(self, name: str, m: int) -> cp.Variable:
        return self._register(cp.Variable((m, m), name=name, symmetric=True))

    @property
    def variables(self) -> dict[str, cp.Variable]:
        return dict(self._variables)

    # -- constraints -------------------------------------------------------

    def _add(self, name: str, kind: str, constraint) -> ConstraintBlock:
        block = ConstraintBlock(name, kind, constraint)
        self._blocks.append(block)
        self._problem = None
        return block

    def add_equality(self, name: str, lhs, rhs=0) -> ConstraintBlock:
        return self._add(name, "eq", lhs == rhs)

    def add_inequality(self, name: str, lhs, rhs) -> ConstraintBlock:
        """lhs <= rhs elementwise."""
        return self._add(name, "ineq", lhs <= rhs)

    def add_second_order(self, name: str, t, vec) -> ConstraintBlock:
        """||vec||_2 <= t."""
        return self._add(name, "soc", cp.SOC(t, vec))

    def add_cone_epigraph(self, name: str, expr, t) -> ConstraintBlock:
        """expr <= t for a cvxpy-convex expr (p-norm powers and the like)."""
        return self._add(name, "soc", expr <= t)

    def add_psd(self, name: str, expr) -> ConstraintBlock:
        return self._add(name, "psd", expr >> 0)

    @property
    def blocks(self) -> list[ConstraintBlock]:
        return list(self._blocks)

    def block(self, name: str) -> ConstraintBlock:
        for blk in self._blocks:
            if blk.name == name:
                return blk
        raise KeyError(name)

    # -- objective ---------------------------------------------------------

    def _set_objective(self, objective) -> None:
        if not objective.expr.is_affine():
            raise ValueError("objective must be linear in the variables")
        self._objective = objective
        self._problem = None

    def minimize(self, expr) -> None:
        self._set_objective(cp.Minimize(expr))

    def maximize(self, expr) -> None:
        self._set_objective(cp.Maximize(expr))

    @property
    def capability(self) -> Capability:
        if any(b.kind == "psd" for b in self._blocks):
            return Capability.SDP
        if any(b.kind == "soc" for b in self._blocks):
            return Capability.SOCP
        return Capability.LP

    def problem(self) -> cp.Problem:
        if self._objective is None:
            raise ConicError("objective not set")
        if self._problem is None:
            self._problem = cp.Problem(self._objective,
                                       [b.constraint for b in self._blocks])
        return self._problem

    # -- external interface --------------------------------------------------

    def dump(self) -> str:
        """Standard sparse conic text form for external cross-checking.

        Field order: objective, variable dims, constraint blocks. The data
        is the canonical form ``min c.x  s.t.  b - A x in K`` produced for
        the SCS backend; A is emitted as COO triplets.
        """
        data, _, _ = self.problem().get_problem_data(cp.SCS)
        A = data["A"].tocoo()
        out = io.StringIO()
        out.write(f"conic-program {self.name}\n")
        out.write("objective min " + " ".join(f"{v:.17g}" for v in data["c"]) + "\n")
        out.write(f"variables {len(data['c'])}\n")
        dims = data["dims"]
        out.write(f"cones zero={dims.zero} nonneg={dims.nonneg} "
                  f"soc={list(dims.soc)} psd={list(dims.psd)}\n")
        out.write("b " + " ".join(f"{v:.17g}" for v in data["b"]) + "\n")
        out.write(f"A coo {A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for r, c_, v in zip(A.row, A.col, A.data):
            out.write(f"{r} {c_} {v:.17g}\n")
        return out.getvalue()


# -- solving ---------------------------------------------------------------

_BACKENDS: dict[str, Capability] = {
    "SCIPY": Capability.LP,
    "CLARABEL": Capability.SDP,
    "SCS": Capability.SDP,
}


def _pick_solver(capability: Capability) -> str:
    installed = set(cp.installed_solvers())
    if capability == Capability.LP and "SCIPY" in installed:
        return "SCIPY"
    for name in ("CLARABEL", "SCS"):
        if name in installed:
            return name
    raise UnsupportedBackendError("no installed backend covers this program")


def _solver_args(solver: str, feas_tol: float, gap_tol: float) -> dict:
    if solver == "SCIPY":
        return {"scipy_options": {"method": "highs"}}
    if solver == "CLARABEL":
        tol = min(feas_tol, gap_tol)
        return {"tol_feas": 0.1 * tol, "tol_gap_abs": 0.1 * tol,
                "tol_gap_rel": 0.1 * tol}
    if solver == "SCS":
        return {"eps": 0.1 * min(feas_tol, gap_tol), "max_iters": 200_000}
    return {}


def _certify(program: ConicProgram, objective_value: float,
             feas_tol: float, gap_tol: float) -> dict[str, float]:
    """Primal residuals and complementary slackness at the reported point.

    Complementarity is accumulated over inequality and PSD blocks (a valid
    gap bound once primal and dual are feasible) and compared against
    gap_tol relative to the objective scale.
    """
    worst_residual = 0.0
    complementarity = 0.0
    for blk in program.blocks:
        violation = blk.constraint.violation()
        worst_residual = max(worst_residual, float(np.max(violation, initial=0.0)))
        dual = blk.constraint.dual_value
        if dual is None:
            continue
        if blk.kind == "ineq":
            con = blk.constraint
            slack = np.asarray(con.args[1].value) - np.asarray(con.args[0].value)
            complementarity += float(np.sum(np.abs(np.asarray(dual) * slack)))
        elif blk.kind == "psd":
            slack = np.asarray(blk.constraint.args[0].value)
            complementarity += abs(float(np.sum(np.asarray(dual) * slack)))
    scale = max(1.0, abs(objective_value))
    if worst_residual > feas_tol * scale:
        raise ConicError(f"primal residual {worst_residual:.3e} exceeds {feas_tol:.1e}")
    if complementarity > gap_tol * scale * 10.0:
        raise ConicError(f"complementarity {complementarity:.3e} exceeds {gap_tol:.1e}")
    return {"primal_residual": worst_residual, "complementarity": complementarity}


def solve(program: ConicProgram, settings: SolveSettings | None = None,
          solver: str | None = None) -> Solution:
    """Solve and certify a program, reporting primal and dual values.

    A reported OPTIMAL always satisfies the resolved tolerances at the
    returned point; when the backend's answer fails re-certification the
    solve is retried once with tighter backend settings and otherwise
    reported as NUMERICAL_FAILURE rather than silently returned.
    """
    settings = settings or SolveSettings()
    capability = program.capability
    feas_tol, gap_tol = settings.resolved(capability)
    if solver is None:
        solver = _pick_solver(capability)
    elif _BACKENDS.get(solver, Capability.SDP) < capability:
        raise UnsupportedBackendError(
            f"backend {solver} cannot solve a {capability.name} program")

    problem = program.problem()
    attempts = [(solver, _solver_args(solver, feas_tol, gap_tol)),
                (solver, _solver_args(solver, feas_tol / 10, gap_tol / 10))]
    last_error: Exception | None = None
    for attempt_solver, args in attempts:
        try:
            problem.solve(solver=attempt_solver, **args)
        except cp.error.SolverError as exc:
            last_error = exc
            continue
        status = problem.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return Solution(SolveStatus.INFEASIBLE, {}, {}, None, attempt_solver)
        if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
            return Solution(SolveStatus.UNBOUNDED, {}, {}, None, attempt_solver)
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            last_error = ConicError(f"backend status {status}")
            continue
        try:
            certificate = _certify(program, float(problem.value), feas_tol, gap_tol)
        except ConicError as exc:
            last_error = exc
            continue
        primal = {name: np.asarray(var.value)
                  for name, var in program.variables.items()}
        dual = {}
        for blk in program.blocks:
            dv = blk.constraint.dual_value
            if dv is None:
                continue
            if isinstance(dv, (list, tuple)):  # SOC duals come as (t, z) parts
                dv = np.concatenate([np.atleast_1d(np.asarray(part, dtype=float)).ravel()
                                     for part in dv])
            dual[blk.name] = np.asarray(dv)
        stats = problem.solver_stats
        return Solution(SolveStatus.OPTIMAL, primal, dual,
                        float(problem.value), attempt_solver,
                        getattr(stats, "solve_time", None), certificate)
    return Solution(SolveStatus.NUMERICAL_FAILURE, {}, {}, None, solver,
                    certificate={"error": str(last_error)})


# -- quadratic forms and the two standard transformations -------------------


@dataclass(frozen=True)
class QuadraticForm:
    """``a -> a' Q a + q . a + r`` with symmetric Q.

    Coefficients may be numeric or affine cvxpy expressions (the latter
    turn the PSD block below into a linear matrix inequality).
    """

    Q: object
    q: object
    r: object

    def __post_init__(self):
        symbolic = any(isinstance(v, cp.expressions.expression.Expression)
                       for v in (self.Q, self.q, self.r))
        if not symbolic:
            Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
            if not np.allclose(Q, Q.T, atol=1e-12):
                raise ValueError("Q must be symmetric")
            object.__setattr__(self, "Q", Q)
            object.__setattr__(self, "q", np.asarray(self.q, dtype=float).ravel())
            object.__setattr__(self, "r", float(self.r))

    @property
    def dimension(self) -> int:
        return self.Q.shape[0]

    def __call__(self, a) -> float:
        a = np.asarray(a, dtype=float)
        return float(a @ self.Q @ a + self.q @ a + self.r)

    def minimizer(self) -> np.ndarray:
        """Unconstrained minimizer -Q^{-1} q / 2 (Q must be PD)."""
        return np.linalg.solve(2.0 * np.asarray(self.Q), -np.asarray(self.q))


def quadratic_nonneg_to_psd(qf: QuadraticForm):
    """The (m+1)x(m+1) block ``[[r, q'/2], [q/2, Q]]``.

    The quadratic is globally nonnegative iff this block is PSD. With
    coefficients affine in decision variables the returned expression is
    an LMI ready for :meth:`ConicProgram.add_psd`.
    """
    Q, q, r = qf.Q, qf.q, qf.r
    if isinstance(Q, np.ndarray) and isinstance(q, np.ndarray) and np.isscalar(r):
        m = Q.shape[0]
        block = np.empty((m + 1, m + 1))
        block[0, 0] = r
        block[0, 1:] = q / 2.0
        block[1:, 0] = q / 2.0
        block[1:, 1:] = Q
        return block
    m = Q.shape[0]
    qcol = cp.reshape(q, (m, 1), order="C") / 2.0
    qrow = cp.reshape(q, (1, m), order="C") / 2.0
    rmat = cp.reshape(r, (1, 1), order="C")
    return cp.bmat([[rmat, qrow], [qcol, Q]])


def pnorm_power_epigraph(program: ConicProgram, x, p, d: int,
                         name: str = "pnorm_power"):
    """Scalar t with ``t >= ||x||_p^d`` added to the program.

    d = 0 degenerates to the linear constraint t >= 1; p in {1, inf} with
    d = 1 stays linear after canonicalization; other rational p and integer
    d are encoded through cone constraints (rationality of p is what makes
    the epigraph cone-representable).
    """
    if d < 0 or d != int(d):
        raise ValueError("d must be a nonnegative integer")
    if p != math.inf and (isinstance(p, str) or p < 1):
        raise ValueError("p must be >= 1 or inf")
    t = program.scalar(name)
    if d == 0:
        program.add_inequality(f"{name}:unit", 1.0, t)
        return t
    pp = "inf" if p == math.inf else (Fraction(p) if not isinstance(p, float) else p)
    norm = cp.norm(x, pp)
    expr = norm if d == 1 else cp.power(norm, int(d))
    program.add_cone_epigraph(f"{name}:epigraph", expr, t)
    return t
