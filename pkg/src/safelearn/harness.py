"""Experimental scaffolding: the hidden true system, safety auditing,
run logging with region/uncertainty snapshots, and experiment configs.

The harness owns everything a learning session needs around the learner
itself: an oracle built from the (hidden) true dynamics, an append-only
log of queries and observations with their costs, polygon snapshots of
how the safe region grows and the uncertainty shrinks, and YAML configs
that make every experiment reproducible from a single file.
"""

from __future__ import annotations

import ast
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import cvxpy as cp
import numpy as np
import yaml

from . import geometry
from .conic import QuadraticForm
from .geometry import LiftedPolyhedron, Polygon2D, Polyhedron

_GRAMMAR_FUNCS = {"sin": np.sin, "sqrt": np.sqrt}
_GRAMMAR_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant,
                  ast.Name, ast.Call, ast.Load,
                  ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow,
                  ast.USub, ast.UAdd)


def compile_component(expr: str, n: int):
    """Compile one component of g* from the small expression grammar.

    Allowed: numeric literals, variables x1..xn, + - * / **, and the
    functions sin and sqrt. The compiled callable accepts a length-n
    vector (or an (m, n) batch) and returns scalars (or a length-m array).
    """
    tree = ast.parse(expr, mode="eval")
    names = {f"x{i + 1}" for i in range(n)}
    for node in ast.walk(tree):
        if not isinstance(node, _GRAMMAR_NODES):
            raise ValueError(f"disallowed syntax {type(node).__name__!r} in {expr!r}")
        if isinstance(node, ast.Name) and node.id not in names | set(_GRAMMAR_FUNCS):
            raise ValueError(f"unknown name {node.id!r} in {expr!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _GRAMMAR_FUNCS:
                raise ValueError(f"only {sorted(_GRAMMAR_FUNCS)} may be called")
            if node.keywords or len(node.args) != 1:
                raise ValueError("grammar functions take one positional argument")
    code = compile(tree, "<g-expression>", "eval")

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        cols = x.T if x.ndim == 2 else x
        scope = {f"x{i + 1}": cols[i] for i in range(n)}
        scope.update(_GRAMMAR_FUNCS)
        return eval(code, {"__builtins__": {}}, scope)

    return evaluate


@dataclass
class TrueSystem:
    """The hidden dynamics ``f(x) = A x + g(x)`` driving a session."""

    A_star: np.ndarray
    g_exprs: tuple[str, ...] | None = None

    def __post_init__(self):
        self.A_star = np.asarray(self.A_star, dtype=float)
        if self.g_exprs is not None:
            self.g_exprs = tuple(self.g_exprs)
            if len(self.g_exprs) != self.n:
                raise ValueError("one g expression per state component required")
            self._g_parts = [compile_component(e, self.n) for e in self.g_exprs]
        else:
            self._g_parts = None

    @property
    def n(self) -> int:
        return self.A_star.shape[0]

    @property
    def is_linear(self) -> bool:
        return self._g_parts is None

    def g(self, x) -> np.ndarray:
        if self._g_parts is None:
            return np.zeros(self.n)
        return np.array([float(part(x)) for part in self._g_parts])

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.A_star @ x + self.g(x)

    def validate_g_bound(self, S: Polyhedron, gamma: float, p, d: int,
                         samples: int = 10_000, seed: int = 0,
                         tol: float = 1e-9) -> float:
        """Sampled check that ``||g(x)||_inf <= gamma ||x||_p^d`` on S.

        Returns the worst ratio observed; raises when it exceeds 1 + tol.
        The check is sampled scaffolding, not a certificate.
        """
        if self._g_parts is None:
            return 0.0
        rng = np.random.default_rng(seed)
        pts = sample_in_polyhedron(S, samples, rng)
        worst = 0.0
        for x in pts:
            bound = gamma * _pnorm(x, p) ** d
            val = float(np.max(np.abs(self.g(x))))
            if bound == 0.0:
                if val > tol:
                    raise ValueError("g violates its bound at the origin")
                continue
            worst = max(worst, val / bound)
        if worst > 1.0 + tol:
            raise ValueError(f"g exceeds its bound by factor {worst:.6f} on samples")
        return worst


def _pnorm(x, p) -> float:
    if p == math.inf or p == "inf":
        return float(np.max(np.abs(x)))
    return float(np.sum(np.abs(x) ** p) ** (1.0 / p))


def sample_in_polyhedron(S: Polyhedron, count: int, rng) -> np.ndarray:
    """Uniform rejection sampling from the bounding box of S."""
    lifted = LiftedPolyhedron.from_polyhedron(S)
    lo = np.empty(S.dimension)
    hi = np.empty(S.dimension)
    for i in range(S.dimension):
        e = np.zeros(S.dimension)
        e[i] = 1.0
        hi[i] = geometry.support(lifted, e)
        lo[i] = -geometry.support(lifted, -e)
        if not (math.isfinite(lo[i]) and math.isfinite(hi[i])):
            raise ValueError("cannot sample from an unbounded safety region")
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise RuntimeError("rejection sampling stalled; region too thin")
        batch = rng.uniform(lo, hi, size=(count, S.dimension))
        inside = (batch @ S.H.T <= S.b + 1e-12).all(axis=1)
        out.extend(batch[inside])
    return np.array(out[:count])


def observe(sys: TrueSystem, x, horizon: int = 1):
    """Apply the hidden dynamics: y, or (y, z) for a length-two trajectory."""
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise ValueError(f"query of shape {x.shape} for n={sys.n}")
    y = sys.f(x)
    if horizon == 1:
        return y
    if horizon == 2:
        return y, sys.f(y)
    raise ValueError("horizon must be 1 or 2")


# -- run logs ----------------------------------------------------------------


@dataclass
class StepRecord:
    k: int
    query: np.ndarray
    observations: tuple[np.ndarray, ...]
    step_cost: float
    cumulative_cost: float
    solver_stats: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


@dataclass
class RunLog:
    """Append-only audit trail of one learning session."""

    mode: str
    config_digest: str = ""
    seeds: dict = field(default_factory=dict)
    steps: list[StepRecord] = field(default_factory=list)
    region_snapshots: dict[int, Polygon2D] = field(default_factory=dict)
    uncertainty_snapshots: dict[int, Polygon2D] = field(default_factory=dict)
    outcome: dict = field(default_factory=dict)

    @property
    def total_cost(self) -> float:
        return self.steps[-1].cumulative_cost if self.steps else 0.0

    def add_step(self, record: StepRecord) -> None:
        expected = self.total_cost + record.step_cost
        if not math.isclose(record.cumulative_cost, expected,
                            rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError("cumulative cost must be the prefix sum of step costs")
        self.steps.append(record)

    def states(self):
        """Every query and observation, in order."""
        for rec in self.steps:
            yield rec.query
            yield from rec.observations

    def fingerprint(self) -> str:
        """Digest of the log content excluding solver timing fields."""
        h = hashlib.sha256()
        h.update(self.mode.encode())
        h.update(self.config_digest.encode())
        h.update(repr(sorted(self.seeds.items())).encode())
        for rec in self.steps:
            h.update(np.asarray(rec.query, dtype=float).tobytes())
            for obs in rec.observations:
                h.update(np.asarray(obs, dtype=float).tobytes())
            h.update(np.float64(rec.step_cost).tobytes())
        for key in sorted(self.region_snapshots):
            h.update(self.region_snapshots[key].vertices.tobytes())
        for key in sorted(self.uncertainty_snapshots):
            h.update(self.uncertainty_snapshots[key].vertices.tobytes())
        h.update(_canonical_yaml(_plain(self.outcome)).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class AuditReport:
    passed: bool
    worst_margin: float
    violations: tuple[tuple[int, float], ...]  # (state index, margin)
    states_checked: int


def audit(log: RunLog, S: Polyhedron, tol: float = 1e-6) -> AuditReport:
    """Verify every logged state stayed inside S at tolerance."""
    worst = math.inf
    violations = []
    count = 0
    for idx, state in enumerate(log.states()):
        m = geometry.margin(S, state)
        worst = min(worst, m)
        if m < -tol:
            violations.append((idx, m))
        count += 1
    if count == 0:
        worst = math.inf
    return AuditReport(not violations, worst, tuple(violations), count)


# -- uncertainty snapshots ---------------------------------------------------

TRACE_FEATURE = "trace"
ENTRY_SUM_FEATURE = "entry_sum"


def _feature_vectors(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.eye(n).ravel(), np.ones(n * n)


def uncertainty_snapshot_polytope(U: LiftedPolyhedron, n: int,
                                  K: int = geometry.DEFAULT_DIRECTIONS) -> Polygon2D:
    """Projection of a matrix polytope onto the (trace, entry-sum) plane."""
    f1, f2 = _feature_vectors(n)
    angles = 2.0 * np.pi * np.arange(K) / K
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    supports = np.array([geometry.support(U, d1 * f1 + d2 * f2)
                         for d1, d2 in directions])
    return geometry.polygon_from_supports(directions, supports)


def uncertainty_snapshot_ellipsoid(qhat: QuadraticForm, anchor_vec: np.ndarray,
                                   basis_mat: np.ndarray, n: int,
                                   K: int = geometry.DEFAULT_DIRECTIONS) -> Polygon2D:
    """Projection of ``{anchor + N a : qhat(a) <= 0}`` onto (trace, entry-sum).

    Supports are computed by a small second-order cone program per
    direction, sharing one parametrized problem across all directions.
    """
    f1, f2 = _feature_vectors(n)
    nhat = basis_mat.shape[1]
    center = qhat.minimizer()
    radius_sq = -qhat(center)
    angles = 2.0 * np.pi * np.arange(K) / K
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    if radius_sq < 0:
        supports = np.full(K, -math.inf)
        return geometry.polygon_from_supports(directions, supports)
    L = np.linalg.cholesky(np.asarray(qhat.Q))
    rho = math.sqrt(max(radius_sq, 0.0))

    a = cp.Variable(nhat)
    w = cp.Parameter(nhat)
    problem = cp.Problem(cp.Maximize(w @ a),
                         [cp.SOC(rho, L.T @ (a - center))])
    supports = np.empty(K)
    for k, (d1, d2) in enumerate(directions):
        feat = d1 * f1 + d2 * f2
        w.value = basis_mat.T @ feat
        problem.solve(solver=cp.CLARABEL)
        if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            raise RuntimeError(f"ellipsoid support SOCP failed: {problem.status}")
        supports[k] = float(problem.value) + float(feat @ anchor_vec)
    return geometry.polygon_from_supports(directions, supports)


# -- experiment configuration ------------------------------------------------


def _plain(value):
    """Recursively convert numpy containers to YAML-friendly builtins."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _canonical_yaml(data) -> str:
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=None)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one learning session."""

    name: str
    mode: str  # "linear1" | "linear2" | "nonlinear1"
    n: int
    safety: dict
    uncertainty: dict
    cost: object  # vector, or "random" for sampled directions
    true_system: dict
    epsilon: float = 0.01
    steps: int | None = None
    seeds: dict = field(default_factory=dict)
    snapshot: dict = field(default_factory=dict)
    validate_g: bool = True
    disturbance: dict | None = None

    def __post_init__(self):
        if self.mode not in ("linear1", "linear2", "nonlinear1"):
            raise ValueError(f"unknown mode {self.mode!r}")
        self._check_dimensions()

    def _check_dimensions(self):
        n = self.n
        S = self.safety_polyhedron()
        if S.dimension != n:
            raise ValueError("safety region dimension disagrees with n")
        A = np.asarray(self.true_system["A"], dtype=float)
        if A.shape != (n, n):
            raise ValueError("true system matrix must be n x n")
        if isinstance(self.cost, (list, tuple)) and len(self.cost) != n:
            raise ValueError("cost vector length disagrees with n")

    # -- domain object accessors --

    def safety_polyhedron(self) -> Polyhedron:
        if "box" in self.safety:
            return Polyhedron.box(self.n, float(self.safety["box"]))
        return Polyhedron.from_inequalities(self.safety["normals"],
                                            self.safety["offsets"])

    def matrix_prior(self):
        from .linear_onestep import MatrixPolytope
        cfg = self.uncertainty
        if cfg["kind"] != "matrix_polytope":
            raise ValueError("mode needs a matrix_polytope uncertainty")
        if "matrices" in cfg:
            return MatrixPolytope(np.array(cfg["matrices"], dtype=float),
                                  np.array(cfg["offsets"], dtype=float))
        return MatrixPolytope.entrywise_box(
            self.n, _entry_bound(cfg["entry_low"], self.n),
            _entry_bound(cfg["entry_high"], self.n))

    def ellipsoid_prior(self):
        from .linear_twostep import EllipsoidalMatrixUncertainty
        cfg = self.uncertainty
        if cfg["kind"] != "frobenius_ball":
            raise ValueError("mode needs a frobenius_ball uncertainty")
        return EllipsoidalMatrixUncertainty.frobenius_ball(
            np.array(cfg["center"], dtype=float), float(cfg["radius"]))

    def nonlinear_prior(self):
        from .linear_onestep import MatrixPolytope
        from .nonlinear_onestep import NonlinearUncertainty
        cfg = self.uncertainty
        if cfg["kind"] != "nonlinear":
            raise ValueError("mode needs a nonlinear uncertainty")
        if "matrices" in cfg:
            U0A = MatrixPolytope(np.array(cfg["matrices"], dtype=float),
                                 np.array(cfg["offsets"], dtype=float))
        else:
            U0A = MatrixPolytope.entrywise_box(
                self.n, _entry_bound(cfg["entry_low"], self.n),
                _entry_bound(cfg["entry_high"], self.n))
        p = cfg.get("p", "inf")
        p = math.inf if p in ("inf", None) else float(p)
        return NonlinearUncertainty(U0A, float(cfg["gamma"]), p,
                                    int(cfg.get("d", 0)))

    def system(self) -> TrueSystem:
        g = self.true_system.get("g")
        return TrueSystem(np.array(self.true_system["A"], dtype=float),
                          tuple(g) if g else None)

    def cost_vector(self) -> np.ndarray:
        if not isinstance(self.cost, (list, tuple)):
            raise ValueError("this mode needs an explicit cost vector")
        return np.asarray(self.cost, dtype=float)

    def snapshot_dims(self) -> tuple[int, int]:
        dims = self.snapshot.get("dims", [0, 1])
        return int(dims[0]), int(dims[1])

    def snapshot_directions(self) -> int:
        return int(self.snapshot.get("directions", geometry.DEFAULT_DIRECTIONS))

    def snapshot_regions_enabled(self) -> bool:
        default = self.mode != "linear2"
        return bool(self.snapshot.get("regions", default))

    # -- serialization --

    def to_dict(self) -> dict:
        out = {"name": self.name, "mode": self.mode, "n": self.n,
               "safety": _plain(self.safety),
               "uncertainty": _plain(self.uncertainty),
               "cost": _plain(self.cost), "epsilon": self.epsilon,
               "true_system": _plain(self.true_system),
               "seeds": _plain(self.seeds), "snapshot": _plain(self.snapshot),
               "validate_g": self.validate_g}
        if self.steps is not None:
            out["steps"] = self.steps
        if self.disturbance is not None:
            out["disturbance"] = _plain(self.disturbance)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"name", "mode", "n", "safety", "uncertainty", "cost",
                 "epsilon", "true_system", "steps", "seeds", "snapshot",
                 "validate_g", "disturbance"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        missing = {"name", "mode", "n", "safety", "uncertainty",
                   "true_system"} - set(data)
        if missing:
            raise ValueError(f"missing config keys: {sorted(missing)}")
        return cls(name=data["name"], mode=data["mode"], n=int(data["n"]),
                   safety=data["safety"], uncertainty=data["uncertainty"],
                   cost=data.get("cost"), true_system=data["true_system"],
                   epsilon=float(data.get("epsilon", 0.01)),
                   steps=data.get("steps"), seeds=data.get("seeds", {}),
                   snapshot=data.get("snapshot", {}),
                   validate_g=bool(data.get("validate_g", True)),
                   disturbance=data.get("disturbance"))

    def to_yaml(self) -> str:
        return _canonical_yaml(self.to_dict())

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(yaml.safe_load(text))

    def digest(self) -> str:
        return hashlib.sha256(self.to_yaml().encode()).hexdigest()


def _entry_bound(value, n: int):
    arr = np.asarray(value, dtype=float)
    return arr if arr.ndim else float(arr)


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_yaml(Path(path).read_text())


# -- running experiments -----------------------------------------------------


def sphere_sampler(n: int, seed: int):
    """Seeded uniform directions on the unit sphere, one per step."""
    rng = np.random.default_rng(seed)

    def sample(_step: int) -> np.ndarray:
        while True:
            d = rng.normal(size=n)
            norm = np.linalg.norm(d)
            if norm > 1e-12:
                return d / norm

    return sample


def run(config: ExperimentConfig, *, snapshots: bool = True,
        settings=None) -> RunLog:
    """Execute the configured learning session and snapshot its progress."""
    from . import linear_onestep, linear_twostep, nonlinear_onestep

    S = config.safety_polyhedron()
    if config.disturbance:
        ball = linear_onestep.polytopic_ball(config.disturbance.get("ball", "inf"),
                                             config.n)
        S = linear_onestep.disturbance_tighten(S, float(config.disturbance["W"]), ball)
    sys = config.system()

    if config.mode == "linear1":
        if not sys.is_linear:
            raise ValueError("linear1 mode requires a linear true system")
        U0 = config.matrix_prior()
        outcome = linear_onestep.learn_online(
            S, U0, config.cost_vector(), config.epsilon,
            lambda x: observe(sys, x, 1), settings=settings)
        log = outcome.log
    elif config.mode == "linear2":
        if not sys.is_linear:
            raise ValueError("linear2 mode requires a linear true system")
        U0 = config.ellipsoid_prior()
        outcome = linear_twostep.learn_two_step(
            S, U0, config.cost_vector(), lambda x: observe(sys, x, 2),
            settings=settings)
        log = outcome.log
    else:
        U = config.nonlinear_prior()
        if config.validate_g:
            sys.validate_g_bound(S, U.gamma, U.p, U.d,
                                 seed=int(config.seeds.get("validation", 0)))
        steps = config.steps or 30
        sampler = sphere_sampler(config.n, int(config.seeds.get("exploration", 0)))
        log = nonlinear_onestep.safe_explore(
            S, U, sampler, steps, lambda x: observe(sys, x, 1),
            settings=settings)

    log.config_digest = config.digest()
    log.seeds = dict(config.seeds)
    if snapshots:
        attach_snapshots(log, config, S)
    return log


def attach_snapshots(log: RunLog, config: ExperimentConfig, S: Polyhedron) -> None:
    """Recompute per-step region and uncertainty polygons from the log."""
    from . import linear_onestep, linear_twostep, nonlinear_onestep
    from .linear_onestep import MeasurementSet

    dims = config.snapshot_dims()
    K = config.snapshot_directions()
    regions_on = config.snapshot_regions_enabled()
    m = len(log.steps)

    if config.mode == "linear1":
        U0 = config.matrix_prior()
        for k in range(m + 1):
            data = MeasurementSet(
                (rec.query, rec.observations[0]) for rec in log.steps[:k])
            if regions_on:
                region = linear_onestep.onestep_lifted(S, U0, data)
                log.region_snapshots[k] = geometry.project2d(region, dims, K)
            uk = linear_onestep.uncertainty_polyhedron(U0, data)
            log.uncertainty_snapshots[k] = uncertainty_snapshot_polytope(
                uk, config.n, K)
    elif config.mode == "linear2":
        U0 = config.ellipsoid_prior()
        for k in range(m + 1):
            data = linear_twostep.TwoStepData(
                [(rec.query, rec.observations[0], rec.observations[1])
                 for rec in log.steps[:k]])
            sub = linear_twostep.consistent_subspace(data, config.n)
            if sub.nhat == 0:
                feat = np.array([np.trace(sub.anchor), np.sum(sub.anchor)])
                angles = 2.0 * np.pi * np.arange(K) / K
                dirs = np.column_stack([np.cos(angles), np.sin(angles)])
                log.uncertainty_snapshots[k] = geometry.polygon_from_supports(
                    dirs, dirs @ feat)
                continue
            qhat = linear_twostep.restrict_to_subspace(U0.quadratic, sub)
            log.uncertainty_snapshots[k] = uncertainty_snapshot_ellipsoid(
                qhat, sub.anchor.ravel(), sub.basis_matrix, config.n, K)
    else:
        U = config.nonlinear_prior()
        for k in range(m + 1):
            data = MeasurementSet(
                ((rec.query, rec.observations[0]) for rec in log.steps[:k]),
                enforce_independence=False)
            if regions_on:
                log.region_snapshots[k] = nonlinear_onestep.region_polygon(
                    S, U, data, dims, K)
            uk = nonlinear_onestep.uncertainty_polyhedron(U, data)
            log.uncertainty_snapshots[k] = uncertainty_snapshot_polytope(
                uk, config.n, K)


# -- run log directory layout ------------------------------------------------


def write_runlog(log: RunLog, outdir) -> Path:
    """Serialize a log as summary.yaml + steps.csv + polygon CSV trees."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = {
        "mode": log.mode,
        "config_digest": log.config_digest,
        "seeds": _plain(log.seeds),
        "outcome": _plain(log.outcome),
        "total_cost": log.total_cost,
        "fingerprint": log.fingerprint(),
        "steps_meta": [
            {"k": rec.k, "solver_stats": _plain(rec.solver_stats),
             "extras": _plain(rec.extras)}
            for rec in log.steps],
    }
    (outdir / "summary.yaml").write_text(_canonical_yaml(summary))

    lines = []
    if log.steps:
        n = len(log.steps[0].query)
        obs_count = len(log.steps[0].observations)
        header = (["k"] + [f"x_{i}" for i in range(n)]
                  + [f"obs{j}_{i}" for j in range(obs_count) for i in range(n)]
                  + ["step_cost", "cumulative_cost"])
        lines.append(",".join(header))
        for rec in log.steps:
            row = [str(rec.k)]
            row += [f"{v:.17g}" for v in rec.query]
            for obs in rec.observations:
                row += [f"{v:.17g}" for v in obs]
            row += [f"{rec.step_cost:.17g}", f"{rec.cumulative_cost:.17g}"]
            lines.append(",".join(row))
    (outdir / "steps.csv").write_text("\n".join(lines) + "\n")

    for label, snaps in (("regions", log.region_snapshots),
                         ("uncertainty", log.uncertainty_snapshots)):
        if not snaps:
            continue
        subdir = outdir / label
        subdir.mkdir(exist_ok=True)
        for k, poly in snaps.items():
            geometry.polygon_to_csv(poly, subdir / f"step_{k:03d}.csv")
    return outdir


def read_runlog(outdir) -> RunLog:
    """Load the numeric core of a serialized log (steps + summary)."""
    outdir = Path(outdir)
    summary = yaml.safe_load((outdir / "summary.yaml").read_text())
    log = RunLog(mode=summary["mode"], config_digest=summary["config_digest"],
                 seeds=summary.get("seeds", {}),
                 outcome=summary.get("outcome", {}))
    lines = (outdir / "steps.csv").read_text().strip().splitlines()
    if lines and lines[0]:
        header = lines[0].split(",")
        n = sum(1 for h in header if h.startswith("x_"))
        obs_count = sum(1 for h in header if h.startswith("obs") and h.endswith("_0"))
        for line in lines[1:]:
            vals = line.split(",")
            k = int(vals[0])
            query = np.array([float(v) for v in vals[1:1 + n]])
            observations = []
            pos = 1 + n
            for _ in range(obs_count):
                observations.append(np.array([float(v) for v in vals[pos:pos + n]]))
                pos += n
            step_cost = float(vals[pos])
            cumulative = float(vals[pos + 1])
            log.steps.append(StepRecord(k, query, tuple(observations),
                                        step_cost, cumulative))
    for label, store in (("regions", log.region_snapshots),
                         ("uncertainty", log.uncertainty_snapshots)):
        subdir = outdir / label
        if subdir.is_dir():
            for path in sorted(subdir.glob("step_*.csv")):
                k = int(path.stem.split("_")[1])
                store[k] = geometry.polygon_from_csv(path)
    return log
