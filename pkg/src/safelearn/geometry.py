"""Polyhedral primitives: membership, support functions, singleton detection,
span bases of lifted polyhedra, and 2-D projection polygons.

A lifted polyhedron is the projection onto x-space of ``{(x, y) : Ax + By <= c}``.
All linear programs in this module are solved with HiGHS through
``scipy.optimize.linprog``; +inf / -inf support values encode unbounded /
empty outcomes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as spa
from scipy.optimize import linprog

# Relative singular-value threshold for numeric linear independence.
DEFAULT_RANK_TOL = 1e-7
# Coordinate-width threshold below which a polyhedron counts as a point.
DEFAULT_SINGLETON_TOL = 1e-6
# Default number of support directions for 2-D projections.
DEFAULT_DIRECTIONS = 128


class GeometryError(RuntimeError):
    """An LP subroutine failed to certify the outcome it was asked for."""


@dataclass(frozen=True)
class Halfspace:
    """One inequality ``normal . x <= offset``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float)
        if normal.ndim != 1 or not np.any(normal):
            raise ValueError("halfspace normal must be a nonzero vector")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))


@dataclass(frozen=True)
class Polyhedron:
    """H-representation ``{x : H x <= b}`` with one Halfspace per row."""

    halfspaces: tuple[Halfspace, ...]
    dimension: int

    def __post_init__(self):
        object.__setattr__(self, "halfspaces", tuple(self.halfspaces))
        for hs in self.halfspaces:
            if hs.normal.shape != (self.dimension,):
                raise ValueError(
                    f"normal of length {hs.normal.shape[0]} in R^{self.dimension}"
                )

    @classmethod
    def from_inequalities(cls, H, b) -> "Polyhedron":
        H = np.atleast_2d(np.asarray(H, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if H.shape[0] != b.shape[0]:
            raise ValueError("row counts of H and b disagree")
        return cls(tuple(Halfspace(h, bi) for h, bi in zip(H, b)), H.shape[1])

    @classmethod
    def box(cls, n: int, radius: float = 1.0) -> "Polyhedron":
        """The inf-norm ball ``{x : |x_i| <= radius}``."""
        H = np.vstack([np.eye(n), -np.eye(n)])
        return cls.from_inequalities(H, np.full(2 * n, float(radius)))

    @property
    def H(self) -> np.ndarray:
        return np.array([hs.normal for hs in self.halfspaces])

    @property
    def b(self) -> np.ndarray:
        return np.array([hs.offset for hs in self.halfspaces])

    @property
    def num_facets(self) -> int:
        return len(self.halfspaces)


def contains(P: Polyhedron, x, tol: float = 0.0) -> bool:
    """True iff ``h_i . x <= b_i + tol`` for every facet."""
    x = np.asarray(x, dtype=float)
    if x.shape != (P.dimension,):
        raise ValueError(f"point of shape {x.shape} in R^{P.dimension}")
    return bool(np.all(P.H @ x <= P.b + tol))


def margin(P: Polyhedron, x) -> float:
    """Smallest slack ``min_i (b_i - h_i . x)``; negative outside P."""
    x = np.asarray(x, dtype=float)
    return float(np.min(P.b - P.H @ x))


@dataclass(frozen=True)
class LiftedPolyhedron:
    """``{x : exists y with A x + B y <= c}``; matrices may be scipy-sparse."""

    A: object
    B: object
    c: np.ndarray

    def __post_init__(self):
        A = self.A if spa.issparse(self.A) else np.atleast_2d(np.asarray(self.A, float))
        B = self.B if spa.issparse(self.B) else np.atleast_2d(np.asarray(self.B, float))
        c = np.asarray(self.c, dtype=float).ravel()
        if B.shape[1] == 0:
            B = spa.csr_matrix((A.shape[0], 0)) if spa.issparse(A) else np.zeros((A.shape[0], 0))
        if A.shape[0] != c.shape[0] or B.shape[0] != c.shape[0]:
            raise ValueError("row counts of A, B, c disagree")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_polyhedron(cls, P: Polyhedron) -> "LiftedPolyhedron":
        return cls(P.H, np.zeros((P.num_facets, 0)), P.b)

    @property
    def dim_x(self) -> int:
        return self.A.shape[1]

    @property
    def dim_y(self) -> int:
        return self.B.shape[1]

    def stacked(self):
        """Constraint matrix on (x, y) as a single matrix."""
        if spa.issparse(self.A) or spa.issparse(self.B):
            return spa.hstack([spa.csr_matrix(self.A), spa.csr_matrix(self.B)], format="csr")
        return np.hstack([self.A, self.B])

    def satisfied_by(self, x, tol: float = 1e-8) -> bool:
        """Feasibility of x to the lifted system (one LP over y)."""
        x = np.asarray(x, dtype=float)
        rhs = self.c - (self.A @ x)
        if self.dim_y == 0:
            return bool(np.all(rhs >= -tol))
        res = _lp(np.zeros(self.dim_y), self.B, rhs + tol)
        return res.status == 0


@dataclass(frozen=True)
class BasisSet:
    """Ordered, numerically independent vectors spanning a subspace."""

    vectors: tuple[np.ndarray, ...]
    rank_tolerance: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        vecs = tuple(np.asarray(v, dtype=float) for v in self.vectors)
        object.__setattr__(self, "vectors", vecs)
        if vecs:
            s = np.linalg.svd(np.vstack(vecs), compute_uv=False)
            if s[-1] < self.rank_tolerance * s[0]:
                raise ValueError("basis vectors are not independent at tolerance")

    def __len__(self) -> int:
        return len(self.vectors)

    def __iter__(self):
        return iter(self.vectors)


def _lp(c, A_ub, b_ub, A_eq=None, b_eq=None, bounds=None):
    """linprog with free variables by default (scipy defaults to x >= 0)."""
    n = len(c)
    if bounds is None:
        bounds = [(None, None)] * n
    return linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                   bounds=bounds, method="highs")


def support(P: LiftedPolyhedron, d) -> float:
    """``sup { d . x : x in P }``.

    Returns +inf when the LP is unbounded and -inf when P is empty
    (the supremum over the empty set).
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (P.dim_x,):
        raise ValueError(f"direction of shape {d.shape} for dim {P.dim_x}")
    c = np.concatenate([-d, np.zeros(P.dim_y)])
    res = _lp(c, P.stacked(), P.c)
    if res.status == 0:
        return float(-res.fun)
    if res.status == 2:
        return -math.inf
    if res.status == 3:
        return math.inf
    raise GeometryError(f"support LP failed with status {res.status}: {res.message}")


@dataclass(frozen=True)
class SingletonVerdict:
    """Outcome of the 2n-LP singleton test."""

    kind: str  # "singleton" | "not_singleton" | "empty"
    point: np.ndarray | None = None
    widths: np.ndarray | None = None

    @property
    def is_singleton(self) -> bool:
        return self.kind == "singleton"

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"


def is_singleton(P: LiftedPolyhedron, tol: float = DEFAULT_SINGLETON_TOL) -> SingletonVerdict:
    """Decide whether the x-projection of P is a single point.

    Maximizes and minimizes each coordinate (2n LPs). The verdict carries
    the coordinate widths; a singleton reports the coordinate-wise midpoint.
    """
    n = P.dim_x
    M = P.stacked()
    lo = np.empty(n)
    hi = np.empty(n)
    widths = np.full(n, math.inf)
    for i in range(n):
        c = np.zeros(n + P.dim_y)
        c[i] = 1.0
        res_min = _lp(c, M, P.c)
        if res_min.status == 2:
            return SingletonVerdict("empty")
        if res_min.status == 3:
            return SingletonVerdict("not_singleton", widths=widths)
        res_max = _lp(-c, M, P.c)
        if res_max.status == 3:
            return SingletonVerdict("not_singleton", widths=widths)
        if res_min.status != 0 or res_max.status != 0:
            raise GeometryError("singleton test LP did not converge")
        lo[i], hi[i] = res_min.fun, -res_max.fun
        widths[i] = hi[i] - lo[i]
        if widths[i] > tol:
            return SingletonVerdict("not_singleton", widths=widths)
    return SingletonVerdict("singleton", point=(lo + hi) / 2.0, widths=widths)


def independent_of(x, basis: BasisSet) -> bool:
    """True iff appending x keeps the stack numerically full-rank.

    The test is relative: smallest singular value >= rank_tolerance times
    the largest. The zero vector is never independent.
    """
    x = np.asarray(x, dtype=float)
    if not len(basis):
        return bool(np.linalg.norm(x) > 0.0)
    stack = np.vstack([np.vstack(list(basis)), x])
    s = np.linalg.svd(stack, compute_uv=False)
    return bool(s[-1] >= basis.rank_tolerance * s[0])


def _feasible_point(P: LiftedPolyhedron):
    """Any (x, y) satisfying the lifted system, or None when P is empty."""
    res = _lp(np.zeros(P.dim_x + P.dim_y), P.stacked(), P.c)
    if res.status == 2:
        return None
    if res.status != 0:
        raise GeometryError(f"feasibility LP failed with status {res.status}")
    return res.x[: P.dim_x], res.x[P.dim_x:]


def span_basis(P: LiftedPolyhedron, tol: float = DEFAULT_RANK_TOL) -> BasisSet:
    """A basis of span(P) whose vectors are themselves members of P.

    Iteratively solves the homogeneous feasibility system in
    (x, x+, x-, y+, y-, lam+, lam-): orthogonality to the current basis,
    x = x+ - x-, A x± + B y± <= lam± c, lam± >= 0. Each round maximizes and
    minimizes every coordinate of x over the system intersected with the
    box |x_j| <= 1 (the system is a cone, so nonzero solutions scale to the
    box boundary). A nonzero solution is shifted by a feasible point of P
    to force lam± >= 1, and whichever of x+/lam+, x-/lam- is independent of
    the current basis is appended.
    """
    n, p = P.dim_x, P.dim_y
    feas = _feasible_point(P)
    if feas is None:
        return BasisSet((), tol)

    A = spa.csr_matrix(P.A) if spa.issparse(P.A) else np.asarray(P.A)
    B = spa.csr_matrix(P.B) if spa.issparse(P.B) else np.asarray(P.B)
    sparse = spa.issparse(A) or spa.issparse(B)
    if sparse:
        A, B = spa.csr_matrix(A), spa.csr_matrix(B)

    basis: list[np.ndarray] = []

    def _shift_point() -> tuple[np.ndarray, np.ndarray]:
        # Reuse e1 from the current basis as the feasible shift point when
        # one exists, solving one LP for a compatible y_hat.
        if not basis:
            return feas
        e1 = basis[0]
        rhs = P.c - P.A @ e1
        if p == 0:
            return e1, np.zeros(0)
        res = _lp(np.zeros(p), B, rhs)
        if res.status != 0:
            raise GeometryError("shift-point LP for e1 failed")
        return e1, res.x

    # Variable layout: x(n), x+(n), x-(n), y+(p), y-(p), lam+(1), lam-(1).
    width = 3 * n + 2 * p + 2
    for _round in range(n + 1):
        cvec = P.c.reshape(-1, 1)
        if sparse:
            m = A.shape[0]
            Z_np = spa.csr_matrix((m, n))
            Z_pp = spa.csr_matrix((m, p))
            row_plus = spa.hstack([Z_np, A, Z_np, B, Z_pp, -spa.csr_matrix(cvec),
                                   spa.csr_matrix((m, 1))], format="csr")
            row_minus = spa.hstack([Z_np, Z_np, A, Z_pp, B, spa.csr_matrix((m, 1)),
                                    -spa.csr_matrix(cvec)], format="csr")
            A_ub = spa.vstack([row_plus, row_minus], format="csr")
        else:
            m = A.shape[0]
            Z_np = np.zeros((m, n))
            Z_pp = np.zeros((m, p))
            z1 = np.zeros((m, 1))
            row_plus = np.hstack([Z_np, A, Z_np, B, Z_pp, -cvec, z1])
            row_minus = np.hstack([Z_np, Z_np, A, Z_pp, B, z1, -cvec])
            A_ub = np.vstack([row_plus, row_minus])

        eq_rows = []
        eq_rhs = []
        for e in basis:
            row = np.zeros(width)
            row[:n] = e
            eq_rows.append(row)
            eq_rhs.append(0.0)
        for j in range(n):  # x - x+ + x- = 0
            row = np.zeros(width)
            row[j] = 1.0
            row[n + j] = -1.0
            row[2 * n + j] = 1.0
            eq_rows.append(row)
            eq_rhs.append(0.0)
        A_eq = np.array(eq_rows)
        b_eq = np.array(eq_rhs)

        bounds = ([(-1.0, 1.0)] * n + [(None, None)] * (2 * n + 2 * p)
                  + [(0.0, None)] * 2)

        found = None
        best = 0.0
        for j in range(n):
            for sign in (1.0, -1.0):
                c = np.zeros(width)
                c[j] = -sign  # maximize sign * x_j
                res = linprog(c, A_ub=A_ub, b_ub=np.zeros(A_ub.shape[0]),
                              A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
                if res.status != 0:
                    raise GeometryError(
                        f"span-basis feasibility LP failed with status {res.status}")
                val = -res.fun
                best = max(best, val)
                if val > 0.5:
                    found = res.x
                    break
            if found is not None:
                break

        if found is None:
            if best > 1e-6:
                raise GeometryError(
                    f"span-basis round inconclusive: best coordinate value {best}")
            return BasisSet(tuple(basis), tol)

        xp = found[n:2 * n]
        xm = found[2 * n:3 * n]
        lam_p, lam_m = found[-2], found[-1]
        if lam_p < 1.0 or lam_m < 1.0:
            x_hat, _y_hat = _shift_point()
            xp, xm = xp + x_hat, xm + x_hat
            lam_p, lam_m = lam_p + 1.0, lam_m + 1.0

        current = BasisSet(tuple(basis), tol)
        added = False
        for cand in (xp / lam_p, xm / lam_m):
            if independent_of(cand, current):
                basis.append(cand)
                added = True
                break
        if not added:
            raise GeometryError("neither scaled candidate extended the basis")

    raise GeometryError("span-basis exceeded the n-round budget")


@dataclass(frozen=True)
class Polygon2D:
    """Outer polygonal approximation from support-function sampling.

    The polygon is the intersection of the K halfplanes
    ``directions[k] . z <= supports[k]`` (unbounded directions excluded).
    Directions are retained so consumers can refine or test containment
    exactly against the defining halfplanes.
    """

    vertices: np.ndarray        # (V, 2), counterclockwise
    directions: np.ndarray      # (K, 2)
    supports: np.ndarray        # (K,), +inf marks an unbounded direction
    is_empty: bool = False

    @property
    def unbounded_directions(self) -> np.ndarray:
        return np.isinf(self.supports)

    def contains_point(self, z, tol: float = 0.0) -> bool:
        if self.is_empty:
            return False
        z = np.asarray(z, dtype=float)
        finite = ~self.unbounded_directions
        return bool(np.all(self.directions[finite] @ z <= self.supports[finite] + tol))

    def contains_polygon(self, other: "Polygon2D", tol: float = 0.0) -> bool:
        if other.is_empty:
            return True
        return all(self.contains_point(v, tol) for v in other.vertices)


def _clip(poly: list[np.ndarray], d: np.ndarray, s: float) -> list[np.ndarray]:
    """Sutherland-Hodgman clip of a convex polygon by ``d . z <= s``."""
    out: list[np.ndarray] = []
    k = len(poly)
    for i in range(k):
        cur, nxt = poly[i], poly[(i + 1) % k]
        fc, fn = d @ cur - s, d @ nxt - s
        if fc <= 0:
            out.append(cur)
        if (fc < 0 < fn) or (fn < 0 < fc):
            t = fc / (fc - fn)
            out.append(cur + t * (nxt - cur))
    return out


def polygon_from_supports(directions: np.ndarray, supports: np.ndarray,
                          dedup_tol: float | None = None) -> Polygon2D:
    """Intersect supporting halfplanes into a vertex list.

    Unbounded directions (support +inf) contribute no halfplane; an empty
    polyhedron (any support -inf) yields the empty polygon. Each halfplane
    is inflated by an LP-roundoff margin so degenerate targets (points,
    segments) survive clipping instead of vanishing.
    """
    directions = np.asarray(directions, dtype=float)
    supports = np.asarray(supports, dtype=float)
    if np.any(np.isneginf(supports)):
        return Polygon2D(np.zeros((0, 2)), directions, supports, is_empty=True)
    finite = np.isfinite(supports)
    scale = max(1.0, float(np.max(np.abs(supports[finite]))) if np.any(finite) else 1.0)
    clip_tol = 1e-9 * scale
    if dedup_tol is None:
        dedup_tol = 10.0 * clip_tol
    M = 2.0 * scale + 1.0
    poly = [np.array(v, dtype=float) for v in
            ((-M, -M), (M, -M), (M, M), (-M, M))]
    for d, s in zip(directions[finite], supports[finite]):
        poly = _clip(poly, d, s + clip_tol)
        if not poly:
            return Polygon2D(np.zeros((0, 2)), directions, supports, is_empty=True)
    verts: list[np.ndarray] = []
    for v in poly:
        if not verts or np.linalg.norm(v - verts[-1]) > dedup_tol:
            verts.append(v)
    if len(verts) > 1 and np.linalg.norm(verts[0] - verts[-1]) <= dedup_tol:
        verts.pop()
    return Polygon2D(np.array(verts).reshape(-1, 2), directions, supports)


def project2d(P: LiftedPolyhedron, dims: tuple[int, int],
              K: int = DEFAULT_DIRECTIONS) -> Polygon2D:
    """Outer approximation of the projection of P onto two coordinates.

    Samples K directions at angles 2*pi*k/K (starting from the first axis),
    lifts each into R^n, and intersects the resulting supporting halfplanes.
    The output never excludes a feasible point and converges to the true
    projection as K grows.
    """
    if K < 3:
        raise ValueError("need at least 3 directions")
    i, j = dims
    angles = 2.0 * np.pi * np.arange(K) / K
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    supports = np.empty(K)
    for k, d2 in enumerate(directions):
        d = np.zeros(P.dim_x)
        d[i], d[j] = d2
        supports[k] = support(P, d)
    return polygon_from_supports(directions, supports)


def polygon_to_csv(polygon: Polygon2D, path_or_file) -> None:
    """Rows: direction_x, direction_y, support_value, vertex_x, vertex_y.

    Vertex columns are populated on the first ``len(vertices)`` rows and
    left blank afterwards.
    """
    def _write(fh):
        writer = csv.writer(fh)
        writer.writerow(["direction_x", "direction_y", "support_value",
                         "vertex_x", "vertex_y"])
        V = len(polygon.vertices)
        for k in range(len(polygon.directions)):
            row = [f"{polygon.directions[k, 0]:.17g}",
                   f"{polygon.directions[k, 1]:.17g}",
                   f"{polygon.supports[k]:.17g}"]
            if k < V:
                row += [f"{polygon.vertices[k, 0]:.17g}",
                        f"{polygon.vertices[k, 1]:.17g}"]
            else:
                row += ["", ""]
            writer.writerow(row)

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)


def polygon_from_csv(path) -> Polygon2D:
    directions, supports, vertices = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            directions.append([float(row[0]), float(row[1])])
            supports.append(float(row[2]))
            if row[3] != "":
                vertices.append([float(row[3]), float(row[4])])
    supports = np.array(supports)
    return Polygon2D(np.array(vertices).reshape(-1, 2), np.array(directions),
                     supports, is_empty=(len(vertices) == 0))
