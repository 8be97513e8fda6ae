"""Seeded random instances shared between module tests and the
acceptance suite."""

from __future__ import annotations

import numpy as np

from safelearn.geometry import Polyhedron
from safelearn.linear_onestep import MatrixPolytope, MeasurementSet

from oracles import enumerate_vertices


def random_safety_region(rng, n=2, max_extra=2) -> Polyhedron:
    """Box with a few extra cuts; at most 4 + max_extra facets, origin inside."""
    H = np.vstack([np.eye(n), -np.eye(n)])
    b = rng.uniform(0.4, 1.5, size=2 * n)
    extra = int(rng.integers(0, max_extra + 1))
    for _ in range(extra):
        h = rng.normal(size=n)
        h /= np.linalg.norm(h)
        H = np.vstack([H, h])
        b = np.concatenate([b, [rng.uniform(0.3, 1.2)]])
    return Polyhedron.from_inequalities(H, b)


def random_matrix_prior(rng, n=2) -> MatrixPolytope:
    """Entrywise box, optionally with one extra trace-style cut."""
    lo = -rng.uniform(0.5, 2.0, size=(n, n))
    hi = rng.uniform(0.5, 2.0, size=(n, n))
    U = MatrixPolytope.entrywise_box(n, lo, hi)
    if rng.random() < 0.5:
        V = rng.normal(size=(n, n))
        center = (lo + hi) / 2.0
        v = float(np.sum(V * center)) + rng.uniform(0.3, 1.0)
        U = MatrixPolytope(np.concatenate([U.mats, V[None]]),
                           np.concatenate([U.offsets, [v]]))
    return U


def sample_prior_matrix(rng, U: MatrixPolytope, tol=1e-9) -> np.ndarray:
    """A random point of the prior polytope (mix of random vertices)."""
    n = U.n
    G = np.stack([V.ravel() for V in U.mats])
    verts = []
    for _ in range(6):
        from scipy.optimize import linprog
        res = linprog(rng.normal(size=n * n), A_ub=G, b_ub=U.offsets,
                      bounds=[(None, None)] * (n * n), method="highs")
        if res.status == 0:
            verts.append(res.x)
    weights = rng.dirichlet(np.ones(len(verts)))
    A = (weights @ np.array(verts)).reshape(n, n)
    assert U.contains(A, tol=1e-7)
    return A


def uncertainty_vertices(U: MatrixPolytope, data: MeasurementSet) -> np.ndarray:
    """Vertex enumeration of U_k over vec(A), equalities from the data."""
    n = U.n
    G = np.stack([V.ravel() for V in U.mats])
    E_rows, e_rhs = [], []
    for x, y in data:
        for l in range(n):
            row = np.zeros(n * n)
            row[l * n:(l + 1) * n] = x
            E_rows.append(row)
            e_rhs.append(y[l])
    E = np.array(E_rows).reshape(len(E_rows), n * n)
    verts = enumerate_vertices(G, U.offsets, E, np.array(e_rhs))
    return np.array([v.reshape(n, n) for v in verts])


def random_onestep_instance(rng, n=2, with_data_prob=0.5):
    """(S, U0, A_star, data) with data generated by the true system."""
    S = random_safety_region(rng, n)
    U0 = random_matrix_prior(rng, n)
    A_star = sample_prior_matrix(rng, U0)
    data = MeasurementSet()
    if rng.random() < with_data_prob:
        x1 = rng.uniform(-0.3, 0.3, size=n)
        if np.linalg.norm(x1) > 1e-6:
            data.append(x1, A_star @ x1)
    return S, U0, A_star, data
