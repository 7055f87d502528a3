"""Polytopes given by vertex sets: support function, gauge, polar, diameter."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from ..errors import DomainError, InfeasibleError
from .simplex import solve_standard_lp

__all__ = [
    "Polytope",
    "support",
    "gauge_lp",
    "origin_interior_lp",
    "contains_point_lp",
    "contains_polytope",
    "polar_gauge_identity_check",
    "diameter",
    "hausdorff_transfer",
]


class Polytope:
    """``conv`` of a finite point set in R^d.

    The hull vertices and the facet description ``{x : A x <= 1}`` are
    computed lazily (qhull) and cached; they exist only when the origin is
    an interior point.
    """

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise DomainError("vertices must be an (m, d) array")
        self.vertices = v
        self.dim = v.shape[1]
        self._hull = None
        self._facets = None
        self._hull_error = None

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def scaled(self, c: float) -> "Polytope":
        return Polytope(c * self.vertices)

    def _compute_hull(self):
        if self._hull is not None or self._hull_error is not None:
            return
        v = self.vertices
        if self.dim == 1:
            lo, hi = float(v.min()), float(v.max())
            self._hull = np.array([[lo], [hi]]) if hi > lo else np.array([[lo]])
            if lo < 0 < hi:
                self._facets = np.array([[1.0 / hi], [1.0 / lo]])
            return
        try:
            hull = ConvexHull(v)
        except (QhullError, ValueError) as exc:
            self._hull_error = str(exc).splitlines()[0] if str(exc) else "degenerate point set"
            self._hull = v
            return
        self._hull = v[hull.vertices]
        normals, offsets = hull.equations[:, :-1], hull.equations[:, -1]
        scale = float(np.abs(v).max())
        if np.all(offsets < -1e-12 * scale):
            self._facets = normals / (-offsets)[:, None]

    @property
    def hull_vertices(self) -> np.ndarray:
        self._compute_hull()
        return self._hull

    @property
    def origin_interior(self) -> bool:
        self._compute_hull()
        return self._facets is not None

    @property
    def facets(self) -> np.ndarray:
        """Rows ``a_j`` with ``P = {x : a_j . x <= 1}``; these are the vertices of the polar."""
        self._compute_hull()
        if self._facets is None:
            raise DomainError(self._hull_error or "origin is not an interior point")
        return self._facets

    def support(self, theta):
        th = np.asarray(theta, dtype=float)
        vals = self.hull_vertices @ th.T
        out = vals.max(axis=0)
        return float(out) if th.ndim == 1 else out

    def gauge(self, x):
        """Minkowski functional via the facet description (batch friendly)."""
        xa = np.asarray(x, dtype=float)
        vals = (self.facets @ np.atleast_2d(xa).T).max(axis=0)
        vals = np.maximum(vals, 0.0)
        return float(vals[0]) if xa.ndim == 1 else vals

    __call__ = gauge


def support(polytope: Polytope, theta):
    """``max_i <theta, v_i>``."""
    return polytope.support(theta)


def _cone_lp(vertices: np.ndarray, x: np.ndarray):
    m = vertices.shape[0]
    return solve_standard_lp(np.ones(m), vertices.T, x)


def origin_interior_lp(polytope: Polytope) -> bool:
    """True iff the vertex cone is all of R^d, i.e. the origin is interior.

    Checks that ``e_1..e_d`` and ``-(e_1+..+e_d)`` are non-negative
    combinations of the vertices.
    """
    d = polytope.dim
    targets = list(np.eye(d)) + [-np.ones(d)]
    try:
        for t in targets:
            _cone_lp(polytope.vertices, t)
    except InfeasibleError:
        return False
    return True


def gauge_lp(polytope: Polytope, x) -> float:
    """``min sum(beta)`` subject to ``V^T beta = x``, ``beta >= 0``."""
    xv = np.asarray(x, dtype=float).ravel()
    if xv.size != polytope.dim:
        raise DomainError("dimension mismatch")
    if not origin_interior_lp(polytope):
        raise InfeasibleError("origin is not an interior point of the polytope")
    if not np.any(xv):
        return 0.0
    v = polytope.vertices
    if v.shape[0] > 2000:
        v = polytope.hull_vertices
    return _cone_lp(v, xv).value


def contains_point_lp(polytope: Polytope, x, tol: float = 1e-9) -> bool:
    """Vertex-membership LP: ``x = V^T beta`` with ``beta`` a probability vector."""
    v = polytope.vertices
    xv = np.asarray(x, dtype=float).ravel()
    A = np.vstack([v.T, np.ones(v.shape[0])])
    b = np.append(xv, 1.0)
    try:
        res = solve_standard_lp(np.zeros(v.shape[0]), A, b)
    except InfeasibleError:
        return False
    return bool(np.abs(A @ res.x - b).max() <= tol * max(1.0, float(np.abs(b).max())))


def contains_polytope(outer: Polytope, inner: Polytope) -> bool:
    return all(contains_point_lp(outer, v) for v in inner.vertices)


def polar_gauge_identity_check(polytope: Polytope, theta, tol: float = 1e-10) -> dict:
    """Compare ``h_P(theta)`` with the gauge of ``theta`` for the polar body.

    The polar of ``P = {x : A x <= 1}`` is ``conv(rows of A)``; its gauge is
    computed two ways: by LP over those rows and by the polar definition
    ``max_i <theta, v_i>`` over the vertices of ``P``.
    """
    th = np.asarray(theta, dtype=float).ravel()
    h = polytope.support(th)
    polar = Polytope(polytope.facets)
    g_lp = gauge_lp(polar, th)
    g_def = float((polytope.vertices @ th).max()) if np.any(th) else 0.0
    g_def = max(g_def, 0.0)
    s = tol * max(1.0, abs(h))
    return {
        "support": h,
        "polar_gauge_lp": g_lp,
        "polar_gauge_definition": g_def,
        "lp_matches": abs(h - g_lp) <= s,
        "definition_matches": abs(h - g_def) <= s,
    }


def diameter(polytope: Polytope) -> float:
    v = polytope.hull_vertices if polytope.dim > 1 else polytope.vertices
    if len(polytope) < 2:
        raise DomainError("diameter needs at least two points")
    if polytope.dim == 1:
        return float(v.max() - v.min())
    return float(pdist(v).max())


def hausdorff_transfer(lam: float, diam_b: float) -> float:
    """Hausdorff bound ``diam(B) * (lam - 1)`` for ``A/lam <= B <= lam A``."""
    if not lam >= 1.0:
        raise DomainError("sandwich factor must be at least 1")
    if not diam_b > 0 or math.isinf(diam_b):
        raise DomainError("diameter must be positive and finite")
    return diam_b * (lam - 1.0)
