"""Greedy epsilon-nets on the boundary of a (possibly non-symmetric) convex body
and the geometric-series decomposition of boundary points over such a net.

Distances are always measured as ``gauge(probe - net_point)``; for bodies
with ``K != -K`` the order matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import DomainError, NetError
from ..seeding import make_rng

__all__ = [
    "GaugeOracle",
    "Net",
    "Decomposition",
    "build_net",
    "coverage_stats",
    "decompose",
    "net_bound",
    "random_boundary_points",
]

MAX_TERMS = 64
BOUNDARY_TOL = 1e-9
_CHUNK = 1 << 21


class GaugeOracle:
    """Wraps ``fn: (k, d) array -> (k,) gauges`` of a body with 0 in its interior.

    ``pairwise(z, w)``, when given, returns the ``(len(z), len(w))`` matrix of
    ``||z_i - w_j||`` faster than evaluating ``fn`` on all differences.
    """

    def __init__(
        self,
        fn: Callable[[np.ndarray], np.ndarray],
        dim: int,
        name: str = "body",
        pairwise: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    ):
        self.fn = fn
        self.dim = int(dim)
        self.name = name
        self.pairwise = pairwise

    def __call__(self, z):
        za = np.asarray(z, dtype=float)
        out = np.asarray(self.fn(np.atleast_2d(za)), dtype=float)
        return float(out[0]) if za.ndim == 1 else out

    def __repr__(self) -> str:
        return f"GaugeOracle({self.name}, d={self.dim})"


def net_bound(epsilon: float, dim: int) -> float:
    return (3.0 / epsilon) ** dim


def random_boundary_points(body: GaugeOracle, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` points ``u / ||u||_K`` for Gaussian random directions ``u``."""
    u = rng.standard_normal((k, body.dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u / body(u)[:, None]


def _min_dist(body: GaugeOracle, z: np.ndarray, pts: np.ndarray):
    """Per row of ``z``: (min over net of ``||z - w||_K``, argmin)."""
    k = z.shape[0]
    best = np.full(k, np.inf)
    arg = np.zeros(k, dtype=int)
    if pts.shape[0] == 0:
        return best, arg
    step = max(1, _CHUNK // max(1, k * body.dim))
    for s in range(0, pts.shape[0], step):
        block = pts[s : s + step]
        if body.pairwise is not None:
            g = body.pairwise(z, block)
        else:
            diff = (z[:, None, :] - block[None, :, :]).reshape(-1, body.dim)
            g = body(diff).reshape(k, block.shape[0])
        j = g.argmin(axis=1)
        gm = g[np.arange(k), j]
        better = gm < best
        best[better] = gm[better]
        arg[better] = j[better] + s
    return best, arg


@dataclass
class Net:
    body: GaugeOracle
    epsilon: float
    points: np.ndarray
    candidates: int = 0
    budget: int = 0
    seed: int = 0
    probe_stats: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return self.body.dim

    @property
    def bound(self) -> float:
        return net_bound(self.epsilon, self.dim)

    def nearest(self, z):
        """Index and gauge distance of the net point closest to ``z`` (ordered)."""
        d, j = _min_dist(self.body, np.atleast_2d(np.asarray(z, dtype=float)), self.points)
        return int(j[0]), float(d[0])

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "body": self.body.name,
            "dim": self.dim,
            "epsilon": self.epsilon,
            "size": self.size,
            "bound": self.bound,
            "seed": self.seed,
            "candidates": self.candidates,
            "budget": self.budget,
            "probe_coverage": dict(self.probe_stats),
            "points": self.points.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, body: GaugeOracle) -> "Net":
        pts = np.asarray(data["points"], dtype=float).reshape(-1, int(data["dim"]))
        return cls(
            body=body,
            epsilon=float(data["epsilon"]),
            points=pts,
            candidates=int(data.get("candidates", 0)),
            budget=int(data.get("budget", 0)),
            seed=int(data.get("seed", 0)),
            probe_stats=dict(data.get("probe_coverage", {})),
        )


def build_net(
    body: GaugeOracle,
    epsilon: float,
    dim: int | None = None,
    candidate_budget: int | None = None,
    seed: int = 0,
) -> Net:
    """Greedy epsilon-net on the boundary of ``body``.

    Boundary candidates are streamed in batches; a candidate is kept when no
    earlier net point is within gauge distance ``epsilon`` of it.  The loop
    stops after ``candidate_budget`` consecutive covered candidates (default
    ``1e4 * (3/eps)^d`` capped at ``1e7``).
    """
    # eps = 1/2 is admitted: the greedy construction and the volumetric
    # bound do not need the strict inequality
    if not 0.0 < epsilon <= 0.5:
        raise DomainError("epsilon must lie in (0, 1/2]")
    d = body.dim if dim is None else int(dim)
    if d != body.dim:
        raise DomainError("dimension does not match the body")
    bound = net_bound(epsilon, d)
    budget = candidate_budget or int(min(1e4 * bound, 1e7))
    rng = make_rng(seed)
    pts = np.empty((0, d))
    run = 0
    drawn = 0
    while run < budget:
        batch = int(min(8192, 64 + run))
        z = random_boundary_points(body, batch, rng)
        dist, _ = _min_dist(body, z, pts)
        fresh = np.flatnonzero(dist > epsilon)
        prev = -1
        new = []
        stop_at = None
        for i in fresh:
            gap = i - prev - 1
            if run + gap >= budget:
                stop_at = prev + 1 + (budget - run)
                run = budget
                break
            run += gap
            if new and _min_dist(body, z[i : i + 1], np.asarray(new))[0][0] <= epsilon:
                run += 1
            else:
                new.append(z[i])
                run = 0
            prev = i
        if stop_at is None:
            run += batch - prev - 1
            drawn += batch
        else:
            drawn += stop_at
        if new:
            pts = np.vstack([pts, new])
            if pts.shape[0] > bound:
                raise NetError(
                    f"net has {pts.shape[0]} points, exceeding (3/eps)^d = {bound:.6g}; "
                    "the gauge is probably not a gauge"
                )
    return Net(body=body, epsilon=float(epsilon), points=pts, candidates=drawn, budget=budget, seed=seed)


def coverage_stats(net: Net, probes: int = 10_000, seed: int = 1) -> dict:
    """Probe the covering property with fresh random boundary points."""
    rng = make_rng(seed)
    z = random_boundary_points(net.body, probes, rng)
    dist, _ = _min_dist(net.body, z, net.points)
    stats = {
        "probes": int(probes),
        "max_distance": float(dist.max()),
        "uncovered": int(np.count_nonzero(dist > net.epsilon)),
        "covered_fraction": float(np.mean(dist <= net.epsilon)),
    }
    net.probe_stats = stats
    return stats


@dataclass
class Decomposition:
    """``theta ~ base + sum_i coefficients[i] * points[indices[i]]``."""

    theta: np.ndarray
    base: np.ndarray
    base_index: int
    coefficients: list[float]
    indices: list[int]
    terms: list[np.ndarray]
    residuals: list[float]  # gauge of the remainder after 0, 1, ..., N terms

    def reconstruction(self) -> np.ndarray:
        out = self.base.copy()
        for c, w in zip(self.coefficients, self.terms):
            out = out + c * w
        return out

    @property
    def residual(self) -> float:
        return self.residuals[-1]


def decompose(theta, net: Net, max_terms: int = 10) -> Decomposition:
    """Expand a boundary point over the net with coefficients ``eps_i <= eps^i``.

    Each step normalises the current remainder onto the boundary, picks the
    net point nearest to it and subtracts the rescaled point.
    """
    th = np.asarray(theta, dtype=float).ravel()
    body = net.body
    g = body(th)
    if abs(g - 1.0) > BOUNDARY_TOL:
        raise DomainError(f"theta is not on the boundary (gauge {g!r})")
    max_terms = min(int(max_terms), MAX_TERMS)
    eps = net.epsilon
    slack = 1.0 + 1e-9
    j0, d0 = net.nearest(th)
    if d0 > eps * slack:
        raise NetError(f"boundary point {th.tolist()} is not covered (distance {d0:.6g})")
    base = net.points[j0]
    r = th - base
    rho = body(r) if np.any(r) else 0.0
    coeffs, idx, terms, residuals = [], [], [], [rho]
    for _ in range(max_terms):
        if rho == 0.0:
            break
        u = r / rho
        j, dj = net.nearest(u)
        if dj > eps * slack:
            raise NetError(
                f"residual direction {u.tolist()} is not covered (distance {dj:.6g} > {eps})"
            )
        w = net.points[j]
        r = r - rho * w
        coeffs.append(rho)
        idx.append(j)
        terms.append(w)
        rho = body(r) if np.any(r) else 0.0
        residuals.append(rho)
    dec = Decomposition(th, base, j0, coeffs, idx, terms, residuals)
    return dec
