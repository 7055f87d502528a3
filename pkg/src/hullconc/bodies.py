"""Support oracles for the expected convex hull and the floating body, and the
net-certified sandwich test ``(1-eps) E P_n <= P_n <= (1+eps) E P_n``.

The polar of the expected hull never has to be constructed: its gauge is the
expected-hull support function itself, so a net on its boundary is built
directly from oracle calls.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .distributions import DistributionModel, NormalLaw, directional_law, sample
from .errors import CertificateError, DomainError
from .geometry import GaugeOracle, Net, Polytope
from .order_stats import expected_max
from .seeding import derive_seed, make_rng

__all__ = [
    "ExpectedHullOracle",
    "FloatingBodyOracle",
    "SandwichCertificate",
    "InclusionEstimate",
    "expected_hull_support",
    "floating_support",
    "certify_sandwich",
    "sandwich_bruteforce",
    "inclusion_probability",
    "theorem1_delta",
    "random_directions",
    "wilson_interval",
]

BOUNDARY_MATCH_TOL = 1e-6
_MC_BLOCK = 2_000_000


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials <= 0:
        return (0.0, 1.0)
    p = successes / trials
    den = 1.0 + z * z / trials
    mid = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))


def random_directions(dim: int, m: int, seed: int, include_axes: bool = True) -> np.ndarray:
    """``m`` random unit vectors, optionally preceded by the ``2d`` signed axes."""
    rng = make_rng(seed)
    u = rng.standard_normal((m, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if include_axes:
        eye = np.eye(dim)
        u = np.vstack([eye, -eye, u])
    return u


def _as_dirs(theta) -> tuple[np.ndarray, bool]:
    th = np.asarray(theta, dtype=float)
    single = th.ndim == 1
    th = np.atleast_2d(th)
    norms = np.linalg.norm(th, axis=1)
    if np.any(norms == 0):
        raise DomainError("direction must be non-zero")
    return th, single


class ExpectedHullOracle:
    """``theta -> E max_i <theta, X_i>`` for ``n`` draws from ``model``.

    ``mode="analytic"`` integrates the directional max law; Gaussian models
    reduce to ``sqrt(theta' S theta)`` times the standard-normal value.
    ``mode="mc"`` averages over ``replicates`` simulated hulls, reusing the
    same hulls for every direction.  Values are cached per unit direction;
    the cache takes concurrent readers and insert-if-absent writers.
    """

    def __init__(
        self,
        model: DistributionModel,
        n: int,
        mode: str = "analytic",
        replicates: int = 10_000,
        seed: int = 0,
    ):
        if n < 1:
            raise DomainError("n must be at least 1")
        if mode not in ("analytic", "mc"):
            raise DomainError(f"unknown oracle mode {mode!r}")
        self.model = model
        self.n = int(n)
        self.mode = mode
        self.replicates = int(replicates)
        self.seed = int(seed)
        self.dim = model.dim
        self._cache: dict[bytes, tuple[float, float]] = {}
        self._lock = threading.Lock()
        self._std_emax = None
        self._sqrt_cov = None
        if mode == "analytic" and model.kind == "gaussian":
            self._std_emax = expected_max(NormalLaw(1.0), self.n)
            self._sqrt_cov = model._chol

    def __repr__(self) -> str:
        return f"ExpectedHullOracle({self.model}, n={self.n}, mode={self.mode})"

    # -- evaluation -------------------------------------------------------

    def _unit_value(self, u: np.ndarray) -> float:
        return expected_max(directional_law(self.model, u), self.n)

    def _mc_values(self, units: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = units.shape[0]
        total = np.zeros(k)
        total_sq = np.zeros(k)
        per_block = max(1, _MC_BLOCK // (self.n * self.dim))
        done = 0
        block_id = 0
        while done < self.replicates:
            r = min(per_block, self.replicates - done)
            x = sample(self.model, self.n * r, derive_seed(self.seed, block_id))
            x = x.reshape(r, self.n, self.dim)
            maxes = (x @ units.T).max(axis=1)
            total += maxes.sum(axis=0)
            total_sq += (maxes * maxes).sum(axis=0)
            done += r
            block_id += 1
        mean = total / self.replicates
        var = np.maximum(total_sq / self.replicates - mean * mean, 0.0)
        se = np.sqrt(var * self.replicates / max(1, self.replicates - 1) / self.replicates)
        return mean, se

    def evaluate(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """Values and standard errors (zero in analytic mode) for a batch."""
        th, _ = _as_dirs(theta)
        norms = np.linalg.norm(th, axis=1)
        if self._std_emax is not None:
            vals = self._std_emax * np.linalg.norm(th @ self._sqrt_cov, axis=1)
            return vals, np.zeros_like(vals)
        units = th / norms[:, None]
        keys = [u.tobytes() for u in units]
        with self._lock:
            cached = [self._cache.get(key) for key in keys]
        missing = [i for i, c in enumerate(cached) if c is None]
        if missing:
            if self.mode == "mc":
                mean, se = self._mc_values(units[missing])
                fresh = list(zip(mean.tolist(), se.tolist()))
            else:
                fresh = [(self._unit_value(units[i]), 0.0) for i in missing]
            with self._lock:
                for i, val in zip(missing, fresh):
                    cached[i] = self._cache.setdefault(keys[i], val)
        vals = np.array([c[0] for c in cached]) * norms
        ses = np.array([c[1] for c in cached]) * norms
        return vals, ses

    def support(self, theta):
        vals, _ = self.evaluate(theta)
        return float(vals[0]) if np.ndim(theta) == 1 else vals

    __call__ = support

    def polar_gauge(self) -> GaugeOracle:
        """Gauge of the polar body, i.e. this support function."""
        pairwise = None
        if self._std_emax is not None:
            L, e = self._sqrt_cov, self._std_emax

            def pairwise(z, w):
                return e * cdist(z @ L, w @ L)

        return GaugeOracle(
            lambda z: self.evaluate(z)[0], self.dim, f"polar(E P_n: {self.model}, n={self.n})", pairwise
        )


def expected_hull_support(oracle: ExpectedHullOracle, theta):
    return oracle.support(theta)


class FloatingBodyOracle:
    """``theta -> (1 - delta)``-quantile of ``<theta, X>``.

    The floating body is the intersection of the half-spaces
    ``{x : <theta, x> <= g(theta)}``; only this bound function is computed.
    """

    def __init__(self, model: DistributionModel, delta: float):
        if not 0.0 < delta < math.exp(-1.0):
            raise DomainError("delta must lie in (0, 1/e)")
        self.model = model
        self.delta = float(delta)
        self.dim = model.dim

    def support(self, theta):
        th, single = _as_dirs(theta)
        vals = np.array([directional_law(self.model, t).isf(self.delta) for t in th])
        return float(vals[0]) if single else vals

    __call__ = support


def floating_support(oracle: FloatingBodyOracle, theta):
    return oracle.support(theta)


def theorem1_delta(n: int, epsilon: float, dim: int) -> tuple[float, float, bool]:
    """Net resolution ``3 n^{-eps/(4d)}`` clamped to ``eps/5``.

    Returns ``(prescribed, used, clamped)``.
    """
    prescribed = 3.0 * math.exp(-epsilon * math.log(n) / (4.0 * dim))
    cap = epsilon / 5.0
    return prescribed, min(prescribed, cap), prescribed > cap


@dataclass
class SandwichCertificate:
    epsilon: float
    delta: float
    net_size: int
    ratios: np.ndarray
    min_ratio: float
    max_ratio: float
    certified: bool
    failures: list[int] = field(default_factory=list)
    reason: str = ""
    delta_prescribed: float = math.nan
    clamped: bool = False

    def summary(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "delta_prescribed": self.delta_prescribed,
            "clamped": self.clamped,
            "net_size": self.net_size,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "certified": self.certified,
            "n_failures": len(self.failures),
            "reason": self.reason,
        }


def certify_sandwich(
    P: Polytope,
    EH: ExpectedHullOracle,
    epsilon: float,
    net: Net,
    delta: float | None = None,
    delta_prescribed: float = math.nan,
    clamped: bool = False,
) -> SandwichCertificate:
    """Certify ``(1-eps) E P_n <= P <= (1+eps) E P_n`` from the net alone.

    ``net`` must be a ``delta``-net on the boundary of the polar of the
    expected hull.  Every net point ``w`` has ``h_EH(w) = 1``; the test is
    ``1 - eps/2 <= h_P(w) <= 1 + eps/2`` at all of them, which together
    with ``delta <= eps/5`` forces the sandwich in every direction.
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    delta = net.epsilon if delta is None else float(delta)
    if net.epsilon > delta * (1 + 1e-12):
        raise CertificateError(f"net resolution {net.epsilon} is coarser than delta={delta}")
    if delta > epsilon / 5.0 * (1 + 1e-12):
        raise DomainError(f"delta={delta} exceeds eps/5={epsilon / 5}")
    h = EH.support(net.points)
    bad = np.abs(h - 1.0) > BOUNDARY_MATCH_TOL
    if np.any(bad):
        raise CertificateError(
            f"{int(bad.sum())} net points are off the polar boundary of the expected hull "
            f"(worst |h - 1| = {float(np.abs(h - 1).max()):.3g})"
        )
    common = dict(epsilon=epsilon, delta=delta, net_size=net.size, delta_prescribed=delta_prescribed, clamped=clamped)
    if not P.origin_interior:
        return SandwichCertificate(
            ratios=np.empty(0), min_ratio=math.nan, max_ratio=math.nan, certified=False,
            reason="origin not interior to P", **common,
        )
    ratios = np.asarray(P.support(net.points), dtype=float)
    lo, hi = 1.0 - epsilon / 2.0, 1.0 + epsilon / 2.0
    failures = np.flatnonzero((ratios < lo) | (ratios > hi)).tolist()
    return SandwichCertificate(
        ratios=ratios,
        min_ratio=float(ratios.min()),
        max_ratio=float(ratios.max()),
        certified=not failures,
        failures=failures,
        reason="" if not failures else "net ratio outside [1-eps/2, 1+eps/2]",
        **common,
    )


def sandwich_bruteforce(
    P: Polytope,
    EH: ExpectedHullOracle,
    m_dirs: int = 10_000,
    seed: int = 0,
    directions: np.ndarray | None = None,
    eh_values: np.ndarray | None = None,
) -> tuple[float, float]:
    """``(max h_P/h_EH - 1, 1 - min h_P/h_EH)`` over random directions.

    Both numbers are lower bounds on the true containment defects.
    Precomputed ``directions``/``eh_values`` may be passed to reuse oracle work.
    """
    if directions is None:
        if m_dirs < 1000:
            raise DomainError("brute force needs at least 1000 directions")
        directions = random_directions(P.dim, m_dirs, seed)
    if eh_values is None:
        eh_values = EH.support(directions)
    ratio = np.asarray(P.support(directions)) / eh_values
    return float(ratio.max() - 1.0), float(1.0 - ratio.min())


@dataclass
class InclusionEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    draws: int
    certified_in: int
    certified_out: int
    indeterminate: int
    resolved_in: int

    @property
    def lower_bound(self) -> float:
        """Fraction certified inside by the net argument alone."""
        return self.certified_in / self.draws


def inclusion_probability(
    model: DistributionModel,
    EH: ExpectedHullOracle,
    epsilon: float,
    m: int = 10_000,
    seed: int = 0,
    net: Net | None = None,
    dense_dirs: int = 4096,
) -> InclusionEstimate:
    """Monte Carlo estimate of ``mu((1+eps) E P_n)``.

    Each fresh draw ``x`` is classified with ``M = max_w <w, x>`` over a
    ``delta``-net of the polar boundary: ``M > 1+eps`` proves ``x`` is
    outside, ``M/(1-delta) <= 1+eps`` proves it is inside, anything else is
    settled by the dense-direction estimate of the gauge.
    """
    if m < 10_000:
        raise DomainError("inclusion estimate needs at least 10^4 draws")
    d = model.dim
    x = sample(model, m, seed)
    thr = 1.0 + epsilon
    if d == 1:
        pts = np.array([[1.0], [-1.0]])
        pts = pts / EH.support(pts)[:, None]
        inflate = 1.0
    else:
        if net is None:
            from .geometry import build_net

            net = build_net(EH.polar_gauge(), 0.1, seed=derive_seed(seed, 1), candidate_budget=20_000)
        pts = net.points
        inflate = 1.0 / (1.0 - net.epsilon)
    M = np.maximum((x @ pts.T).max(axis=1), 0.0)
    out = M > thr
    inside = M * inflate <= thr
    undecided = ~(out | inside)
    resolved = 0
    if np.any(undecided):
        dirs = random_directions(d, dense_dirs, derive_seed(seed, 2))
        hd = EH.support(dirs)
        xs = x[undecided]
        g = ((xs @ dirs.T) / hd).max(axis=1)
        resolved = int(np.count_nonzero(g <= thr))
    n_in = int(inside.sum()) + resolved
    lo, hi = wilson_interval(n_in, m)
    return InclusionEstimate(
        estimate=n_in / m,
        ci_low=lo,
        ci_high=hi,
        draws=m,
        certified_in=int(inside.sum()),
        certified_out=int(out.sum()),
        indeterminate=int(undecided.sum()),
        resolved_in=resolved,
    )
