"""Centered log-concave models on R^d and their one-dimensional marginals.

Every model in the catalog has its center of mass at the origin and a
non-singular covariance.  ``directional_law(model, theta)`` returns the law
of ``<theta, X>`` as a :class:`ScalarLaw`; Gaussian and uniform-box models
get exact closed forms, the rest an interpolated empirical CDF built from a
fixed calibration sample.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional

import numpy as np
from scipy import optimize, special

from .errors import DomainError, ModelError
from .seeding import make_rng

__all__ = [
    "ScalarLaw",
    "NormalLaw",
    "UniformSumLaw",
    "ShiftedExponentialLaw",
    "EmpiricalLaw",
    "ReflectedLaw",
    "DistributionModel",
    "ModelDiagnostics",
    "gaussian",
    "uniform_box",
    "laplace_product",
    "empirical_wrapper",
    "sample",
    "directional_law",
    "validate_model",
    "parse_model_spec",
    "parse_law_spec",
]

DEFAULT_CALIBRATION_SIZE = 200_000


def _ret(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


class ScalarLaw:
    """A probability law on the real line.

    Subclasses provide ``cdf``, ``sf``, ``pdf``, ``quantile`` and ``isf``;
    log-tails are derived here with the complement used on whichever side
    keeps precision.  ``lower``/``upper`` bound the support (possibly
    infinite) and ``scale`` is a typical spread used for tolerances.
    """

    cdf_kind = "analytic_closed_form"
    lower = -math.inf
    upper = math.inf
    scale = 1.0
    name = "law"

    @property
    def analytic(self) -> bool:
        return self.cdf_kind != "empirical"

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def logcdf(self, x):
        xa = np.asarray(x, dtype=float)
        c = np.asarray(self.cdf(xa), dtype=float)
        s = np.asarray(self.sf(xa), dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(c <= 0.5, np.log(c), np.log1p(-np.minimum(s, 1.0)))
        return _ret(x, out)

    def logsf(self, x):
        xa = np.asarray(x, dtype=float)
        c = np.asarray(self.cdf(xa), dtype=float)
        s = np.asarray(self.sf(xa), dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(s <= 0.5, np.log(s), np.log1p(-np.minimum(c, 1.0)))
        return _ret(x, out)

    def quantile(self, t: float) -> float:
        raise NotImplementedError

    def isf(self, s: float) -> float:
        """Quantile at ``1 - s`` without forming ``1 - s``."""
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        """Points where the density is not smooth (excluding support ends)."""
        return ()

    def reflected(self) -> "ScalarLaw":
        return ReflectedLaw(self)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class NormalLaw(ScalarLaw):
    def __init__(self, sigma: float = 1.0):
        if not sigma > 0:
            raise ModelError("normal law needs a positive standard deviation")
        self.sigma = float(sigma)
        self.scale = self.sigma
        self.name = "normal" if sigma == 1.0 else f"normal(sigma={sigma:.17g})"

    def cdf(self, x):
        return _ret(x, special.ndtr(np.asarray(x, dtype=float) / self.sigma))

    def sf(self, x):
        return _ret(x, special.ndtr(-np.asarray(x, dtype=float) / self.sigma))

    def logcdf(self, x):
        return _ret(x, special.log_ndtr(np.asarray(x, dtype=float) / self.sigma))

    def logsf(self, x):
        return _ret(x, special.log_ndtr(-np.asarray(x, dtype=float) / self.sigma))

    def pdf(self, x):
        z = np.asarray(x, dtype=float) / self.sigma
        return _ret(x, np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi)))

    def quantile(self, t):
        return float(self.sigma * special.ndtri(t))

    def isf(self, s):
        return float(-self.sigma * special.ndtri(s))


class ShiftedExponentialLaw(ScalarLaw):
    """Exponential law shifted to mean zero: density ``e^{-(x+s)/s}/s`` on ``[-s, inf)``."""

    def __init__(self, scale: float = 1.0):
        if not scale > 0:
            raise ModelError("exponential scale must be positive")
        self.scale = float(scale)
        self.lower = -self.scale
        self.name = "exponential" if scale == 1.0 else f"exponential(scale={scale:.17g})"

    def _u(self, x):
        return np.maximum((np.asarray(x, dtype=float) + self.scale) / self.scale, 0.0)

    def cdf(self, x):
        return _ret(x, -np.expm1(-self._u(x)))

    def sf(self, x):
        return _ret(x, np.exp(-self._u(x)))

    def logsf(self, x):
        return _ret(x, -self._u(x))

    def pdf(self, x):
        xa = np.asarray(x, dtype=float)
        return _ret(x, np.where(xa >= self.lower, np.exp(-self._u(xa)) / self.scale, 0.0))

    def quantile(self, t):
        return float(-self.scale - self.scale * math.log1p(-t))

    def isf(self, s):
        return float(-self.scale - self.scale * math.log(s))


class UniformSumLaw(ScalarLaw):
    """Law of ``sum_i c_i V_i`` with ``V_i`` i.i.d. uniform on ``[-1, 1]``.

    The CDF is the alternating-sum (Irwin-Hall type) piecewise polynomial.
    The law is symmetric, so both tails are evaluated on the left half where
    near the support edge only the leading term survives.

    The alternating sum cancels badly once a weight is tiny next to the
    largest one, so weights below ``SMALL_RATIO`` of the maximum are folded
    in afterwards: each one averages the previous CDF over ``[x-w, x+w]``
    with Gauss-Legendre panels split at the known kinks, which is exact for
    piecewise polynomials.
    """

    cdf_kind = "piecewise_polynomial"
    SMALL_RATIO = 1e-3

    def __init__(self, weights):
        w = np.sort(np.abs(np.asarray(weights, dtype=float).ravel()))
        w = w[w > 0]
        if w.size == 0:
            raise ModelError("uniform sum needs at least one positive weight")
        self.weights = w
        self.k = int(w.size)
        self.total = float(w.sum())
        self.lower, self.upper = -self.total, self.total
        self.scale = self.total
        main = w[w >= self.SMALL_RATIO * w[-1]]
        # weights under 1e-15 of the largest move quantiles by less than an ulp
        self._small = w[(w < self.SMALL_RATIO * w[-1]) & (w > 1e-15 * w[-1])][::-1]
        self._km = int(main.size)
        self._tm = float(main.sum())
        b = 2.0 * main
        offs, signs = [], []
        for r in range(self._km + 1):
            for sub in combinations(range(self._km), r):
                offs.append(float(sum(b[list(sub)])))
                signs.append((-1.0) ** r)
        self._offs = np.array(offs)
        self._signs = np.array(signs)
        self._norm = math.factorial(self._km) * float(np.prod(b))
        self._dnorm = math.factorial(self._km - 1) * float(np.prod(b))
        # kinks of the main part, then of each partial fold
        kinks = [np.unique(self._offs - self._tm)]
        for ws in self._small:
            kinks.append(np.unique(np.concatenate([kinks[-1] - ws, kinks[-1] + ws])))
        self._kinks = kinks
        self._first = self.lower + 2.0 * float(w[0])
        self._lead = math.factorial(self.k) * float(np.prod(2.0 * w))
        if self.k == 1:
            self.name = "uniform" if w[0] == 1.0 else f"uniform(a={w[0]:.17g})"
        elif self.k == 2 and w[0] == w[1]:
            self.name = "triangular" if w[0] == 1.0 else f"triangular(a={w[0]:.17g})"
        else:
            self.name = "uniform_sum(" + ",".join(f"{v:.17g}" for v in w) + ")"

    def _main_left(self, x):
        # CDF of the main part, valid for x <= 0
        t = np.asarray(x, dtype=float) + self._tm
        d = np.maximum(t[..., None] - self._offs, 0.0)
        val = (d**self._km * self._signs).sum(axis=-1) / self._norm
        return np.clip(val, 0.0, 0.5)

    def _main(self, y, density: bool):
        y = np.asarray(y, dtype=float)
        if density:
            if self._km == 1:
                return np.where(np.abs(y) <= self._tm, 0.5 / self._tm, 0.0)
            t = self._tm - np.abs(y)
            d = np.maximum(t[..., None] - self._offs, 0.0)
            return np.maximum((d ** (self._km - 1) * self._signs).sum(axis=-1) / self._dnorm, 0.0)
        return np.where(y <= 0, self._main_left(np.minimum(y, 0.0)), 1.0 - self._main_left(-np.maximum(y, 0.0)))

    def _fold(self, level: int, y, density: bool):
        """CDF (or density) of main + first ``level`` small components."""
        if level == 0:
            return self._main(y, density)
        w = float(self._small[level - 1])
        y = np.asarray(y, dtype=float)
        lo, hi = y - w, y + w
        inner = np.clip(self._kinks[level - 1], lo[..., None], hi[..., None])
        edges = np.sort(np.concatenate([lo[..., None], inner, hi[..., None]], axis=-1), axis=-1)
        a, b = edges[..., :-1], edges[..., 1:]
        deg = self._km - (1 if density else 0) + level - 1
        xi, wt = np.polynomial.legendre.leggauss(deg // 2 + 2)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        vals = self._fold(level - 1, mid[..., None] + half[..., None] * xi, density)
        # divide by the width as rounded, so the result is a true weighted mean
        return (half * (vals * wt).sum(axis=-1)).sum(axis=-1) / (hi - lo)

    def _left(self, x):
        # CDF valid for x <= 0
        x = np.asarray(x, dtype=float)
        if self._small.size == 0:
            return self._main_left(x)
        # below the first kink only the leading term is present
        lead = np.maximum(x - self.lower, 0.0) ** self.k / self._lead
        out = np.where(x <= self._first, lead, self._fold(self._small.size, np.maximum(x, self._first), False))
        return np.clip(out, 0.0, 0.5)

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where(xa <= 0, self._left(np.minimum(xa, 0.0)), 1.0 - self._left(-np.maximum(xa, 0.0)))
        return _ret(x, out)

    def sf(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where(xa >= 0, self._left(-np.maximum(xa, 0.0)), 1.0 - self._left(np.minimum(xa, 0.0)))
        return _ret(x, out)

    def pdf(self, x):
        xa = np.asarray(x, dtype=float)
        if self._small.size == 0:
            return _ret(x, self._main(xa, True))
        out = np.where(np.abs(xa) < self.total, self._fold(self._small.size, -np.abs(xa), True), 0.0)
        return _ret(x, np.maximum(out, 0.0))

    def breakpoints(self):
        pts = sorted(set(self._kinks[-1].tolist()))
        return tuple(p for p in pts if self.lower < p < self.upper)

    def _left_quantile(self, p: float) -> float:
        if p >= 0.5:
            return 0.0
        first = self._first
        if self.k == 1 or p <= float(self._left(min(first, 0.0))):
            return self.lower + (p * self._lead) ** (1.0 / self.k)
        lo = min(first, 0.0)
        return float(
            optimize.brentq(
                lambda x: float(self._left(x)) - p,
                lo,
                0.0,
                xtol=1e-14 * self.scale,
                rtol=4 * np.finfo(float).eps,
                maxiter=500,
            )
        )

    def quantile(self, t):
        if t <= 0.5:
            return self._left_quantile(t)
        return -self._left_quantile(1.0 - t)

    def isf(self, s):
        if s <= 0.5:
            return -self._left_quantile(s)
        return self._left_quantile(1.0 - s)


class EmpiricalLaw(ScalarLaw):
    """Piecewise-linear CDF through a sorted calibration sample.

    Knot ``i`` (1-based) sits at ``((i - 0.5)/R, y_(i))``; the quantile is the
    exact inverse of that interpolant.
    """

    cdf_kind = "empirical"

    def __init__(self, values, name: str = "empirical"):
        y = np.sort(np.asarray(values, dtype=float).ravel())
        if y.size < 2:
            raise ModelError("empirical law needs at least two calibration values")
        self.y = y
        self.R = int(y.size)
        self.p = (np.arange(1, self.R + 1) - 0.5) / self.R
        self.lower, self.upper = float(y[0]), float(y[-1])
        self.scale = float(np.std(y)) or 1.0
        self.name = name

    def cdf(self, x):
        return _ret(x, np.interp(np.asarray(x, dtype=float), self.y, self.p, left=0.0, right=1.0))

    def sf(self, x):
        return _ret(x, 1.0 - np.asarray(self.cdf(np.asarray(x, dtype=float))))

    def pdf(self, x):
        xa = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.y, xa, side="right") - 1, 0, self.R - 2)
        dy = self.y[i + 1] - self.y[i]
        inside = (xa >= self.y[0]) & (xa < self.y[-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(inside & (dy > 0), (1.0 / self.R) / dy, 0.0)
        return _ret(x, out)

    def quantile(self, t):
        return float(np.interp(t, self.p, self.y))

    def isf(self, s):
        return self.quantile(1.0 - s)

    def reflected(self) -> "EmpiricalLaw":
        return EmpiricalLaw(-self.y, name=f"-{self.name}")

    def mean_of_max(self, n: int) -> float:
        """``E max`` of ``n`` draws from the interpolated law, integrated exactly."""
        dy = np.diff(self.y)
        m1 = n + 1
        hi = np.exp(m1 * np.log(self.p[1:]))
        lo = np.exp(m1 * np.log(self.p[:-1]))
        integral = float(np.sum(dy * (hi - lo)) * self.R / m1)
        return float(self.y[-1] - integral)


class ReflectedLaw(ScalarLaw):
    """Law of ``-Y`` for a continuous law of ``Y``."""

    def __init__(self, base: ScalarLaw):
        self.base = base
        self.cdf_kind = base.cdf_kind
        self.lower, self.upper = -base.upper, -base.lower
        self.scale = base.scale
        self.name = f"-{base.name}"

    def cdf(self, x):
        return _ret(x, self.base.sf(-np.asarray(x, dtype=float)))

    def sf(self, x):
        return _ret(x, self.base.cdf(-np.asarray(x, dtype=float)))

    def logcdf(self, x):
        return _ret(x, self.base.logsf(-np.asarray(x, dtype=float)))

    def logsf(self, x):
        return _ret(x, self.base.logcdf(-np.asarray(x, dtype=float)))

    def pdf(self, x):
        return _ret(x, self.base.pdf(-np.asarray(x, dtype=float)))

    def quantile(self, t):
        return -self.base.isf(t)

    def isf(self, s):
        return -self.base.quantile(s)

    def breakpoints(self):
        return tuple(sorted(-b for b in self.base.breakpoints()))

    def reflected(self):
        return self.base


# --------------------------------------------------------------------------
# Models on R^d


@dataclass(eq=False)
class DistributionModel:
    """Centered log-concave law on R^d.  Build through the catalog helpers."""

    kind: str
    dim: int
    cov: Optional[np.ndarray] = None
    half_widths: Optional[np.ndarray] = None
    scales: Optional[np.ndarray] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    calibration_size: int = DEFAULT_CALIBRATION_SIZE
    calibration_seed: int = 0x5EED
    label: str = ""
    _chol: Optional[np.ndarray] = field(default=None, repr=False)
    _calib: Optional[np.ndarray] = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def center(self) -> np.ndarray:
        return np.zeros(self.dim)

    @property
    def analytic(self) -> bool:
        return self.kind in ("gaussian", "uniform_box")

    def covariance(self) -> np.ndarray:
        if self.kind == "gaussian":
            return self.cov.copy()
        if self.kind == "uniform_box":
            return np.diag(self.half_widths**2 / 3.0)
        if self.kind == "laplace_product":
            return np.diag(2.0 * self.scales**2)
        return np.cov(self.calibration_sample(), rowvar=False).reshape(self.dim, self.dim)

    def calibration_sample(self) -> np.ndarray:
        with self._lock:
            if self._calib is None:
                self._calib = sample(self, self.calibration_size, self.calibration_seed)
            return self._calib

    def __str__(self) -> str:
        return self.label or self.kind


def _num(v) -> str:
    # shortest round-trip form, so labels parse back to the same model
    text = repr(float(v))
    return text[:-2] if text.endswith(".0") else text


def gaussian(cov) -> DistributionModel:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = cov.shape[0]
    if cov.shape != (d, d):
        raise ModelError("covariance must be square")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ModelError("covariance must be symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ModelError("covariance is not positive definite") from None
    if np.any(np.diag(chol) <= 0):
        raise ModelError("covariance is not positive definite")
    if np.array_equal(cov, np.eye(d)):
        label = f"gaussian:I{d}"
    elif np.array_equal(cov, np.diag(np.diag(cov))):
        label = "gaussian:diag=" + ",".join(_num(v) for v in np.diag(cov))
    else:
        label = "gaussian:cov=" + ";".join(",".join(_num(v) for v in row) for row in cov)
    return DistributionModel("gaussian", d, cov=cov, _chol=chol, label=label)


def uniform_box(half_widths) -> DistributionModel:
    a = np.atleast_1d(np.asarray(half_widths, dtype=float))
    if a.ndim != 1 or a.size == 0:
        raise ModelError("half-widths must be a non-empty vector")
    if np.any(~(a > 0)):
        raise ModelError("degenerate box: every half-width must be positive")
    label = "uniform_box:" + ",".join(_num(v) for v in a)
    return DistributionModel("uniform_box", a.size, half_widths=a, label=label)


def laplace_product(scales, calibration_size: int = DEFAULT_CALIBRATION_SIZE) -> DistributionModel:
    s = np.atleast_1d(np.asarray(scales, dtype=float))
    if s.ndim != 1 or s.size == 0 or np.any(~(s > 0)):
        raise ModelError("laplace scales must be positive")
    label = "laplace:" + ",".join(_num(v) for v in s)
    return DistributionModel(
        "laplace_product", s.size, scales=s, calibration_size=calibration_size, label=label
    )


def empirical_wrapper(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    dim: int,
    calibration_size: int = DEFAULT_CALIBRATION_SIZE,
    label: str = "empirical",
) -> DistributionModel:
    """Wrap a user sampler ``sampler(rng, n) -> (n, dim) array``.

    Log-concavity and centering are the caller's responsibility; use
    :func:`validate_model` to check the latter.
    """
    if dim < 1:
        raise ModelError("dimension must be positive")
    return DistributionModel(
        "empirical_wrapper", int(dim), sampler=sampler, calibration_size=calibration_size, label=label
    )


def sample(model: DistributionModel, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws as an ``(n, d)`` array; a pure function of its arguments."""
    if n < 1:
        raise DomainError("sample size must be at least 1")
    rng = make_rng(seed)
    d = model.dim
    if model.kind == "gaussian":
        return rng.standard_normal((n, d)) @ model._chol.T
    if model.kind == "uniform_box":
        return rng.uniform(-1.0, 1.0, size=(n, d)) * model.half_widths
    if model.kind == "laplace_product":
        return rng.laplace(0.0, 1.0, size=(n, d)) * model.scales
    out = np.asarray(model.sampler(rng, n), dtype=float).reshape(n, d)
    return out


def directional_law(model: DistributionModel, theta) -> ScalarLaw:
    """Law of ``<theta, X>`` for ``X ~ model``."""
    th = np.asarray(theta, dtype=float).ravel()
    if th.size != model.dim:
        raise DomainError(f"direction has {th.size} coordinates, model has {model.dim}")
    if not np.any(th != 0):
        raise DomainError("direction must be non-zero")
    if model.kind == "gaussian":
        return NormalLaw(math.sqrt(float(th @ model.cov @ th)))
    if model.kind == "uniform_box":
        return UniformSumLaw(np.abs(th) * model.half_widths)
    return EmpiricalLaw(model.calibration_sample() @ th, name=f"{model}@{np.array2string(th, precision=4)}")


@dataclass(frozen=True)
class ModelDiagnostics:
    m: int
    mean_norm: float
    mean_threshold: float
    min_eigenvalue: float
    eigenvalue_threshold: float
    passed: bool


def validate_model(model: DistributionModel, m: int, seed: int) -> ModelDiagnostics:
    if m < 1000:
        raise DomainError("validation needs at least 1000 draws")
    x = sample(model, m, seed)
    mean_norm = float(np.linalg.norm(x.mean(axis=0)))
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    min_eig = float(np.linalg.eigvalsh(cov)[0])
    mthr = 5.0 * model.dim / math.sqrt(m)
    ethr = 1e-6
    return ModelDiagnostics(m, mean_norm, mthr, min_eig, ethr, mean_norm <= mthr and min_eig >= ethr)


# --------------------------------------------------------------------------
# Textual specs used by the CLI and config files


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ModelError(f"cannot parse numbers from {text!r}") from None


def parse_model_spec(spec) -> DistributionModel:
    """Build a model from ``"gaussian:I2"``, ``"gaussian:diag=4,1"``,
    ``"gaussian:cov=1,0.5;0.5,1"``, ``"uniform_box:1,1"``, ``"laplace:1,1"``
    or from an equivalent mapping such as ``{"kind": "gaussian", "diag": [4, 1]}``.
    """
    if isinstance(spec, DistributionModel):
        return spec
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "gaussian":
            if "cov" in spec:
                return gaussian(spec["cov"])
            if "diag" in spec:
                return gaussian(np.diag(spec["diag"]))
            return gaussian(np.eye(int(spec.get("dim", 1))))
        if kind == "uniform_box":
            return uniform_box(spec["half_widths"])
        if kind in ("laplace", "laplace_product"):
            return laplace_product(spec["scales"], int(spec.get("calibration_size", DEFAULT_CALIBRATION_SIZE)))
        raise ModelError(f"unknown model kind {kind!r}")
    text = str(spec).strip()
    kind, _, arg = text.partition(":")
    if kind == "gaussian":
        if arg.startswith("I"):
            return gaussian(np.eye(int(arg[1:] or 1)))
        if arg.startswith("diag="):
            return gaussian(np.diag(_floats(arg[5:])))
        if arg.startswith("cov="):
            rows = [_floats(r) for r in arg[4:].split(";")]
            return gaussian(np.array(rows))
    elif kind == "uniform_box":
        return uniform_box(_floats(arg))
    elif kind in ("laplace", "laplace_product"):
        return laplace_product(_floats(arg))
    raise ModelError(f"cannot parse model spec {text!r}")


def parse_law_spec(spec: str) -> ScalarLaw:
    """``uniform``, ``normal``, ``exponential``, ``triangular`` with optional
    ``:param`` (half-width, sigma, scale, half-width of each summand)."""
    name, _, arg = str(spec).strip().partition(":")
    p = float(arg) if arg else 1.0
    if name == "uniform":
        return UniformSumLaw([p])
    if name == "normal":
        return NormalLaw(p)
    if name == "exponential":
        return ShiftedExponentialLaw(p)
    if name == "triangular":
        return UniformSumLaw([p, p])
    raise ModelError(f"unknown law {spec!r}")

