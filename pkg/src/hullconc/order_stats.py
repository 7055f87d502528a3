"""Law of the sample maximum and exact checks of its two-sided concentration.

For ``Y_1..Y_n`` i.i.d. with CDF ``J`` the maximum has CDF ``J^n`` and
density ``n J^{n-1} f``.  Everything here is evaluated in log space so that
``n`` up to ~1e7 neither underflows nor loses the tail.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .distributions import EmpiricalLaw, ScalarLaw
from .errors import DomainError, NumericError

__all__ = [
    "MaxLaw",
    "Lemma4Report",
    "SandwichQuantiles",
    "generalized_inverse",
    "max_law_cdf",
    "max_law_quantile",
    "expected_max",
    "lemma4_verify",
    "quantile_sandwich_check",
    "LEMMA4_MIN_N",
]

LEMMA4_MIN_N = 12
TAIL_CUTOFF = 1e-14
QUAD_EPSREL = 1e-12

# split points for the quadrature, as probabilities under the max law
_LEVELS = (1e-12, 1e-8, 1e-5, 1e-3, 0.02, 0.1, 0.25, 0.5)
_UPPER_LEVELS = (0.25, 0.1, 0.02, 1e-3, 1e-5, 1e-8, 1e-11)


def generalized_inverse(law: ScalarLaw, t: float) -> float:
    """``sup{x : J(x) < t}`` for ``t`` in the open unit interval."""
    if not 0.0 < t < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {t!r}")
    return law.quantile(t)


def max_law_cdf(law: ScalarLaw, n: int, x):
    """``J(x)**n`` computed as ``exp(n log J(x))``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    out = np.exp(n * np.asarray(law.logcdf(x), dtype=float))
    return float(out) if np.ndim(x) == 0 else out


def _max_law_sf(law: ScalarLaw, n: int, x):
    return -np.expm1(n * np.asarray(law.logcdf(x), dtype=float))


def max_law_quantile(law: ScalarLaw, n: int, p: float, upper: bool = False) -> float:
    """Quantile of ``Y_(n)`` at level ``p`` (or ``1 - p`` when ``upper``)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {p!r}")
    logp = math.log1p(-p) if upper else math.log(p)
    # J^{-1}(p^{1/n}) through the upper tail mass 1 - p^{1/n}
    s = -math.expm1(logp / n)
    if s <= 0.0:
        return law.upper
    if s >= 1.0:
        return law.lower
    return law.isf(s)


@dataclass(frozen=True)
class MaxLaw:
    base: ScalarLaw
    n: int

    def cdf_at(self, x):
        return max_law_cdf(self.base, self.n, x)

    def density_at(self, x):
        lc = np.asarray(self.base.logcdf(x), dtype=float)
        f = np.asarray(self.base.pdf(x), dtype=float)
        with np.errstate(invalid="ignore"):
            out = np.where(f > 0, self.n * np.exp((self.n - 1) * lc) * f, 0.0)
        return float(out) if np.ndim(x) == 0 else out

    def quantile(self, p: float) -> float:
        return max_law_quantile(self.base, self.n, p)

    def mean(self) -> float:
        return expected_max(self.base, self.n)


def _quad(f, a: float, b: float, scale: float) -> float:
    if not b > a:
        return 0.0
    val, err = integrate.quad(f, a, b, epsabs=1e-14 * scale, epsrel=QUAD_EPSREL, limit=400)
    if not math.isfinite(val) or err > 1e-9 * (scale + abs(val)):
        raise NumericError(f"quadrature did not converge on [{a}, {b}] (err={err:.3g})")
    return val


def expected_max(law: ScalarLaw, n: int) -> float:
    """``E max(Y_1..Y_n)`` by adaptive quadrature of the max-law tails.

    Writes ``E Y_(n) = a + int_a^inf (1 - J^n) - int_-inf^a J^n`` with ``a``
    the median of the maximum, splits both integrals at max-law quantiles and
    at kinks of the density, and truncates where the integrand drops below
    ``1e-14``.  Empirical laws are integrated exactly instead.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if isinstance(law, EmpiricalLaw):
        return law.mean_of_max(n)
    scale = law.scale
    a = max_law_quantile(law, n, 0.5)
    hi = min(law.upper, law.isf(TAIL_CUTOFF / n))
    lo = max(law.lower, max_law_quantile(law, n, TAIL_CUTOFF))
    kinks = law.breakpoints()

    def cuts(left, right, pts):
        inner = sorted({p for p in list(pts) + list(kinks) if left < p < right})
        return [left, *inner, right]

    lower_pts = [max_law_quantile(law, n, p) for p in _LEVELS[:-1]]
    upper_pts = [max_law_quantile(law, n, q, upper=True) for q in _UPPER_LEVELS]

    def upper_f(x):
        return float(_max_law_sf(law, n, x))

    def lower_f(x):
        return float(max_law_cdf(law, n, x))

    up = 0.0
    knots = cuts(a, hi, upper_pts)
    for x0, x1 in zip(knots[:-1], knots[1:]):
        up += _quad(upper_f, x0, x1, scale)
    down = 0.0
    knots = cuts(lo, a, lower_pts)
    for x0, x1 in zip(knots[:-1], knots[1:]):
        down += _quad(lower_f, x0, x1, scale)
    result = a + up - down
    if not math.isfinite(result):
        raise NumericError("expected maximum is not finite")
    return result


@dataclass(frozen=True)
class Lemma4Report:
    law: str
    n: int
    t: float
    e_max: float
    p_right: float
    bound_right: float
    p_left: float
    bound_left: float
    bound_left_proof: float
    holds_right: bool
    holds_left: bool

    def as_row(self) -> dict:
        return asdict(self)


def lemma4_verify(
    law: ScalarLaw, n: int, t: float, tol: float = 1e-8, e_max: float | None = None
) -> Lemma4Report:
    """Exact probabilities that the maximum stays within ``(1 +- t) E Y_(n)``.

    ``bound_left_proof`` is the sharper ``1 - exp(-9 n^{t/2} / 20)`` that the
    argument actually yields; it is reported but not used for ``holds_left``.
    """
    if n < LEMMA4_MIN_N:
        raise DomainError(f"the two-sided bound needs n >= {LEMMA4_MIN_N}, got {n}")
    if not t > 0:
        raise DomainError("t must be positive")
    e = expected_max(law, n) if e_max is None else e_max
    if not e > 0:
        raise NumericError(f"expected maximum {e!r} is not positive")
    p_right = float(max_law_cdf(law, n, (1.0 + t) * e))
    p_left = float(_max_law_sf(law, n, (1.0 - t) * e))
    b_right = -math.expm1(-0.5 * t * math.log(n))
    root = math.exp(0.5 * t * math.log(n))
    b_left = -math.expm1(-root / 3.0)
    b_proof = -math.expm1(-9.0 * root / 20.0)
    return Lemma4Report(
        law=law.name,
        n=n,
        t=t,
        e_max=e,
        p_right=p_right,
        bound_right=b_right,
        p_left=p_left,
        bound_left=b_left,
        bound_left_proof=b_proof,
        holds_right=p_right >= b_right - tol,
        holds_left=p_left >= b_left - tol,
    )


@dataclass(frozen=True)
class SandwichQuantiles:
    """Quantile bracketing of ``E Y_(n)``; the ``*_ok`` fields are the verdicts."""

    n: int
    e_max: float
    max_q_low: float  # J_n^{-1}(1/e)
    max_q_high: float  # J_n^{-1}(1 - 1/e)
    q_one_over_n: float  # J^{-1}(1 - 1/n)
    q_nine_twentieths: float  # J^{-1}(1 - 9/(20n))
    low_ok: bool
    high_ok: bool
    aux_low_ok: bool
    aux_high_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.low_ok and self.high_ok and self.aux_low_ok and self.aux_high_ok


def quantile_sandwich_check(
    law: ScalarLaw, n: int, tol: float = 1e-8, e_max: float | None = None
) -> SandwichQuantiles:
    """Check ``J_n^{-1}(1/e) <= E Y_(n) <= J_n^{-1}(1-1/e)`` and the auxiliary
    ``J^{-1}(1-1/n) <= E Y_(n) < J^{-1}(1-9/(20n))``.

    The auxiliary upper inequality rests on ``(1-9/(20n))^n > 1-1/e``, which
    is only true from ``n = 12`` on; smaller ``n`` may legitimately fail it.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    e = expected_max(law, n) if e_max is None else e_max
    q_lo = max_law_quantile(law, n, math.exp(-1.0))
    q_hi = max_law_quantile(law, n, math.exp(-1.0), upper=True)
    q1 = -math.inf if n == 1 else law.isf(1.0 / n)
    q9 = law.isf(9.0 / (20.0 * n))
    s = tol * max(1.0, abs(e))
    return SandwichQuantiles(
        n=n,
        e_max=e,
        max_q_low=q_lo,
        max_q_high=q_hi,
        q_one_over_n=q1,
        q_nine_twentieths=q9,
        low_ok=q_lo <= e + s,
        high_ok=e <= q_hi + s,
        aux_low_ok=q1 <= e + s,
        aux_high_ok=e < q9 + s,
    )
