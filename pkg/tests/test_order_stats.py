import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from hullconc.distributions import NormalLaw, ShiftedExponentialLaw, UniformSumLaw, laplace_product, directional_law
from hullconc.errors import DomainError
from hullconc.order_stats import (
    expected_max,
    generalized_inverse,
    lemma4_verify,
    max_law_cdf,
    max_law_quantile,
    quantile_sandwich_check,
)

UNIFORM = UniformSumLaw([1.0])
NORMAL = NormalLaw(1.0)
EXPO = ShiftedExponentialLaw(1.0)
TRI = UniformSumLaw([1.0, 1.0])


def _mp_uniform(x):
    return min(max((x + 1) / 2, 0), 1)


def _mp_expo(x):
    return 1 - mpmath.exp(-(x + 1)) if x > -1 else mpmath.mpf(0)


def _mp_tri(x):
    if x <= -2:
        return mpmath.mpf(0)
    if x >= 2:
        return mpmath.mpf(1)
    return (x + 2) ** 2 / 8 if x <= 0 else 1 - (2 - x) ** 2 / 8


MP_CDF = {"uniform": _mp_uniform, "normal": mpmath.ncdf, "exponential": _mp_expo, "triangular": _mp_tri}


def harmonic(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


@pytest.mark.parametrize("n", [1, 2, 3, 12, 100, 10_000, 1_000_000])
def test_uniform_expected_max_closed_form(n):
    assert expected_max(UNIFORM, n) == pytest.approx((n - 1) / (n + 1), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 12, 1000, 10**6])
def test_exponential_expected_max_harmonic(n):
    assert expected_max(EXPO, n) == pytest.approx(harmonic(n) - 1.0, abs=1e-10)


# closed forms for n = 2, 3; larger n frozen from a 30-digit mpmath integral
@pytest.mark.parametrize("n,value", [(2, 1 / math.sqrt(math.pi)), (3, 1.5 / math.sqrt(math.pi)),
                                     (10, 1.53875273083517286), (100, 2.50759363644168437),
                                     (1000, 3.24143576913344086)])
def test_normal_expected_max_table(n, value):
    assert expected_max(NORMAL, n) == pytest.approx(value, abs=1e-12)


def test_triangular_expected_max_against_density_integral():
    # independent formulation: integral of x * n J^{n-1} f over the support
    ref = stats.triang(0.5, loc=-2, scale=4)
    for n in (12, 100, 1000):
        f = lambda x: x * n * ref.cdf(x) ** (n - 1) * ref.pdf(x)
        val = integrate.quad(f, -2, 0, epsabs=1e-14)[0] + integrate.quad(f, 0, 2, epsabs=1e-14, limit=200)[0]
        assert expected_max(TRI, n) == pytest.approx(val, abs=1e-9)


def test_expected_max_matches_monte_carlo():
    rng = np.random.default_rng(5)
    n, reps = 50, 100_000
    m = rng.standard_normal((reps, n)).max(axis=1)
    se = m.std(ddof=1) / math.sqrt(reps)
    assert abs(expected_max(NORMAL, n) - m.mean()) < 4 * se


def test_empirical_law_expected_max_is_exact_for_the_sample():
    law = directional_law(laplace_product([1.0], calibration_size=50_000), [1.0])
    assert expected_max(law, 100) == pytest.approx(law.mean_of_max(100), rel=1e-12)


@pytest.mark.parametrize("law", [UNIFORM, NORMAL, EXPO, TRI], ids=lambda l: l.name)
def test_expected_max_strictly_increasing(law):
    vals = [expected_max(law, n) for n in (1, 2, 5, 12, 100, 1000, 10**4, 10**6)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_max_law_cdf_examples():
    assert max_law_cdf(UNIFORM, 2, 0.0) == pytest.approx(0.25, abs=1e-15)
    assert max_law_cdf(UNIFORM, 10, 1.0) == 1.0
    v = max_law_cdf(NORMAL, 1000, 0.0)
    assert v == pytest.approx(2.0**-1000, rel=1e-12)
    assert v > 0


@pytest.mark.parametrize("law", [UNIFORM, NORMAL, EXPO, TRI], ids=lambda l: l.name)
@given(n=st.integers(1, 10**6), a=st.floats(-5, 5), b=st.floats(-5, 5))
@settings(max_examples=80, deadline=None)
def test_max_law_cdf_monotone_and_equals_power(law, n, a, b):
    lo, hi = min(a, b), max(a, b)
    assert max_law_cdf(law, n, lo) <= max_law_cdf(law, n, hi)
    # float J(x)**n amplifies the rounding of J(x) n-fold, so the power is taken in 40 digits
    with mpmath.workdps(40):
        direct = float(MP_CDF[law.name](mpmath.mpf(hi)) ** n)
    if direct > 1e-300:
        assert max_law_cdf(law, n, hi) == pytest.approx(direct, rel=1e-12)


def test_generalized_inverse_examples():
    assert generalized_inverse(UNIFORM, 0.75) == pytest.approx(0.5, abs=1e-14)
    assert generalized_inverse(NORMAL, 0.5) == 0.0
    assert generalized_inverse(NORMAL, 0.975) == pytest.approx(1.959963984540054, abs=1e-13)
    for t in (0.0, 1.0, -0.1):
        with pytest.raises(DomainError):
            generalized_inverse(NORMAL, t)


@pytest.mark.parametrize("law", [UNIFORM, NORMAL, EXPO, TRI], ids=lambda l: l.name)
@given(u=st.floats(0.01, 0.99))
@settings(max_examples=50, deadline=None)
def test_generalized_inverse_two_sided_on_support(law, u):
    # |x| <= 4 keeps J(x) away from 1, where float cdf values lose the inverse
    lo = max(law.lower, -4.0)
    x = lo + u * (min(law.upper, 4.0) - lo)
    assert generalized_inverse(law, float(law.cdf(x))) == pytest.approx(x, abs=1e-9 * law.scale)


def test_max_law_quantile_round_trip():
    for n in (1, 12, 1000):
        for p in (0.1, 1 / math.e, 0.9):
            x = max_law_quantile(NORMAL, n, p)
            assert max_law_cdf(NORMAL, n, x) == pytest.approx(p, rel=1e-10)


def test_lemma4_spec_examples():
    r = lemma4_verify(UNIFORM, 12, 1.0)
    assert r.e_max == pytest.approx(11 / 13)
    assert r.p_right == 1.0 and r.holds_right
    r = lemma4_verify(NORMAL, 100, 0.5)
    assert r.holds_right and r.holds_left
    r = lemma4_verify(EXPO, 1000, 0.25)
    assert r.e_max == pytest.approx(harmonic(1000) - 1, abs=1e-10)
    assert r.holds_right and r.holds_left
    assert r.bound_left_proof >= r.bound_left


def test_lemma4_probabilities_by_direct_formula():
    r = lemma4_verify(NORMAL, 100, 0.3)
    e = r.e_max
    assert r.p_right == pytest.approx(stats.norm.cdf(1.3 * e) ** 100, rel=1e-12)
    assert r.p_left == pytest.approx(1 - stats.norm.cdf(0.7 * e) ** 100, rel=1e-12)
    assert r.bound_right == pytest.approx(1 - 100**-0.15, rel=1e-14)
    assert r.bound_left == pytest.approx(1 - math.exp(-(100**0.15) / 3), rel=1e-14)


def test_lemma4_rejects_small_n():
    with pytest.raises(DomainError):
        lemma4_verify(NORMAL, 11, 0.5)


def test_quantile_sandwich_uniform_n3():
    q = quantile_sandwich_check(UNIFORM, 3)
    assert q.e_max == pytest.approx(0.5)
    assert q.max_q_low == pytest.approx(2 * math.exp(-1 / 3) - 1, abs=1e-12)
    assert q.low_ok and q.high_ok and q.aux_low_ok


def test_quantile_sandwich_normal_n12():
    assert quantile_sandwich_check(NORMAL, 12).all_ok


@pytest.mark.parametrize("law", [UNIFORM, NORMAL, EXPO, TRI], ids=lambda l: l.name)
def test_quantile_sandwich_n1(law):
    q = quantile_sandwich_check(law, 1)
    assert q.e_max == pytest.approx(0.0, abs=1e-12)
    assert q.low_ok and q.high_ok


def test_aux_upper_inequality_needs_n12():
    # (1 - 9/(20n))^n > 1 - 1/e fails below n = 12, so the check may fail there
    assert (1 - 9 / 240) ** 12 > 1 - math.exp(-1)
    assert (1 - 9 / 220) ** 11 < 1 - math.exp(-1)
