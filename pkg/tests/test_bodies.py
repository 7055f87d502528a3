import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from hullconc.bodies import (
    ExpectedHullOracle,
    FloatingBodyOracle,
    certify_sandwich,
    expected_hull_support,
    floating_support,
    inclusion_probability,
    random_directions,
    sandwich_bruteforce,
    theorem1_delta,
    wilson_interval,
)
from hullconc.distributions import NormalLaw, gaussian, sample, uniform_box
from hullconc.errors import CertificateError, DomainError
from hullconc.geometry import Polytope, build_net
from hullconc.order_stats import expected_max

G2 = gaussian(np.eye(2))


@pytest.fixture(scope="module")
def g2_setup():
    EH = ExpectedHullOracle(G2, 10_000)
    net = build_net(EH.polar_gauge(), 0.1, seed=0, candidate_budget=5000)
    return EH, net


def test_expected_hull_examples():
    u = np.array([0.6, 0.8])
    assert expected_hull_support(ExpectedHullOracle(G2, 1), u) == pytest.approx(0.0, abs=1e-14)
    assert expected_hull_support(ExpectedHullOracle(G2, 2), u) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-13)
    box = ExpectedHullOracle(uniform_box([1.0, 1.0]), 3)
    assert expected_hull_support(box, [1.0, 0.0]) == pytest.approx(0.5, abs=1e-12)


def test_expected_hull_zero_direction():
    with pytest.raises(DomainError):
        ExpectedHullOracle(G2, 5).support(np.zeros(2))


def test_gaussian_fast_path_matches_quadrature():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    EH = ExpectedHullOracle(gaussian(cov), 100)
    th = np.array([0.3, -1.1])
    sigma = math.sqrt(th @ cov @ th)
    assert EH.support(th) == pytest.approx(sigma * expected_max(NormalLaw(1.0), 100), rel=1e-13)


@pytest.mark.parametrize("model", [G2, uniform_box([1.0, 0.5])], ids=str)
@given(
    a=st.lists(st.floats(-3, 3), min_size=2, max_size=2),
    b=st.lists(st.floats(-3, 3), min_size=2, max_size=2),
    c=st.floats(0.01, 50),
)
@settings(max_examples=25, deadline=None)
def test_expected_hull_homogeneous_sublinear_positive(model, a, b, c):
    EH = ExpectedHullOracle(model, 12)
    a, b = np.array(a), np.array(b)
    if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3 or np.linalg.norm(a + b) < 1e-3:
        return
    ha, hb = EH.support(a), EH.support(b)
    assert ha > 0
    assert EH.support(c * a) == pytest.approx(c * ha, rel=1e-9)
    assert EH.support(a + b) <= ha + hb + 1e-9 * (ha + hb)


def test_mc_mode_agrees_with_analytic():
    EH = ExpectedHullOracle(G2, 1000)
    MC = ExpectedHullOracle(G2, 1000, mode="mc", replicates=4000, seed=3)
    dirs = random_directions(2, 30, 5, include_axes=False)
    vals, se = MC.evaluate(dirs)
    z = np.abs(vals - EH.support(dirs)) / se
    assert np.mean(z <= 3) >= 0.9


def test_cache_is_thread_safe_and_stable():
    MC = ExpectedHullOracle(G2, 200, mode="mc", replicates=500, seed=1)
    dirs = random_directions(2, 50, 2)
    ref = ExpectedHullOracle(G2, 200, mode="mc", replicates=500, seed=1).support(dirs)
    out = [None] * 8

    def work(i):
        out[i] = MC.support(dirs)

    ts = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    for o in out:
        assert np.array_equal(o, ref)


def test_floating_support_examples():
    fb = FloatingBodyOracle(G2, math.exp(-2))
    u = np.array([0.6, 0.8])
    assert floating_support(fb, u) == pytest.approx(stats.norm.ppf(1 - math.exp(-2)), rel=1e-12)
    assert floating_support(fb, 2 * u) == pytest.approx(2 * floating_support(fb, u), rel=1e-12)
    box = FloatingBodyOracle(uniform_box([1.0, 1.0]), 0.25)
    assert floating_support(box, [1.0, 0.0]) == pytest.approx(0.5, abs=1e-12)
    for bad in (0.0, 0.4, -0.1):
        with pytest.raises(DomainError):
            FloatingBodyOracle(G2, bad)


def test_floating_halfspace_mass():
    fb = FloatingBodyOracle(uniform_box([1.0, 2.0]), 0.1)
    x = sample(uniform_box([1.0, 2.0]), 100_000, 4)
    for th in random_directions(2, 10, 6):
        frac = np.mean(x @ th <= fb.support(th))
        assert abs(frac - 0.9) < 4 * math.sqrt(0.09 / 100_000)


def test_theorem1_delta_clamp():
    prescribed, used, clamped = theorem1_delta(1000, 0.4, 2)
    assert prescribed == pytest.approx(3 * 1000 ** (-0.4 / 8))
    assert clamped and used == pytest.approx(0.08)
    p, u, c = theorem1_delta(10**300, 0.4, 1)
    assert not c and u == p


def test_certificate_identity_case(g2_setup):
    EH, net = g2_setup
    # E P_n of an isotropic Gaussian is a disc; a fine polygon inscribed in it
    ang = np.linspace(0, 2 * np.pi, 20_000, endpoint=False)
    circle = np.column_stack([np.cos(ang), np.sin(ang)]) * EH.support(np.array([1.0, 0.0]))
    P = Polytope(circle)
    cert = certify_sandwich(P, EH, 0.5, net)
    assert cert.certified
    assert cert.min_ratio == pytest.approx(1.0, abs=1e-6) and cert.max_ratio == pytest.approx(1.0, abs=1e-6)
    out, inn = sandwich_bruteforce(P, EH, m_dirs=1000, seed=0)
    assert abs(out) < 1e-6 and abs(inn) < 1e-6
    # scaling by 1 + eps breaks the upper check at every net point
    big = P.scaled(1.5)
    cert = certify_sandwich(big, EH, 0.5, net)
    assert not cert.certified and len(cert.failures) == net.size
    assert sandwich_bruteforce(big, EH, m_dirs=1000, seed=0)[0] == pytest.approx(0.5, abs=1e-6)


def test_certificate_preconditions(g2_setup):
    EH, net = g2_setup
    P = Polytope(sample(G2, 100, 0))
    with pytest.raises(DomainError):
        certify_sandwich(P, EH, 0.3, net)  # delta 0.1 > 0.3 / 5
    other = ExpectedHullOracle(G2, 100)
    with pytest.raises(CertificateError):
        certify_sandwich(P, other, 0.5, net)
    off = Polytope(sample(G2, 100, 0) + 50.0)
    cert = certify_sandwich(off, EH, 0.5, net)
    assert not cert.certified and "origin" in cert.reason


def test_certified_rate_and_soundness(g2_setup):
    EH, net = g2_setup
    dirs = random_directions(2, 1000, 9)
    hd = EH.support(dirs)
    certified = 0
    for t in range(200):
        P = Polytope(sample(G2, 10_000, 1000 + t))
        cert = certify_sandwich(P, EH, 0.5, net)
        out, inn = sandwich_bruteforce(P, EH, directions=dirs, eh_values=hd)
        if cert.certified:
            certified += 1
            assert out <= 0.5 and inn <= 0.5
    # upper-side failure is the event that some point leaves the polygon
    # {x : <w, x> <= 1 + eps/2 on the net}; its Gaussian mass comes from the
    # radial integral, the lower side is of order exp(-19) and ignored
    W = net.points
    kinks = np.sort(np.mod(np.arctan2(W[:, 1], W[:, 0]), 2 * np.pi))
    edges = np.concatenate([[0.0], kinks, [2 * np.pi]])

    def tail(phi):
        u = np.array([math.cos(phi), math.sin(phi)])
        return math.exp(-0.5 * (1.25 / (W @ u).max()) ** 2)

    p_out = sum(integrate.quad(tail, a, b, epsabs=1e-16)[0] for a, b in zip(edges[:-1], edges[1:])) / (2 * math.pi)
    expected = (1 - p_out) ** 10_000
    lo, hi = wilson_interval(certified, 200)
    assert lo <= expected <= hi
    assert 0.85 < expected < 0.95


def test_bruteforce_needs_directions():
    with pytest.raises(DomainError):
        sandwich_bruteforce(Polytope(sample(G2, 50, 0)), ExpectedHullOracle(G2, 50), m_dirs=999)


def test_inclusion_probability_1d_exact():
    m = gaussian(np.eye(1))
    EH = ExpectedHullOracle(m, 100)
    est = inclusion_probability(m, EH, 0.5, 20_000, seed=3)
    e = EH.support(np.array([1.0]))
    exact = stats.norm.cdf(1.5 * e) - stats.norm.cdf(-1.5 * e)
    assert est.ci_low <= exact <= est.ci_high
    assert exact >= 1 - 6 * 100 ** (-1 - 0.125)
    assert est.indeterminate == 0


def test_inclusion_probability_classification_2d(g2_setup):
    EH, net = g2_setup
    small = inclusion_probability(G2, EH, 0.05, 10_000, seed=2, net=net)
    large = inclusion_probability(G2, EH, 0.5, 10_000, seed=2, net=net)
    assert large.estimate >= small.estimate
    assert small.certified_in + small.certified_out + small.indeterminate == small.draws
    huge = inclusion_probability(G2, EH, 10.0, 10_000, seed=2, net=net)
    assert huge.estimate == 1.0


def test_inclusion_probability_needs_draws():
    with pytest.raises(DomainError):
        inclusion_probability(G2, ExpectedHullOracle(G2, 100), 0.5, 999, seed=0)


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == pytest.approx(0.0, abs=1e-15) and 0.03 < hi < 0.04
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)
