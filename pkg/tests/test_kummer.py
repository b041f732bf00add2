"""Closed forms of the Kummer family."""

import math

import numpy as np
import pytest
from scipy import integrate

from qsdlab import diffusion as dfn
from qsdlab import kummer as km
from qsdlab.kummer import CaseLabel, KummerParams as P


@pytest.mark.parametrize("p,label", [((1, 0, 2), CaseLabel.CASE1), ((1, 3, 0), CaseLabel.CASE2),
                                     ((1, 0, 0), CaseLabel.CASE1_PRIME), ((1, -1, 2), CaseLabel.CASE3),
                                     ((1, -1, 0), CaseLabel.CASE3_PRIME)])
def test_classify_case(p, label):
    assert km.classify_case(P(*p)) is label


def test_params_validation():
    from qsdlab.errors import DomainError
    with pytest.raises(DomainError):
        P(0.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        P(1.0, 1.0, -0.1)


def test_measures_examples():
    m, s = km.measures(P(1, 0, 0), 2.0)
    assert (m, s) == (pytest.approx(0.5, rel=1e-15), pytest.approx(1.0, rel=1e-15))
    m, s = km.measures(P(2, 1, 0), 1.0)
    assert m == pytest.approx(math.exp(-1), rel=1e-15) and s == pytest.approx(math.e, rel=1e-15)
    x = np.geomspace(0.01, 30, 20)
    m, s = km.measures(P(1.7, -0.4, 0), x)
    assert np.allclose(m * s, 1 / x, rtol=1e-14)


def test_measures_h_transform():
    p = P(1.5, 0.5, 0.8)
    x = np.array([0.3, 2.0, 9.0])
    m, s = km.measures(p, x)
    g = km.g_gamma(p, x)
    m0, s0 = km.measures(p.base(), x)
    assert np.allclose(m, g ** 2 * m0, rtol=1e-12) and np.allclose(s, s0 / g ** 2, rtol=1e-12)


def test_g_gamma_examples():
    for p in [(1, 0, 2), (2, 1, 0.5), (1, -1, 2)]:
        assert km.g_gamma(P(*p), 0.0) == 1.0
    assert km.g_gamma(P(0.5, 0, 2), 1.0) == pytest.approx(math.exp(-2 * math.sqrt(2)), rel=1e-12)
    assert km.g_gamma(P(1, 1, 0), 3.0) == 1.0


def test_g_gamma_case3_prime_is_hitting_probability():
    # (1, -1, 0): s(x) - s(0) = 1 - e^{-x}, s(inf) = 1, so P_x[T_0 < inf] = e^{-x}
    x = np.array([0.1, 1.0, 4.0])
    assert np.allclose(km.g_gamma(P(1, -1, 0), x), np.exp(-x), rtol=1e-10)


def test_g_gamma_decreasing():
    x = np.linspace(0.0, 30.0, 200)
    for p in [(1, 0, 2), (2, 1, 0.5), (0.7, -1.5, 2)]:
        g = km.g_gamma(P(*p), x)
        assert np.all(np.diff(g) < 0) and np.all((g > 0) & (g <= 1))


def test_g_table_matches_direct():
    for p in [P(1, 0, 2), P(2, 1, 0.5), P(1, -1, 2), P(0.6, -2.0, 0.3)]:
        x = np.geomspace(1e-6, 400, 60)
        direct = np.array([km.log_g_direct(p, v) for v in x])
        assert np.allclose(km.log_h(p, x), direct, rtol=1e-11, atol=1e-12)


def test_psi_closed_examples():
    x = np.geomspace(0.01, 20, 15)
    assert np.allclose(km.psi_closed(P(1, 0, 0), 0.0, x), x, rtol=1e-14)
    assert np.allclose(km.psi_closed(P(1, 1, 0), -1.0, x), x, rtol=1e-14)


@pytest.mark.parametrize("p,lam", [((1, 0, 0), -0.7), ((2, 1, 0), 0.6), ((2, -1, 0), 1.0), ((0.5, 1, 0), -1.2)])
def test_psi_closed_vs_ode(p, lam):
    p = P(*p)
    nodes = np.geomspace(0.01, 20, 25)
    sol = dfn.solve_psi(km.diffusion_spec(p), lam, 20.0, nodes=nodes)
    ref = km.psi_closed(p, lam, sol.nodes)
    scale = np.maximum(np.abs(ref), 1e-3 * np.max(np.abs(ref)))
    assert np.max(np.abs(sol.psi_values - ref) / scale) < 1e-8


def test_transition_density_symmetry():
    rng = np.random.default_rng(11)
    for p in [P(1, 1, 0.5), P(0.5, 0, 1), P(2, -1, 1)]:
        t, x, y = rng.uniform(0.1, 5, (3, 100))
        a = km.transition_density(p, t, x, y)
        b = km.transition_density(p, t, y, x)
        assert np.allclose(a, b, rtol=1e-10)


def test_transition_density_beta_seam():
    a = km.transition_density(P(1, 1e-8, 0), 1.0, 1.0, 2.0)
    b = km.transition_density(P(1, 0, 0), 1.0, 1.0, 2.0)
    assert a == pytest.approx(b, rel=1e-5)


def test_chapman_kolmogorov():
    p = P(1, 1, 0)

    def f(lz):
        z = math.exp(lz)
        m, _ = km.measures(p, z)
        return km.transition_density(p, 0.5, 1.0, z) * km.transition_density(p, 0.5, z, 2.0) * m * z

    val, _ = integrate.quad(f, math.log(1e-12), math.log(80.0), epsabs=0, epsrel=1e-12, limit=400)
    assert val == pytest.approx(km.transition_density(p, 1.0, 1.0, 2.0), rel=1e-6)


def test_hitting_density_examples():
    assert km.hitting_density(P(1, 0, 0), 1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert km.hitting_density(P(1, 1e-8, 0), 1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-6)
    p = P(1, 1, 0.5)
    val, _ = integrate.quad(lambda t: km.hitting_density(p, 2.0, t), 0, np.inf, epsabs=0, epsrel=1e-10, limit=200)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_hitting_density_h_transform():
    p = P(1.3, 0.7, 0.9)
    x = 1.7
    t = np.linspace(0.1, 6, 30)
    lhs = km.hitting_density(p, x, t)
    rhs = np.exp(-p.gamma * t) * km.hitting_density(p.base(), x, t) / km.g_gamma(p, x)
    assert np.allclose(lhs, rhs, rtol=1e-11)


def test_survival_examples():
    for p in [P(1, 0, 2), P(1, 1, 0.5), P(1, -1, 2)]:
        assert km.survival(p, 1.3, 0.0) == pytest.approx(1.0, abs=1e-8)
    p = P(1, 0, 0)
    for t in (0.2, 1.0, 7.0):
        assert km.survival(p, 1.0, t) == pytest.approx(-math.expm1(-1 / t), rel=1e-10)
    s = [km.survival(P(1, -1, 2), 2.0, t) for t in np.linspace(0, 10, 50)]
    assert np.all(np.diff(s) <= 0)


def test_survival_is_tail_of_density():
    for p in [P(1, 0, 2), P(2, 1, 0.5), P(1, -1, 2), P(0.5, -2, 0.3)]:
        x, t = 1.5, 0.8
        tail, _ = integrate.quad(lambda u: km.hitting_density(p, x, u), t, np.inf, epsabs=0, epsrel=1e-11, limit=200)
        assert km.survival(p, x, t) == pytest.approx(tail, rel=1e-8)


def test_case3_prime_total_mass():
    # P_x[T_0 < inf] = (s(inf) - s(x)) / (s(inf) - s(0)) = e^{-x} for (1, -1, 0)
    p = P(1, -1, 0)
    for x in (0.5, 2.0):
        total, _ = integrate.quad(lambda u: km.hitting_density(p, x, u), 0, np.inf, epsabs=0, epsrel=1e-11)
        assert total == pytest.approx(math.exp(-x), rel=1e-7)
        assert km.hitting_law(p, x).total_mass == pytest.approx(math.exp(-x), rel=1e-8)


def test_spectral_measure_examples():
    s = km.spectral_measure(P(1, 1, 0))
    assert s.atoms[0] == (pytest.approx(1.0), pytest.approx(1.0, rel=1e-14))
    s = km.spectral_measure(P(1, 0, 0))
    assert s.density(2.5) == pytest.approx(2.5, rel=1e-14)
    assert s.density(-1.0) == 0.0
    assert km.spectral_measure(P(2, 1, 0.5)).support_min == 2.5
    s = km.spectral_measure(P(1, -2, 1))
    assert [a[0] for a in s.atoms[:3]] == pytest.approx([3.0, 5.0, 7.0])


def test_spectral_examples():
    v, err = km.hitting_density_spectral(P(1, 1, 0), 1.0, 1.0)
    assert v == pytest.approx(km.hitting_density(P(1, 1, 0), 1.0, 1.0), rel=1e-6)
    v, err = km.hitting_density_spectral(P(1, 0, 0), 1.0, 2.0)
    assert v == pytest.approx(math.exp(-0.5) / 4, rel=1e-6)
    # at t = 20 the lowest atom alone carries the sum
    p = P(1, 1, 0)
    full, _ = km.hitting_density_spectral(p, 1.0, 20.0)
    loc, mass = km.spectral_measure(p).atoms[0]
    first = math.exp(-loc * 20.0) * km.psi_closed(p, -loc, 1.0) * mass
    assert abs(first / full - 1) < 1e-8


@pytest.mark.parametrize("p", [P(1, 0, 2), P(1, 1, 0.5), P(1, -1, 2)])
def test_spectral_vs_closed_grid(p):
    g = np.linspace(0.5, 5, 5)
    for x in g:
        for t in g:
            v, _ = km.hitting_density_spectral(p, x, t)
            assert v == pytest.approx(km.hitting_density(p, x, t), rel=1e-6)


@pytest.mark.parametrize("p,lam0", [((2, 1, 0.5), 2.5), ((1, 0, 0), 0.0), ((3, -2, 1), 3.0)])
def test_lambda0_closed(p, lam0):
    assert km.lambda0_closed(P(*p)) == lam0


def test_factorization_reconstruction():
    p = P(1, 1, 0.5)
    f = km.factorization(p)
    rng = np.random.default_rng(3)
    x, t = rng.uniform(0.05, 8, (2, 100))
    rec = f.u(x) * f.w(t) * np.exp(-f.v(x) * f.y(t))
    assert np.allclose(rec, km.hitting_density(p, x, t), rtol=1e-12, atol=0)


def test_factorization_ranges():
    f = km.factorization(P(1, 1, 0.5))
    x = np.geomspace(1e-6, 1e6, 50)
    assert np.all(np.diff(f.v(x)) > 0)
    t = np.geomspace(1e-6, 300.0, 200)
    y = f.y(t)
    assert np.all(np.diff(y) < 0) and y[-1] < 1e-100 and y[0] > 1e5
    assert f.y_covers_half_line and km.factorization(P(1, 0, 1)).y_covers_half_line
    # beta < 0: y decreases from inf to -beta, so the range misses (0, -beta]
    f3 = km.factorization(P(1, -1, 0.5))
    assert not f3.y_covers_half_line and f3.y_range == (1.0, math.inf)
    assert f3.y(50.0) == pytest.approx(1.0, rel=1e-12)
