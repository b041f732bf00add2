"""Special functions against frozen high-precision values and identities.

Frozen values were produced once with mpmath at 30 digits.  The live
mpmath comparisons use hypothesis to draw arguments.
"""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsdlab import specfun as sf
from qsdlab.errors import DomainError, SpecFunOverflowError

FROZEN = [
    (lambda: sf.bessel_i(1, 2), 1.590636854637329063),
    (lambda: sf.bessel_i(2.5, 7), 104.6133675723487125),
    (lambda: sf.bessel_k(0.5, 1), 0.4610685044478945584),
    (lambda: sf.bessel_k(0, 0.3), 1.372460060544297411),
    (lambda: sf.bessel_k(1.3, 4), 0.01348184914526459131),
    (lambda: sf.bessel_k(1, 50), 3.444102226717555613e-23),
    (lambda: sf.kummer_m(0.5, 1.5, 3), 4.222211992888511908),
    (lambda: sf.kummer_m(2.5, 3, 10), 9724.416009501587586),
    (lambda: sf.kummer_m(2, 1, 50), 2.6441998195794069567e23),
    (lambda: sf.tricomi_u(1.5, 2.2, 0.7), 1.274656597675169490),
    (lambda: sf.tricomi_u(3.5, 1.5, 4), 0.001623270199549458756),
    (lambda: sf.hyp0f1(2, -3), 0.08800306461253316452),
]


@pytest.mark.parametrize("fn,expected", FROZEN)
def test_frozen_values(fn, expected):
    r = fn()
    assert r.value == pytest.approx(expected, rel=1e-9)
    assert abs(r.value - expected) <= max(r.abs_err_estimate, 1e-14 * abs(expected)) * 10


def test_ln_gamma_examples():
    assert sf.ln_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
    assert sf.ln_gamma(2.0) == pytest.approx(0.0, abs=1e-15)
    assert sf.ln_gamma(0.5) == pytest.approx(0.5723649429247000871, rel=1e-14)
    with pytest.raises(DomainError):
        sf.ln_gamma(0.0)


def test_bessel_i_examples():
    assert sf.bessel_i(0, 0).value == 1.0
    assert sf.bessel_i(1, 0).value == 0.0
    assert sf.bessel_i(1, 2).value == pytest.approx(1.5906369, rel=1e-7)
    with pytest.raises(DomainError):
        sf.bessel_i(-1, 2)


def test_bessel_k_examples():
    assert sf.bessel_k(0.5, 1).value == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-12)
    # small-argument asymptote 2^{nu-1} Gamma(nu) x^{-nu}
    assert sf.bessel_k(2, 1e-8).value == pytest.approx(2.0 * 1e16, rel=0.01)
    # large-argument asymptote sqrt(pi/(2x)) e^{-x}
    assert sf.bessel_k(1, 50).value == pytest.approx(math.sqrt(math.pi / 100) * math.exp(-50), rel=0.01)
    with pytest.raises(DomainError):
        sf.bessel_k(1, -2)


def test_kummer_m_examples():
    assert sf.kummer_m(1.7, 2.3, 0.0).value == 1.0
    assert sf.kummer_m(-1, 2, 3).value == pytest.approx(-0.5, rel=1e-15)
    x = 50.0
    asym = math.gamma(1) / math.gamma(2) * x ** (2 - 1) * math.exp(x)
    m = sf.kummer_m(2, 1, x).value
    # M(2, 1, x) = (1 + x) e^x, so the leading asymptote is off by exactly 1/x = 2%
    assert m == pytest.approx((1 + x) * math.exp(x), rel=1e-13)
    assert abs(m / asym - 1.0) <= 0.02 * (1 + 1e-9)


def test_kummer_m_exact_root_of_polynomial():
    r = sf.kummer_m(-1, 2, 2)
    assert r.value == 0.0 and r.abs_err_estimate < 1e-14


def test_kummer_m_overflow_has_log_companion():
    with pytest.raises(SpecFunOverflowError):
        sf.kummer_m(2, 1, 800)
    logv, sign = sf.log_kummer_m(2, 1, 800)
    assert sign == 1.0
    assert logv == pytest.approx(float(mp.log(mp.hyp1f1(2, 1, 800))), rel=1e-12)


def test_tricomi_u_examples():
    assert sf.tricomi_u(1, 2, 1).value == pytest.approx(1.0, rel=1e-12)
    assert sf.tricomi_u(1, 2, 4).value == pytest.approx(0.25, rel=1e-12)
    assert sf.tricomi_u(2, 3, 80).value == pytest.approx(80.0 ** -2, rel=0.01)


def test_laguerre_examples():
    assert sf.laguerre(0, 1.3, 4.2) == 1.0
    assert sf.laguerre(1, 0, 2) == -1.0
    assert sf.laguerre(5, 1.5, 3) == pytest.approx(1.47890625, rel=1e-13)
    # orthogonality of L_2 and L_3 with weight x e^{-x} by Gauss-Laguerre
    from scipy.special import roots_genlaguerre
    u, w = roots_genlaguerre(20, 1.0)
    val = sum(wi * sf.laguerre(2, 1.0, ui) * sf.laguerre(3, 1.0, ui) for ui, wi in zip(u, w))
    assert abs(val) < 1e-10
    norm = sum(wi * sf.laguerre(2, 1.0, ui) ** 2 for ui, wi in zip(u, w))
    assert norm == pytest.approx(math.gamma(4) / 2, rel=1e-12)


def test_pochhammer_examples():
    assert sf.pochhammer(4.2, 0) == 1.0
    assert sf.pochhammer(3, 2) == 12.0
    assert sf.pochhammer(0.5, 3) == pytest.approx(1.875, rel=1e-15)


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 2.0])
def test_wronskian(nu):
    for x in np.geomspace(0.1, 30.0, 25):
        lhs = (sf.bessel_i(nu, x).value * sf.bessel_k(nu + 1, x).value
               + sf.bessel_i(nu + 1, x).value * sf.bessel_k(nu, x).value)
        assert lhs * x == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 5.0])
def test_u_power_identity(a):
    for x in np.geomspace(0.01, 50.0, 25):
        assert sf.tricomi_u(a, a + 1.0, x).value * x ** a == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("n", range(11))
def test_kummer_laguerre(n):
    for al in (0.5, 1.0, 2.5):
        for x in (0.3, 2.0, 7.5):
            m = sf.kummer_m(-n, 1.0 + al, x, rtol=math.inf).value * sf.pochhammer(1.0 + al, n) / math.factorial(n)
            lag = sf.laguerre(n, al, x)
            assert abs(m - lag) <= 1e-10 * max(1.0, abs(lag))


@pytest.mark.parametrize("nu,x", [(0.0, 29.0), (0.0, 31.0), (4.0, 30.0), (8.0, 51.0), (8.0, 52.0)])
def test_bessel_i_seam(nu, x):
    # the series/asymptotic switch sits at x = 0.8 max(30, nu^2)
    assert sf.bessel_i(nu, x).value == pytest.approx(float(mp.besseli(nu, x)), rel=1e-12)


@pytest.mark.parametrize("x", [39.5, 40.5, 60.0])
def test_kummer_m_seam(x):
    assert sf.kummer_m(1.5, 2.5, x).value == pytest.approx(float(mp.hyp1f1(1.5, 2.5, x)), rel=1e-11)


@settings(max_examples=60, deadline=None)
@given(nu=st.floats(0.0, 6.0), x=st.floats(1e-3, 60.0))
def test_bessel_i_vs_mpmath(nu, x):
    r = sf.bessel_i(nu, x)
    ref = float(mp.besseli(nu, x))
    assert r.value == pytest.approx(ref, rel=1e-11)
    assert abs(r.value - ref) <= 10 * r.abs_err_estimate + 1e-300


@settings(max_examples=60, deadline=None)
@given(nu=st.floats(0.0, 5.0), x=st.floats(1e-3, 60.0))
def test_bessel_k_vs_mpmath(nu, x):
    assert sf.bessel_k(nu, x).value == pytest.approx(float(mp.besselk(nu, x)), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.1, 6.0), b=st.floats(0.2, 6.0), x=st.floats(0.0, 35.0))
def test_kummer_m_vs_mpmath(a, b, x):
    assert sf.kummer_m(a, b, x).value == pytest.approx(float(mp.hyp1f1(a, b, x)), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.2, 5.0), b=st.floats(0.5, 4.0), x=st.floats(0.05, 60.0))
def test_tricomi_u_vs_mpmath(a, b, x):
    assert sf.tricomi_u(a, b, x).value == pytest.approx(float(mp.hyperu(a, b, x)), rel=1e-9)
