"""Quasi-stationary distributions of the Kummer family."""

import math

import numpy as np
import pytest

from qsdlab import kummer as km
from qsdlab import qsd
from qsdlab.errors import DomainError
from qsdlab.kummer import KummerParams as P
from qsdlab.qsd import GridDistribution


def test_minimal_qsd_is_exponential():
    q = qsd.make_qsd(P(1, 1, 0), 1.0)
    x = np.geomspace(1e-3, 30, 40)
    assert np.allclose(q.density(x), np.exp(-x), rtol=1e-12)
    assert qsd.qsd_cdf(q, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-12)


@pytest.mark.parametrize("frac", [0.25, 0.5, 0.75])
def test_normalization(frac):
    q = qsd.make_qsd(P(1, 1, 0), frac)
    assert abs(q.normalization - 1.0) < 1e-6


def test_lambda_above_bottom_rejected():
    with pytest.raises(DomainError):
        qsd.make_qsd(P(1, 1, 0), 1.5)
    with pytest.raises(DomainError):
        qsd.make_qsd(P(1, 1, 0), 0.0)
    with pytest.raises(DomainError):
        qsd.make_qsd(P(1, 0, 0), 0.5)


def test_cdf_limits():
    for p, lam in [(P(1, 1, 0), 0.5), (P(1, 0, 2), 1.0), (P(1, -1, 2), 1.0)]:
        q = qsd.make_qsd(p, lam)
        assert qsd.qsd_cdf(q, 1e-12) < 1e-9
        assert qsd.qsd_cdf(q, q.x_tail) > 1 - 1e-8


@pytest.mark.parametrize("p,lam", [(P(1, 1, 0), 0.5), (P(1, 0, 2), 1.0), (P(1, -1, 2), 1.0),
                                   (P(2, 1, 0.5), 2.5), (P(0.5, -2, 1), 1.5)])
def test_cdf_matches_density_quadrature(p, lam):
    q = qsd.make_qsd(p, lam)
    x = np.geomspace(0.01, 20, 25)
    assert np.max(np.abs(qsd.qsd_cdf(q, x) - qsd.qsd_cdf_quadrature(q, x))) < 1e-6


@pytest.mark.parametrize("p,lam,tol", [(P(1, 1, 0), 1.0, 1e-5), (P(1, 0, 2), 1.0, 1e-4), (P(1, -1, 2), 1.0, 1e-4)])
def test_hitting_law_exponential(p, lam, tol):
    q = qsd.make_qsd(p, lam)
    assert qsd.qsd_hitting_check(q, np.linspace(0.1, 5, 30)) < tol


def test_order_examples():
    p = P(1, 1, 0)
    x = np.geomspace(0.01, 20, 200)
    assert qsd.qsd_order_check(p, 0.5, 0.5, x)
    assert qsd.qsd_order_check(p, 1.0, 0.5, x)
    assert not qsd.qsd_order_check(p, 0.5, 1.0, x)


def test_order_other_cases():
    x = np.geomspace(0.01, 20, 200)
    assert qsd.qsd_order_check(P(1, 0, 2), 2.0, 0.7, x)
    assert qsd.qsd_order_check(P(1, -1, 2), 3.0, 1.0, x)


def test_generic_route_matches_closed_form():
    p = P(1, 1, 0)
    spec = km.diffusion_spec(p)
    x = np.geomspace(0.05, 20, 20)
    q = qsd.make_qsd(spec, 1.0, lambda0=1.0, x_max=60.0)
    ref = qsd.make_qsd(p, 1.0)
    assert np.allclose(q.cdf(x), ref.cdf(x), atol=1e-7)
    # nu_0.5 has a power tail, so the truncated ODE grid cannot hold unit mass
    q = qsd.make_qsd(spec, 0.5, lambda0=1.0, x_max=60.0, check=False)
    ref = qsd.make_qsd(p, 0.5)
    assert np.allclose(q.density(x), ref.density(x), rtol=1e-6)


def test_grid_distribution_invariants():
    nodes = np.geomspace(1e-4, 50, 300)
    g = GridDistribution(nodes, -np.expm1(-nodes))
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(g.weights >= 0)
    assert g.cdf(nodes[-1]) == 1.0
    assert np.all(np.diff(g.cdf(np.geomspace(1e-5, 60, 500))) >= 0)
    assert g.cdf(1.0) == pytest.approx(1 - math.exp(-1), rel=1e-5)
    assert math.exp(g.log_density(1.0)) == pytest.approx(math.exp(-1), rel=1e-3)
    assert g.mean() == pytest.approx(1.0, rel=1e-2)
    with pytest.raises(DomainError):
        GridDistribution([1.0, 0.5], [0.2, 1.0])


def test_qsd_grid_view():
    q = qsd.make_qsd(P(1, 1, 0), 0.5)
    g = q.grid(800)
    x = np.geomspace(0.01, 20, 30)
    assert np.max(np.abs(g.cdf(x) - q.cdf(x))) < 1e-6
