"""Conditioned evolution, mixtures, rates and the domain-of-attraction runs."""

import math

import numpy as np
import pytest

from qsdlab import evolve as ev
from qsdlab import kummer as km
from qsdlab import qsd
from qsdlab.errors import DomainError, UnderflowError
from qsdlab.evolve import InitialDistribution as Init
from qsdlab.kummer import KummerParams as P
from qsdlab.qsd import GridDistribution


@pytest.fixture(scope="module")
def nu_half():
    return qsd.make_qsd(P(1, 1, 0), 0.5)


def test_log_kernel_matches_closed_form():
    rng = np.random.default_rng(5)
    for p in [P(1, 1, 0.5), P(0.5, 0, 1), P(2, -1, 1), P(1, -1, 0.5)]:
        t, x, y = rng.uniform(0.1, 4, (3, 50))
        ref = km.log_transition_density(p, t, x, y) + km.log_measures(p, y)[0]
        got = np.array([ev.log_kernel(p, ti, xi, yi) for ti, xi, yi in zip(t, x, y)])
        assert np.allclose(got, ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("p,lam,t", [(P(1, 1, 0), 0.5, 1.0), (P(1, 0, 2), 1.0, 0.5), (P(1, -1, 2), 2.0, 0.5)])
def test_qsd_is_stationary(p, lam, t):
    q = qsd.make_qsd(p, lam)
    mu_t = ev.evolve_conditional(p, Init.custom(q), t)
    assert ev.ks_distance(mu_t, q) < 1e-4
    assert mu_t.log_survival == pytest.approx(-lam * t, abs=1e-6)


def test_point_mass_short_time():
    x0 = 1.0
    mu_t = ev.evolve_conditional(P(1, 1, 0), Init.point_mass(x0), 1e-4)
    # the limit law has an atom at x0, so compare at continuity points only
    grid = np.geomspace(1e-3, 1e3, 200)
    grid = grid[np.abs(grid - x0) > 1e-9]
    assert ev.ks_distance(mu_t, Init.point_mass(x0), grid=grid) < 0.05


def test_semigroup():
    p = P(1, 1, 0)
    mu = Init.point_mass(1.0)
    two_step = ev.evolve_conditional(p, ev.evolve_conditional(p, mu, 0.5), 0.7)
    one_step = ev.evolve_conditional(p, mu, 1.2)
    assert ev.ks_distance(two_step, one_step) < 1e-6


def test_hitting_mixture_examples(nu_half):
    p = P(1, 1, 0)
    for t in (0.1, 1.0, 5.0):
        assert ev.hitting_mixture(p, nu_half, t) == pytest.approx(0.5 * math.exp(-0.5 * t), rel=1e-4)
        assert ev.hitting_mixture(p, Init.point_mass(2.0), t) == pytest.approx(km.hitting_density(p, 2.0, t), rel=1e-13)
        two = Init.atoms_at([1.0, 2.0], [0.5, 0.5])
        avg = 0.5 * (km.hitting_density(p, 1.0, t) + km.hitting_density(p, 2.0, t))
        assert ev.hitting_mixture(p, two, t) == pytest.approx(avg, rel=1e-13)


def test_mixture_identity():
    # f_{mu_t}(s) = f_mu(t + s) / P_mu[T_0 > t]
    p = P(1, 1, 0.5)
    mu = Init.point_mass(1.0)
    t = 1.0
    mu_t = ev.evolve_conditional(p, mu, t)
    surv = ev.survival_mixture(p, mu, t)
    for s in (0.5, 2.0):
        lhs = ev.hitting_mixture(p, mu_t, s)
        rhs = ev.hitting_mixture(p, mu, t + s) / surv
        assert lhs == pytest.approx(rhs, rel=1e-6)
        assert ev.survival_mixture(p, mu_t, s) == pytest.approx(ev.survival_mixture(p, mu, t + s) / surv, rel=1e-6)


def test_tail_ratio_examples(nu_half):
    p = P(1, 1, 0)
    for t in (0.5, 3.0):
        assert ev.tail_ratio(p, nu_half, t, 1.0) == pytest.approx(math.exp(-0.5), abs=1e-5)
    assert ev.tail_ratio(p, Init.point_mass(1.0), 2.0, 0.0) == 1.0


def test_log_derivative_rate(nu_half):
    p = P(1, 1, 0)
    assert ev.log_derivative_rate(p, nu_half, [5.0, 10.0, 20.0]) == pytest.approx(0.5, rel=5e-3)
    assert ev.log_derivative_rate(p, Init.point_mass(1.0), [5.0, 10.0, 20.0]) == pytest.approx(1.0, rel=1e-2)


def test_ks_distance_examples():
    a = Init.point_mass(1.0)
    assert ev.ks_distance(a, a) == 0.0
    assert ev.ks_distance(Init.point_mass(1.0), Init.point_mass(2.0)) == 1.0
    n = 50
    nodes = np.arange(1, n + 2, dtype=float)
    w = np.r_[np.full(n, 1.0 / n), 0.0]
    u = GridDistribution.from_weights(nodes, w)
    shifted = GridDistribution.from_weights(nodes, np.r_[0.0, np.full(n, 1.0 / n)])
    d = ev.ks_distance(u, shifted)
    assert 0.5 / n <= d <= 1.0 / n + 1e-12


def test_underflow_reports_log_value():
    with pytest.raises(UnderflowError) as info:
        ev.evolve_conditional(P(1, 1, 0), Init.point_mass(1.0), 800.0)
    assert info.value.log_value == pytest.approx(-800.0, rel=1e-2)
    mu_t = ev.evolve_conditional(P(1, 1, 0), Init.point_mass(1.0), 800.0, raise_underflow=False)
    assert mu_t.log_survival < math.log(1e-300)


def test_initial_laws_validate_delta():
    with pytest.raises(DomainError):
        Init.case1_density(P(1, 0, 1), 2.5)
    with pytest.raises(DomainError):
        Init.case2_tail(P(1, 1, 0), 1.0)
    with pytest.raises(DomainError):
        Init.case3_tail(P(1, -1, 0.5), 1.5)
    with pytest.raises(DomainError):
        Init.case2_tail(P(1, 0, 1), 0.5)


def test_initial_tails():
    mu = Init.case2_tail(P(1, 1, 0), 0.5)
    x = np.array([1e3, 1e6])
    tail = 1 - mu.cdf(x)
    assert np.allclose(tail, (1 + x) ** -0.5, rtol=1e-9)
    mu = Init.case3_tail(P(1, -1, 0.5), 0.25, slowly="log")
    tail = 1 - mu.cdf(x)
    assert np.allclose(tail, (1 + x) ** -1.25 * np.log(math.e + x), rtol=1e-6)
    mu = Init.case1_density(P(1, 0, 1), 1.0)
    r = np.array([10.0, 40.0])
    assert np.allclose(mu.density_log(r ** 2), math.log(0.5) - r, rtol=1e-12)
    assert mu.cdf(1e12) == pytest.approx(1.0)


def test_predicted_lambda():
    assert ev.predicted_lambda(P(1, 0, 1), 1.0) == 0.75
    assert ev.predicted_lambda(P(1, 1, 0), 0.5) == 0.5
    assert ev.predicted_lambda(P(1, -1, 0.5), 0.25) == 1.25
    with pytest.raises(DomainError):
        ev.predicted_lambda(P(1, 0, 0), 0.5)


def test_doa_case2_short():
    p = P(1, 1, 0)
    rep = ev.doa_experiment(p, ev.initial_for_case(p, 0.5), t_grid=np.geomspace(0.5, 20.0, 4))
    assert rep.predicted_lambda == 0.5
    assert rep.ks_to_target[-1] < 0.05
    assert rep.ks_decreasing and rep.tail_decreasing
    assert len(rep.rows()) == 4
    import json
    doc = json.loads(rep.to_json())
    assert {"times", "ks_to_target", "tail_ratio_err", "predicted_lambda", "measured_lambda"} <= set(doc)
    assert ev.coherence_check(rep)["coherent"]


def test_doa_rejects_mismatch():
    with pytest.raises(DomainError):
        ev.doa_experiment(P(1, 1, 0), Init.case1_density(P(1, 0, 1), 1.0))


def test_counterexample_examples():
    rows = ev.counterexample_check(1.0, 10)
    assert rows[0]["ratio"] == pytest.approx(math.exp(-1.5), rel=1e-14)
    assert rows[0]["ratio"] == pytest.approx(0.2231, abs=1e-4)
    assert rows[4]["ratio"] == pytest.approx(math.exp(-31.96875), rel=1e-12)
    assert rows[4]["ratio"] == pytest.approx(1.3e-14, rel=0.05)
    assert all(a["ratio"] > b["ratio"] for a, b in zip(rows, rows[1:]))
    # the weak rate log f(t)/t still tends to -lambda
    assert abs(rows[-1]["weak_rate"] + 1.0) < 1e-2
    with pytest.raises(DomainError):
        ev.counterexample_check(1.0, 31)


def test_staircase_exponent():
    assert ev.staircase_exponent(2.0) == 1.0
    assert ev.staircase_exponent(4.0) == 1.0
    assert ev.staircase_exponent(4.5) == 0.5
    assert ev.staircase_exponent(16.0) == 0.5
    assert ev.staircase_exponent(17.0) == 0.25


def test_laplace_quadrature_vs_closed_form():
    for delta in (1.0, 2.0):
        for t in (1.0, 10.0, 100.0, 1000.0):
            r = ev.laplace_cutoff_check(delta, 0.5, [t])
            assert r["log_integral"][0] == pytest.approx(ev.laplace_closed_form(delta, t), rel=1e-10)


def test_laplace_window_share():
    r = ev.laplace_cutoff_check(2.0, 0.5, [100.0])
    assert r["window_share"][0] > 0.99


def test_laplace_log_integral_at_t100():
    # stated target: log-integral within 5% of delta^2 t/4 = t at delta = 2, t = 100
    r = ev.laplace_cutoff_check(2.0, 0.5, [100.0])
    assert r["log_ratio_err"][0] < 0.05


def test_laplace_delta_scaling():
    ratios = []
    for t in (100.0, 1000.0, 10000.0):
        a = ev.laplace_cutoff_check(1.0, 0.5, [t])["log_integral"][0]
        b = ev.laplace_cutoff_check(2.0, 0.5, [t])["log_integral"][0]
        ratios.append(a / b)
    assert all(x > y for x, y in zip(ratios, ratios[1:]))
    assert ratios[-1] == pytest.approx(0.25, rel=1e-2)
