"""Euler simulation of hitting times against the closed-form laws."""

import math

import numpy as np
import pytest

from qsdlab import montecarlo as mc
from qsdlab.errors import DomainError
from qsdlab.kummer import KummerParams as P

BASE = P(1, 0, 0)


def _sample(p=BASE, n=2000, seed=7, dt=1e-3, x0=1.0, t_max=20.0):
    return mc.simulate_hitting(p, mc.SimConfig(dt, n, seed, x0, t_max))


def test_closed_cdf_is_exp_minus_x0_over_t():
    t = np.array([0.2, 1.0, 5.0, 19.0])
    assert np.allclose(mc.hitting_cdf(BASE, 1.0, t), np.exp(-1.0 / t), atol=1e-9)


def test_seed_reproducible():
    a, b = _sample(seed=11), _sample(seed=11)
    assert np.array_equal(a.times, b.times) and a.censored == b.censored
    assert not np.array_equal(a.times, _sample(seed=12).times)


def test_sample_invariants():
    s = _sample(n=3000, t_max=5.0)
    assert s.times.size + s.censored == 3000
    assert np.all(s.times > 0) and np.all(s.times <= 5.0)
    assert s.censored > 0


def test_thread_count_does_not_change_sample(monkeypatch):
    monkeypatch.setenv("QSDLAB_THREADS", "1")
    a = _sample(n=1000, seed=3)
    monkeypatch.setenv("QSDLAB_THREADS", "4")
    b = _sample(n=1000, seed=3)
    assert np.array_equal(a.times, b.times)


def test_chunking_does_not_change_sample():
    cfg = mc.SimConfig(1e-3, 1000, 5, 1.0, 20.0, chunk=128)
    a = mc.simulate_hitting(BASE, cfg)
    b = _sample(n=1000, seed=5)
    assert np.array_equal(a.times, b.times)


def test_h_transform_speeds_absorption():
    t0 = _sample(P(1, 0, 0), n=4000, seed=21)
    t2 = _sample(P(1, 0, 2), n=4000, seed=21)
    assert np.median(t2.times) < np.median(t0.times)


def test_small_sample_ks():
    assert mc.empirical_vs_closed(BASE, _sample(n=1000, seed=1, dt=1e-4)) < 0.06


@pytest.mark.parametrize("p,x0", [(P(1, 0, 0), 1.0), (P(1, 1, 0.5), 1.0), (P(1, -1, 2), 0.5)])
def test_inverse_transform_self_test(p, x0):
    n = 4000
    assert mc.self_test_ks(p, x0, n, seed=99) < mc.kolmogorov_band(n)


def test_h_transformed_law_matches():
    p = P(1, 1, 0.5)
    s = _sample(p, n=4000, seed=2, dt=1e-4, t_max=10.0)
    assert mc.empirical_vs_closed(p, s) < 2 * mc.kolmogorov_band(s.times.size)


def test_ks_scales_like_inverse_root_n():
    ns = np.array([1_000, 10_000, 100_000])
    reps = {1_000: 6, 10_000: 3, 100_000: 1}
    ks = []
    for n in ns:
        vals = [mc.empirical_vs_closed(BASE, _sample(n=int(n), seed=100 + k, dt=1e-4))
                for k in range(reps[int(n)])]
        ks.append(np.mean(vals))
    slope = np.polyfit(np.log(ns), np.log(ks), 1)[0]
    assert abs(slope + 0.5) <= 0.15
    assert ks[-1] < 0.01


def test_ecdf_table_shape():
    s = _sample(n=500)
    rows = mc.ecdf_table(BASE, s, n_points=50)
    assert len(rows) == 50
    t, emp, closed = map(np.array, zip(*rows))
    assert np.all(np.diff(t) > 0) and np.all(np.diff(emp) >= 0) and np.all(np.diff(closed) >= -1e-12)
    assert emp[-1] == 1.0 and closed[-1] == pytest.approx(1.0)


def test_config_validation():
    with pytest.raises(DomainError):
        mc.SimConfig(dt=0.0)
    with pytest.raises(DomainError):
        mc.SimConfig(n_paths=0)
    with pytest.raises(DomainError):
        mc.SimConfig(x0=-1.0)
    with pytest.raises(DomainError):
        mc.SimConfig(seed=2 ** 64)
    assert mc.SimConfig(dt=1e-3).x_abs == pytest.approx(1e-2)


def test_band():
    assert mc.kolmogorov_band(10_000) == pytest.approx(1.358 / 100)
    assert math.isclose(mc.kolmogorov_band(1), 1.358)
