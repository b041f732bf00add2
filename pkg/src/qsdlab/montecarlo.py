"""Euler-Maruyama simulation of hitting times, as an independent check.

The process with parameters ``(alpha, beta, gamma)`` solves

    dX = [1 - alpha - beta X + 2 X g'(X)/g(X)] dt + sqrt(2 X) dW,

where the last drift term is the h-transform correction (absent for
``gamma = 0``).  Paths are absorbed once ``X <= x_abs = 10 dt``.  Every path
draws from its own xoshiro256+ stream seeded from ``(seed, path index)``, so
results do not depend on the thread count or on the backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import kummer
from ._kernels import euler_absorb
from .errors import DomainError

KOLMOGOROV_95 = 1.358
R_STEP = 0.01
FD_STEP = 1e-6


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; ``seed`` is a 64-bit integer."""

    dt: float = 1e-3
    n_paths: int = 10_000
    seed: int = 12345
    x0: float = 1.0
    t_max: float = 20.0
    chunk: int = 8192

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if self.n_paths < 1:
            raise DomainError("n_paths must be at least 1")
        if not self.x0 > 0:
            raise DomainError("x0 must be positive")
        if not self.t_max > 0:
            raise DomainError("t_max must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must fit in 64 bits")

    @property
    def x_abs(self):
        return 10.0 * self.dt

    @property
    def n_steps(self):
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class HittingSample:
    """Hitting times of absorbed paths and the count still alive at ``t_max``."""

    times: np.ndarray
    censored: int
    config: SimConfig

    @property
    def n_paths(self):
        return self.times.size + self.censored


def drift_table(params, x_max, r_step=R_STEP, h=FD_STEP):
    """``2 x g'(x)/g(x)`` on the grid ``r = sqrt(x) = 0, r_step, ...``.

    The logarithmic derivative comes from a central difference of
    ``log g`` with relative step ``h``.
    """
    if params.gamma == 0:
        return np.zeros(0)
    r = np.arange(0.0, math.sqrt(x_max) + 2 * r_step, r_step)
    x = r[1:] ** 2
    lg_hi = kummer.log_h(params, x * (1.0 + h))
    lg_lo = kummer.log_h(params, x * (1.0 - h))
    out = np.empty(r.size)
    out[0] = 0.0
    out[1:] = (lg_hi - lg_lo) / h  # 2 x g'/g = 2 dlog g / dlog x
    return out


def simulate_hitting(params, cfg):
    """Simulate ``cfg.n_paths`` paths from ``cfg.x0`` up to ``cfg.t_max``.

    Returns
    -------
    HittingSample
        ``times`` holds the absorption times ``step * dt`` in path order
        (censored paths omitted).
    """
    if not isinstance(params, kummer.KummerParams):
        raise DomainError("simulate_hitting needs KummerParams")
    x_top = max(4.0 * cfg.x0, cfg.x0 + 60.0)
    table = drift_table(params, x_top)
    hits = []
    for first in range(0, cfg.n_paths, cfg.chunk):
        n = min(cfg.chunk, cfg.n_paths - first)
        hits.append(euler_absorb(cfg.x0, 1.0 - params.alpha, params.beta, cfg.dt, cfg.n_steps,
                                 cfg.seed, first, n, table, R_STEP, cfg.x_abs))
    hit = np.concatenate(hits)
    absorbed = hit >= 0
    return HittingSample(hit[absorbed] * cfg.dt, int(np.count_nonzero(~absorbed)), cfg)


def hitting_cdf(params, x0, t, n_grid=3000):
    """``P_x0[T_0 <= t]`` for an array of ``t``, interpolated from a log-spaced grid."""
    t = np.asarray(t, dtype=float)
    lo = max(float(np.min(t)) if t.size else 1.0, 1e-6) * 0.5
    hi = max(float(np.max(t)) if t.size else 1.0, lo * 4.0) * 1.01
    grid = np.geomspace(lo, hi, n_grid)
    total = math.exp(kummer.log_survival(params, x0, 0.0))
    surv = np.array([kummer.log_survival(params, x0, v) for v in grid])
    cdf = total - np.exp(surv)
    interp = PchipInterpolator(np.log(grid), cdf)
    return np.clip(interp(np.log(np.clip(t, lo, hi))), 0.0, 1.0)


def _ks_sorted(times, cdf_values):
    n = times.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf_values), np.max(cdf_values - (i - 1) / n)))


def empirical_vs_closed(params, sample):
    """KS distance between the sample and the closed-form hitting law.

    Both laws are conditioned on ``T_0 <= t_max``: the empirical CDF uses
    the absorbed paths only and the closed form is divided by
    ``P_x0[T_0 <= t_max]``.
    """
    if sample.times.size == 0:
        raise DomainError("sample has no absorbed paths")
    cfg = sample.config
    ts = np.sort(sample.times)
    f = hitting_cdf(params, cfg.x0, np.append(ts, cfg.t_max))
    return _ks_sorted(ts, f[:-1] / f[-1])


def kolmogorov_band(n, level=KOLMOGOROV_95):
    """Half-width ``c/sqrt(n)`` of the asymptotic KS band (95% for the default)."""
    return level / math.sqrt(n)


def inverse_transform_sample(params, x0, n, seed, t_max=20.0):
    """Hitting times drawn from the closed-form CDF (conditioned on ``T_0 <= t_max``)."""
    rng = np.random.default_rng(seed)
    grid = np.geomspace(1e-4, t_max, 4000)
    f = hitting_cdf(params, x0, grid)
    f = f / f[-1]
    fu, keep = np.unique(f, return_index=True)
    u = rng.uniform(fu[0], 1.0, n)
    inv = PchipInterpolator(fu, np.log(grid[keep]))
    return np.exp(inv(u))


def self_test_ks(params, x0, n, seed, t_max=20.0):
    """KS of an inverse-transform sample against the exact CDF."""
    ts = np.sort(inverse_transform_sample(params, x0, n, seed, t_max))
    f = hitting_cdf(params, x0, np.append(ts, t_max))
    return _ks_sorted(ts, f[:-1] / f[-1])


def validate(params, cfg, halve_dt=False):
    """KS against the closed form; optionally repeat with ``dt/2``.

    Returns a dict with ``ks``, ``band``, ``censored`` and, when
    ``halve_dt``, ``ks_half`` and ``shift = |ks - ks_half|``.
    """
    s = simulate_hitting(params, cfg)
    out = {"ks": empirical_vs_closed(params, s), "band": kolmogorov_band(s.times.size),
           "censored": s.censored, "absorbed": int(s.times.size)}
    if halve_dt:
        half = SimConfig(cfg.dt / 2, cfg.n_paths, cfg.seed, cfg.x0, cfg.t_max, cfg.chunk)
        s2 = simulate_hitting(params, half)
        out["ks_half"] = empirical_vs_closed(params, s2)
        out["shift"] = abs(out["ks"] - out["ks_half"])
    return out


def ecdf_table(params, sample, n_points=200):
    """Rows ``(t, empirical_cdf, closed_cdf)`` on a log grid, both conditioned on ``T_0 <= t_max``."""
    cfg = sample.config
    ts = np.sort(sample.times)
    grid = np.geomspace(max(ts[0], 1e-4) if ts.size else 1e-3, cfg.t_max, n_points)
    emp = np.searchsorted(ts, grid, side="right") / max(ts.size, 1)
    f = hitting_cdf(params, cfg.x0, np.append(grid, cfg.t_max))
    return list(zip(grid.tolist(), emp.tolist(), (f[:-1] / f[-1]).tolist()))
