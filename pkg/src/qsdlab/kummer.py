"""Closed forms for the Kummer diffusion with negative drift.

The base process on ``[0, inf)`` killed at 0 has generator

    x f'' + (1 - alpha - beta x) f'

and the family indexed by ``gamma >= 0`` is its h-transform by the Laplace
transform ``g(x) = E_x[exp(-gamma T_0)]`` of the hitting time of 0.  Every
quantity here is assembled in log space and exponentiated at the end.

For ``gamma = 0`` the process is the base process itself.  With ``beta < 0``
the base process escapes to infinity with positive probability, so its
hitting law has total mass ``P_x[T_0 < inf] < 1``; ``g_gamma`` at
``gamma = 0`` still returns the closed form, which equals that probability.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import special as sp_special

from . import specfun
from ._kernels import log_bessel_i_array
from .diffusion import DiffusionSpec, SpectralMeasure
from .errors import ConvergenceError, DomainError


class CaseLabel(enum.Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    CASE1_PRIME = "Case1Prime"
    CASE3_PRIME = "Case3Prime"

    @property
    def has_qsd_family(self):
        """True when a one-parameter family of QSDs exists (Cases 1-3)."""
        return self in (CaseLabel.CASE1, CaseLabel.CASE2, CaseLabel.CASE3)


@dataclass(frozen=True)
class KummerParams:
    """Parameters ``alpha > 0``, real ``beta`` and ``gamma >= 0``."""

    alpha: float
    beta: float
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.gamma >= 0:
            raise DomainError(f"gamma must be nonnegative, got {self.gamma}")

    @property
    def case(self):
        return classify_case(self)

    def base(self):
        """The same ``(alpha, beta)`` with ``gamma = 0``."""
        return KummerParams(self.alpha, self.beta, 0.0)

    def __str__(self):
        return f"(alpha={self.alpha:g}, beta={self.beta:g}, gamma={self.gamma:g})"


def classify_case(p):
    """Case label from the signs of ``beta`` and ``gamma``."""
    if p.beta > 0:
        return CaseLabel.CASE2
    if p.beta == 0:
        return CaseLabel.CASE1 if p.gamma > 0 else CaseLabel.CASE1_PRIME
    return CaseLabel.CASE3 if p.gamma > 0 else CaseLabel.CASE3_PRIME


def lambda0_closed(p):
    """Bottom of the Dirichlet spectrum: ``alpha beta + gamma``, ``gamma`` or ``gamma - beta``."""
    if p.beta > 0:
        return p.alpha * p.beta + p.gamma
    if p.beta == 0:
        return p.gamma
    return p.gamma - p.beta


# ---------------------------------------------------------------------------
# g_gamma: direct evaluation
# ---------------------------------------------------------------------------

def _u_index(p):
    """First Tricomi index of the U branch of ``g_gamma``."""
    if p.beta > 0:
        return p.alpha + p.gamma / p.beta
    return 1.0 - p.gamma / p.beta


def log_g_direct(p, x, reduced=False):
    """``log g_gamma(x)`` from the Bessel-K / Tricomi-U closed forms (scalar).

    With ``reduced`` and ``beta < 0`` the factor ``e^{beta x}`` is left out,
    which keeps the value moderate for large ``x``.
    """
    x = float(x)
    if x < 0:
        raise DomainError(f"g_gamma requires x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    al = p.alpha
    if p.beta == 0:
        if p.gamma == 0:
            return 0.0
        z = 2.0 * math.sqrt(p.gamma * x)
        return (al * math.log(z) + specfun.log_bessel_k(al, z)
                - (al - 1.0) * math.log(2.0) - math.lgamma(al))
    if p.beta > 0 and p.gamma == 0:
        return 0.0
    a = _u_index(p)
    z = abs(p.beta) * x
    out = math.lgamma(a) - math.lgamma(al) + al * math.log(z) + specfun.log_tricomi_u(a, al + 1.0, z)
    if p.beta < 0 and not reduced:
        return min(out - z, 0.0)
    return out if reduced else min(out, 0.0)


def dlog_g_direct(p, x, reduced=False):
    """``d log g_gamma / d log x`` from the derivative closed forms (scalar)."""
    x = float(x)
    if not x > 0:
        raise DomainError(f"derivative requires x > 0, got {x}")
    al = p.alpha
    if p.beta == 0:
        if p.gamma == 0:
            return 0.0
        z = 2.0 * math.sqrt(p.gamma * x)
        return -0.5 * z * math.exp(specfun.log_bessel_k(abs(al - 1.0), z) - specfun.log_bessel_k(al, z))
    if p.beta > 0 and p.gamma == 0:
        return 0.0
    a = _u_index(p)
    z = abs(p.beta) * x
    ratio = math.exp(specfun.log_tricomi_u(a + 1.0, al + 2.0, z) - specfun.log_tricomi_u(a, al + 1.0, z))
    out = al - a * z * ratio
    if p.beta < 0 and not reduced:
        out -= z
    return out


def _far_field(p, x, n_terms=10):
    """Large-``x`` expansions of ``log g`` and ``d log g/d log x`` (reduced, vectorized).

    Used beyond the table, where the argument of K or U exceeds ``e^17``
    times the rate and the asymptotic series are exact to rounding.
    """
    x = np.asarray(x, dtype=float)
    al = p.alpha
    if p.beta == 0:
        z = 2.0 * np.sqrt(p.gamma * x)

        def log_tail(nu):
            term = np.ones_like(z)
            tot = np.ones_like(z)
            for k in range(1, n_terms):
                term = term * (4.0 * nu * nu - (2 * k - 1) ** 2) / (8.0 * k * z)
                tot = tot + term
            return np.log(tot)

        t_al = log_tail(al)
        lg = (al * np.log(z) + 0.5 * np.log(0.5 * math.pi / z) - z + t_al
              - (al - 1.0) * math.log(2.0) - math.lgamma(al))
        dg = -0.5 * z * np.exp(log_tail(abs(al - 1.0)) - t_al)
        return lg, dg
    a = _u_index(p)
    z = abs(p.beta) * x
    term = np.ones_like(z)
    tot = np.ones_like(z)
    dtot = np.zeros_like(z)
    for k in range(1, n_terms):
        term = -term * (a + k - 1.0) * (a - al + k - 1.0) / (k * z)
        tot = tot + term
        dtot = dtot - k * term
    lg = math.lgamma(a) - math.lgamma(al) + (al - a) * np.log(z) + np.log(tot)
    return lg, (al - a) + dtot / tot


# ---------------------------------------------------------------------------
# g_gamma: piecewise Chebyshev table in log x
# ---------------------------------------------------------------------------

XI_LO = -30.0
XI_HI = 17.0
_TABLE_DEG = 16


class GTable:
    """Piecewise Chebyshev interpolants of ``log g`` and ``d log g/d log x``.

    Unit pieces in ``xi = log x`` over ``[XI_LO, XI_HI]``; outside that range
    the direct closed forms are used.  For ``beta < 0`` the tabulated
    functions omit the exponential factor ``e^{beta x}``, which is added
    back exactly on evaluation.
    """

    def __init__(self, p, deg=_TABLE_DEG):
        self.p = p
        self.edges = np.arange(XI_LO, XI_HI + 0.5)
        self.slope = -p.beta if p.beta < 0 else 0.0
        n = len(self.edges) - 1
        self.c_log = np.empty((n, deg + 1))
        self.c_der = np.empty((n, deg + 1))
        for i in range(n):
            lo = self.edges[i]

            def lg(t, lo=lo):
                return np.array([log_g_direct(p, math.exp(lo + 0.5 * (v + 1.0)), True) for v in t])

            def dg(t, lo=lo):
                return np.array([dlog_g_direct(p, math.exp(lo + 0.5 * (v + 1.0)), True) for v in t])

            self.c_log[i] = cheb.chebinterpolate(lg, deg)
            self.c_der[i] = cheb.chebinterpolate(dg, deg)

    def _eval(self, coef, direct, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return self._eval_scalar(coef, direct, float(x))
        out = np.empty(x.shape)
        with np.errstate(divide="ignore"):
            xi = np.log(x)
        inside = (xi >= XI_LO) & (xi < XI_HI)
        if inside.any():
            xv = xi[inside]
            idx = np.floor(xv - XI_LO).astype(int)
            t = 2.0 * (xv - self.edges[idx]) - 1.0
            out[inside] = cheb.chebval(t, coef[idx].T, tensor=False)
        far = xi >= XI_HI
        if far.any():
            lg, dg = _far_field(self.p, x[far])
            out[far] = lg if coef is self.c_log else dg
        for j in np.flatnonzero((~inside & ~far).ravel()):
            xj = x.flat[j]
            out.flat[j] = direct(self.p, xj, True) if xj > 0 or direct is log_g_direct else 0.0
        return out

    def _eval_scalar(self, coef, direct, x):
        if x > 0:
            xi = math.log(x)
            if XI_LO <= xi < XI_HI:
                i = int(xi - XI_LO)
                t = 2.0 * (xi - self.edges[i]) - 1.0
                c = coef[i]
                # Clenshaw
                b1 = b2 = 0.0
                for ck in c[:0:-1]:
                    b1, b2 = 2.0 * t * b1 - b2 + ck, b1
                return t * b1 - b2 + c[0]
        if x == 0 and direct is not log_g_direct:
            return 0.0
        return direct(self.p, x, True)

    def log_g_reduced(self, x):
        """``log g`` without the ``beta x`` term (equal to ``log g`` for ``beta >= 0``)."""
        return self._eval(self.c_log, log_g_direct, x)

    def dlog_g_reduced(self, x):
        return self._eval(self.c_der, dlog_g_direct, x)

    def log_g(self, x):
        out = self.log_g_reduced(x)
        return out - self.slope * x if self.slope else out

    def dlog_g(self, x):
        out = self.dlog_g_reduced(x)
        return out - self.slope * x if self.slope else out


@functools.lru_cache(maxsize=32)
def g_table(p):
    """Cached :class:`GTable` for ``p`` (built in about a second)."""
    return GTable(p)


def _transformed(p):
    """True when the process is a genuine h-transform (``g`` not identically 1)."""
    return p.gamma > 0


def log_h(p, x):
    """``log`` of the h-transform factor: ``log g_gamma`` for ``gamma > 0``, else 0."""
    if not _transformed(p):
        return np.zeros(np.shape(x)) if np.ndim(x) else 0.0
    return g_table(p).log_g(x)


def log_h_reduced(p, x):
    """``log h`` without the ``beta x`` term of ``g`` when ``beta < 0``."""
    if not _transformed(p):
        return np.zeros(np.shape(x)) if np.ndim(x) else 0.0
    return g_table(p).log_g_reduced(x)


def dlog_h(p, x):
    if not _transformed(p):
        return np.zeros(np.shape(x)) if np.ndim(x) else 0.0
    return g_table(p).dlog_g(x)


def g_gamma(p, x):
    """Laplace transform ``E_x[exp(-gamma T_0)]`` of the base process.

    ``beta = 0`` uses ``z^alpha K_alpha(z) / (2^(alpha-1) Gamma(alpha))`` with
    ``z = 2 sqrt(gamma x)``; ``beta != 0`` uses the Tricomi U forms.  At
    ``gamma = 0`` and ``beta < 0`` this is ``P_x[T_0 < inf]``.
    """
    if np.ndim(x) == 0:
        return math.exp(log_g_direct(p, x))
    return np.exp(np.array([log_g_direct(p, v) for v in np.ravel(x)])).reshape(np.shape(x))


def log_g_gamma(p, x):
    if np.ndim(x) == 0:
        return log_g_direct(p, x)
    return np.array([log_g_direct(p, v) for v in np.ravel(x)]).reshape(np.shape(x))


# ---------------------------------------------------------------------------
# Speed and scale
# ---------------------------------------------------------------------------

def log_measures(p, x):
    """``(log m'(x), log s'(x))`` of the process with parameters ``p``."""
    x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
    lx = np.log(x)
    lh = log_h(p, x)
    return 2.0 * lh - p.alpha * lx - p.beta * x, -2.0 * lh + (p.alpha - 1.0) * lx + p.beta * x


def measures(p, x):
    """Speed and scale densities ``(m'(x), s'(x))``."""
    if np.ndim(x) == 0 and not x > 0:
        raise DomainError(f"measures require x > 0, got {x}")
    lm, ls = log_measures(p, x)
    return np.exp(lm), np.exp(ls)


# ---------------------------------------------------------------------------
# Eigenfunctions
# ---------------------------------------------------------------------------

def _log_psi_base(al, be, lam, x):
    """``(log|psi|, sign)`` of the base eigenfunction with ``L psi = lam psi``."""
    lpre = al * math.log(x) - math.log(al)
    if be > 0:
        lm, sg = specfun.log_kummer_m(lam / be + al, al + 1.0, be * x)
        return lpre + lm, sg
    if be == 0:
        lf, sg = specfun.log_hyp0f1(al + 1.0, lam * x)
        return lpre + lf, sg
    # reflection to the positive-beta process: index lam/|beta| + 1, and
    # the factor e^{beta x} is absorbed by the scaled M
    lm, sg = specfun.log_kummer_m(1.0 + lam / -be, al + 1.0, -be * x, scaled=True)
    return lpre + lm, sg


def log_psi(p, lam, x):
    """``(log|psi_lam(x)|, sign)`` with ``psi(0) = 0`` and ``dpsi/ds(0) = 1``.

    For ``gamma > 0`` the eigenfunction is ``psi^(0)_{lam+gamma} / g``.
    """
    x = float(x)
    if not x > 0:
        raise DomainError(f"psi requires x > 0, got {x}")
    lv, sg = _log_psi_base(p.alpha, p.beta, lam + p.gamma, x)
    return lv - float(log_h(p, x)), sg


def psi_closed(p, lam, x):
    """Eigenfunction ``psi_lam(x)`` solving ``L psi = lam psi``, normalized at 0."""
    if np.ndim(x):
        return np.array([psi_closed(p, lam, v) for v in np.ravel(x)]).reshape(np.shape(x))
    lv, sg = log_psi(p, lam, x)
    return sg * math.exp(lv)


def scale_function(p, x):
    """``s(x) - s(0)``, which is the eigenfunction at ``lam = 0``."""
    return psi_closed(p, 0.0, x)


# ---------------------------------------------------------------------------
# Transition and hitting densities
# ---------------------------------------------------------------------------

def _rate(be, t):
    """``y(t) = beta e^{-beta t}/(1 - e^{-beta t})``, or ``1/t`` at ``beta = 0``."""
    t = np.asarray(t, dtype=float)
    if be == 0:
        return 1.0 / t
    return be / np.expm1(be * t)


def _log_rate(be, t):
    """``log y(t)`` without underflow at large ``t``."""
    t = np.asarray(t, dtype=float)
    if be == 0:
        return -np.log(t)
    if be > 0:
        return math.log(be) - be * t - np.log(-np.expm1(-be * t))
    return math.log(-be) - np.log(-np.expm1(be * t))


def log_transition_density(p, t, x, y):
    """``log p(t, x, y)`` with respect to the speed measure ``m(dy)``.

    Broadcasts over ``t, x, y``.
    """
    t, x, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, x, y)))
    if np.any(t <= 0) or np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("transition density needs t, x, y > 0")
    al, be = p.alpha, p.beta
    half_log_xy = 0.5 * (np.log(x) + np.log(y))
    sq = np.exp(half_log_xy)
    if be == 0:
        rate = 1.0 / t
        lead = np.log(rate)
        arg = 2.0 * sq * rate
    else:
        rate = be / np.expm1(be * t)
        # beta/(1 - e^{-beta t}) e^{-alpha beta t/2}
        lead = np.log(rate) + be * t - 0.5 * al * be * t
        arg = sq * be / np.sinh(0.5 * be * t)
    out = lead + al * half_log_xy - (x + y) * rate + log_bessel_i_array(al, arg)
    out = out - p.gamma * t - log_h(p, x) - log_h(p, y)
    return out if out.ndim else float(out)


def transition_density(p, t, x, y):
    """Transition density ``p(t, x, y)`` with respect to ``m(dy)``; symmetric in ``x, y``."""
    return np.exp(log_transition_density(p, t, x, y))


def log_hitting_density(p, x, t):
    """``log f_x(t)`` of the first hitting time of 0; broadcasts over ``x, t``."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    if np.any(x <= 0) or np.any(t <= 0):
        raise DomainError("hitting density needs x, t > 0")
    al, be = p.alpha, p.beta
    with np.errstate(over="ignore"):
        rate = _rate(be, t)
    out = al * np.log(x) - math.lgamma(al) + (al + 1.0) * _log_rate(be, t) - p.gamma * t
    if be != 0:
        out = out + be * t
    if be < 0 and _transformed(p):
        # e^{-x rate} / e^{beta x} combined: rate + beta = beta / (1 - e^{-beta t})
        rate_up = -be * np.exp(be * t) / -np.expm1(be * t)
        out = out - x * rate_up - log_h_reduced(p, x)
    else:
        out = out - x * rate - log_h(p, x)
    return out if out.ndim else float(out)


def hitting_density(p, x, t):
    """Density of ``T_0`` under ``P_x``: ``e^{-gamma t} f^(0)_x(t) / g(x)``."""
    return np.exp(log_hitting_density(p, x, t))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _log_survival_shifted(p, x, t):
    """Survival for ``beta < 0`` in ``w = v - |beta| x``.

    With ``kappa = gamma/|beta|`` the integrand becomes
    ``(|beta| x + w)^{alpha-1-kappa} w^kappa e^{-w}``; the factor
    ``e^{-|beta| x}`` cancels against ``g`` analytically.
    """
    al, be, ga = p.alpha, p.beta, p.gamma
    kappa = ga / -be
    v_lo = -be * x
    if t == 0:
        w_top = np.full(x.shape, np.inf)
    else:
        w_top = x * (be / -math.expm1(-be * t))
    w_cap = np.minimum(w_top, 50.0 + 2.0 * (al + kappa))
    s_hi = np.log(w_cap)
    s_lo = s_hi - 46.0 / min(al, kappa + 1.0) - 1.0
    span = s_hi - s_lo
    n_pan = max(4, int(math.ceil(np.max(span) / 0.75)))
    h = span / n_pan
    k = np.arange(n_pan)[:, None]
    mid = s_lo[None, :] + (k + 0.5) * h[None, :]
    s = mid[..., None] + 0.5 * h[None, :, None] * _GL_NODES
    w = np.exp(s)
    vl = v_lo[None, :, None]
    logf = (al - 1.0 - kappa) * np.log(vl + w) + (kappa + 1.0) * s - w
    peak = np.max(logf, axis=(0, 2))
    wt = 0.5 * h[None, :, None] * _GL_WEIGHTS
    tot = np.sum(np.exp(logf - peak[None, :, None]) * wt, axis=(0, 2))
    lead = -log_h_reduced(p, x) if _transformed(p) else -v_lo
    out = peak + np.log(tot) - math.lgamma(al) + lead
    return np.minimum(out, 0.0)


def _log_survival_array(p, x, t):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    al, be, ga = p.alpha, p.beta, p.gamma
    if be < 0:
        return _log_survival_shifted(p, x, t)
    # v = x y(u) turns the tail integral into int v^{alpha-1} e^{-v} w dv / Gamma(alpha)
    v_lo = x * max(-be, 0.0)
    v_hi = np.full(x.shape, np.inf) if t == 0 else x * float(_rate(be, t))
    v0 = np.maximum(v_lo, al)
    v_cap = np.minimum(v_hi, v0 + 45.0 * max(1.0, al))
    with np.errstate(divide="ignore"):
        s_lo = np.where(v_lo > 0, np.log(v_lo), np.log(np.minimum(v_cap, al)) - 46.0 / al - 1.0)
    s_hi = np.log(v_cap)
    span = s_hi - s_lo
    n_pan = max(4, int(math.ceil(np.max(span) / 0.75)))
    h = span / n_pan
    k = np.arange(n_pan)[:, None]
    mid = s_lo[None, :] + (k + 0.5) * h[None, :]
    s = mid[..., None] + 0.5 * h[None, :, None] * _GL_NODES
    v = np.exp(s)
    logf = al * s - v
    if ga > 0:
        xx = x[None, :, None]
        if be == 0:
            logf = logf - ga * xx / v
        else:
            logf = logf - (ga / be) * np.log1p(be * xx / v)
    peak = np.max(logf, axis=(0, 2))
    w = 0.5 * h[None, :, None] * _GL_WEIGHTS
    tot = np.sum(np.exp(logf - peak[None, :, None]) * w, axis=(0, 2))
    with np.errstate(divide="ignore"):
        out = peak + np.log(tot) - math.lgamma(al) - log_h(p, x)
    out = np.where(span > 0, out, -np.inf)
    return np.minimum(out, 0.0)


def log_survival(p, x, t):
    """``log P_x[T_0 > t]``; vectorized over ``x`` for a scalar ``t >= 0``."""
    if t < 0:
        raise DomainError(f"survival requires t >= 0, got {t}")
    if np.any(np.asarray(x) <= 0):
        raise DomainError("survival requires x > 0")
    out = _log_survival_array(p, x, float(t))
    return out if np.ndim(x) else float(out[0])


def survival(p, x, t):
    """Survival function ``P_x[T_0 > t]``.

    The tail integral of the hitting density is mapped by ``v = x y(u)`` to
    an incomplete-gamma type integral with the Laplace factor
    ``exp(-gamma u)`` written in ``v``, then integrated by composite
    Gauss-Legendre in ``log v``.  ``t = 0`` gives the total mass.
    """
    return np.exp(log_survival(p, x, t))


@dataclass(frozen=True)
class HittingLaw:
    density: Callable
    survival: Callable
    total_mass: float


def hitting_law(p, x):
    """Law of ``T_0`` under ``P_x`` as density, survival function and total mass."""
    return HittingLaw(
        density=lambda t: hitting_density(p, x, t),
        survival=lambda t: survival(p, x, t),
        total_mass=float(survival(p, x, 0.0)),
    )


# ---------------------------------------------------------------------------
# Spectral measure and the spectral form of the hitting density
# ---------------------------------------------------------------------------

def _log_atom_mass(al, be, n):
    return (al + 1.0) * math.log(abs(be)) + specfun.log_pochhammer(al, n + 1) - math.lgamma(n + 1.0) - math.lgamma(al)


def _atom(p, n):
    al, be = p.alpha, p.beta
    loc = p.gamma + (be * (n + al) if be > 0 else -be * (n + 1))
    return loc, math.exp(_log_atom_mass(al, be, n))


def spectral_measure(p, n_atoms=200):
    """Spectral measure of ``-L`` on ``L^2(m)`` (Dirichlet at 0).

    Discrete for ``beta != 0`` (the first ``n_atoms`` atoms are stored, the
    rest come from ``atom_generator``); absolutely continuous for ``beta = 0``.
    """
    lam0 = lambda0_closed(p)
    al = p.alpha
    if p.beta == 0:
        c = 2.0 * math.lgamma(al)
        ga = p.gamma
        return SpectralMeasure(
            atoms=(),
            ac_density=lambda lam: np.maximum(np.asarray(lam, dtype=float) - ga, 0.0) ** al * math.exp(-c),
            support_min=lam0,
        )
    return SpectralMeasure(
        atoms=tuple(_atom(p, n) for n in range(n_atoms)),
        support_min=lam0,
        atom_generator=lambda n: _atom(p, n),
    )


def _spectral_series(p, x, t, rtol=1e-15, max_terms=100000):
    """Sum over atoms of ``e^{-lam t} psi_{-lam}(x) sigma({lam})`` for the base process."""
    al, be = p.alpha, p.beta
    z = abs(be) * x
    # |L_n^(alpha)(z)| <= (alpha+1)_n/n! e^{z/2} bounds psi_{-lam_n} uniformly in n
    log_env = al * math.log(x) - math.log(al) + (0.5 * z if be > 0 else -0.5 * z)
    total = 0.0
    l_prev, l_cur = 0.0, 1.0
    log_binom = 0.0  # log((alpha+1)_n / n!)
    n = 0
    while True:
        lam = be * (n + al) if be > 0 else -be * (n + 1)
        lmass = _log_atom_mass(al, be, n)
        # psi_{-lam_n}(x) = x^alpha/alpha * n!/(alpha+1)_n * L_n(z) (times e^{beta x} if beta < 0)
        lpsi = al * math.log(x) - math.log(al) - log_binom + (be * x if be < 0 else 0.0)
        term = math.exp(-lam * t + lmass + lpsi) * l_cur
        total += term
        bound = math.exp(-lam * t + lmass + log_env)
        if n >= 4 and bound < rtol * abs(total):
            # geometric tail: the bound ratio tends to e^{-|beta| t}
            ratio = math.exp(-abs(be) * t) * (n + 1 + al) / (n + 1)
            tail = bound * ratio / (1.0 - ratio) if ratio < 1 else math.inf
            if tail < 10 * rtol * abs(total) or n > max_terms:
                return total, tail
        if n > max_terms:
            raise ConvergenceError("spectral series did not converge", estimate=total)
        # Laguerre recurrence and (alpha+1)_n/n! update
        l_next = ((2 * n + 1 + al - z) * l_cur - (n + al) * l_prev) / (n + 1)
        l_prev, l_cur = l_cur, l_next
        log_binom += math.log((n + 1 + al) / (n + 1))
        n += 1


@functools.lru_cache(maxsize=16)
def _genlaguerre(n, al):
    return sp_special.roots_genlaguerre(n, al)


def _spectral_integral(p, x, t, rtol=1e-10):
    """``int e^{-lam t} psi_{-lam}(x) lam^alpha/Gamma(alpha)^2 dlam`` for ``beta = 0``."""
    al = p.alpha

    def rule(n):
        u, w = _genlaguerre(n, al)
        vals = np.array([specfun.hyp0f1(al + 1.0, -ui * x / t).value for ui in u])
        return float(np.dot(w, vals))

    pref = al * math.log(x) - math.log(al) - 2.0 * math.lgamma(al) - (al + 1.0) * math.log(t)
    n = 48
    prev = rule(n)
    while n < 768:
        n *= 2
        cur = rule(n)
        err = abs(cur - prev)
        if err <= rtol * abs(cur):
            break
        prev = cur
    return math.exp(pref) * cur, math.exp(pref) * err


def hitting_density_spectral(p, x, t):
    """Hitting density from the spectral representation.

    Returns ``(value, error_estimate)``.  Atoms are summed until the term
    bound drops below ``1e-15`` of the partial sum (at least five terms);
    the continuous spectrum at ``beta = 0`` is integrated by generalized
    Gauss-Laguerre rules of doubling size.
    """
    if not (x > 0 and t > 0):
        raise DomainError("spectral hitting density needs x, t > 0")
    if p.beta == 0:
        val, err = _spectral_integral(p, x, t)
    else:
        val, err = _spectral_series(p, x, t)
    scale = math.exp(-p.gamma * t - float(log_h(p, x)))
    return val * scale, err * scale


# ---------------------------------------------------------------------------
# First-hitting factorization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Factorization:
    """``f_x(t) = u(x) w(t) exp(-v(x) y(t))`` and the range of ``y``."""

    u: Callable
    v: Callable
    w: Callable
    y: Callable
    y_range: tuple

    @property
    def y_covers_half_line(self):
        return self.y_range == (0.0, math.inf)


def factorization(p):
    al, be, ga = p.alpha, p.beta, p.gamma
    lg_al = math.lgamma(al)

    def u(x):
        return np.exp(al * np.log(x) - lg_al - log_h(p, x))

    def v(x):
        return np.asarray(x, dtype=float) * 1.0

    def y(t):
        return _rate(be, t)

    def w(t):
        t = np.asarray(t, dtype=float)
        lw = (al + 1.0) * np.log(_rate(be, t)) - ga * t
        if be != 0:
            lw = lw + be * t
        return np.exp(lw)

    y_range = (0.0, math.inf) if be >= 0 else (-be, math.inf)
    return Factorization(u=u, v=v, w=w, y=y, y_range=y_range)


# ---------------------------------------------------------------------------
# Bridge to the generic machinery
# ---------------------------------------------------------------------------

def diffusion_spec(p):
    """:class:`DiffusionSpec` with closed-form densities, scale and log-derivatives."""
    al, be = p.alpha, p.beta

    def log_speed(x):
        return log_measures(p, x)[0]

    def log_scale(x):
        return log_measures(p, x)[1]

    def dlog_speed(x):
        return 2.0 * dlog_h(p, x) - al - be * x

    def dlog_scale(x):
        return -2.0 * dlog_h(p, x) + al - 1.0 + be * x

    return DiffusionSpec(
        log_speed=log_speed,
        log_scale=log_scale,
        scale_function=lambda x: scale_function(p, x),
        dlog_speed=dlog_speed,
        dlog_scale=dlog_scale,
        name=f"kummer{p}",
    )
