"""Conditional evolution of initial laws and the domain-of-attraction runs.

For an initial law ``mu`` the conditioned law is

    mu_t(dy) = [int p(t, x, y) mu(dx)] m(dy) / P_mu[T_0 > t].

The kernel ``p(t, x, y) m'(y)`` of the Kummer family is a Bessel-I term
times a Gaussian in ``sqrt(x)`` and ``sqrt(y)``:

    exp(-(a sqrt(x) - b sqrt(y))^2) * e^{-z} I_alpha(z),   z = c sqrt(x y),

with ``c = 2ab``.  All quadrature in ``x`` is done in the offset
``e = sqrt(x) - b sqrt(y)/a`` from the Gaussian centre, so no large numbers
are subtracted even when ``x`` is astronomically large (heavy tails).
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import kummer, qsd
from ._kernels import log_bessel_i_array
from .errors import DomainError, UnderflowError
from .kummer import CaseLabel
from .qsd import GridDistribution, QsdSpec

LOG_UNDERFLOW = math.log(1e-300)
X_LO = 1e-12
Y_LO = 1e-10
Y_CELL = 0.1
TAIL_LOG_MASS = math.log(1e-30)
WINDOW = 14.0
GEOM_RATIO = 0.25
DEFAULT_T_GRID = tuple(np.geomspace(0.5, 40.0, 12))
DEFAULT_S_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
KS_THRESHOLD = 0.05

_GL8 = np.polynomial.legendre.leggauss(8)
_GL4 = np.polynomial.legendre.leggauss(4)


def _logsumexp(v, axis=None):
    v = np.asarray(v, dtype=float)
    m = np.max(v, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else float(out.ravel()[0])


# ---------------------------------------------------------------------------
# Initial laws
# ---------------------------------------------------------------------------

class InitialKind(enum.Enum):
    CASE1_DENSITY = "case1_density"
    CASE2_TAIL = "case2_tail"
    CASE3_TAIL = "case3_tail"
    POINT_MASS = "point_mass"
    CUSTOM = "custom"


def _log_slowly_varying(name):
    """``(log l(x), l'(x)/l(x))`` for the two slowly varying profiles."""
    if name in (None, "one", "1"):
        return (lambda x: np.zeros_like(x)), (lambda x: np.zeros_like(x))
    if name == "log":
        return (lambda x: np.log(np.log(math.e + x))), (lambda x: 1.0 / ((math.e + x) * np.log(math.e + x)))
    raise DomainError(f"unknown slowly varying profile {name!r} (use 'one' or 'log')")


@dataclass(frozen=True)
class InitialDistribution:
    """Initial law ``mu`` for the conditioned evolution.

    Either a list of atoms ``(x_i, w_i)`` or a Lebesgue density given by
    ``log_density`` on ``[x_lo, x_hi]``.  Use the constructors
    :meth:`case1_density`, :meth:`case2_tail`, :meth:`case3_tail`,
    :meth:`point_mass`, :meth:`atoms_at` and :meth:`custom`.
    """

    kind: InitialKind
    parameters: dict
    log_density: object = field(default=None, repr=False)
    cdf_fn: object = field(default=None, repr=False)
    atoms: tuple = ()
    x_lo: float = X_LO
    x_hi: float = math.inf
    root_scale: float = 0.0

    # -- constructors -----------------------------------------------------
    @classmethod
    def case1_density(cls, params, delta):
        """Density ``rho(x) = (k^2/2) e^{-k sqrt(x)}``, ``k = 2 sqrt(gamma) - delta``."""
        if params.case is not CaseLabel.CASE1:
            raise DomainError(f"case1_density needs Case 1 parameters, got {params.case.value}")
        root = 2.0 * math.sqrt(params.gamma)
        if not 0 < delta < root:
            raise DomainError(f"delta must lie in (0, {root:g})")
        k = root - delta
        lnorm = 2.0 * math.log(k) - math.log(2.0)

        def logd(x):
            return lnorm - k * np.sqrt(x)

        def cdf(x):
            r = k * np.sqrt(np.asarray(x, dtype=float))
            return -np.expm1(-r) - r * np.exp(-r)

        r_hi = 75.0 / k
        return cls(InitialKind.CASE1_DENSITY, {"delta": delta}, logd, cdf,
                   x_hi=r_hi * r_hi, root_scale=delta)

    @classmethod
    def _power_tail(cls, kind, p_exp, params, delta, slowly):
        lsv, dlsv = _log_slowly_varying(slowly)

        def log_tail(x):
            return -p_exp * np.log1p(x) + lsv(x)

        def logd(x):
            x = np.asarray(x, dtype=float)
            with np.errstate(invalid="ignore", divide="ignore"):
                return log_tail(x) + np.log(p_exp / (1.0 + x) - dlsv(x))

        def cdf(x):
            return -np.expm1(log_tail(np.asarray(x, dtype=float)))

        probe = np.geomspace(1e-6, 1e12, 400)
        if not np.all(p_exp / (1.0 + probe) - dlsv(probe) > 0):
            raise DomainError("tail profile is not monotone for this delta")
        # the tail of mu beyond x_hi is below 1e-30
        xi = -TAIL_LOG_MASS / p_exp
        for _ in range(60):
            if log_tail(math.exp(xi)) < TAIL_LOG_MASS:
                break
            xi += 2.0
        return cls(kind, {"delta": delta, "slowly_varying": slowly or "one", "tail_exponent": p_exp},
                   logd, cdf, x_hi=math.exp(xi))

    @classmethod
    def case2_tail(cls, params, delta, slowly="one"):
        """``mu(x, inf) = (1 + x)^{-(alpha + gamma/beta - delta)} l(x)``."""
        if params.case is not CaseLabel.CASE2:
            raise DomainError(f"case2_tail needs Case 2 parameters, got {params.case.value}")
        top = params.alpha + params.gamma / params.beta
        if not 0 < delta < top:
            raise DomainError(f"delta must lie in (0, {top:g})")
        return cls._power_tail(InitialKind.CASE2_TAIL, top - delta, params, delta, slowly)

    @classmethod
    def case3_tail(cls, params, delta, slowly="one"):
        """``mu(x, inf) = (1 + x)^{-(1 - gamma/beta - delta)} l(x)``, ``beta < 0``."""
        if params.case is not CaseLabel.CASE3:
            raise DomainError(f"case3_tail needs Case 3 parameters, got {params.case.value}")
        top = 1.0 - params.gamma / params.beta
        if not 0 < delta < top:
            raise DomainError(f"delta must lie in (0, {top:g})")
        return cls._power_tail(InitialKind.CASE3_TAIL, top - delta, params, delta, slowly)

    @classmethod
    def point_mass(cls, x0):
        if not x0 > 0:
            raise DomainError("point mass must sit in (0, inf)")
        return cls(InitialKind.POINT_MASS, {"x0": x0}, atoms=((float(x0), 1.0),))

    @classmethod
    def atoms_at(cls, xs, ws):
        ws = np.asarray(ws, dtype=float)
        ws = ws / ws.sum()
        atoms = tuple((float(x), float(w)) for x, w in zip(xs, ws))
        return cls(InitialKind.CUSTOM, {"atoms": len(atoms)}, atoms=atoms)

    @classmethod
    def custom(cls, dist, n_spline=3000, tail_mass=1e-15):
        """Wrap a :class:`GridDistribution` or :class:`QsdSpec`.

        A QSD is represented by a cubic spline of its log density in
        ``log x`` up to the point where its tail mass is below
        ``tail_mass``; mass beyond it is dropped, so keep ``tail_mass``
        well below the survival probabilities of interest.
        """
        if isinstance(dist, InitialDistribution):
            return dist
        if isinstance(dist, QsdSpec):
            return cls._from_qsd(dist, n_spline, tail_mass)
        if isinstance(dist, GridDistribution):
            lo = dist.y_lo if isinstance(dist, EvolvedDistribution) else float(dist.nodes[0])
            return cls(InitialKind.CUSTOM, {"source": type(dist).__name__},
                       dist.log_density, dist.cdf, x_lo=lo, x_hi=float(dist.nodes[-1]))
        raise DomainError(f"cannot build an initial law from {type(dist).__name__}")

    @classmethod
    def _from_qsd(cls, q, n_spline, tail_mass):
        p = q.params

        def upper(x):
            lv, sg = qsd.log_upper_mass(p, q.lam, x)
            return sg * math.exp(lv)

        x_hi = qsd._find_tail(upper, tail_mass)
        lx = np.linspace(math.log(X_LO), math.log(x_hi), n_spline)
        ld = q.log_density(np.exp(lx))
        spline = CubicSpline(lx, ld)

        def logd(x):
            x = np.asarray(x, dtype=float)
            return spline(np.log(x))

        return cls(InitialKind.CUSTOM, {"qsd_lambda": q.lam}, logd, q.cdf, x_hi=x_hi)

    # -- queries -----------------------------------------------------------
    @property
    def is_atomic(self):
        return bool(self.atoms)

    def support(self, t=0.0):
        """Integration range ``(x_lo, x_hi)`` that matters up to time ``t``."""
        if self.is_atomic:
            xs = [a[0] for a in self.atoms]
            return min(xs), max(xs)
        hi = self.x_hi
        if self.root_scale:
            # integrands like e^{delta r - r^2/t} peak at r = delta t/2
            r = 0.5 * self.root_scale * t + 15.0 * math.sqrt(max(t, 1e-12))
            hi = max(hi, r * r)
        return self.x_lo, hi

    def density_log(self, x):
        """``log rho(x)``, ``-inf`` outside the support (no atoms)."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(self.log_density(x), dtype=float)
        return np.where(np.isfinite(out), out, -np.inf)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_atomic:
            out = np.zeros(x.shape)
            for xa, wa in self.atoms:
                out = out + wa * (x >= xa)
            return out
        return np.asarray(self.cdf_fn(x), dtype=float)

    @property
    def nodes(self):
        return np.array(sorted(a[0] for a in self.atoms)) if self.is_atomic else None

    def quadrature(self, t=0.0, panel=0.25):
        """Nodes and weights ``(x, log w)`` with ``sum w f(x) ~ int f dmu``."""
        if self.is_atomic:
            xs = np.array([a[0] for a in self.atoms])
            return xs, np.log([a[1] for a in self.atoms])
        lo, hi = self.support(t)
        x, w = qsd.log_quadrature_rule(math.log(lo), math.log(hi), panel)
        with np.errstate(divide="ignore"):
            return x, np.log(w) + self.density_log(x)


def _as_initial(mu):
    if isinstance(mu, InitialDistribution):
        return mu
    return InitialDistribution.custom(mu)


# ---------------------------------------------------------------------------
# The evolved law
# ---------------------------------------------------------------------------

class EvolvedDistribution(GridDistribution):
    """Conditioned law ``mu_t`` on cells in ``y``.

    ``nodes`` are the right cell edges and the CDF at them is exact up to
    quadrature; between edges the CDF integrates a cubic spline of
    ``log density`` in ``log y``.  ``log_survival`` is ``log P_mu[T_0 > t]``.
    """

    def __init__(self, edges, cell_mass, y_points, log_dens, t, log_survival):
        total = cell_mass.sum()
        super().__init__(edges[1:], np.cumsum(cell_mass) / total)
        self.y_lo = float(edges[0])
        self.t = float(t)
        self.log_survival = float(log_survival)
        floor = np.max(log_dens) - 700.0
        ld = np.maximum(log_dens, floor)
        self._spline = CubicSpline(np.log(y_points), ld)
        self._lo_ld = float(np.log(y_points[0]))
        self._hi_ld = float(np.log(y_points[-1]))
        self._edges = edges

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            lx = np.log(x)
        out = self._spline(np.clip(lx, self._lo_ld, self._hi_ld))
        return np.where((x >= self.y_lo) & (x <= self.nodes[-1]), out, -np.inf)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        out = np.zeros(flat.shape)
        inside = (flat > self.y_lo) & (flat < self.nodes[-1])
        out[flat >= self.nodes[-1]] = 1.0
        if inside.any():
            xv = flat[inside]
            k = np.searchsorted(self._edges, xv, side="right") - 1
            left = self._edges[k]
            base = np.where(k > 0, self.cdf_values[np.maximum(k - 1, 0)], 0.0)
            a, b = np.log(left), np.log(xv)
            u = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL4[0]
            w = 0.5 * (b - a)[:, None] * _GL4[1]
            part = np.sum(w * np.exp(self._spline(u) + u), axis=1)
            out[inside] = np.minimum(base + part, 1.0)
        out = out.reshape(np.shape(x))
        return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Kernel coefficients and quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Coef:
    a: float
    b: float
    c: float
    lead: float


def _coefficients(p, t):
    """Gaussian and Bessel coefficients of ``p(t, x, y) m'(y)`` at time ``t``."""
    al, be, ga = p.alpha, p.beta, p.gamma
    if be == 0:
        qb = qf = 1.0 / t
        c = 2.0 / t
        lead = -math.log(t)
    else:
        # written through e^{-|beta| t} so that large t does not overflow
        bt = abs(be) * t
        log_rate = kummer._log_rate(be, t)
        rate = math.exp(log_rate)
        if be > 0:
            rate_up = be / -math.expm1(-bt)  # rate + beta
        else:
            rate_up = -be * math.exp(-bt) / -math.expm1(-bt)
        c = 2.0 * abs(be) * math.exp(-0.5 * bt) / -math.expm1(-bt)
        lead = log_rate + be * t - 0.5 * al * be * t
        qb, qf = rate, rate_up
        if be < 0 and ga > 0:
            # the e^{beta x} of g moves between the two sides
            qb, qf = rate_up, rate
    return _Coef(math.sqrt(qb), math.sqrt(qf), c, lead - ga * t)


def _log_h_stable(p, x):
    """``log h`` without the exponential factor that the coefficients absorb."""
    if p.gamma == 0:
        return np.zeros(np.shape(x))
    if p.beta < 0:
        return kummer.log_h_reduced(p, x)
    return kummer.log_h(p, x)


def log_kernel(p, t, x, y):
    """``log[p(t, x, y) m'(y)]``: density in ``y`` of ``P_x[X_t in dy, T_0 > t]``."""
    co = _coefficients(p, t)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    r, rr = np.sqrt(x), np.sqrt(y)
    z = co.c * r * rr
    out = (co.lead + 0.5 * p.alpha * (np.log(x) - np.log(y)) - (co.a * r - co.b * rr) ** 2
           + log_bessel_i_array(p.alpha, z, True) - _log_h_stable(p, x) + _log_h_stable(p, y))
    return out if out.ndim else float(out)


def _backward_log_integrand(p, co, init, r_star, e, big_r):
    """Log of ``rho(x) 2r`` times the ``x``-dependent kernel factors, at ``r = r_star + e``."""
    r = r_star + e
    x = r * r
    with np.errstate(divide="ignore", invalid="ignore"):
        return _backward_terms(p, co, init, r, x, e, big_r)


def _backward_terms(p, co, init, r, x, e, big_r):
    return (init.density_log(x) + math.log(2.0) + np.log(r) + 0.5 * p.alpha * np.log(x)
            - (co.a * e) ** 2 + log_bessel_i_array(p.alpha, co.c * r * big_r, True)
            - _log_h_stable(p, x))


def _find_peaks(p, co, init, big_r, r_lo, r_hi, n_iter=6):
    """Newton search for the maximum of the backward integrand (in the offset ``e``)."""
    r_star = co.b * big_r / co.a
    w0 = 1.0 / (co.a * math.sqrt(2.0))
    e_min = r_lo - r_star
    e_max = r_hi - r_star
    w = np.full_like(big_r, w0)
    clip_init = _ClippedInit(init)
    # coarse scan: uniform around the Gaussian centre and geometric in r
    # (the integrand is a power of r near the origin)
    k = np.arange(-20.0, 21.0)
    top = np.minimum(r_hi, r_star + 30.0 * w0)
    j = np.arange(0.0, 1.0, 1.0 / 60.0)
    geo = r_lo * np.exp(np.log(top / r_lo)[:, None] * j[None, :]) - r_star[:, None]
    cand = np.concatenate([k[None, :] * w0 + 0.0 * r_star[:, None], geo], axis=1)
    cand = np.clip(cand, e_min[:, None], e_max[:, None])
    lv = _backward_log_integrand(p, co, clip_init, r_star[:, None], cand, big_r[:, None])
    lv = np.where(np.isfinite(lv), lv, -np.inf)
    e = cand[np.arange(cand.shape[0]), np.argmax(lv, axis=1)]
    for _ in range(n_iter):
        h = 1e-2 * np.minimum(w, np.maximum(r_star + e, r_lo))
        ec = np.clip(e, e_min + h, e_max - h)
        l0 = _backward_log_integrand(p, co, clip_init, r_star, ec, big_r)
        lp = _backward_log_integrand(p, co, clip_init, r_star, ec + h, big_r)
        lm = _backward_log_integrand(p, co, clip_init, r_star, ec - h, big_r)
        d1 = (lp - lm) / (2.0 * h)
        d2 = (lp - 2.0 * l0 + lm) / (h * h)
        ok = np.isfinite(d1) & np.isfinite(d2)
        newton = np.where(ok & (d2 < 0), -d1 / np.where(d2 < 0, d2, -1.0), np.sign(np.nan_to_num(d1)) * w)
        step = np.clip(newton, -10.0 * w0, 10.0 * w0)
        e = np.clip(ec + step, e_min, e_max)
        w = np.where(ok & (d2 < 0), np.clip(1.0 / np.sqrt(np.abs(d2)), 0.05 * w0, 3.0 * w0), w0)
    return r_star, e, w


class _ClippedInit:
    """Density evaluated with ``x`` clipped into the support (for the peak search)."""

    def __init__(self, init):
        self.init = init
        self.lo, self.hi = init.support()

    def density_log(self, x):
        return self.init.density_log(np.clip(x, self.lo, self.hi))


def _panels(e_pk, w, w0, r_star, r_lo, r_hi):
    """Breakpoints in ``e`` for one target point.

    Covers both the window around the located peak (width ``w``) and the
    Gaussian window of the kernel around ``e = 0`` (width ``w0``); a heavy
    initial density can spread the integrand between the two.
    """
    e_lo = max(r_lo - r_star, min(e_pk - WINDOW * w, -WINDOW * w0))
    e_hi = min(r_hi - r_star, max(e_pk + WINDOW * w, WINDOW * w0))
    if not e_hi > e_lo:
        return None
    k = np.arange(-2 * WINDOW, 2 * WINDOW + 1)
    pts = [e_pk + 0.5 * w * k, 0.5 * w0 * k, [e_lo, e_hi]]
    lo_r, hi_r = r_star + e_lo, r_star + e_hi
    if lo_r > 0 and math.log(hi_r / lo_r) > GEOM_RATIO:
        j = np.arange(0, math.log(hi_r / lo_r) / GEOM_RATIO)
        pts.append(lo_r * np.exp(GEOM_RATIO * j) - r_star)
    b = np.unique(np.concatenate(pts))
    return b[(b >= e_lo) & (b <= e_hi)]


def _mixture_log_density(p, t, init, y, chunk=400):
    """``log int rho(x) p(t, x, y) m'(y) dx`` for an array of ``y``."""
    co = _coefficients(p, t)
    y = np.asarray(y, dtype=float)
    big_r = np.sqrt(y)
    lh_y = _log_h_stable(p, y)
    out = np.empty(y.shape)
    if init.is_atomic:
        terms = [math.log(wa) + log_kernel(p, t, xa, y) for xa, wa in init.atoms]
        return _logsumexp(np.vstack(terms), axis=0)
    x_lo, x_hi = init.support(t)
    r_lo, r_hi = math.sqrt(x_lo), math.sqrt(x_hi)
    for s in range(0, y.size, chunk):
        sl = slice(s, s + chunk)
        rr = big_r[sl]
        r_star, e_pk, w = _find_peaks(p, co, init, rr, r_lo, r_hi)
        w0 = 1.0 / (co.a * math.sqrt(2.0))
        nodes, weights, owner = [], [], []
        for i in range(rr.size):
            b = _panels(e_pk[i], w[i], w0, r_star[i], r_lo, r_hi)
            if b is None or b.size < 2:
                continue
            mid = 0.5 * (b[1:] + b[:-1])
            half = 0.5 * np.diff(b)
            nodes.append((mid[:, None] + half[:, None] * _GL8[0]).ravel())
            weights.append((half[:, None] * _GL8[1]).ravel())
            owner.append(np.full(nodes[-1].size, i))
        res = np.full(rr.size, -np.inf)
        if nodes:
            e = np.concatenate(nodes)
            wts = np.concatenate(weights)
            own = np.concatenate(owner)
            lv = _backward_log_integrand(p, co, init, r_star[own], e, rr[own]) + np.log(wts)
            starts = np.flatnonzero(np.r_[True, own[1:] != own[:-1]])
            who = own[starts]
            peak = np.maximum.reduceat(lv, starts)
            safe = np.where(np.isfinite(peak), peak, 0.0)
            seg = np.add.reduceat(np.exp(lv - np.repeat(safe, np.diff(np.r_[starts, lv.size]))), starts)
            with np.errstate(divide="ignore"):
                res[who] = safe + np.log(seg)
            res[who[~np.isfinite(peak)]] = -np.inf
        out[sl] = res
    return out + co.lead - 0.5 * p.alpha * np.log(y) + lh_y


def _y_cells(p, t, init):
    """Cell edges in ``y`` covering the conditioned law at time ``t``."""
    co = _coefficients(p, t)
    x_lo, x_hi = init.support(t)
    w_f = 1.0 / (co.b * math.sqrt(2.0))
    r_top = co.a * math.sqrt(x_hi) / co.b + WINDOW * w_f
    y_hi = max(r_top * r_top, 10.0 * Y_LO)
    n = max(8, int(math.ceil(math.log(y_hi / Y_LO) / Y_CELL)))
    edges = [np.geomspace(Y_LO, y_hi, n + 1)]
    for xa, _ in init.atoms:
        centre = co.a * math.sqrt(xa) / co.b
        k = np.arange(-4 * WINDOW, 4 * WINDOW + 1)
        rr = centre + 0.25 * w_f * k
        rr = rr[rr > math.sqrt(Y_LO)]
        edges.append(rr * rr)
    e = np.unique(np.concatenate(edges))
    return e[(e >= Y_LO) & (e <= y_hi)]


def evolve_conditional(params, mu, t, raise_underflow=True):
    """Conditioned law ``mu_t = P_mu[X_t in . | T_0 > t]``.

    Parameters
    ----------
    params : KummerParams
    mu : InitialDistribution, GridDistribution or QsdSpec
    t : float
        Positive time.

    Returns
    -------
    EvolvedDistribution
        Carries ``log_survival = log P_mu[T_0 > t]``.

    Raises
    ------
    UnderflowError
        When the survival probability is below 1e-300; the log value is
        attached.
    """
    if not t > 0:
        raise DomainError("evolution time must be positive")
    init = _as_initial(mu)
    edges = _y_cells(params, t, init)
    a, b = np.log(edges[:-1]), np.log(edges[1:])
    u = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL4[0]
    wu = 0.5 * (b - a)[:, None] * _GL4[1]
    y = np.exp(u)
    ld = _mixture_log_density(params, t, init, y.ravel()).reshape(y.shape)
    lmass = ld + u + np.log(wu)
    log_total = _logsumexp(lmass)
    if not np.isfinite(log_total):
        raise UnderflowError("conditioned law has no computable mass", log_total)
    if log_total < LOG_UNDERFLOW and raise_underflow:
        raise UnderflowError(f"survival probability below 1e-300 at t={t:g}", log_total)
    cell = np.sum(np.exp(lmass - log_total), axis=1)
    return EvolvedDistribution(edges, cell, y.ravel(), ld.ravel() - log_total, t, log_total)


# ---------------------------------------------------------------------------
# Survival, hitting mixtures and rates
# ---------------------------------------------------------------------------

def log_survival_mixture(params, mu, t):
    """``log P_mu[T_0 > t] = log int P_x[T_0 > t] mu(dx)``."""
    init = _as_initial(mu)
    x, lw = init.quadrature(t)
    keep = np.isfinite(lw)
    return _logsumexp(lw[keep] + kummer.log_survival(params, x[keep], t))


def survival_mixture(params, mu, t):
    return math.exp(log_survival_mixture(params, mu, t))


def log_hitting_mixture(params, mu, t):
    """``log f_mu(t)`` with ``f_mu(t) = int f_x(t) mu(dx)``."""
    init = _as_initial(mu)
    x, lw = init.quadrature(t)
    keep = np.isfinite(lw)
    return _logsumexp(lw[keep] + kummer.log_hitting_density(params, x[keep], t))


def hitting_mixture(params, mu, t):
    """Hitting density of 0 under ``P_mu``: the closed-form kernel integrated against ``mu``."""
    if not t > 0:
        raise DomainError("hitting time density needs t > 0")
    return math.exp(log_hitting_mixture(params, mu, t))


def log_tail_ratio(params, mu, t, s):
    """``log(P_mu[T_0 > t+s] / P_mu[T_0 > t])``."""
    if s == 0:
        return 0.0
    init = _as_initial(mu)
    lt = log_survival_mixture(params, init, t) if t > 0 else 0.0
    if not np.isfinite(lt):
        raise UnderflowError(f"survival at t={t:g} is not representable", lt)
    return log_survival_mixture(params, init, t + s) - lt


def tail_ratio(params, mu, t, s):
    """``P_mu[T_0 > t+s] / P_mu[T_0 > t]``, computed from log survivals."""
    if s < 0 or t < 0:
        raise DomainError("tail ratio needs t, s >= 0")
    return math.exp(log_tail_ratio(params, mu, t, s))


def log_derivative_rate(params, mu, t_grid, n_points=3, rel_step=0.01):
    """Measured decay rate ``-d/dt log f_mu(t)`` extrapolated to ``t = inf``.

    Central differences at the largest ``n_points`` grid times are fitted
    by a polynomial in ``1/t`` (Richardson extrapolation) and evaluated at
    ``1/t = 0``.  Warns when successive raw estimates differ by more than
    1 percent.
    """
    init = _as_initial(mu)
    ts = np.sort(np.asarray(t_grid, dtype=float))[-n_points:]
    raw = []
    for t in ts:
        h = rel_step * t
        lp = log_hitting_mixture(params, init, t + h)
        lm = log_hitting_mixture(params, init, t - h)
        raw.append(-(lp - lm) / (2.0 * h))
    raw = np.array(raw)
    if raw.size > 1 and np.any(np.abs(np.diff(raw)) > 0.01 * np.abs(raw[1:])):
        warnings.warn(f"log-derivative estimates still moving: {raw}", RuntimeWarning, stacklevel=2)
    if raw.size == 1:
        return float(raw[0])
    coef = np.polyfit(1.0 / ts, raw, raw.size - 1)
    return float(coef[-1])


def ks_distance(a, b, grid=None):
    """Sup of ``|F_a - F_b|`` over the merged nodes (and their left limits).

    With ``grid`` the sup is taken over those points only, e.g. continuity
    points of a limit law that has atoms.
    """
    if grid is not None:
        x = np.asarray(grid, dtype=float)
        return float(np.max(np.abs(np.asarray(a.cdf(x), dtype=float) - np.asarray(b.cdf(x), dtype=float))))
    pts = [np.asarray(d.nodes) for d in (a, b) if getattr(d, "nodes", None) is not None]
    if not pts:
        raise DomainError("at least one distribution must carry nodes")
    x = np.unique(np.concatenate(pts))
    x = np.concatenate([x, np.nextafter(x, 0.0)])
    return float(np.max(np.abs(np.asarray(a.cdf(x), dtype=float) - np.asarray(b.cdf(x), dtype=float))))


# ---------------------------------------------------------------------------
# Domain-of-attraction experiments
# ---------------------------------------------------------------------------

def predicted_lambda(params, delta):
    """Decay rate attached to the initial tails of each case."""
    al, be, ga = params.alpha, params.beta, params.gamma
    case = params.case
    if case is CaseLabel.CASE1:
        return ga - 0.25 * delta * delta
    if case is CaseLabel.CASE2:
        return be * (al - delta) + ga
    if case is CaseLabel.CASE3:
        return -be * (1.0 - delta) + ga
    raise DomainError(f"{case.value} has no domain-of-attraction statement")


@dataclass
class EvolutionReport:
    """Output of :func:`doa_experiment`.

    ``ks_to_target``, ``tail_ratio_err`` and ``survival_sup_err`` are the
    three convergence series (conditioned laws, tail ratio at ``s_probe``,
    hitting laws of the conditioned laws over an ``s`` grid).
    """

    times: list
    ks_to_target: list
    tail_ratio_err: list
    predicted_lambda: float
    measured_lambda: float
    survival_sup_err: list = field(default_factory=list)
    log_survival: list = field(default_factory=list)
    params: str = ""
    initial: str = ""
    s_probe: float = 1.0
    ks_decreasing: bool = False
    tail_decreasing: bool = False

    def __post_init__(self):
        n = len(self.times)
        if len(self.ks_to_target) != n or len(self.tail_ratio_err) != n:
            raise DomainError("report series must share the length of times")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def rows(self):
        """``(t, ks, tail_ratio_err)`` rows for the companion CSV."""
        return list(zip(self.times, self.ks_to_target, self.tail_ratio_err))


def eventually_decreasing(series, floor=1e-8, fraction=0.5):
    """True when the last ``fraction`` of the series does not increase (values below ``floor`` count as converged)."""
    v = np.maximum(np.asarray(series, dtype=float), floor)
    tail = v[int(len(v) * (1.0 - fraction)):]
    return bool(np.all(np.diff(tail) <= 1e-12 + 1e-9 * tail[:-1]))


def initial_for_case(params, delta, slowly="one"):
    """The initial law of the theorem for the case of ``params``."""
    case = params.case
    if case is CaseLabel.CASE1:
        return InitialDistribution.case1_density(params, delta)
    if case is CaseLabel.CASE2:
        return InitialDistribution.case2_tail(params, delta, slowly)
    if case is CaseLabel.CASE3:
        return InitialDistribution.case3_tail(params, delta, slowly)
    raise DomainError(f"{case.value} has no domain-of-attraction statement")


def doa_experiment(params, init, t_grid=DEFAULT_T_GRID, s_probe=1.0, s_grid=DEFAULT_S_GRID):
    """Run the conditioned evolution of ``init`` and measure convergence to ``nu_lambda``.

    Parameters
    ----------
    params : KummerParams
        Case 1, 2 or 3.
    init : InitialDistribution
        Built by the constructor matching the case.
    t_grid : sequence of float
    s_probe : float
        Shift of the tail ratio.
    s_grid : sequence of float
        Shifts over which the survival of the conditioned law is compared
        with ``e^{-lambda s}``.

    Returns
    -------
    EvolutionReport
    """
    expected = {CaseLabel.CASE1: InitialKind.CASE1_DENSITY, CaseLabel.CASE2: InitialKind.CASE2_TAIL,
                CaseLabel.CASE3: InitialKind.CASE3_TAIL}
    if expected.get(params.case) is not init.kind:
        raise DomainError(f"initial law {init.kind.value} does not match {params.case.value}")
    lam = predicted_lambda(params, init.parameters["delta"])
    target = qsd.make_qsd(params, lam)
    times = [float(t) for t in t_grid]
    s_grid = np.asarray(s_grid, dtype=float)
    ks, tail_err, sup_err, log_surv = [], [], [], []
    cache = {}

    def lsurv(t):
        if t not in cache:
            cache[t] = log_survival_mixture(params, init, t)
        return cache[t]

    for t in times:
        mu_t = evolve_conditional(params, init, t, raise_underflow=False)
        ks.append(ks_distance(mu_t, target))
        lt = lsurv(t)
        log_surv.append(lt)
        tail_err.append(abs(math.exp(lsurv(t + s_probe) - lt) - math.exp(-lam * s_probe)))
        dev = [abs(math.exp(lsurv(t + s) - lt) - math.exp(-lam * s)) for s in s_grid]
        sup_err.append(max(dev))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        measured = log_derivative_rate(params, init, times)
    rep = EvolutionReport(times, ks, tail_err, lam, measured, sup_err, log_surv,
                          str(params), init.kind.value, float(s_probe))
    rep.ks_decreasing = eventually_decreasing(ks)
    rep.tail_decreasing = eventually_decreasing(tail_err)
    return rep


def coherence_check(report, threshold=KS_THRESHOLD, stall_factor=3.0):
    """Do the three convergence series fall below ``threshold`` together?

    A series stalls when its final value exceeds ``stall_factor`` times its
    own minimum.  The run is coherent when either all three series end
    below the threshold with none stalled, or none of them converges.
    """
    series = {"tail_ratio": report.tail_ratio_err, "survival_sup": report.survival_sup_err,
              "ks": report.ks_to_target}
    out = {}
    for name, v in series.items():
        v = np.asarray(v, dtype=float)
        out[name] = {"final": float(v[-1]), "floor": float(v.min()),
                     "converged": bool(v[-1] < threshold),
                     "stalled": bool(v[-1] > stall_factor * max(v.min(), 1e-12))}
    conv = [d["converged"] for d in out.values()]
    stalled = [d["stalled"] for d in out.values()]
    out["coherent"] = (all(conv) and not any(stalled)) or not any(conv)
    return out


# ---------------------------------------------------------------------------
# Staircase counterexample and the Laplace cut-off
# ---------------------------------------------------------------------------

def staircase_exponent(u):
    """``eps(u) = 2^{-n}`` for ``4^n < u <= 4^{n+1}``, ``n >= 0``."""
    if not u > 1:
        raise DomainError("the staircase is defined for u > 1")
    n = 0
    while 4.0 ** (n + 1) < u:
        n += 1
    return 2.0 ** -n


def log_staircase_k(log_s):
    """``log k(s) = eps(log s) log s`` for ``k(s) = s^{eps(log s)}``."""
    return staircase_exponent(log_s) * log_s


def counterexample_check(lam=1.0, n_max=20):
    """Ratios ``k(e exp(4^n)) / k(exp(4^n))`` for ``n = 1..n_max``.

    ``k`` is the exponent correction of ``f(t) = e^{(-lam + eps(t)) t}``:
    ``log f(t)/t -> -lam`` while ``k`` is not slowly varying, so the tail
    ratio of ``f`` has no limit.  Everything is computed from ``log s``.

    Returns
    -------
    list of dict
        ``n``, ``ratio``, ``log_ratio``, ``expected_log_ratio`` and
        ``weak_rate``, the value of ``log f(t)/t`` at ``t = 4^n``.
    """
    if n_max > 30:
        raise DomainError("n_max must be <= 30 (4^n must stay exactly representable)")
    out = []
    for n in range(1, n_max + 1):
        u = 4.0 ** n
        lr = log_staircase_k(u + 1.0) - log_staircase_k(u)
        expected = -(2.0 ** n) + 2.0 ** -n
        out.append({"n": n, "ratio": math.exp(lr), "log_ratio": lr, "expected_log_ratio": expected,
                    "weak_rate": -lam + staircase_exponent(u)})
    return out


def _log_laplace_window(delta, t, lo_x, hi_x):
    """``log int_{lo_x}^{hi_x} e^{-x/t + delta sqrt(x)} dx`` by panels in ``r = sqrt(x)``."""
    r_pk = 0.5 * delta * t
    w = math.sqrt(0.5 * t)
    lo_r = math.sqrt(max(lo_x, 0.0))
    hi_r = min(math.sqrt(hi_x), r_pk + 40.0 * w)
    if not hi_r > lo_r:
        return -math.inf
    n = max(16, int(math.ceil((hi_r - lo_r) / (0.25 * w))))
    b = np.linspace(lo_r, hi_r, n + 1)
    mid, half = 0.5 * (b[1:] + b[:-1]), 0.5 * np.diff(b)
    r = (mid[:, None] + half[:, None] * _GL8[0]).ravel()
    wt = (half[:, None] * _GL8[1]).ravel()
    with np.errstate(divide="ignore"):
        lv = np.log(2.0 * r * wt) - r * r / t + delta * r
    return _logsumexp(lv)


def laplace_cutoff_check(delta, eps, t_grid):
    """Laplace transform of ``f(x) = e^{delta sqrt(x)}`` and its cut-off window.

    For each ``t`` reports ``log I(t) / (delta^2 t / 4)`` with
    ``I(t) = int_0^inf e^{-x/t} f(x) dx`` and the share of ``I(t)`` carried by
    ``[(delta^2/4 - eps) t^2, (delta^2/4 + eps) t^2]``.

    Returns
    -------
    dict
        ``times``, ``log_integral``, ``log_ratio`` (the ratio above),
        ``log_ratio_err = |log_ratio - 1|``, ``window_share`` and
        ``window_err = 1 - window_share``, plus the maxima of both errors.
    """
    if not (delta > 0 and eps > 0):
        raise DomainError("delta and eps must be positive")
    ts = [float(t) for t in t_grid]
    logi, ratio, share = [], [], []
    c = 0.25 * delta * delta
    for t in ts:
        full = _log_laplace_window(delta, t, 0.0, math.inf)
        win = _log_laplace_window(delta, t, max(c - eps, 0.0) * t * t, (c + eps) * t * t)
        logi.append(full)
        ratio.append(full / (c * t))
        share.append(math.exp(win - full))
    ratio_err = [abs(v - 1.0) for v in ratio]
    window_err = [1.0 - v for v in share]
    return {"times": ts, "log_integral": logi, "log_ratio": ratio, "log_ratio_err": ratio_err,
            "window_share": share, "window_err": window_err,
            "max_log_ratio_err": max(ratio_err), "max_window_err": max(window_err)}


def laplace_closed_form(delta, t):
    """``log I(t)`` from ``I(t) = t + delta t sqrt(pi t)/2 e^{delta^2 t/4} erfc(-delta sqrt(t)/2)``."""
    from scipy.special import erfc
    c = 0.25 * delta * delta * t
    second = math.log(0.5 * delta * t * math.sqrt(math.pi * t)) + c + math.log(erfc(-0.5 * delta * math.sqrt(t)))
    return second + math.log1p(t * math.exp(-second))
