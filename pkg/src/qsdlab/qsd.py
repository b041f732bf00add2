"""Quasi-stationary distributions ``nu_lam(dx) = lam psi_{-lam}(x) m(dx)``.

For ``0 < lam <= lambda0`` the eigenfunction ``psi_{-lam}`` is positive and
``nu_lam(0, x] = 1 - dpsi_{-lam}/ds(x)``.  Smaller ``lam`` gives heavier
tails; ``nu_lambda0`` is the minimal QSD.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import kummer, specfun
from .diffusion import DiffusionSpec, solve_psi
from .errors import DomainError, NormalizationError

NORMALIZATION_TOL = 1e-4
TAIL_MASS = 1e-9
X_MIN = 1e-4
XI_MAX = 230.0


# ---------------------------------------------------------------------------
# Distributions on a grid
# ---------------------------------------------------------------------------

class GridDistribution:
    """Probability law on (0, inf) carried by a node grid.

    ``cdf_values[i]`` is the mass of ``(0, nodes[i]]``; the weights are the
    increments (the first weight holds the mass below ``nodes[0]``).  Any
    mass beyond the last node is folded into the last weight.  The CDF is
    interpolated by a monotone piecewise cubic in ``log x``.
    """

    def __init__(self, nodes, cdf_values, renormalize=True):
        nodes = np.asarray(nodes, dtype=float)
        cdf_values = np.asarray(cdf_values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or nodes.shape != cdf_values.shape:
            raise DomainError("nodes and cdf_values must be 1-d arrays of equal length >= 2")
        if not (nodes[0] > 0 and np.all(np.diff(nodes) > 0)):
            raise DomainError("nodes must be positive and strictly increasing")
        cdf_values = np.maximum.accumulate(np.clip(cdf_values, 0.0, None))
        if renormalize:
            if not cdf_values[-1] > 0:
                raise NormalizationError("distribution has no mass")
            cdf_values = cdf_values / cdf_values[-1]
        cdf_values[-1] = 1.0
        self.nodes = nodes
        self.cdf_values = cdf_values
        self.weights = np.diff(cdf_values, prepend=0.0)
        self._interp = PchipInterpolator(np.log(nodes), cdf_values, extrapolate=False)

    @classmethod
    def from_weights(cls, nodes, weights):
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        return cls(nodes, np.cumsum(w))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            lx = np.log(x)
        out = self._interp(np.clip(lx, math.log(self.nodes[0]), math.log(self.nodes[-1])))
        # linear in x below the first node (density roughly constant near 0)
        out = np.where(x < self.nodes[0], self.cdf_values[0] * np.clip(x, 0, None) / self.nodes[0], out)
        out = np.where(x >= self.nodes[-1], 1.0, out)
        return out if out.ndim else float(out)

    def log_density(self, x):
        """Log of the derivative of the interpolated CDF (``-inf`` off the grid)."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(x)
            d = self._interp.derivative()(lx) / x
            out = np.log(np.clip(d, 0.0, None))
        return np.where((x >= self.nodes[0]) & (x <= self.nodes[-1]), np.nan_to_num(out, nan=-np.inf), -np.inf)

    def mean(self):
        mids = np.concatenate([[0.5 * self.nodes[0]], 0.5 * (self.nodes[1:] + self.nodes[:-1])])
        return float(np.dot(self.weights, mids))

    def __repr__(self):
        return f"GridDistribution(n={self.nodes.size}, range=[{self.nodes[0]:.3g}, {self.nodes[-1]:.3g}])"


def sup_distance(cdf_a, cdf_b, x):
    """``max |F_a - F_b|`` over the points ``x``."""
    return float(np.max(np.abs(np.asarray(cdf_a(x)) - np.asarray(cdf_b(x)))))


# ---------------------------------------------------------------------------
# Closed-form pieces for the Kummer family
# ---------------------------------------------------------------------------

def _log_add(la, sa, lb, sb):
    """``log|a + b|`` and sign, from logs and signs."""
    if la < lb:
        la, sa, lb, sb = lb, sb, la, sa
    if la == -math.inf:
        return -math.inf, 1.0
    r = sb * sa * math.exp(lb - la)
    tot = 1.0 + r
    if tot == 0:
        return -math.inf, 1.0
    return la + math.log(abs(tot)), sa * math.copysign(1.0, tot)


def _log_g_parts(p, x):
    """``(log g_reduced, dlog g)`` with ``log g = log g_reduced + beta x [beta < 0]``."""
    if p.gamma == 0:
        return 0.0, 0.0
    return float(kummer.log_h_reduced(p, x)), float(kummer.dlog_h(p, x))


def log_qsd_density(p, lam, x):
    """``log(lam psi_{-lam}(x) m'(x))`` with the exponential factors cancelled.

    ``psi_{-lam} = psi0_mu / g`` with ``mu = gamma - lam`` and ``m' = g^2 m0'``,
    so the density is ``lam psi0_mu g x^{-alpha} e^{-beta x}``; the growth of
    ``psi0_mu`` is carried by an exponentially scaled M.
    """
    al, be = p.alpha, p.beta
    mu = p.gamma - lam
    lgr, _ = _log_g_parts(p, x)
    lead = math.log(lam) - math.log(al) + lgr
    if be > 0:
        lm, sg = specfun.log_kummer_m(mu / be + al, al + 1.0, be * x, scaled=True)
    elif be == 0:
        lm, sg = specfun.log_hyp0f1(al + 1.0, mu * x)
    else:
        lm, sg = specfun.log_kummer_m(1.0 + mu / -be, al + 1.0, -be * x, scaled=True)
    return lead + lm if sg > 0 else -math.inf


def log_upper_mass(p, lam, x):
    """``(log|dpsi_{-lam}/ds (x)|, sign)``, the QSD mass of ``(x, inf)``.

    For the untransformed process ``dpsi0_mu/ds0`` is ``e^{-z} M(a, alpha, z)``
    (``beta > 0``), ``0F1(; alpha; mu x)`` (``beta = 0``) or
    ``M(mu/|beta|, alpha, z)`` (``beta < 0``), from
    ``d/dz [z^(b-1) M(a,b,z)] = (b-1) z^(b-2) M(a,b-1,z)`` and the
    contiguous relation ``z M(a,b+1,z) = b (M(a,b,z) - M(a-1,b,z))``.  The
    h-transform adds ``psi0_mu g |dlog g/dlog x| / (x s0')``.
    """
    al, be = p.alpha, p.beta
    mu = p.gamma - lam
    lgr, dlg = _log_g_parts(p, x)
    z = abs(be) * x
    if be > 0:
        l1, s1 = specfun.log_kummer_m(mu / be + al, al, z, scaled=True)
    elif be == 0:
        l1, s1 = specfun.log_hyp0f1(al, mu * x)
    else:
        l1, s1 = specfun.log_kummer_m(mu / -be, al, z, scaled=True)
        # scaled M times e^{z}, against e^{-z} inside g
    l1 += lgr
    if dlg == 0.0:
        return l1, s1
    if be > 0:
        l2, s2 = specfun.log_kummer_m(mu / be + al, al + 1.0, z, scaled=True)
    elif be == 0:
        l2, s2 = specfun.log_hyp0f1(al + 1.0, mu * x)
    else:
        l2, s2 = specfun.log_kummer_m(1.0 + mu / -be, al + 1.0, z, scaled=True)
    l2 += lgr + math.log(abs(dlg)) - math.log(al)
    return _log_add(l1, s1, l2, -s2 * math.copysign(1.0, dlg))


# ---------------------------------------------------------------------------
# QSD objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QsdSpec:
    """The QSD ``nu_lam`` of a diffusion.

    ``log_density`` returns ``log(lam psi_{-lam}(x) m'(x))`` (Lebesgue
    density) and ``cdf`` returns ``1 - dpsi_{-lam}/ds(x)``.  ``x_tail`` is a
    point beyond which the tail mass is below ``TAIL_MASS``.
    """

    params: object
    lam: float
    lambda0: float
    log_density: object = field(repr=False)
    cdf: object = field(repr=False)
    x_tail: float = math.inf
    normalization: float = float("nan")

    def density(self, x):
        return np.exp(self.log_density(x))

    def grid(self, n=1200, x_min=X_MIN):
        """Log-spaced :class:`GridDistribution` from ``x_min`` to ``x_tail``."""
        nodes = np.geomspace(x_min, self.x_tail, n)
        return GridDistribution(nodes, self.cdf(nodes))


def _vectorize(f):
    def g(x):
        if np.ndim(x) == 0:
            return f(float(x))
        x = np.asarray(x, dtype=float)
        return np.array([f(v) for v in x.ravel()]).reshape(x.shape)
    return g


def _find_tail(upper_mass, tol=TAIL_MASS):
    """Smallest ``x = e^xi`` (to 0.05 in xi) with ``upper_mass(x) < tol``."""
    lo, hi = 0.0, 4.0
    while upper_mass(math.exp(hi)) >= tol:
        lo, hi = hi, 2.0 * hi
        if hi > XI_MAX:
            return math.exp(XI_MAX)
    while hi - lo > 0.05:
        mid = 0.5 * (lo + hi)
        if upper_mass(math.exp(mid)) >= tol:
            lo = mid
        else:
            hi = mid
    return math.exp(hi)


_GL8 = np.polynomial.legendre.leggauss(8)


def log_quadrature_rule(lo, hi, panel=0.25):
    """Composite 8-point Gauss-Legendre nodes and weights in ``xi = log x``.

    Returns ``(x, w)`` such that ``sum(w f(x))`` approximates
    ``int_{e^lo}^{e^hi} f(x) dx``.
    """
    n = max(1, int(math.ceil((hi - lo) / panel)))
    h = (hi - lo) / n
    mids = lo + (np.arange(n) + 0.5) * h
    xi = (mids[:, None] + 0.5 * h * _GL8[0][None, :]).ravel()
    w = np.tile(0.5 * h * _GL8[1], n)
    x = np.exp(xi)
    return x, w * x


def make_qsd(params, lam, lambda0=None, x_max=None, check=True):
    """Build ``nu_lam`` and verify its normalization.

    Parameters
    ----------
    params : KummerParams or DiffusionSpec
        For a generic :class:`DiffusionSpec` ``lambda0`` and ``x_max`` are
        required and ``psi`` comes from :func:`solve_psi`.
    lam : float
        ``0 < lam <= lambda0``.

    Raises
    ------
    DomainError
        If the process has no QSD family or ``lam`` is out of range.
    NormalizationError
        If the density integrates to 1 only within more than ``1e-4``.
    """
    if isinstance(params, kummer.KummerParams):
        q = _make_kummer_qsd(params, lam)
    elif isinstance(params, DiffusionSpec):
        if lambda0 is None or x_max is None:
            raise DomainError("a generic DiffusionSpec needs lambda0 and x_max")
        q = _make_generic_qsd(params, lam, lambda0, x_max)
    else:
        raise DomainError(f"unsupported parameter object {type(params).__name__}")
    if check:
        x, w = log_quadrature_rule(math.log(1e-14), math.log(q.x_tail))
        total = float(np.dot(w, q.density(x)))
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise NormalizationError(f"QSD density integrates to {total:.8f}")
        object.__setattr__(q, "normalization", total)
    return q


def _check_lambda(lam, lam0):
    if not (lam > 0 and lam <= lam0 * (1 + 1e-12)):
        raise DomainError(f"lambda must lie in (0, {lam0:g}], got {lam:g}: psi changes sign above lambda0")


def _make_kummer_qsd(p, lam):
    if not p.case.has_qsd_family:
        raise DomainError(f"{p.case.value} has no quasi-stationary distribution family")
    lam0 = kummer.lambda0_closed(p)
    _check_lambda(lam, lam0)

    def log_dens(x):
        return log_qsd_density(p, lam, x)

    def upper(x):
        lv, sg = log_upper_mass(p, lam, x)
        return sg * math.exp(lv)

    def cdf(x):
        return 1.0 - upper(x) if x > 0 else 0.0

    x_tail = _find_tail(upper)
    return QsdSpec(p, float(lam), lam0, _vectorize(log_dens), _vectorize(cdf), x_tail)


def _make_generic_qsd(spec, lam, lam0, x_max):
    _check_lambda(lam, lam0)
    sol = solve_psi(spec, -lam, x_max, n_nodes=2000)
    lx = np.log(sol.nodes)
    with np.errstate(divide="ignore", invalid="ignore"):
        lpsi = np.log(sol.psi_values)
    if not np.all(np.isfinite(lpsi)):
        raise DomainError("psi_{-lam} is not positive on the grid; lam exceeds lambda0?")
    lpsi_i = PchipInterpolator(lx, lpsi)
    v_i = PchipInterpolator(lx, sol.dpsi_ds_values)

    def log_dens(x):
        x = np.asarray(x, dtype=float)
        return math.log(lam) + lpsi_i(np.log(x)) + np.asarray(spec.log_speed(x))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.clip(1.0 - v_i(np.log(np.clip(x, sol.nodes[0], sol.nodes[-1]))), 0.0, 1.0)

    return QsdSpec(spec, float(lam), float(lam0), log_dens, cdf, float(x_max))


def qsd_cdf(q, x):
    """``nu_lam(0, x] = 1 - dpsi_{-lam}/ds(x)``."""
    return q.cdf(x)


def qsd_cdf_quadrature(q, x):
    """``nu_lam(0, x]`` by direct quadrature of the density (cross-check)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.shape)
    for i, xv in enumerate(x):
        nodes, w = log_quadrature_rule(math.log(1e-14), math.log(xv), panel=0.2)
        out[i] = np.dot(w, q.density(nodes))
    return out


def qsd_hitting_check(q, t_grid, panel=0.25):
    """Max relative deviation of ``P_nu[T_0 in dt]/dt`` from ``lam e^{-lam t}``.

    The mixture ``int f_x(t) nu(dx)`` is integrated with a composite
    Gauss-Legendre rule in ``log x`` up to the tail point of ``nu``.
    """
    if not isinstance(q.params, kummer.KummerParams):
        raise DomainError("hitting check needs Kummer parameters for the closed-form hitting density")
    x, w = log_quadrature_rule(math.log(1e-14), math.log(q.x_tail), panel)
    wd = w * q.density(x)
    worst = 0.0
    for t in np.atleast_1d(t_grid):
        mix = float(np.dot(wd, kummer.hitting_density(q.params, x, t)))
        target = q.lam * math.exp(-q.lam * t)
        worst = max(worst, abs(mix / target - 1.0))
    return worst


def qsd_order_check(params, lam, lam_prime, x_grid, atol=1e-12):
    """True when ``nu_{lam'}(0, x] <= nu_lam(0, x]`` at every grid point.

    For ``lam' <= lam`` this is the tail order: smaller ``lam`` puts more
    mass far out.  Swapping the arguments gives ``False`` unless the laws
    coincide.
    """
    if lam == lam_prime:
        return True
    a = make_qsd(params, lam, check=False)
    b = make_qsd(params, lam_prime, check=False)
    x_grid = np.asarray(x_grid, dtype=float)
    return bool(np.all(b.cdf(x_grid) <= a.cdf(x_grid) + atol))
