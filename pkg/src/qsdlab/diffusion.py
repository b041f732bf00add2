"""Generic d/dm d/ds machinery for diffusions on (0, b) absorbed at 0.

A diffusion is described by its speed density m'(x) and scale density s'(x).
Densities are carried as logarithms so that exponential factors such as
``exp(beta x)`` never overflow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import BracketError, ConvergenceError, DomainError, InconclusiveError


class BoundaryClass(enum.Enum):
    REGULAR = "regular"
    EXIT = "exit"
    ENTRANCE = "entrance"
    NATURAL = "natural"


def _log_of(f):
    def lf(x):
        with np.errstate(divide="ignore"):
            return np.log(f(x))
    return lf


@dataclass(frozen=True)
class DiffusionSpec:
    """Speed and scale densities of a diffusion on (0, b).

    Either the densities or their logarithms may be given; the other pair is
    derived.  ``scale_function`` optionally returns ``s(x) - s(0)`` in closed
    form, otherwise it is computed by quadrature.  ``dlog_speed`` and
    ``dlog_scale`` optionally return ``d log m'/d log x`` and
    ``d log s'/d log x``; otherwise central differences are used.
    """

    speed_density: Optional[Callable] = None
    scale_density: Optional[Callable] = None
    b: float = math.inf
    s0: float = 0.0
    log_speed: Optional[Callable] = None
    log_scale: Optional[Callable] = None
    scale_function: Optional[Callable] = None
    dlog_speed: Optional[Callable] = None
    dlog_scale: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if self.log_speed is None and self.speed_density is None:
            raise DomainError("need speed_density or log_speed")
        if self.log_scale is None and self.scale_density is None:
            raise DomainError("need scale_density or log_scale")
        if not self.b > 0:
            raise DomainError("right endpoint b must be positive")
        if self.log_speed is None:
            object.__setattr__(self, "log_speed", _log_of(self.speed_density))
        if self.log_scale is None:
            object.__setattr__(self, "log_scale", _log_of(self.scale_density))
        if self.speed_density is None:
            ls = self.log_speed
            object.__setattr__(self, "speed_density", lambda x: np.exp(ls(x)))
        if self.scale_density is None:
            lsc = self.log_scale
            object.__setattr__(self, "scale_density", lambda x: np.exp(lsc(x)))

    # -- derived quantities --------------------------------------------------

    def scale(self, x):
        """``s(x) - s(0)``; quadrature in ``log x`` when no closed form is given."""
        if self.scale_function is not None:
            return self.scale_function(x)
        return np.exp(self.log_scale_integral(x)) if np.ndim(x) == 0 else \
            np.array([math.exp(self.log_scale_integral(v)) for v in np.ravel(x)]).reshape(np.shape(x))

    def log_scale_integral(self, x):
        """``log(s(x) - s(0))`` by quadrature of ``s'`` from 0."""
        if self.scale_function is not None:
            return math.log(float(self.scale_function(x)))
        lx = math.log(x)
        shift = float(self.log_scale(x)) + lx

        def f(xi):
            return math.exp(float(self.log_scale(math.exp(xi))) + xi - shift)

        val, err = integrate.quad(f, lx - 600.0, lx, epsabs=0.0, epsrel=1e-12, limit=200)
        if not val > 0 or not math.isfinite(val):
            raise ConvergenceError("s(x) - s(0) is not finite: boundary 0 is not regular or exit")
        return shift + math.log(val)

    def dlog_ratio(self, x):
        """``d/d log x`` of ``log(m'(x)/s'(x))``."""
        if self.dlog_speed is not None and self.dlog_scale is not None:
            return self.dlog_speed(x) - self.dlog_scale(x)
        h = 1e-4
        lo, hi = x * math.exp(-h), x * math.exp(h)
        if hi >= self.b:
            hi, lo, h2 = x, x * math.exp(-2 * h), h
            return ((self.log_speed(hi) - self.log_scale(hi))
                    - (self.log_speed(lo) - self.log_scale(lo))) / (2 * h2)
        return ((self.log_speed(hi) - self.log_scale(hi))
                - (self.log_speed(lo) - self.log_scale(lo))) / (2 * h)


@dataclass(frozen=True)
class EigenSolution:
    """``psi_lambda`` and its scale derivative on a grid."""

    lam: float
    nodes: np.ndarray
    psi_values: np.ndarray
    dpsi_ds_values: np.ndarray

    @property
    def lambda_(self):
        return self.lam


@dataclass(frozen=True)
class SpectralMeasure:
    """Atoms ``(location, mass)`` and/or an absolutely continuous density on ``[support_min, inf)``."""

    atoms: tuple = ()
    ac_density: Optional[Callable] = None
    support_min: float = 0.0
    atom_generator: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        for loc, mass in self.atoms:
            if loc < self.support_min - 1e-12 * max(1.0, abs(self.support_min)):
                raise DomainError("atom below support_min")
            if not mass > 0:
                raise DomainError("atom masses must be positive")

    def density(self, lam):
        if self.ac_density is None:
            return np.zeros_like(np.asarray(lam, dtype=float))
        lam = np.asarray(lam, dtype=float)
        return np.where(lam >= self.support_min, self.ac_density(np.maximum(lam, self.support_min)), 0.0)


# ---------------------------------------------------------------------------
# Start-up at the origin
# ---------------------------------------------------------------------------

def default_x0(spec):
    return 1e-8 * min(1.0, spec.b)


def _start_values(spec, lam, x0):
    """``(u0, v0)`` at ``x0`` with one Picard correction for ``v``.

    ``u0 = s(x0) - s(0)`` and ``v0 = 1 + lam * int_0^x0 (s(y) - s(0)) m'(y) dy``.
    """
    u0 = float(spec.scale(x0))
    if lam == 0.0:
        return u0, 1.0
    lx0 = math.log(x0)
    shift = math.log(u0) + float(spec.log_speed(x0)) + lx0

    def f(xi):
        y = math.exp(xi)
        return math.exp(math.log(float(spec.scale(y))) + float(spec.log_speed(y)) + xi - shift)

    val, _ = integrate.quad(f, lx0 - 60.0, lx0, epsabs=0.0, epsrel=1e-8, limit=100)
    return u0, 1.0 + lam * math.exp(shift) * val


# ---------------------------------------------------------------------------
# Eigenfunctions
# ---------------------------------------------------------------------------

def solve_psi(spec, lam, x_max, n_nodes=400, x0=None, rtol=1e-11, nodes=None):
    """Solve ``d/dm d/ds psi = lam psi`` with ``psi(0+) = 0``, ``dpsi/ds(0+) = 1``.

    The system ``du = v s'(x) dx``, ``dv = lam u m'(x) dx`` is integrated in
    ``log x`` with an 8th order Runge-Kutta method, starting from ``x0``.

    Parameters
    ----------
    spec : DiffusionSpec
    lam : float
        Eigenvalue; use a negative value for ``psi_{-lambda}``.
    x_max : float
        Right end of the grid, ``x0 < x_max < b``.
    nodes : array_like, optional
        Output nodes; default is a geometric grid from ``x0`` to ``x_max``.

    Returns
    -------
    EigenSolution
    """
    if x0 is None:
        x0 = default_x0(spec)
    if not (0 < x0 < x_max < spec.b):
        raise DomainError(f"need 0 < x0 < x_max < b, got x0={x0}, x_max={x_max}, b={spec.b}")
    u0, v0 = _start_values(spec, lam, x0)
    if nodes is None:
        nodes = np.geomspace(x0, x_max, n_nodes)
    nodes = np.asarray(nodes, dtype=float)
    ls, lm = spec.log_scale, spec.log_speed

    def rhs(xi, y):
        x = math.exp(xi)
        return [x * math.exp(float(ls(x))) * y[1], lam * x * math.exp(float(lm(x))) * y[0]]

    xi_nodes = np.log(nodes)
    sol = integrate.solve_ivp(rhs, (math.log(x0), float(xi_nodes[-1])), [u0, v0], method="DOP853",
                              t_eval=np.clip(xi_nodes, math.log(x0), xi_nodes[-1]),
                              rtol=rtol, atol=[1e-300, 1e-300])
    if not sol.success:
        raise ConvergenceError(f"solve_psi integration failed: {sol.message}")
    return EigenSolution(lam, nodes, sol.y[0].copy(), sol.y[1].copy())


def _log_forward(spec, lam, x0, xi_end, rtol):
    """Integrate ``(log u, log v)`` for ``lam >= 0``; returns the dense solution."""
    u0, v0 = _start_values(spec, lam, x0)
    ls, lm = spec.log_scale, spec.log_speed

    def rhs(xi, y):
        x = math.exp(xi)
        du = math.exp(xi + float(ls(x)) + y[1] - y[0])
        dv = lam * math.exp(xi + float(lm(x)) + y[0] - y[1]) if lam else 0.0
        return [du, dv]

    sol = integrate.solve_ivp(rhs, (math.log(x0), xi_end), [math.log(u0), math.log(v0)],
                              method="LSODA", dense_output=True, rtol=rtol, atol=1e-13)
    if not sol.success:
        raise ConvergenceError(f"psi integration failed: {sol.message}")
    return sol


def g_lambda(spec, lam, x, x0=None, rtol=1e-11, tail_rtol=1e-10):
    """``g_lam(x) = psi_lam(x) int_x^b s'(y)/psi_lam(y)^2 dy`` for ``lam >= 0``.

    ``psi_lam`` is integrated forward in log variables; the tail integral is
    accumulated backwards from a cut-off ``X`` which is pushed out until the
    convexity bound ``int_X^b ds/psi^2 <= 1/(psi(X) dpsi/ds(X))`` is below
    ``tail_rtol`` relative to the integral.  The bound is exact for
    ``lam = 0``, and there half of it is added back (``lam > 0``) or all of it.

    Accepts a scalar or an array of ``x``.
    """
    if lam < 0:
        raise DomainError("g_lambda requires lam >= 0")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if x0 is None:
        x0 = min(default_x0(spec), 0.5 * xs[xs > 0].min()) if np.any(xs > 0) else default_x0(spec)
    out = np.ones_like(xs)
    pos = xs > 0
    if not np.any(pos):
        return out if np.ndim(x) else float(out[0])
    xq = np.sort(xs[pos])
    ls = spec.log_scale
    x_hi = float(xq[-1])
    span = 4.0
    while True:
        X = max(x_hi, 1.0) * math.exp(span)
        if math.isfinite(spec.b) and X >= spec.b:
            X = spec.b * (1 - 1e-9)
        xi_X = math.log(X)
        fwd = _log_forward(spec, lam, x0, xi_X, rtol)

        def log_integrand(xi):
            return xi + float(ls(math.exp(xi))) - 2.0 * fwd.sol(xi)[0]

        U_X, V_X = fwd.sol(xi_X)
        log_bound = -(U_X + V_X)
        # int_x^X ds/psi^2 as suffix sums of segment integrals in log x
        edges = np.append(np.log(xq), xi_X)
        seg = np.array([_log_quad(log_integrand, edges[i], edges[i + 1], rtol=1e-12)
                        for i in range(len(xq))])
        logK = np.logaddexp.accumulate(seg[::-1])[::-1]
        if lam == 0:
            log_tail, log_err = log_bound, -math.inf
        else:
            log_tail = log_err = log_bound - math.log(2.0)
        if log_err - logK.min() <= math.log(tail_rtol):
            break
        if span > 400:
            raise ConvergenceError("g_lambda tail bound not small enough",
                                   estimate=math.exp(log_err - logK.min()))
        span *= 2.0
    U_x = np.array([fwd.sol(e)[0] for e in edges[:-1]])
    vals = np.exp(U_x + np.logaddexp(logK, log_tail))
    out[pos] = vals[np.argsort(np.argsort(xs[pos]))]
    return out if np.ndim(x) else float(out[0])


# ---------------------------------------------------------------------------
# Spectral bottom
# ---------------------------------------------------------------------------

def _phase_reaches_pi(spec, lam, x_max, x0, rtol=1e-9):
    """Integrate the modified Pruefer phase of ``psi_{-lam}``.

    With ``w = sqrt(lam m'/s')`` the substitution ``psi = r sin(theta)/sqrt(w)``,
    ``dpsi/ds = r sqrt(w) cos(theta)`` gives, in ``log x``,

        theta' = x sqrt(lam m' s') + 1/2 (d/dlog x) log(m'/s') sin(theta) cos(theta).

    Zeros of ``psi`` are the crossings of multiples of pi, which can only be
    crossed upwards.  Returns ``(has_zero, theta_end)``.
    """
    u0, v0 = _start_values(spec, -lam, x0)
    ls, lm = spec.log_scale, spec.log_speed
    half_log_lam = 0.5 * math.log(lam)
    w0 = math.exp(0.5 * (math.log(lam) + float(lm(x0)) - float(ls(x0))))
    th0 = math.atan2(w0 * u0, v0)

    def rhs(xi, y):
        x = math.exp(xi)
        sp = math.exp(xi + half_log_lam + 0.5 * (float(lm(x)) + float(ls(x))))
        return [sp + 0.5 * float(spec.dlog_ratio(x)) * math.sin(y[0]) * math.cos(y[0])]

    def hit(xi, y):
        return y[0] - math.pi
    hit.terminal = True
    hit.direction = 1

    sol = integrate.solve_ivp(rhs, (math.log(x0), math.log(x_max)), [th0], method="LSODA",
                              events=hit, rtol=rtol, atol=1e-12)
    if sol.status == -1:
        raise ConvergenceError(f"phase integration failed: {sol.message}")
    return sol.status == 1, float(sol.y[0][-1])


def has_zero(spec, lam, x_max, x0=None):
    """True when ``psi_{-lam}`` vanishes somewhere in ``(0, x_max]``."""
    if x0 is None:
        x0 = default_x0(spec)
    if lam <= 0:
        return False
    return _phase_reaches_pi(spec, lam, x_max, x0)[0]


def estimate_lambda0(spec, lam_hi, x_max, x0=None, rel_width=1e-5):
    """Bottom of the spectrum by bisection on the sign of ``psi_{-lambda}``.

    ``psi_{-lambda}`` is positive for ``lambda <= lambda0`` and changes sign
    above it.  The predicate "has a zero in (0, x_max]" is evaluated through
    the Pruefer phase, and bisected until the bracket is narrower than
    ``rel_width * lam_hi``.

    Raises
    ------
    BracketError
        If ``psi_{-lam_hi}`` has no zero before ``x_max``.  The message says
        whether the phase had stalled (``lam_hi`` too small) or was still
        climbing (``x_max`` too small).
    """
    if x0 is None:
        x0 = default_x0(spec)
    ok, th_end = _phase_reaches_pi(spec, lam_hi, x_max, x0)
    if not ok:
        # phase still above pi/2 means it is heading for pi: grid too short
        hint = "x_max too small" if th_end > 0.5 * math.pi else "lam_hi below lambda0"
        raise BracketError(f"psi_(-{lam_hi}) has no zero on (0, {x_max}] ({hint}; phase {th_end:.3f})")
    lo, hi = 0.0, float(lam_hi)
    while hi - lo > rel_width * lam_hi:
        mid = 0.5 * (lo + hi)
        if _phase_reaches_pi(spec, mid, x_max, x0)[0]:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Boundary integrals on dyadic blocks
# ---------------------------------------------------------------------------

def _blocks(end, d, b, k):
    """k-th geometric block toward ``end`` as ``(lo, hi)``."""
    if end == 0:
        return d * 2.0 ** (-k - 1), d * 2.0 ** (-k)
    if math.isinf(b):
        return d * 2.0 ** k, d * 2.0 ** (k + 1)
    return b - (b - d) * 2.0 ** (-k), b - (b - d) * 2.0 ** (-k - 1)


def _log_quad(logf, lo, hi, rtol=1e-10):
    """``log int_lo^hi exp(logf(y)) dy`` with the integrand rescaled."""
    mid = 0.5 * (lo + hi)
    shift = max(float(logf(lo)), float(logf(hi)), float(logf(mid)))
    if not math.isfinite(shift):
        return -math.inf

    def f(y):
        return math.exp(min(float(logf(y)) - shift, 700.0))

    val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rtol, limit=200)
    if val <= 0:
        return -math.inf
    return shift + math.log(val)


def _block_increment(outer, inner, lo, hi, log_c0, toward_zero):
    """``log int_block outer(y) * (C0 + int inner) dy``.

    Toward 0 the inner integral runs from ``y`` to the block top; toward ``b``
    from the block bottom to ``y``.  ``log_c0`` is the log of the inner
    integral accumulated over earlier blocks.
    """
    def log_inner(y):
        if toward_zero:
            part = _log_quad(inner, y, hi) if y < hi else -math.inf
        else:
            part = _log_quad(inner, lo, y) if y > lo else -math.inf
        return np.logaddexp(log_c0, part)

    return _log_quad(lambda y: float(outer(y)) + log_inner(y), lo, hi, rtol=1e-8)


def _log_diff(a, b):
    """``log(exp(a) - exp(b))`` for ``a >= b``."""
    if b == -math.inf:
        return a
    if a <= b:
        return -math.inf
    return a + math.log1p(-math.exp(b - a))


def _decide(log_incs, n_window=8, grow=math.log(0.7), shrink=math.log(0.5)):
    """'finite', 'infinite' or None from the last ``n_window`` log increments."""
    if len(log_incs) < n_window + 2:
        return None
    w = log_incs[-n_window:]
    if any(v == -math.inf for v in w):
        return "finite"
    change = w[-1] - w[0]
    if change >= grow:
        return "infinite"
    if change <= shrink:
        return "finite"
    return None


def boundary_integrals(spec, end, d=None, max_blocks=48):
    """Finiteness of ``I(end)`` and ``J(end)``.

    Uses the single-integral forms (Fubini)

    * toward 0:  ``I = int_0^d m'(y) (s(d) - s(y)) dy``, ``J = int_0^d s'(y) m(y, d) dy``
    * toward b:  ``I = int_d^b m'(y) (s(y) - s(d)) dy``, ``J = int_d^b s'(y) (m(y) - m(d)) dy``

    Each is accumulated on geometric blocks toward the endpoint.  It is
    declared infinite when the last 8 block increments have not shrunk below
    70% of the first of them, finite when they shrank by half.

    Returns
    -------
    dict with keys ``I_finite``, ``J_finite`` and the log partial-sum
    trajectories ``I_log_partial``, ``J_log_partial``.

    Raises
    ------
    InconclusiveError
        If no decision is reached within ``max_blocks`` blocks.
    """
    b = spec.b
    if d is None:
        d = 1.0 if math.isinf(b) else 0.5 * b
    toward_zero = end == 0
    lm, ls = spec.log_speed, spec.log_scale
    results = {}
    for name, outer, inner in (("I", lm, ls), ("J", ls, lm)):
        log_c0 = -math.inf
        log_incs, partial = [], []
        total = -math.inf
        decision = None
        for k in range(max_blocks):
            lo, hi = _blocks(end, d, b, k)
            inc = _block_increment(outer, inner, lo, hi, log_c0, toward_zero)
            log_incs.append(inc)
            total = np.logaddexp(total, inc)
            partial.append(float(total))
            log_c0 = np.logaddexp(log_c0, _log_quad(inner, lo, hi))
            decision = _decide(log_incs)
            if decision is not None:
                break
        if decision is None:
            raise InconclusiveError(f"{name}({end}) could not be classified",
                                    data={"I_log_partial": results.get("I_log_partial"),
                                          f"{name}_log_partial": partial})
        results[f"{name}_finite"] = decision == "finite"
        results[f"{name}_log_partial"] = partial
    return results


def classify_boundary(spec, end):
    """Feller class of the endpoint ``end`` (0 or ``spec.b``)."""
    if end not in (0, spec.b):
        raise DomainError("end must be 0 or b")
    r = boundary_integrals(spec, 0 if end == 0 else spec.b)
    i_fin, j_fin = r["I_finite"], r["J_finite"]
    if i_fin and j_fin:
        return BoundaryClass.REGULAR
    if j_fin:
        return BoundaryClass.EXIT
    if i_fin:
        return BoundaryClass.ENTRANCE
    return BoundaryClass.NATURAL


# ---------------------------------------------------------------------------
# Existence of QSDs and condition (S)
# ---------------------------------------------------------------------------

def _log_mass_tail(spec, d, max_blocks=60):
    """``log m(d_k, b)`` at the block edges ``d_k`` toward b, or None when infinite."""
    b = spec.b
    incs, edges = [], []
    for k in range(max_blocks):
        lo, hi = _blocks(b, d, b, k)
        incs.append(_log_quad(spec.log_speed, lo, hi))
        edges.append(lo)
        dec = _decide(incs)
        if dec == "infinite":
            return None, edges, incs
        if dec == "finite" and k > 20:
            # the tail beyond the last block is geometric
            w = incs[-8:]
            q = math.exp((w[-1] - w[0]) / 7.0) if w[0] > -math.inf and w[-1] > -math.inf else 0.0
            rest = incs[-1] + math.log(q / (1.0 - q)) if 0 < q < 1 else -math.inf
            incs.append(rest)
            break
    else:
        raise InconclusiveError("m(d, b) could not be decided", data={"log_increments": incs})
    # suffix sums give m(edge_k, b)
    tails = []
    acc = -math.inf
    for v in incs[::-1]:
        acc = np.logaddexp(acc, v)
        tails.append(acc)
    tails = tails[::-1][: len(edges)]
    return tails, edges, incs


def qsd_exists(spec, d=None, window=8):
    """Whether a non-minimal QSD exists (``b`` natural assumed).

    Tests ``m(d, b) < inf`` and boundedness of ``(s(x) - s(0)) m(x, b)`` on a
    geometric grid ``x -> b``.  ``d`` defaults to the middle of the probe
    grid, i.e. 1 for ``b = inf``.
    """
    b = spec.b
    if d is None:
        d = 1.0 if math.isinf(b) else 0.5 * b
    tails, edges, incs = _log_mass_tail(spec, d)
    if tails is None:
        return False
    log_s = []
    acc = math.log(float(spec.scale(d)))
    for k, lo in enumerate(edges):
        if k > 0:
            plo, phi = _blocks(b, d, b, k - 1)
            acc = float(np.logaddexp(acc, _log_quad(spec.log_scale, plo, phi)))
        log_s.append(acc)
    prod = np.array(log_s) + np.array(tails)
    w = prod[-window:]
    # unbounded products keep growing across the last blocks
    growing = np.all(np.diff(w) > 0) and (w[-1] - w[0]) > math.log(2.0)
    if growing:
        return False
    if w[-1] - w[0] > math.log(1.5):
        raise InconclusiveError("s(x) m(x, b) neither stabilises nor grows steadily",
                                data={"log_products": prod.tolist()})
    return True


def check_condition_S(spec, c, delta, n_blocks=40, window=8, return_ratios=False):
    """Sufficient check ``m(x, c] <= C (s(x) - s(0))^(-delta)`` as ``x -> 0``.

    Samples ``log(m(x, c] (s(x) - s(0))^delta)`` at ``x = c 2^-k`` and returns
    True when it does not keep growing over the last ``window`` samples.
    """
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if not 0 < c < spec.b:
        raise DomainError("need 0 < c < b")
    log_m = -math.inf
    ratios = []
    for k in range(n_blocks):
        lo, hi = c * 2.0 ** (-k - 1), c * 2.0 ** (-k)
        log_m = float(np.logaddexp(log_m, _log_quad(spec.log_speed, lo, hi)))
        try:
            log_s = math.log(float(spec.scale(lo)))
        except (ConvergenceError, ValueError):
            return (False, ratios) if return_ratios else False
        ratios.append(log_m + delta * log_s)
    w = np.array(ratios[-window:])
    ok = not (np.all(np.diff(w) > 0) and w[-1] - w[0] > math.log(1.1))
    ok = ok and all(math.isfinite(r) for r in ratios)
    return (ok, ratios) if return_ratios else ok
