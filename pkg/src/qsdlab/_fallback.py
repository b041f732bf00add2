"""Pure numpy versions of the hot kernels.

These mirror ``_core.pyx`` operation for operation.  The random streams are
the same (xoshiro256+ seeded by splitmix64 from ``(seed, path index)``), so a
path simulated here consumes the same uniforms as in the compiled kernel.
"""

import math

import numpy as np

from .specfun import I_ASYMPTOTIC_FACTOR, I_ASYMPTOTIC_FLOOR

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = 0x9E3779B97F4A7C15


# ---------------------------------------------------------------------------
# log I_nu on arrays
# ---------------------------------------------------------------------------

def log_bessel_i_array(nu, x, scaled=False):
    """Elementwise ``log I_nu(x)`` for a fixed order ``nu >= 0``.

    With ``scaled`` the result is ``log(e^{-x} I_nu(x))``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    flat_x = x.ravel()
    flat = out.ravel()
    thresh = I_ASYMPTOTIC_FACTOR * max(I_ASYMPTOTIC_FLOOR, nu * nu)
    big = flat_x > thresh
    zero = flat_x == 0.0
    small = ~big & ~zero
    flat[zero] = 0.0 if nu == 0 else -np.inf
    if np.any(big):
        xb = flat_x[big]
        mu = 4.0 * nu * nu
        term = np.ones_like(xb)
        total = np.ones_like(xb)
        prev = np.full_like(xb, np.inf)
        active = np.ones(xb.shape, dtype=bool)
        for k in range(1, 400):
            term = -term * (mu - (2 * k - 1) ** 2) / (8.0 * k * xb)
            a = np.abs(term)
            grow = a > prev
            active &= ~grow
            total = np.where(active, total + term, total)
            active &= ~(a <= 1e-17 * np.abs(total))
            prev = a
            if not active.any():
                break
        flat[big] = (0.0 if scaled else xb) - 0.5 * np.log(2.0 * np.pi * xb) + np.log(total)
    if np.any(small):
        xs = flat_x[small]
        h2 = 0.25 * xs * xs
        term = np.ones_like(xs)
        total = np.ones_like(xs)
        n_max = int(0.5 * xs.max()) + 60
        for n in range(1, n_max + 1):
            term = term * h2 / (n * (n + nu))
            total = total + term
            if n > 0.5 * xs.max() and np.all(term < 1e-17 * total):
                break
        flat[small] = nu * np.log(0.5 * xs) - math.lgamma(nu + 1.0) + np.log(total) - (xs if scaled else 0.0)
    return out


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

def _splitmix64(z):
    """One splitmix64 step on a uint64 array; returns ``(new_state, output)``."""
    with np.errstate(over="ignore"):
        z = z + np.uint64(_GOLDEN)
        r = z
        r = (r ^ (r >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        r = (r ^ (r >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        r = r ^ (r >> np.uint64(31))
    return z, r


def seed_streams(seed, path_index):
    """xoshiro256+ states (4 x n uint64) for the given path indices."""
    idx = np.asarray(path_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ (idx * np.uint64(_GOLDEN))
    state = np.empty((4, idx.size), dtype=np.uint64)
    for j in range(4):
        z, state[j] = _splitmix64(z)
    return state


def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


def _next_uniform(s, mask):
    """Advance the streams selected by ``mask``; uniforms in (0, 1)."""
    s0, s1, s2, s3 = s[0, mask], s[1, mask], s[2, mask], s[3, mask]
    with np.errstate(over="ignore"):
        result = s0 + s3
    t = s1 << np.uint64(17)
    s2 = s2 ^ s0
    s3 = s3 ^ s1
    s1 = s1 ^ s2
    s0 = s0 ^ s3
    s2 = s2 ^ t
    s3 = _rotl(s3, 45)
    s[0, mask], s[1, mask], s[2, mask], s[3, mask] = s0, s1, s2, s3
    # top 53 bits, shifted off zero
    return ((result >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def _normals(s, alive, has_spare, spare):
    """Standard normals for every alive path (Marsaglia polar with caching)."""
    out = np.zeros(alive.shape)
    use_spare = alive & has_spare
    out[use_spare] = spare[use_spare]
    has_spare[use_spare] = False
    need = alive & ~use_spare
    while need.any():
        u = 2.0 * _next_uniform(s, need) - 1.0
        v = 2.0 * _next_uniform(s, need) - 1.0
        r2 = u * u + v * v
        ok = (r2 < 1.0) & (r2 > 0.0)
        idx = np.flatnonzero(need)
        good = idx[ok]
        f = np.sqrt(-2.0 * np.log(r2[ok]) / r2[ok])
        out[good] = u[ok] * f
        spare[good] = v[ok] * f
        has_spare[good] = True
        need[good] = False
    return out


# ---------------------------------------------------------------------------
# Euler-Maruyama with absorption
# ---------------------------------------------------------------------------

def euler_absorb(x0, a0, beta, dt, n_steps, seed, first_path, n_paths,
                 table, r_step, x_abs):
    """Simulate ``dX = (a0 - beta X + c(X)) dt + sqrt(2X) dW`` until absorption.

    ``c`` is the h-transform drift correction tabulated on a uniform grid in
    ``sqrt(x)`` with spacing ``r_step`` (linear interpolation, linear
    extrapolation beyond the last node).  Returns the absorption step index
    per path, ``-1`` for paths still alive after ``n_steps``.
    """
    s = seed_streams(seed, np.arange(first_path, first_path + n_paths))
    x = np.full(n_paths, float(x0))
    hit = np.full(n_paths, -1, dtype=np.int64)
    alive = np.ones(n_paths, dtype=bool)
    has_spare = np.zeros(n_paths, dtype=bool)
    spare = np.zeros(n_paths)
    sq = math.sqrt(2.0 * dt)
    table = np.asarray(table, dtype=float)
    n_tab = table.size
    for step in range(1, n_steps + 1):
        z = _normals(s, alive, has_spare, spare)
        xa = x[alive]
        drift = a0 - beta * xa
        if n_tab > 1:
            r = np.sqrt(xa) / r_step
            i = np.minimum(r.astype(np.int64), n_tab - 2)
            w = r - i
            drift = drift + (1.0 - w) * table[i] + w * table[i + 1]
        xa = xa + drift * dt + sq * np.sqrt(xa) * z[alive]
        x[alive] = xa
        dead = np.flatnonzero(alive)[xa <= x_abs]
        hit[dead] = step
        alive[dead] = False
        if not alive.any():
            break
    return hit
