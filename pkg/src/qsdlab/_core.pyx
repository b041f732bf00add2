# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: vectorized log I_nu and the Euler absorption loop.

Same algorithms and random streams as ``_fallback.py``.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport log, sqrt, fabs, lgamma, INFINITY
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef double I_ASYM_FACTOR = 0.8
cdef double I_ASYM_FLOOR = 30.0
cdef double PI = 3.141592653589793
cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef double _log_bessel_i(double nu, double x, bint scaled) noexcept nogil:
    cdef double mu, term, total, prev, a, h2
    cdef int k, n
    if x == 0.0:
        return 0.0 if nu == 0.0 else -INFINITY
    if x > I_ASYM_FACTOR * (I_ASYM_FLOOR if I_ASYM_FLOOR > nu * nu else nu * nu):
        mu = 4.0 * nu * nu
        term = 1.0
        total = 1.0
        prev = INFINITY
        for k in range(1, 400):
            term = -term * (mu - (2 * k - 1) * (2 * k - 1)) / (8.0 * k * x)
            a = fabs(term)
            if a == 0.0 or a > prev:
                break
            total += term
            if a <= 1e-17 * fabs(total):
                break
            prev = a
        if scaled:
            return -0.5 * log(2.0 * PI * x) + log(total)
        return x - 0.5 * log(2.0 * PI * x) + log(total)
    h2 = 0.25 * x * x
    term = 1.0
    total = 1.0
    n = 0
    while True:
        n += 1
        term = term * h2 / (n * (n + nu))
        total += term
        if term < 1e-17 * total and n > 0.5 * x:
            break
    if scaled:
        return nu * log(0.5 * x) - lgamma(nu + 1.0) + log(total) - x
    return nu * log(0.5 * x) - lgamma(nu + 1.0) + log(total)


def log_bessel_i_array(double nu, x, bint scaled=False):
    """Elementwise ``log I_nu(x)`` for a fixed order ``nu >= 0``.

    With ``scaled`` the result is ``log(e^{-x} I_nu(x))``, computed without
    forming ``x`` and subtracting it on the asymptotic branch.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xf = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(xf)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        out[i] = _log_bessel_i(nu, xf[i], scaled)
    return out.reshape(np.shape(x))


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _splitmix(uint64_t *z) noexcept nogil:
    cdef uint64_t r
    z[0] = z[0] + GOLDEN
    r = z[0]
    r = (r ^ (r >> 30)) * 0xBF58476D1CE4E5B9ULL
    r = (r ^ (r >> 27)) * 0x94D049BB133111EBULL
    return r ^ (r >> 31)


cdef inline double _uniform(uint64_t *s) noexcept nogil:
    cdef uint64_t result = s[0] + s[3]
    cdef uint64_t t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return (<double>(result >> 11) + 0.5) * (1.0 / 9007199254740992.0)


cdef int64_t _one_path(double x0, double a0, double beta, double dt, int64_t n_steps,
                       uint64_t seed, uint64_t path, const double *table, Py_ssize_t n_tab,
                       double r_step, double x_abs) noexcept nogil:
    cdef uint64_t s[4]
    cdef uint64_t z = seed ^ (path * GOLDEN)
    cdef int j
    cdef int64_t step
    cdef double x = x0, sq = sqrt(2.0 * dt), drift, r, w, u, v, r2, f, g
    cdef double spare = 0.0
    cdef bint has_spare = False
    cdef Py_ssize_t i
    for j in range(4):
        s[j] = _splitmix(&z)
    for step in range(1, n_steps + 1):
        if has_spare:
            g = spare
            has_spare = False
        else:
            while True:
                u = 2.0 * _uniform(s) - 1.0
                v = 2.0 * _uniform(s) - 1.0
                r2 = u * u + v * v
                if r2 < 1.0 and r2 > 0.0:
                    break
            f = sqrt(-2.0 * log(r2) / r2)
            g = u * f
            spare = v * f
            has_spare = True
        drift = a0 - beta * x
        if n_tab > 1:
            r = sqrt(x) / r_step
            i = <Py_ssize_t>r
            if i > n_tab - 2:
                i = n_tab - 2
            w = r - i
            drift = drift + (1.0 - w) * table[i] + w * table[i + 1]
        x = x + drift * dt + sq * sqrt(x) * g
        if x <= x_abs:
            return step
    return -1


def euler_absorb(double x0, double a0, double beta, double dt, long n_steps,
                 unsigned long long seed, long first_path, long n_paths,
                 table, double r_step, double x_abs, int n_threads=1):
    """Absorption step index per path (``-1`` when alive after ``n_steps``).

    Paths run independently with their own stream, so the result does not
    depend on ``n_threads``.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tab = np.ascontiguousarray(table, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.int64_t, ndim=1] hit = np.empty(n_paths, dtype=np.int64)
    cdef const double *tp = &tab[0] if tab.shape[0] > 0 else NULL
    cdef Py_ssize_t n_tab = tab.shape[0]
    cdef Py_ssize_t k
    cdef int64_t *hp = &hit[0] if n_paths > 0 else NULL
    if n_paths <= 0:
        return hit
    if n_threads < 1:
        n_threads = 1
    for k in prange(n_paths, nogil=True, num_threads=n_threads, schedule="dynamic", chunksize=64):
        hp[k] = _one_path(x0, a0, beta, dt, n_steps, seed, <uint64_t>(first_path + k),
                          tp, n_tab, r_step, x_abs)
    return hit
