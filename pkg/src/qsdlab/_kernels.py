"""Selects the compiled kernels when available, else the numpy fallback.

Set ``QSDLAB_PURE_PYTHON=1`` to force the fallback.  ``BACKEND`` records the
choice ("compiled" or "numpy").
"""

import os

from . import _fallback

BACKEND = "numpy"
_impl = _fallback
if not os.environ.get("QSDLAB_PURE_PYTHON"):
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback


def n_threads():
    """Thread cap from ``QSDLAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("QSDLAB_THREADS", "1")))
    except ValueError:
        return 1


def log_bessel_i_array(nu, x, scaled=False):
    return _impl.log_bessel_i_array(nu, x, scaled)


def euler_absorb(x0, a0, beta, dt, n_steps, seed, first_path, n_paths, table, r_step, x_abs):
    if _impl is _fallback:
        return _fallback.euler_absorb(x0, a0, beta, dt, n_steps, seed, first_path, n_paths,
                                      table, r_step, x_abs)
    return _impl.euler_absorb(x0, a0, beta, dt, n_steps, seed, first_path, n_paths,
                              table, r_step, x_abs, n_threads())
