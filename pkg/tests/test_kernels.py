"""Compiled kernels agree with the numpy fallback."""

import numpy as np
import pytest
from scipy import special

from qsdlab import _fallback, _kernels

compiled = pytest.importorskip("qsdlab._core")


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 2.5, 17.0])
@pytest.mark.parametrize("scaled", [False, True])
def test_log_bessel_i_backends_agree(nu, scaled):
    x = np.geomspace(1e-8, 1e4, 400)
    a = compiled.log_bessel_i_array(nu, x, scaled)
    b = _fallback.log_bessel_i_array(nu, x, scaled)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_log_bessel_i_against_scipy():
    x = np.geomspace(1e-3, 500, 200)
    for nu in (0.0, 1.5, 6.0):
        ref = np.log(special.ive(nu, x))
        assert np.allclose(_kernels.log_bessel_i_array(nu, x, True), ref, rtol=1e-12, atol=1e-13)


def _run(mod, *extra):
    table = np.linspace(0.0, 0.3, 200)
    return mod.euler_absorb(1.0, 0.0, 1.0, 1e-3, 5000, 77, 13, 300, table, 0.01, 1e-2, *extra)


def test_euler_absorb_backends_agree():
    a = _run(compiled, 1)
    b = _run(_fallback)
    assert np.array_equal(a, b)
    assert (a >= 0).sum() > 200


def test_euler_absorb_thread_count_does_not_matter():
    assert np.array_equal(_run(compiled, 1), _run(compiled, 4))


def test_backend_flag():
    assert _kernels.BACKEND in ("compiled", "numpy")
