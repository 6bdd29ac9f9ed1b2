import math

import numpy as np
import pytest
from scipy import integrate

from sskoverlap.quadrature import (GAUSS_WEIGHTS, KRONROD_NODES, KRONROD_WEIGHTS,
                                   geometric_breakpoints, gk21, integrate_adaptive,
                                   integrate_fixed)


def test_rule_constants():
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    gx, gw = np.polynomial.legendre.leggauss(10)
    np.testing.assert_allclose(KRONROD_NODES[GAUSS_WEIGHTS > 0], gx, atol=1e-15)
    np.testing.assert_allclose(GAUSS_WEIGHTS[GAUSS_WEIGHTS > 0], gw, atol=1e-15)


@pytest.mark.parametrize("deg", [0, 5, 19, 31])
def test_polynomial_exactness(deg):
    exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
    k, g = gk21(lambda x: x ** deg, np.array([-1.0]), np.array([1.0]))
    assert k[0] == pytest.approx(exact, abs=1e-14)
    if deg <= 19:
        assert g[0] == pytest.approx(exact, abs=1e-14)


@pytest.mark.parametrize("f, a, b", [
    (lambda x: np.exp(-x) * np.cos(3 * x), 0.0, 20.0),
    (lambda x: 1.0 / (1e-2 + x * x), -1.0, 1.0),
    (lambda x: np.exp(-100 * (x - 0.3) ** 2), 0.0, 2.0),
])
def test_adaptive_vs_quadpack(f, a, b):
    ref = integrate.quad(f, a, b, epsabs=1e-13, limit=500)[0]
    res = integrate_adaptive(f, [a, 0.5 * (a + b), b], 1e-12)
    assert res.converged
    assert res.value.real == pytest.approx(ref, abs=1e-10)


def test_endpoint_singularity_reports_unconverged():
    # sqrt at 0 needs more bisections than max_depth allows at this tolerance
    res = integrate_adaptive(np.sqrt, [0.0, 2.0], 1e-12, max_depth=20)
    assert not res.converged
    assert res.value.real == pytest.approx(2 * 2 ** 1.5 / 3, abs=1e-8)


def test_complex_integrand():
    res = integrate_adaptive(lambda x: np.exp(1j * 5 * x), [0.0, math.pi], 1e-13)
    assert res.value == pytest.approx((np.exp(5j * math.pi) - 1) / 5j, abs=1e-12)


def test_extending_breakpoints_keeps_existing_panels():
    f = lambda x: np.exp(-x) * np.sin(x)
    short = integrate_adaptive(f, geometric_breakpoints(0.0, 16.0), 1e-12)
    long = integrate_adaptive(f, geometric_breakpoints(0.0, 32.0), 1e-12)
    extra = integrate_adaptive(f, [16.0, 32.0], 1e-12)
    assert long.value - short.value == pytest.approx(extra.value, abs=1e-15)


def test_fixed_rule():
    assert integrate_fixed(np.cos, 0.0, math.pi / 2, 20) == pytest.approx(1.0, abs=1e-15)


def test_geometric_breakpoints():
    np.testing.assert_array_equal(geometric_breakpoints(0.0, 10.0), [0, 1, 2, 4, 8, 10])
    np.testing.assert_array_equal(geometric_breakpoints(0.0, 20.0)[:5], [0, 1, 2, 4, 8])
    with pytest.raises(ValueError):
        geometric_breakpoints(1.0, 1.0)


def test_bad_breakpoints():
    with pytest.raises(ValueError):
        integrate_adaptive(np.cos, [1.0, 0.0], 1e-8)
