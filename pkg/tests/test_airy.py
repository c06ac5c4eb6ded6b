import math

import numpy as np
import pytest

from conftest import airy_quadrature
from hybridspin.wigner import airy_ai, airy_ai_array

AI0 = 0.3550280538878172392600631860041831763980


def test_value_at_origin_via_gamma_identity():
    # Ai(0) = 3^(-2/3)/Gamma(2/3)
    assert airy_ai(0.0) == pytest.approx(3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0),
                                         abs=1e-14)
    assert airy_ai(0.0) == pytest.approx(AI0, abs=1e-14)


def test_oracle_agreement_random_points(rng):
    z = rng.uniform(-12.0, 8.0, size=100)
    for zv in z:
        assert airy_ai(float(zv)) == pytest.approx(airy_quadrature(float(zv)),
                                                   abs=1e-9)


def test_absolute_accuracy_window():
    z = np.linspace(-15.0, 15.0, 601)
    ours = airy_ai_array(z)
    ref = np.array([airy_quadrature(float(v)) for v in z])
    assert np.max(np.abs(ours - ref)) < 1e-10


def test_decay_region_positive_monotone():
    z = np.linspace(3.0, 12.0, 200)
    vals = airy_ai_array(z)
    assert np.all(vals > 0)
    assert np.all(np.diff(vals) < 0)


def test_defining_ode_residual_central_difference():
    z = np.linspace(-5.0, 5.0, 12001)
    h = z[1] - z[0]
    ai = airy_ai_array(z)
    resid = (ai[2:] - 2 * ai[1:-1] + ai[:-2]) / h**2 - z[1:-1] * ai[1:-1]
    assert np.max(np.abs(resid)) < 1e-6


def test_deep_oscillatory_regime_against_oracle():
    for zv in (-20.0, -35.0, -60.0):
        assert airy_ai(zv) == pytest.approx(airy_quadrature(zv), abs=1e-11)


def test_array_matches_scalar():
    z = np.array([-11.3, -2.0, 0.0, 1.7, 9.4])
    arr = airy_ai_array(z)
    for zi, vi in zip(z, arr):
        assert vi == airy_ai(float(zi))


def test_backends_agree():
    from hybridspin._kernels import _ref
    try:
        from hybridspin._kernels import _fast
    except ImportError:
        pytest.skip("compiled lane not built")
    z = np.linspace(-120.0, 14.0, 20001)
    assert np.max(np.abs(_ref.airy_ai_array(z) - _fast.airy_ai_array(z))) < 1e-13
