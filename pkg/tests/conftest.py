"""Shared independent oracles for the test suite.

Everything here is deliberately written against first principles
(quadrature, Fourier transforms, thermal sums) and never calls the
package code paths it is used to check.
"""

from __future__ import annotations

import math

import numpy as np
import pytest


# ---------------------------------------------------------------------------
# Airy function by quadrature of the oscillatory integral
# Ai(z) = (1/pi) Re int_0^inf exp(i(t^3/3 + z t)) dt, real-axis panels to
# just past the turning point, then a pi/6-rotated decaying tail.
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _gl_panel(f, a, b):
    x = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
    return 0.5 * (b - a) * np.sum(_GL_WEIGHTS * f(x))


def airy_quadrature(z: float) -> float:
    """High-accuracy Ai(z) for z in roughly [-40, 40]."""
    z = float(z)
    t0 = 1.5 * math.sqrt(max(0.0, -z)) + 2.5

    def osc(t):
        return np.exp(1j * (t**3 / 3.0 + z * t))

    total = 0j
    n_panels = max(40, int(8 * (t0**3 / 3 + abs(z) * t0) / (2 * math.pi)) + 8)
    edges = np.linspace(0.0, t0, n_panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        total += _gl_panel(osc, a, b)

    # rotated tail t = t0 + e^{i pi/6} s; |integrand| decays at least
    # like exp(-s * (t0^2 + z)/2)
    rot = complex(math.cos(math.pi / 6.0), math.sin(math.pi / 6.0))
    rate = max((t0 * t0 + z) / 2.0, 1.0)
    s_max = 60.0 / rate

    def tail(s):
        t = t0 + rot * s
        return np.exp(1j * (t**3 / 3.0 + z * t)) * rot

    edges = np.linspace(0.0, s_max, 41)
    for a, b in zip(edges[:-1], edges[1:]):
        total += _gl_panel(tail, a, b)
    return float(total.real / math.pi)


# ---------------------------------------------------------------------------
# Brute-force Wigner transform of the measurement-basis states
# |phi> = (2 pi)^{-1/2} int p e^{-i phi p^3/3} |p> dp
# on a truncated, smoothly tapered momentum grid.
# ---------------------------------------------------------------------------

def _phi_wavefunction_dense(phi: float, p_max: float = 45.0, n: int = 1 << 20,
                            pad: int = 8):
    dp = 2.0 * p_max / n
    p = -p_max + dp * np.arange(n)
    f = p * np.exp(-1j * phi * p**3 / 3.0) / (2.0 * math.pi)
    f = f * np.exp(-((np.abs(p) / (0.85 * p_max)) ** 24))
    n_pad = n * pad
    big = np.zeros(n_pad, dtype=complex)
    big[:n] = f
    dx = 2.0 * math.pi / (n_pad * dp)
    psi = np.fft.ifft(big) * n_pad * dp
    x = dx * np.arange(n_pad)
    psi = psi * np.exp(-1j * x * p_max)
    x = np.where(x > math.pi / dp, x - 2.0 * math.pi / dp, x)
    order = np.argsort(x)
    return x[order], psi[order], dx


def _cubic_interp(x0, dx, vals, xq):
    idx = (xq - x0) / dx
    i1 = np.floor(idx).astype(int)
    t = idx - i1
    vm, v0, v1, v2 = vals[i1 - 1], vals[i1], vals[i1 + 1], vals[i1 + 2]
    return v0 + 0.5 * t * (v1 - vm + t * (2 * vm - 5 * v0 + 4 * v1 - v2
                                          + t * (3 * (v0 - v1) + v2 - vm)))


def phi_wigner_bruteforce(phi: float, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    """W(x, p) of |phi><phi| by direct y-quadrature of the Wigner integral."""
    xg, psi, dx = _phi_wavefunction_dense(phi)
    y = np.linspace(-10.0, 10.0, 8001)
    w = np.empty((xs.size, ps.size))
    for i, xv in enumerate(xs):
        a = _cubic_interp(xg[0], dx, psi, xv - y)
        b = np.conj(_cubic_interp(xg[0], dx, psi, xv + y))
        g = a * b
        ph = np.exp(2j * np.outer(ps, y))
        w[i, :] = ((ph * g).sum(axis=1) * (y[1] - y[0]) / math.pi).real
    return w


# ---------------------------------------------------------------------------
# phi response of the post-click state by a 1D Fourier reduction: every
# x and p integral of the Gaussian-times-polynomial state is analytic,
# leaving a single oscillatory q integral.
# ---------------------------------------------------------------------------

def phi_response_oracle(phi: float, var_x: float, var_p: float, c: float,
                        theta: float = 0.0, n_q: int = 60001,
                        q_span: float = 9.0) -> tuple[float, float]:
    """(p(phi; theta), d p/d theta) for the photon-subtracted Gaussian."""
    u = c * c / 4.0
    q_max = q_span / math.sqrt(2.0 * var_x)
    q = np.linspace(-q_max, q_max, n_q)
    k = 2.0 * q
    alpha = 1.0 / (2.0 * var_p) + 2j * phi * q
    m0 = 1.0 / np.sqrt(2.0 * var_p * alpha)
    m2 = m0 / (2.0 * alpha)
    m4 = 3.0 * m0 / (4.0 * alpha**2)
    shape = np.exp(-var_x * k**2 / 2.0) / var_p * (
        (m4 - 0.25 * k**2 * m2) - u * k**2 * (m2 - 0.25 * k**2 * m0))
    ph = np.exp(-2j * phi * q**3 / 3.0 + 2j * q * theta)
    val = np.trapezoid(ph * shape, q) / math.pi
    dval = np.trapezoid(2j * q * ph * shape, q) / math.pi
    return float(val.real), float(dval.real)


# ---------------------------------------------------------------------------
# Gaussian displacement QFI by the thermal-sum closed form (independent
# of the grid/Fock pipeline).
# ---------------------------------------------------------------------------

def gaussian_qfi_oracle(var_x: float, var_p: float, n_cut: int = 400) -> float:
    """QFI for X displacement of a zero-mean Gaussian with covariance
    diag(var_x, var_p), via the squeezed-thermal eigendecomposition."""
    nu = 2.0 * math.sqrt(var_x * var_p)
    nbar = (nu - 1.0) / 2.0
    scale = 2.0 * var_p / nu  # generator rescaling into the thermal frame
    lam = np.array([nbar**n / (nbar + 1.0) ** (n + 1) for n in range(n_cut)])
    total = 0.0
    for n in range(n_cut - 1):
        den = lam[n] + lam[n + 1]
        if abs(den) < 1e-300:
            continue
        total += 2.0 * (lam[n] - lam[n + 1]) ** 2 / den * (n + 1)
    return scale * total


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
