"""NumPy reference implementations of the hot kernels.

These are the authoritative, always-available versions; the optional
compiled extension in _fast.pyx mirrors them bit-for-algorithm and is
picked up automatically when built.  Keep the two in sync.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"

# Ai(0) = 3^(-2/3)/Gamma(2/3), -Ai'(0) = 3^(-1/3)/Gamma(1/3)
_AI0 = 0.3550280538878172392600631860041831763980
_AIP0 = 0.2588194037928067984051835601892039634793

# method switch points: Maclaurin series between them, Poincare
# asymptotics outside.  The negative-side switch sits at -8.5 rather
# than the textbook ~-6 so the truncated asymptotic series still meets
# 1e-10 absolute accuracy where it takes over.
_Z_NEG = -8.5
_Z_POS = 6.5
_N_SERIES = 44
_N_ASYM = 13

# u_k coefficients of the Airy asymptotic expansions
_U = np.empty(_N_ASYM)
_U[0] = 1.0
for _k in range(_N_ASYM - 1):
    _U[_k + 1] = _U[_k] * (6 * _k + 5) * (6 * _k + 3) * (6 * _k + 1) / (216.0 * (_k + 1) * (2 * _k + 1))


_RECIP_F = np.array([1.0 / ((3 * k + 2) * (3 * k + 3)) for k in range(_N_SERIES)])
_RECIP_G = np.array([1.0 / ((3 * k + 3) * (3 * k + 4)) for k in range(_N_SERIES)])


def _airy_series(z: np.ndarray) -> np.ndarray:
    """Maclaurin series Ai(z) = Ai(0) f(z) + Ai'(0) g(z)."""
    z3 = z * z * z
    f = np.ones_like(z)
    g = z.copy()
    tf = np.ones_like(z)
    tg = z.copy()
    for k in range(_N_SERIES):
        tf = tf * z3 * _RECIP_F[k]
        tg = tg * z3 * _RECIP_G[k]
        f += tf
        g += tg
    return _AI0 * f - _AIP0 * g


def _airy_asym_pos(z: np.ndarray) -> np.ndarray:
    """Decaying expansion for large positive z."""
    zeta = 2.0 / 3.0 * z * np.sqrt(z)
    inv = 1.0 / zeta
    s = np.zeros_like(z)
    term = np.ones_like(z)
    for k in range(_N_ASYM):
        s += term * _U[k] * (-1.0) ** k
        term = term * inv
    return np.exp(-zeta) * s / (2.0 * np.sqrt(np.pi) * z**0.25)


def _airy_asym_neg(z: np.ndarray) -> np.ndarray:
    """Oscillatory expansion for large negative z."""
    w = -z
    zeta = 2.0 / 3.0 * w * np.sqrt(w)
    inv = 1.0 / zeta
    ph = zeta - 0.25 * np.pi
    even = np.zeros_like(w)
    odd = np.zeros_like(w)
    zk = np.ones_like(w)
    for k in range(_N_ASYM):
        contrib = _U[k] * zk * (-1.0) ** (k // 2)
        if k % 2 == 0:
            even += contrib
        else:
            odd += contrib
        zk = zk * inv
    return (np.cos(ph) * even + np.sin(ph) * odd) / (np.sqrt(np.pi) * w**0.25)


def airy_ai_array(z: np.ndarray) -> np.ndarray:
    """Airy function Ai on an arbitrary float array."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    neg = z < _Z_NEG
    pos = z > _Z_POS
    mid = ~(neg | pos)
    if np.any(mid):
        out[mid] = _airy_series(z[mid])
    if np.any(neg):
        out[neg] = _airy_asym_neg(z[neg])
    if np.any(pos):
        out[pos] = _airy_asym_pos(z[pos])
    return out


def phi_wigner_values(x: np.ndarray, p: np.ndarray, phi: float) -> np.ndarray:
    """Wigner function of the measurement-basis element |phi><phi| on the
    tensor grid x (axis 0) times p (axis 1).

    W_phi(X, P) = (2 P^2 - X/phi) Ai[(2 phi P^2 - 2 X)/s] / (pi |2 phi|^(1/3))

    with s the real signed cube root of 2 phi.  Delta-normalized basis
    element, so the grid is not (and must not be) trace normalized.
    """
    if phi == 0.0:
        raise ValueError("phi must be nonzero")
    s = np.copysign(abs(2.0 * phi) ** (1.0 / 3.0), phi)
    X = x[:, None]
    P2 = (p * p)[None, :]
    arg = (2.0 * phi * P2 - 2.0 * X) / s
    pref = (2.0 * P2 - X / phi) / (np.pi * abs(s))
    return pref * airy_ai_array(arg)


class JacobiNonconvergence(RuntimeError):
    """Cyclic Jacobi failed to push the off-diagonal norm below tolerance."""


def jacobi_eigh(a: np.ndarray, *, tol: float = 1e-12,
                max_sweeps: int = 40) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues descending, eigenvector columns).  Sweeps
    rotate every upper off-diagonal element in row order until the
    off-diagonal Frobenius norm drops below tol.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.eye(n, dtype=complex)
    if n == 1:
        return a.real.diagonal().copy(), v

    def offnorm(m):
        od = m - np.diag(np.diag(m))
        return np.sqrt(np.sum(np.abs(od) ** 2))

    for _ in range(max_sweeps):
        if offnorm(a) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < tol / (4.0 * n):
                    continue
                e = apq / mag
                tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # A <- U^H A U with U = [[c, s e],[ -s conj(e), c]] on (p, q)
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * np.conj(e) * col_q
                a[:, q] = s * e * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * e * row_q
                a[q, :] = s * np.conj(e) * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * np.conj(e) * vq
                v[:, q] = s * e * vp + c * vq
    else:
        raise JacobiNonconvergence(
            f"off-diagonal norm {offnorm(a):.3e} after {max_sweeps} sweeps (tol {tol:.1e})")

    lam = np.real(np.diag(a))
    order = np.argsort(lam)[::-1]
    return lam[order], v[:, order]
