# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot kernels (Airy fills, phi-basis Wigner
grids, cyclic Jacobi).  Mirrors _ref.py; selected automatically at
import when the extension built."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, cos, sin, fabs, copysign, hypot, cbrt, M_PI

from ._ref import JacobiNonconvergence

cnp.import_array()

BACKEND = "compiled"

cdef double AI0 = 0.3550280538878172392600631860041831763980
cdef double AIP0 = 0.2588194037928067984051835601892039634793
cdef double Z_NEG = -8.5
cdef double Z_POS = 6.5
cdef int N_SERIES = 44
cdef int N_ASYM = 13

cdef double[13] U_COEF          # signed for the decaying branch: (-1)^k u_k
cdef double[13] U_OSC           # signed for the oscillatory branch: (-1)^(k//2) u_k
cdef double[44] RECIP_F         # 1/((3k+2)(3k+3))
cdef double[44] RECIP_G         # 1/((3k+3)(3k+4))

def _init_tables():
    u = [1.0]
    for k in range(12):
        u.append(u[k] * (6 * k + 5) * (6 * k + 3) * (6 * k + 1) / (216.0 * (k + 1) * (2 * k + 1)))
    for k in range(13):
        U_COEF[k] = u[k] * (-1.0) ** k
        U_OSC[k] = u[k] * (-1.0) ** (k // 2)
    for k in range(44):
        RECIP_F[k] = 1.0 / ((3 * k + 2) * (3 * k + 3))
        RECIP_G[k] = 1.0 / ((3 * k + 3) * (3 * k + 4))

_init_tables()


cdef inline double airy_scalar(double z) nogil:
    cdef double z3, f, g, tf, tg, w, zeta, ph, even, odd, zk, s, inv
    cdef int k
    if Z_NEG <= z <= Z_POS:
        z3 = z * z * z
        f = 1.0
        g = z
        tf = 1.0
        tg = z
        for k in range(N_SERIES):
            tf = tf * z3 * RECIP_F[k]
            tg = tg * z3 * RECIP_G[k]
            f += tf
            g += tg
            if fabs(tf) + fabs(tg) < 1e-18 * (fabs(f) + fabs(g)):
                break
        return AI0 * f - AIP0 * g
    if z > Z_POS:
        zeta = 2.0 / 3.0 * z * sqrt(z)
        inv = 1.0 / zeta
        s = 0.0
        zk = 1.0
        for k in range(N_ASYM):
            s += zk * U_COEF[k]
            zk = zk * inv
        return exp(-zeta) * s / (2.0 * sqrt(M_PI) * sqrt(sqrt(z)))
    w = -z
    zeta = 2.0 / 3.0 * w * sqrt(w)
    inv = 1.0 / zeta
    ph = zeta - 0.25 * M_PI
    even = 0.0
    odd = 0.0
    zk = 1.0
    for k in range(N_ASYM):
        if k % 2 == 0:
            even += U_OSC[k] * zk
        else:
            odd += U_OSC[k] * zk
        zk = zk * inv
    return (cos(ph) * even + sin(ph) * odd) / (sqrt(M_PI) * sqrt(sqrt(w)))


def airy_ai_array(object zin):
    """Airy Ai on an arbitrary float array (compiled lane)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.ascontiguousarray(zin, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(z.shape[0], dtype=np.float64)
    cdef Py_ssize_t i, n = z.shape[0]
    with nogil:
        for i in range(n):
            out[i] = airy_scalar(z[i])
    return out.reshape(np.shape(zin))


def phi_wigner_values(object xin, object pin, double phi):
    """Wigner function of |phi><phi| on the x (axis 0) by p (axis 1) grid."""
    if phi == 0.0:
        raise ValueError("phi must be nonzero")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.ascontiguousarray(xin, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.ascontiguousarray(pin, dtype=np.float64)
    cdef Py_ssize_t nx = x.shape[0], npp = p.shape[0], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((nx, npp), dtype=np.float64)
    cdef double s = copysign(cbrt(fabs(2.0 * phi)), phi)
    cdef double inv_s = 1.0 / s
    cdef double inv_phi = 1.0 / phi
    cdef double norm = 1.0 / (M_PI * fabs(s))
    cdef double xv, p2, arg
    with nogil:
        for i in range(nx):
            xv = x[i]
            for j in range(npp):
                p2 = p[j] * p[j]
                arg = (2.0 * phi * p2 - 2.0 * xv) * inv_s
                out[i, j] = (2.0 * p2 - xv * inv_phi) * norm * airy_scalar(arg)
    return out


def jacobi_eigh(object ain, double tol=1e-12, int max_sweeps=40):
    """Cyclic Jacobi eigendecomposition of a Hermitian matrix (compiled)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] a = np.array(ain, dtype=np.complex128)
    cdef Py_ssize_t n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError("matrix must be square")
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] v = np.eye(n, dtype=np.complex128)
    if n == 1:
        return np.array([a[0, 0].real]), v

    cdef Py_ssize_t p, q, i, sweep
    cdef double mag, tau, t, c, s, off, thresh
    cdef double complex apq, e, cp, cq, rp, rq
    cdef bint converged = False

    thresh = tol / (4.0 * n)
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += (a[p, q].real * a[p, q].real + a[p, q].imag * a[p, q].imag)
        off = sqrt(2.0 * off)
        if off < tol:
            converged = True
            break
        with nogil:
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    mag = sqrt(apq.real * apq.real + apq.imag * apq.imag)
                    if mag < thresh:
                        continue
                    e = apq / mag
                    tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                    if tau != 0.0:
                        t = copysign(1.0, tau) / (fabs(tau) + hypot(1.0, tau))
                    else:
                        t = 1.0
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = t * c
                    for i in range(n):
                        cp = a[i, p]
                        cq = a[i, q]
                        a[i, p] = c * cp - s * e.conjugate() * cq
                        a[i, q] = s * e * cp + c * cq
                    for i in range(n):
                        rp = a[p, i]
                        rq = a[q, i]
                        a[p, i] = c * rp - s * e * rq
                        a[q, i] = s * e.conjugate() * rp + c * rq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for i in range(n):
                        cp = v[i, p]
                        cq = v[i, q]
                        v[i, p] = c * cp - s * e.conjugate() * cq
                        v[i, q] = s * e * cp + c * cq
    if not converged:
        # recompute the final off-diagonal norm for the diagnostic
        offv = a - np.diag(np.diag(a))
        offn = float(np.sqrt(np.sum(np.abs(offv) ** 2)))
        if offn >= tol:
            raise JacobiNonconvergence(
                f"off-diagonal norm {offn:.3e} after {max_sweeps} sweeps (tol {tol:.1e})")

    lam = np.real(np.diag(a))
    order = np.argsort(lam)[::-1]
    return lam[order], np.asarray(v)[:, order]
