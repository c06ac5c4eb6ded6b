"""Truncated Fock-space view of a phase-space state.

The density matrix is recovered from the sampled Wigner function
through the trace rule with Fock-dyad kernels,

    <n|rho|m> = 2 pi  int int  W(x, p) W_{|m><n|}(x, p) dx dp,

where for n >= m the dyad Wigner functions are Laguerre kernels

    W_{|m><n|} = (-1)^m/pi sqrt(m!/n!) (sqrt2 (x+ip))^(n-m)
                 e^{-x^2-p^2} L_m^{n-m}(2 x^2 + 2 p^2).

Reconstructing from the grid (rather than building operators directly)
keeps the Fock picture in exact agreement with the phase-space state the
rest of the pipeline uses, including the Bopp damping factor baked into
the post-click grid.  The Laguerre recurrence runs with the Gaussian
split across both factors so no intermediate overflows for cutoffs up
to N_MAX_CAP.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .wigner import GridSpec, WignerGrid

log = logging.getLogger("hybridspin.fock")

#: reconstruction tail-mass rule: sum of rho_nn over the top 5 levels
TAIL_TOL = 1e-5
#: allowed pre-renormalization trace deficit
TRACE_DEFICIT_TOL = 1e-4
#: eigenvalue round-off clamp; anything more negative fails loudly
EIGENVALUE_FLOOR = -1e-8
#: QFI double sum skips eigenvalue pairs below this
QFI_PAIR_TOL = 1e-12

N_MAX_DEFAULT = 64
N_MAX_CAP = 256
_AUTO_LADDER = (64, 96, 128, 192, 256)
_R2_CUTOFF = 1100.0  # beyond this radius every dyad kernel has underflowed


class TailMassError(ValueError):
    """Occupation leaking past the cutoff: increase n_max."""

    def __init__(self, tail: float, n_max: int):
        self.tail = tail
        self.n_max = n_max
        super().__init__(
            f"diagonal tail mass {tail:.3e} above the top of the n_max={n_max} "
            f"basis exceeds {TAIL_TOL:.0e}; increase n_max")


@dataclass(frozen=True)
class FockDensityMatrix:
    """Hermitian matrix in the number basis with trace bookkeeping.

    trace_deficit records 1 - Tr(rho) as measured on the grid before the
    final renormalization.
    """

    elements: np.ndarray
    trace_deficit: float

    def __post_init__(self):
        el = np.array(self.elements, dtype=complex)  # private immutable copy
        if el.ndim != 2 or el.shape[0] != el.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(el - el.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian within 1e-10")
        object.__setattr__(self, "elements", el)
        el.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.elements).real)

    def purity(self) -> float:
        return float(np.trace(self.elements @ self.elements).real)


@dataclass(frozen=True)
class Eigensystem:
    """Eigenvalues (descending) and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def reconstruction_grid_spec(var_x: float, var_p: float, n_max: int, *,
                             n_sigmas: float = 8.0, safety: float = 1.2,
                             max_points: int = 4096) -> GridSpec:
    """Grid sized so the dyad kernels up to n_max stay below the Nyquist
    limit of the sampling while the state support is fully covered."""
    band_dyad = 2.0 * math.sqrt(2.0 * n_max + 1.0)
    axes = []
    for var in (var_x, var_p):
        sigma = math.sqrt(var)
        half = n_sigmas * sigma
        h = math.pi / (band_dyad + 8.0 / sigma)
        n = int(math.ceil(2.0 * half / h * safety)) + 1
        n = min(max(n, 32), max_points)
        axes.append((half, n))
    (hx, nx), (hp, npp) = axes
    return GridSpec(-hx, hx, nx, -hp, hp, npp)


def _is_even_grid(w: WignerGrid) -> bool:
    sym_axes = (np.allclose(w.x_axis, -w.x_axis[::-1], atol=0.0)
                and np.allclose(w.p_axis, -w.p_axis[::-1], atol=0.0))
    if not sym_axes:
        return False
    v = w.values
    tol = 1e-12 * np.max(np.abs(v))
    return (np.max(np.abs(v - v[::-1, :])) <= tol
            and np.max(np.abs(v - v[:, ::-1])) <= tol)


def _reconstruct_once(w: WignerGrid, n_max: int) -> FockDensityMatrix:
    x, p = w.x_axis, w.p_axis
    X = x[:, None]
    P = p[None, :]
    r2 = (X * X + P * P)
    keep = (r2 <= _R2_CUTOFF).ravel()
    ww = (w.values * np.outer(w._wx, w._wp)).ravel()[keep]
    r2f = r2.ravel()[keep]
    base = (math.sqrt(2.0) * (X + 1j * P)).ravel()[keep]
    ehalf = np.exp(-0.5 * r2f)
    z = 2.0 * r2f
    even_only = _is_even_grid(w)

    dim = n_max + 1
    rho = np.zeros((dim, dim), dtype=complex)
    pk = ehalf.astype(complex)  # base^k * exp(-r^2/2)
    lgam = [math.lgamma(n + 1) for n in range(dim)]
    for k in range(dim):
        if k > 0:
            pk = pk * base
        if even_only and k % 2 == 1:
            continue
        wpk = ww * pk
        lm2 = None
        lm1 = None
        for m in range(dim - k):
            if m == 0:
                lcur = ehalf
            elif m == 1:
                lcur = (1.0 + k - z) * ehalf
            else:
                lcur = ((2.0 * m - 1.0 + k - z) * lm1 - (m - 1.0 + k) * lm2) / m
            lm2, lm1 = lm1, lcur
            n = m + k
            pref = 2.0 * (-1.0) ** m * math.exp(0.5 * (lgam[m] - lgam[n]))
            val = pref * np.sum(wpk * lcur)
            rho[n, m] = val
            if n != m:
                rho[m, n] = np.conj(val)

    tr = float(np.trace(rho).real)
    deficit = 1.0 - tr
    # occupation leaking past the cutoff shows up both as raw tail mass
    # and as a trace deficit; report it as a cutoff problem before
    # blaming the grid.  The five-level window never reaches below the
    # middle of a very small basis.
    tail_start = max(dim - 5, (dim + 1) // 2)
    tail = float(np.sum(np.real(np.diag(rho))[tail_start:]))
    if tail >= TAIL_TOL or (abs(deficit) > TRACE_DEFICIT_TOL and deficit > 0):
        raise TailMassError(max(tail, deficit), n_max)
    if abs(deficit) > TRACE_DEFICIT_TOL:
        raise ValueError(
            f"reconstructed trace {tr:.6f} misses 1 by more than {TRACE_DEFICIT_TOL:.0e}; "
            "the grid does not resolve the state (see reconstruction_grid_spec)")
    rho /= tr
    rho = 0.5 * (rho + rho.conj().T)
    return FockDensityMatrix(rho, deficit)


def reconstruct(w: WignerGrid, n_max: int | None = None) -> FockDensityMatrix:
    """Density matrix of the state on grid w, truncated at n_max.

    With n_max=None the cutoff starts at N_MAX_DEFAULT and is raised
    through the ladder until the diagonal tail rule passes; an explicit
    n_max that fails the rule raises TailMassError directly.
    """
    if not w.normalized:
        raise ValueError("reconstruction needs a trace-normalized state grid")
    if n_max is not None:
        if not 1 <= n_max <= N_MAX_CAP:
            raise ValueError(f"n_max must lie in [1, {N_MAX_CAP}]")
        return _reconstruct_once(w, n_max)
    last: TailMassError | None = None
    for nm in _AUTO_LADDER:
        try:
            return _reconstruct_once(w, nm)
        except TailMassError as err:
            last = err
    raise last


def quadrature_p(n_max: int) -> np.ndarray:
    """Matrix of P = i (a^dag - a)/sqrt(2) in the number basis."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    dim = n_max + 1
    m = np.zeros((dim, dim), dtype=complex)
    root = np.sqrt(np.arange(1, dim) / 2.0)
    m[np.arange(dim - 1), np.arange(1, dim)] = -1j * root
    m[np.arange(1, dim), np.arange(dim - 1)] = 1j * root
    return m


def quadrature_x(n_max: int) -> np.ndarray:
    """Matrix of X = (a + a^dag)/sqrt(2) in the number basis."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    dim = n_max + 1
    m = np.zeros((dim, dim), dtype=complex)
    root = np.sqrt(np.arange(1, dim) / 2.0)
    m[np.arange(dim - 1), np.arange(1, dim)] = root
    m[np.arange(1, dim), np.arange(dim - 1)] = root
    return m


def eigh(rho: FockDensityMatrix, *, tol: float = 1e-12,
         require_psd: bool = True) -> Eigensystem:
    """Full eigensystem by cyclic Jacobi, off-diagonal norm below tol.

    With require_psd (the default for bona fide density matrices),
    eigenvalues in [EIGENVALUE_FLOOR, 0) are round-off and get clamped
    to zero (logged); anything more negative means the grid or cutoff is
    misconfigured and raises.  The decoherence-adapted frame states this
    package reconstructs are NOT always positive: the frame damping lets
    var_x*var_p dip below 1/4, so the exact frame matrix carries
    structured negative eigenvalues.  Callers working with frame states
    pass require_psd=False to keep them (no clamping).
    """
    lam, v = _kernels.jacobi_eigh(rho.elements, tol=tol)
    resid = np.max(np.abs(rho.elements - (v * lam) @ v.conj().T))
    if resid > 1e-9:
        raise RuntimeError(f"eigendecomposition residual {resid:.3e} above 1e-9")
    if require_psd:
        if lam[-1] < EIGENVALUE_FLOOR:
            raise ValueError(
                f"eigenvalue {lam[-1]:.3e} below the {EIGENVALUE_FLOOR:.0e} floor; "
                "grid or cutoff misconfigured (or pass require_psd=False for "
                "frame states)")
        n_clamped = int(np.sum(lam < 0.0))
        if n_clamped:
            log.info("clamped %d negative eigenvalues (most negative %.3e)",
                     n_clamped, float(lam[-1]))
            lam = np.where(lam < 0.0, 0.0, lam)
    return Eigensystem(lam, v)


def qfi_displacement(rho: FockDensityMatrix, es: Eigensystem | None = None) -> float:
    """Quantum Fisher information for displacement along X, generated by
    the P quadrature:

        F_Q = 2 sum_{l,l'} (lam - lam')^2/(lam + lam') |<l|P|l'>|^2,

    pairs with |lam + lam'| < QFI_PAIR_TOL skipped.  Equals 4 Var(P) for
    pure states.  For decoherence-frame states the eigenvalues are
    signed and the signed sum is what reproduces the Gaussian closed
    form, so the skip rule guards only the vanishing denominators.
    """
    if es is None:
        es = eigh(rho, require_psd=False)
    lam, v = es.eigenvalues, es.eigenvectors
    a = quadrature_p(rho.dim - 1)
    m = v.conj().T @ a @ v
    ssum = lam[:, None] + lam[None, :]
    diff2 = (lam[:, None] - lam[None, :]) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(np.abs(ssum) >= QFI_PAIR_TOL, diff2 / ssum, 0.0)
    return float(2.0 * np.sum(weight * np.abs(m) ** 2))


def to_json_dict(rho: FockDensityMatrix) -> dict:
    """JSON-friendly dump: dimension plus row-major real/imag parts."""
    el = rho.elements
    return {
        "dim": rho.dim,
        "trace_deficit": rho.trace_deficit,
        "real": [float(v) for v in el.real.ravel()],
        "imag": [float(v) for v in el.imag.ravel()],
    }
