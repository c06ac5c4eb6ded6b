"""Phase-space engine: Gaussian states, photon subtraction, displacement,
marginals, overlaps, and the Airy-fringed measurement-basis functions.

Photon subtraction acts on the Wigner function through the damped
differential operator pair

    P_op = P - c (i/2) d/dX,   c = exp(-2 gamma (t1 + t2)),

applied from both sides.  The cross terms cancel (P commutes with
d/dX), so on a zero-mean Gaussian the conditioned state is the closed
form

    W_post = [P^2 + (c^2/4)(X^2/Vx^2 - 1/Vx)] W_pre / Vp,

evaluated analytically; no numerical differentiation ever touches the
grid.  The basis elements |phi><phi| of the near-optimal measurement
carry the same sandwich structure applied to an Airy kernel; see
phi_wigner for the validated closed form.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import GaussianMoments

#: trace normalization demanded of state grids
NORMALIZATION_TOL = 1e-6

#: default state grid: 512 x 512 spanning +/- 8 sigma of the wider quadrature
DEFAULT_GRID_POINTS = 512
DEFAULT_GRID_SIGMAS = 8.0


class GridSizingError(ValueError):
    """Grid does not resolve or contain the state."""


class GridMismatchError(ValueError):
    """Two grids expected on identical axes."""


class SupportClipError(ValueError):
    """An operation pushed non-negligible mass off the grid."""


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_x: int
    p_min: float
    p_max: float
    n_p: int

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise ValueError("grid bounds must be increasing")
        if self.n_x < 2 or self.n_p < 2:
            raise ValueError("grids need at least 2 points per axis")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.linspace(self.x_min, self.x_max, self.n_x),
                np.linspace(self.p_min, self.p_max, self.n_p))


def default_grid_spec(m: GaussianMoments, *, n: int = DEFAULT_GRID_POINTS,
                      n_sigmas: float = DEFAULT_GRID_SIGMAS) -> GridSpec:
    half = n_sigmas * math.sqrt(max(m.var_x, m.var_p))
    return GridSpec(-half, half, n, -half, half, n)


def _trap_weights(axis: np.ndarray) -> np.ndarray:
    h = axis[1] - axis[0]
    w = np.full(axis.shape, h)
    w[0] = w[-1] = h / 2.0
    return w


class WignerGrid:
    """Sampled W(X, P) on a rectangular grid; values[i, j] = W(x_i, p_j).

    State grids (normalized=True) integrate to 1 within NORMALIZATION_TOL;
    measurement-basis grids are delta-normalized and skip that check.
    Instances are immutable: the arrays are set read-only.
    """

    def __init__(self, x_axis: np.ndarray, p_axis: np.ndarray, values: np.ndarray,
                 *, normalized: bool = True):
        # own private copies: instances are immutable and never alias or
        # mutate caller arrays
        x_axis = np.array(x_axis, dtype=float)
        p_axis = np.array(p_axis, dtype=float)
        values = np.array(values, dtype=float)
        if values.shape != (x_axis.size, p_axis.size):
            raise ValueError(f"values shape {values.shape} does not match axes "
                             f"({x_axis.size}, {p_axis.size})")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(x_axis))
                and np.all(np.isfinite(p_axis))):
            raise ValueError("grid contains nonfinite entries")
        self.x_axis = x_axis
        self.p_axis = p_axis
        self.values = values
        self.normalized = normalized
        self._wx = _trap_weights(x_axis)
        self._wp = _trap_weights(p_axis)
        if normalized:
            total = self.integral()
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise GridSizingError(
                    f"state grid integrates to {total:.8f}, not 1; "
                    "enlarge or refine the grid")
        for arr in (self.x_axis, self.p_axis, self.values):
            arr.setflags(write=False)

    @property
    def dx(self) -> float:
        return self.x_axis[1] - self.x_axis[0]

    @property
    def dp(self) -> float:
        return self.p_axis[1] - self.p_axis[0]

    def integral(self) -> float:
        """Trapezoid double integral of the sampled values."""
        return float(self._wx @ self.values @ self._wp)

    def same_axes(self, other: "WignerGrid") -> bool:
        return (self.x_axis.shape == other.x_axis.shape
                and self.p_axis.shape == other.p_axis.shape
                and np.array_equal(self.x_axis, other.x_axis)
                and np.array_equal(self.p_axis, other.p_axis))

    def moments(self) -> tuple[float, float, float, float]:
        """(mean_x, mean_p, var_x, var_p) of the sampled distribution."""
        wx, wp = self._wx, self._wp
        mx = float((wx * self.x_axis) @ self.values @ wp)
        mp = float(wx @ self.values @ (wp * self.p_axis))
        vx = float((wx * self.x_axis**2) @ self.values @ wp) - mx * mx
        vp = float(wx @ self.values @ (wp * self.p_axis**2)) - mp * mp
        return mx, mp, vx, vp


def gaussian_wigner(m: GaussianMoments, spec: GridSpec | None = None) -> WignerGrid:
    """Zero-mean Gaussian Wigner function for the given moments.

    The grid must span at least 6 standard deviations per axis, else the
    tails carry enough mass to break normalization.
    """
    if spec is None:
        spec = default_grid_spec(m)
    sx, sp = math.sqrt(m.var_x), math.sqrt(m.var_p)
    need_x, need_p = 6.0 * sx, 6.0 * sp
    if spec.x_max < need_x or -spec.x_min < need_x or spec.p_max < need_p or -spec.p_min < need_p:
        raise GridSizingError(
            f"grid must span at least +/-{need_x:.3f} in X and +/-{need_p:.3f} in P "
            f"for moments ({m.var_x:.4g}, {m.var_p:.4g})")
    x, p = spec.axes()
    gx = np.exp(-x**2 / (2.0 * m.var_x))
    gp = np.exp(-p**2 / (2.0 * m.var_p))
    vals = np.outer(gx, gp) / (2.0 * math.pi * sx * sp)
    return WignerGrid(x, p, vals)


@dataclass(frozen=True)
class SubtractionContext:
    """Inputs the click map needs beyond the pre-click moments:
    bopp_damping is c = exp(-2 gamma (t1+t2)); norm is the pre-click
    <P^2> that makes the conditioned state trace normalized."""

    bopp_damping: float
    norm: float

    def __post_init__(self):
        # c = 0 is admitted as the fully-dephased classical limit, where
        # the click reduces to multiplication by P^2
        if not 0.0 <= self.bopp_damping <= 1.0:
            raise ValueError(f"bopp_damping must lie in [0, 1], got {self.bopp_damping}")
        if not self.norm > 0:
            raise ValueError(f"norm must be positive, got {self.norm}")

    @classmethod
    def for_times(cls, gamma: float, t1: float, t2: float,
                  pre_click: GaussianMoments) -> "SubtractionContext":
        return cls(math.exp(-2.0 * gamma * (t1 + t2)), pre_click.var_p)


def _post_click_values(x: np.ndarray, p: np.ndarray, m: GaussianMoments,
                       c: float) -> np.ndarray:
    vx, vp = m.var_x, m.var_p
    gx = np.exp(-x**2 / (2.0 * vx))
    gp = np.exp(-p**2 / (2.0 * vp))
    pre = np.outer(gx, gp) / (2.0 * math.pi * math.sqrt(vx * vp))
    poly = p[None, :]**2 + (c * c / 4.0) * (x[:, None]**2 / vx**2 - 1.0 / vx)
    return poly * pre / vp


def photon_subtract(w: WignerGrid, m: GaussianMoments,
                    ctx: SubtractionContext) -> WignerGrid:
    """Conditioned state after a single photon click, from the Gaussian
    pre-click grid w with moments m.

    Applies P_op P_op* analytically (see module docstring) and
    renormalizes on the grid; the analytic normalization is exactly
    ctx.norm = Vp because the derivative term integrates to zero.
    """
    if not math.isclose(ctx.norm, m.var_p, rel_tol=1e-9):
        raise ValueError(f"ctx.norm {ctx.norm} must equal the pre-click var_p {m.var_p}")
    x, p = w.x_axis, w.p_axis
    expected = np.outer(np.exp(-x**2 / (2 * m.var_x)), np.exp(-p**2 / (2 * m.var_p)))
    expected /= 2.0 * math.pi * math.sqrt(m.var_x * m.var_p)
    if np.max(np.abs(w.values - expected)) > 1e-10 * np.max(expected):
        raise ValueError("input grid is not the Gaussian pre-click state for the given moments")
    vals = _post_click_values(x, p, m, ctx.bopp_damping)
    out = WignerGrid(x, p, vals, normalized=False)
    total = out.integral()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise GridSizingError(
            f"post-click state integrates to {total:.8f} on this grid; enlarge it")
    return WignerGrid(x, p, vals / total)


def displace_x(w: WignerGrid, theta: float, *, clip_tol: float = 1e-8) -> WignerGrid:
    """W(X, P) -> W(X - theta, P): index shift with linear interpolation
    for off-grid theta.  Errors if more than clip_tol of the total mass
    would be pushed past the grid edge."""
    if theta == 0.0:
        return WignerGrid(w.x_axis, w.p_axis, w.values, normalized=w.normalized)
    h = w.dx
    shift = theta / h
    k = math.floor(shift)
    f = shift - k
    v = w.values
    n = v.shape[0]

    def rolled(offset: int) -> np.ndarray:
        # rows shifted down by offset, zero-filled; W(x - offset*h)
        out = np.zeros_like(v)
        if offset >= 0:
            if offset < n:
                out[offset:] = v[:n - offset]
        else:
            if -offset < n:
                out[:n + offset] = v[-offset:]
        return out

    vals = (1.0 - f) * rolled(k) + f * rolled(k + 1)
    out = WignerGrid(w.x_axis, w.p_axis, vals, normalized=False)
    clipped = abs(out.integral() - w.integral())
    if clipped > clip_tol:
        raise SupportClipError(
            f"displacement by {theta} clips {clipped:.3e} of the state off the grid")
    return WignerGrid(w.x_axis, w.p_axis, vals, normalized=w.normalized)


def marginal_x(w: WignerGrid) -> np.ndarray:
    """Homodyne position density p(x) = int W(x, p) dp on w.x_axis.

    Negative round-off from the oscillatory regions is clamped to zero;
    the result integrates to 1 within NORMALIZATION_TOL for state grids.
    """
    pdf = w.values @ w._wp
    pdf = np.where(pdf < 0.0, 0.0, pdf)
    if w.normalized:
        total = float(w._wx @ pdf)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise GridSizingError(f"marginal integrates to {total:.8f}, not 1")
    return pdf


def overlap(a: WignerGrid, b: WignerGrid) -> float:
    """Trace rule Tr[A B] = 2 pi int int W_A W_B dX dP on identical grids."""
    if not a.same_axes(b):
        raise GridMismatchError("overlap requires identical grid axes")
    return float(2.0 * math.pi * (a._wx @ (a.values * b.values) @ a._wp))


def purity(w: WignerGrid) -> float:
    """Tr[rho^2]; equals 1/(2 sqrt(Vx Vp)) for a Gaussian state."""
    return overlap(w, w)


def airy_ai(z: float) -> float:
    """Airy function Ai(z): Maclaurin series in the central window,
    Poincare asymptotics outside, absolute accuracy ~1e-10 on [-15, 15]."""
    return float(_kernels.airy_ai_array(np.array([float(z)]))[0])


def airy_ai_array(z: np.ndarray) -> np.ndarray:
    """Vectorized Ai over an arbitrary float array."""
    return _kernels.airy_ai_array(np.asarray(z, dtype=float))


@dataclass(frozen=True)
class PhiState:
    """Eigenvalue label of the P^-1 X P^-1 measurement basis."""

    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.phi) and self.phi != 0.0):
            raise ValueError(f"phi must be finite and nonzero, got {self.phi}")


def phi_wigner(s: PhiState, spec: GridSpec) -> WignerGrid:
    """Wigner function of the measurement-basis element |phi><phi|:

        W_phi(X, P) = (2 P^2 - X/phi) Ai[(2 phi P^2 - 2 X)/s] / (pi |2 phi|^(1/3)),

    with s = sign(phi) |2 phi|^(1/3) the real signed cube root, so the
    Airy argument stays real for phi < 0 and W_{-phi}(X, P) = W_phi(-X, P).

    This closed form re-derives the published one, which prints an
    inconsistent prefactor in two places; the form here is the one that
    matches a direct numerical Wigner transform of the basis state (see
    the oracle tests).  Delta-normalized: the grid is not trace
    normalized and overlap() against a state grid yields the probability
    density p(phi).
    """
    x, p = spec.axes()
    vals = _kernels.phi_wigner_values(x, p, s.phi)
    return WignerGrid(x, p, vals, normalized=False)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_MAGIC = b"HSWG"
_VERSION = 1
_HEADER = struct.Struct("<4sI4d2QB")  # magic, version, x0, x1, p0, p1, n_x, n_p, normalized


def to_csv(w: WignerGrid, path) -> None:
    """Write (x, p, value) triples, one grid cell per row."""
    with open(path, "w") as fh:
        fh.write("x,p,value\n")
        for i, xv in enumerate(w.x_axis):
            for j, pv in enumerate(w.p_axis):
                fh.write(f"{xv:.12g},{pv:.12g},{w.values[i, j]:.12g}\n")


def to_binary(w: WignerGrid, path) -> None:
    """Compact dump: little-endian header (axis bounds as float64,
    point counts as uint64, normalized flag) then row-major float64
    values, x index slow, p index fast."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION,
                              w.x_axis[0], w.x_axis[-1], w.p_axis[0], w.p_axis[-1],
                              w.x_axis.size, w.p_axis.size, int(w.normalized)))
        fh.write(np.ascontiguousarray(w.values, dtype="<f8").tobytes())


def from_binary(path) -> WignerGrid:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError("not a Wigner dump (truncated header)")
        magic, version, x0, x1, p0, p1, n_x, n_p, norm = _HEADER.unpack(head)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError(f"not a Wigner dump (magic {magic!r}, version {version})")
        data = np.frombuffer(fh.read(8 * n_x * n_p), dtype="<f8").reshape(n_x, n_p)
    x = np.linspace(x0, x1, n_x)
    p = np.linspace(p0, p1, n_p)
    return WignerGrid(x, p, data.astype(float), normalized=bool(norm))
