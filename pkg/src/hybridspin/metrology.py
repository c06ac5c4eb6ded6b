"""Classical and quantum Fisher information for displacement sensing.

The sensing family is rho(theta) = D_x(theta) rho D_x(theta)^dag, a
displacement of the final state's Wigner function along X.  Classical
Fisher information of a measurement family p(.; theta) is the variance
of the score, evaluated here as

    F_C = int (d_theta p)^2 / p dmu   at theta = 0,

with the theta derivative taken by central finite differences on
displaced grids so the homodyne and phi-basis families go through one
code path.

Frame versus physical state.  The moment equations evolve the state in
a decoherence-adapted frame whose coordinates are the physical phase
space shrunk by e^{-gamma(t1+t2)} (that is what the damping factor in
the click operator encodes).  CFIs are evaluated directly on the frame
grids: a frame-basis measurement is the same POVM as its rescaled
physical counterpart, and the frame theta matches the parametrization
used throughout.  The frame object itself is not positive once
var_x*var_p dips under 1/4, so the quantum bound is computed on the
physical state (frame moments times e^{2 gamma (t1+t2)}, click operator
undamped) and converted to frame displacement units with the same
e^{2 gamma (t1+t2)} factor.  With that convention CFI <= QFI is an
actual theorem for every reported point, and all gamma -> 0 anchors are
untouched.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import GaussianMoments, ProtocolParams
from . import _kernels, dynamics, fock, wigner

CFI_DTHETA = 1e-4
CFI_PDF_FLOOR = 1e-12
CFI_NORM_DRIFT_TOL = 1e-5
PHI_TAIL_FRACTION = 0.01
PHI_MAG_MIN = 1e-3
PHI_MAG_MAX = 10.0
PHI_POINTS_PER_SIDE = 400
QFI_SLACK = 1e-3

MODE_IMMEDIATE = "immediate"
MODE_THRESHOLD = "threshold"
BRANCH_GAUSSIAN = "gaussian_only"
BRANCH_NONGAUSSIAN = "nonGaussian"


class PhiTailError(RuntimeError):
    """The phi response kept contributing past every grid extension."""

    def __init__(self, tail_fraction: float):
        self.tail_fraction = tail_fraction
        super().__init__(
            f"phi-basis CFI tail still contributes {tail_fraction:.2%} after "
            "maximal grid extension")


@dataclass(frozen=True)
class FisherReport:
    """Fisher quantities for one (t1, t2) parameter point."""

    t1: float
    t2: float
    cfi_homodyne: float
    qfi: float
    cfi_phi: float | None = None
    branch: str = BRANCH_NONGAUSSIAN
    mode: str = MODE_IMMEDIATE
    unreachable: bool = False

    def __post_init__(self):
        if self.unreachable:
            return
        if self.cfi_homodyne < 0 or self.qfi < 0:
            raise ValueError("Fisher information must be nonnegative")
        bound = self.qfi * (1.0 + QFI_SLACK)
        if self.cfi_homodyne > bound:
            raise ValueError(
                f"cfi_homodyne {self.cfi_homodyne:.6g} exceeds QFI bound {bound:.6g}")
        if self.cfi_phi is not None and (self.cfi_phi < 0 or self.cfi_phi > bound):
            raise ValueError(
                f"cfi_phi {self.cfi_phi:.6g} outside [0, QFI bound {bound:.6g}]")


@dataclass(frozen=True)
class ScenarioSpec:
    """Sweep configuration for the figure-level comparisons."""

    params: ProtocolParams
    t1_grid: tuple[float, ...]
    post_selection: str = MODE_IMMEDIATE
    comparisons: tuple[str, ...] = (BRANCH_GAUSSIAN, BRANCH_NONGAUSSIAN)

    def __post_init__(self):
        if self.post_selection not in (MODE_IMMEDIATE, MODE_THRESHOLD):
            raise ValueError(f"unknown post-selection mode {self.post_selection!r}")
        bad = set(self.comparisons) - {BRANCH_GAUSSIAN, BRANCH_NONGAUSSIAN}
        if bad:
            raise ValueError(f"unknown comparison branches {sorted(bad)}")
        if len(self.t1_grid) == 0:
            raise ValueError("t1 grid must be nonempty")
        if any(b <= a for a, b in zip(self.t1_grid, self.t1_grid[1:])):
            raise ValueError("t1 grid must be strictly increasing")


def cfi_from_family(evaluator: Callable[[float], np.ndarray], weights: np.ndarray,
                    *, dtheta: float = CFI_DTHETA) -> float:
    """Score-variance CFI at theta = 0 by central differences.

    evaluator(theta) must return a normalized pdf sampled on a fixed
    abscissa whose integration weights are given; points with
    p < CFI_PDF_FLOOR are dropped from the integrand.
    """
    p0 = evaluator(0.0)
    pp = evaluator(+dtheta)
    pm = evaluator(-dtheta)
    n0, np_, nm = (float(np.dot(weights, q)) for q in (p0, pp, pm))
    drift = max(abs(np_ - n0), abs(nm - n0))
    if drift > CFI_NORM_DRIFT_TOL:
        raise ValueError(f"pdf normalization drifts by {drift:.2e} across theta samples")
    dp = (pp - pm) / (2.0 * dtheta)
    ok = p0 > CFI_PDF_FLOOR
    integrand = np.where(ok, dp**2 / np.where(ok, p0, 1.0), 0.0)
    return float(np.dot(weights, integrand))


def cfi_homodyne(state: wigner.WignerGrid, *, dtheta: float = CFI_DTHETA) -> float:
    """CFI of the position-basis measurement on the displaced state."""
    weights = wigner._trap_weights(state.x_axis)

    def family(theta: float) -> np.ndarray:
        return wigner.marginal_x(wigner.displace_x(state, theta))

    return cfi_from_family(family, weights, dtheta=dtheta)


def default_phi_magnitudes() -> np.ndarray:
    return np.geomspace(PHI_MAG_MIN, PHI_MAG_MAX, PHI_POINTS_PER_SIDE)


def _phi_probabilities(states: list[wigner.WignerGrid], mags: np.ndarray,
                       sign: float) -> np.ndarray:
    """p(sign*|phi|; theta_i) = overlap(phi_wigner, state) for each state,
    shape (len(states), len(mags)).

    Same arithmetic as the public overlap route, specialised: the basis
    kernels are even in P, so when every state is too the P integral is
    folded onto the upper half axis and the kernel evaluated only there.
    """
    x = states[0].x_axis
    p = states[0].p_axis
    wx = wigner._trap_weights(x)
    wp = wigner._trap_weights(p)
    stack = np.stack([st.values for st in states])

    p_sym = np.allclose(p, -p[::-1], atol=0.0)
    scale = np.max(np.abs(stack))
    p_even = p_sym and np.max(np.abs(stack - stack[:, :, ::-1])) <= 1e-12 * scale
    if p_even:
        j0 = p.size // 2
        if p.size % 2 == 0:
            folded = stack[:, :, j0:] + stack[:, :, j0 - 1::-1]
        else:
            folded = stack[:, :, j0:].copy()
            folded[:, :, 1:] += stack[:, :, j0 - 1::-1]
        p_half = p[j0:]
        weighted = (folded * np.outer(wx, wp[j0:])).reshape(len(states), -1)
    else:
        p_half = p
        weighted = (stack * np.outer(wx, wp)).reshape(len(states), -1)

    out = np.empty((len(states), mags.size))
    for j, mag in enumerate(mags):
        kern = _kernels.phi_wigner_values(x, p_half, sign * mag).ravel()
        out[:, j] = 2.0 * math.pi * (weighted @ kern)
    return out


def _x_even(state: wigner.WignerGrid) -> bool:
    if not np.allclose(state.x_axis, -state.x_axis[::-1], atol=0.0):
        return False
    v = state.values
    return np.max(np.abs(v - v[::-1, :])) <= 1e-12 * np.max(np.abs(v))


def _cfi_phi_impl(state: wigner.WignerGrid, mags: np.ndarray, *,
                  dtheta: float, tail_fraction: float,
                  max_extensions: int) -> tuple[float, dict]:
    states = [state,
              wigner.displace_x(state, +dtheta),
              wigner.displace_x(state, -dtheta)]
    even = _x_even(state)
    mags = np.asarray(mags, dtype=float)

    def halves(mags_arr):
        pos = _phi_probabilities(states, mags_arr, +1.0)
        if even:
            # W_{-phi}(X,P) = W_phi(-X,P): for an X-even state the negative
            # branch is the positive one with the displacement sign flipped
            neg = pos[[0, 2, 1], :]
        else:
            neg = _phi_probabilities(states, mags_arr, -1.0)
        return pos, neg

    def integrate(mags_arr, pos, neg):
        total = 0.0
        pieces = []
        for block in (pos, neg):
            p0 = np.clip(block[0], 0.0, None)
            dp = (block[1] - block[2]) / (2.0 * dtheta)
            ok = p0 > CFI_PDF_FLOOR
            integ = np.where(ok, dp**2 / np.where(ok, p0, 1.0), 0.0)
            pieces.append(integ)
            total += float(np.trapezoid(integ, mags_arr))
        return total, pieces

    pos, neg = halves(mags)
    cfi, pieces = integrate(mags, pos, neg)
    norm = float(np.trapezoid(np.clip(pos[0], 0.0, None), mags)
                 + np.trapezoid(np.clip(neg[0], 0.0, None), mags))

    extensions = 0
    hi = mags[-1]
    step = mags[1] / mags[0]
    while extensions < max_extensions:
        # outermost decade's share of the running total
        outer = mags >= mags[-1] / 10.0
        outer_share = (np.trapezoid(pieces[0][outer], mags[outer])
                       + np.trapezoid(pieces[1][outer], mags[outer]))
        inner_gap = mags[0] * (pieces[0][0] + pieces[1][0])
        if cfi == 0.0 or (outer_share + inner_gap) <= tail_fraction * max(cfi, 1e-300):
            return cfi, {"n_phi": 2 * mags.size, "phi_max": float(mags[-1]),
                         "tail_share": float((outer_share + inner_gap) / max(cfi, 1e-300)),
                         "norm": norm, "extensions": extensions}
        ext = np.geomspace(hi * step, hi * 10.0, 60)
        pos_e, neg_e = halves(ext)
        mags = np.concatenate([mags, ext])
        pos = np.concatenate([pos, pos_e], axis=1)
        neg = np.concatenate([neg, neg_e], axis=1)
        cfi, pieces = integrate(mags, pos, neg)
        norm = float(np.trapezoid(np.clip(pos[0], 0.0, None), mags)
                     + np.trapezoid(np.clip(neg[0], 0.0, None), mags))
        hi = mags[-1]
        extensions += 1

    outer = mags >= mags[-1] / 10.0
    outer_share = (np.trapezoid(pieces[0][outer], mags[outer])
                   + np.trapezoid(pieces[1][outer], mags[outer]))
    raise PhiTailError(outer_share / max(cfi, 1e-300))


def cfi_phi(state: wigner.WignerGrid, phi_magnitudes: np.ndarray | None = None, *,
            dtheta: float = CFI_DTHETA, tail_fraction: float = PHI_TAIL_FRACTION,
            max_extensions: int = 4) -> float:
    """CFI of the P^-1 X P^-1 eigenbasis measurement on the displaced
    state, integrated over both signs of phi on a log-spaced grid that
    extends until the outer tail contributes under tail_fraction."""
    mags = default_phi_magnitudes() if phi_magnitudes is None else phi_magnitudes
    val, _ = _cfi_phi_impl(state, mags, dtheta=dtheta,
                           tail_fraction=tail_fraction, max_extensions=max_extensions)
    return val


def phi_response(state: wigner.WignerGrid,
                 phi_values: np.ndarray) -> np.ndarray:
    """Probability density p(phi) = <phi| rho |phi> on the given phi values."""
    phis = np.asarray(phi_values, dtype=float)
    if np.any(phis == 0.0):
        raise ValueError("phi = 0 is not in the measurement basis")
    out = np.empty(phis.size)
    for sign in (1.0, -1.0):
        sel = phis > 0 if sign > 0 else phis < 0
        if np.any(sel):
            out[sel] = _phi_probabilities([state], sign * np.abs(phis[sel]), sign)[0]
    return out


# ---------------------------------------------------------------------------
# protocol states on metrology- and reconstruction-appropriate grids
# ---------------------------------------------------------------------------

def metrology_grid_spec(var_x: float, var_p: float, *, n_x: int = 512,
                        n_p: int = 2048, n_sigmas: float = 8.0) -> wigner.GridSpec:
    """Rectangular grid tight around the state: X resolves the marginal
    and the phi-kernel fringes, P resolves the fringe chirp 4*phi*p^2."""
    hx = n_sigmas * math.sqrt(var_x)
    hp = n_sigmas * math.sqrt(var_p)
    return wigner.GridSpec(-hx, hx, n_x, -hp, hp, n_p)


def marginal_grid_spec(var_x: float, var_p: float, *, n_x: int = 2048,
                       n_p: int = 512, n_sigmas: float = 8.0) -> wigner.GridSpec:
    """Grid weighted toward X resolution for homodyne-marginal accuracy."""
    hx = n_sigmas * math.sqrt(var_x)
    hp = n_sigmas * math.sqrt(var_p)
    return wigner.GridSpec(-hx, hx, n_x, -hp, hp, n_p)


def post_click_variances(pre: GaussianMoments, c: float) -> tuple[float, float]:
    """Second moments of the conditioned state: Gaussian moment algebra
    gives <X^2> = Vx + c^2/(2 Vp) and <P^2> = 3 Vp."""
    return pre.var_x + c * c / (2.0 * pre.var_p), 3.0 * pre.var_p


def frame_scale(params: ProtocolParams) -> float:
    """e^{2 gamma (t1+t2)}: variance ratio between the physical state and
    its decoherence-frame description."""
    return math.exp(2.0 * params.gamma * (params.t1 + params.t2))


def physical_pre_click(params: ProtocolParams) -> GaussianMoments:
    """Pre-click moments of the bona fide (positive) physical state."""
    frame = dynamics.pre_click_moments(params)
    b2 = frame_scale(params)
    return GaussianMoments(frame.var_x * b2, frame.var_p * b2)


def nongaussian_state(params: ProtocolParams, spec: wigner.GridSpec | None = None,
                      ) -> tuple[wigner.WignerGrid, GaussianMoments, float]:
    """Post-click Wigner grid at (params.t1, params.t2) plus the
    pre-click moments and Bopp damping that produced it."""
    pre = dynamics.pre_click_moments(params)
    c = math.exp(-2.0 * params.gamma * (params.t1 + params.t2))
    if spec is None:
        vx_post, vp_post = post_click_variances(pre, c)
        spec = metrology_grid_spec(vx_post, vp_post)
    w_pre = wigner.gaussian_wigner(pre, spec)
    ctx = wigner.SubtractionContext.for_times(params.gamma, params.t1, params.t2, pre)
    return wigner.photon_subtract(w_pre, pre, ctx), pre, c


def gaussian_state(params: ProtocolParams, spec: wigner.GridSpec | None = None,
                   ) -> tuple[wigner.WignerGrid, GaussianMoments]:
    """Rotated phase-I-only state (no photon detection), on a metrology grid."""
    p0 = params.with_times(t2=0.0)
    m = dynamics.pre_click_moments(p0)
    if spec is None:
        spec = metrology_grid_spec(m.var_x, m.var_p)
    return wigner.gaussian_wigner(m, spec), m


def _qfi_of_state(builder: Callable[[wigner.GridSpec], wigner.WignerGrid],
                  var_x: float, var_p: float) -> float:
    """QFI via Fock reconstruction on a Nyquist-adequate grid, raising
    the cutoff with the grid until the tail rule passes."""
    last: Exception | None = None
    for n_max in fock._AUTO_LADDER:
        spec = fock.reconstruction_grid_spec(var_x, var_p, n_max)
        try:
            rho = fock._reconstruct_once(builder(spec), n_max)
            return fock.qfi_displacement(rho)
        except fock.TailMassError as err:
            last = err
    raise last


def frame_qfi(params: ProtocolParams, *, subtracted: bool) -> float:
    """Quantum Fisher information for the frame displacement parameter.

    Computed on the physical state (positive by construction), in a
    squeezed reference frame that rounds the pre-click Gaussian to equal
    variances v = sqrt(Vx Vp): a symplectic squeeze commutes with the
    click map (same damping constant) and only rescales the displacement
    generator, so

        F = b^2 * (v / Vx_phys) * F_rounded,

    with b^2 = e^{2 gamma (t1+t2)} converting back to frame units.  The
    rounding keeps the Fock occupation bounded across the whole sweep,
    where the raw anti-squeezed state would need ever larger cutoffs.
    """
    mph = physical_pre_click(params)
    b2 = frame_scale(params)
    v = math.sqrt(mph.var_x * mph.var_p)
    rounded = GaussianMoments(v, v)
    if subtracted:
        def builder(spec: wigner.GridSpec) -> wigner.WignerGrid:
            w_pre = wigner.gaussian_wigner(rounded, spec)
            return wigner.photon_subtract(w_pre, rounded,
                                          wigner.SubtractionContext(1.0, v))
        var_post = post_click_variances(rounded, 1.0)
        base = _qfi_of_state(builder, *var_post)
    else:
        base = _qfi_of_state(lambda spec: wigner.gaussian_wigner(rounded, spec), v, v)
    return b2 * (v / mph.var_x) * base


def _fig_point(args) -> list[FisherReport]:
    params, t1, mode, comparisons, want_phi = args
    reports: list[FisherReport] = []

    if BRANCH_GAUSSIAN in comparisons:
        pg = params.with_times(t1=t1, t2=0.0)
        mg = dynamics.pre_click_moments(pg)
        wg = wigner.gaussian_wigner(mg, marginal_grid_spec(mg.var_x, mg.var_p))
        cfi_h = cfi_homodyne(wg)
        qfi = frame_qfi(pg, subtracted=False)
        reports.append(FisherReport(t1=t1, t2=0.0, cfi_homodyne=cfi_h, qfi=qfi,
                                    branch=BRANCH_GAUSSIAN, mode=mode))

    if BRANCH_NONGAUSSIAN in comparisons:
        if mode == MODE_THRESHOLD:
            res = dynamics.t2_for_threshold(t1, params)
            if not res.reachable:
                reports.append(FisherReport(t1=t1, t2=math.nan, cfi_homodyne=math.nan,
                                            qfi=math.nan, branch=BRANCH_NONGAUSSIAN,
                                            mode=mode, unreachable=True))
                return reports
            t2 = res.t2
        else:
            t2 = 0.0
        png = params.with_times(t1=t1, t2=t2)
        pre = dynamics.pre_click_moments(png)
        c = math.exp(-2.0 * params.gamma * (t1 + t2))
        vx_post, vp_post = post_click_variances(pre, c)

        def builder(spec: wigner.GridSpec) -> wigner.WignerGrid:
            w_pre = wigner.gaussian_wigner(pre, spec)
            ctx = wigner.SubtractionContext.for_times(params.gamma, t1, t2, pre)
            return wigner.photon_subtract(w_pre, pre, ctx)

        cfi_h = cfi_homodyne(builder(marginal_grid_spec(vx_post, vp_post)))
        qfi = frame_qfi(png, subtracted=True)
        cfi_p = None
        if want_phi:
            wng = builder(metrology_grid_spec(vx_post, vp_post))
            cfi_p, _ = _cfi_phi_impl(wng, default_phi_magnitudes(),
                                     dtheta=CFI_DTHETA,
                                     tail_fraction=PHI_TAIL_FRACTION,
                                     max_extensions=4)
        reports.append(FisherReport(t1=t1, t2=t2, cfi_homodyne=cfi_h, qfi=qfi,
                                    cfi_phi=cfi_p, branch=BRANCH_NONGAUSSIAN, mode=mode))
    return reports


def _run_points(spec: ScenarioSpec, want_phi: bool, jobs: int) -> list[FisherReport]:
    args = [(spec.params, t1, spec.post_selection, spec.comparisons, want_phi)
            for t1 in spec.t1_grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_fig_point, args))
    else:
        chunks = [_fig_point(a) for a in args]
    return [r for chunk in chunks for r in chunk]


def scenario_fig4(spec: ScenarioSpec, *, jobs: int = 1) -> list[FisherReport]:
    """Homodyne CFI of the Gaussian-only state versus the photon-
    subtracted state across the t1 grid, with t2 = 0 (immediate mode) or
    t2 set by the detection threshold (threshold mode)."""
    return _run_points(spec, want_phi=False, jobs=jobs)


def scenario_fig5(spec: ScenarioSpec, *, jobs: int = 1) -> list[FisherReport]:
    """Homodyne CFI, phi-basis CFI, and QFI of the photon-subtracted
    state across the t1 grid."""
    ng_only = ScenarioSpec(spec.params, spec.t1_grid, spec.post_selection,
                           (BRANCH_NONGAUSSIAN,))
    return _run_points(ng_only, want_phi=True, jobs=jobs)
