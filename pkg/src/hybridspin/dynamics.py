"""Moment equations of motion for both protocol phases.

Phase-I (homodyne monitoring of P) drives

    dVx/dt =  kappa*N/8 * exp(-4*gamma*t) - 2*gamma*Vx + gamma
    dVp/dt = -kappa*eta*N/2 * Vp^2       - 2*gamma*Vp + gamma

and phase-II (no-click evolution while photon counting) is the same
structure at half the measurement rate, with the diffusion picking up
an extra undetected-photon channel:

    dVx/dt =  kappa*(1-eta/2)*N/8 * exp(-4*gamma*(t+t1)) - 2*gamma*Vx + gamma
    dVp/dt = -kappa*eta*N/4 * Vp^2                       - 2*gamma*Vp + gamma

Detection efficiency only rescales the squeezing rate, never the X
diffusion, in phase-I; in phase-II it enters both.  Both Vp equations
are constant-coefficient Riccati equations, so the module carries exact
hyperbolic solutions alongside the RK4 integrator and uses them for the
closed-form endpoint, detection probabilities, and the total-time curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import GaussianMoments, ProtocolParams, rotate_half_pi

RHS = Callable[[GaussianMoments, float], tuple[float, float]]

#: successive step-halving agreement demanded of the integrator
INTEGRATOR_REL_TOL = 1e-9


class NonfiniteStateError(RuntimeError):
    """Integration blew up; carries the last time with a finite state."""

    def __init__(self, last_good_time: float, state):
        self.last_good_time = last_good_time
        self.state = tuple(state)
        super().__init__(
            f"nonfinite moments encountered after t={last_good_time:.6g}; "
            f"last finite state {self.state}"
        )


class GammaDomainError(ValueError):
    """Closed forms need gamma > 0; use integrate() for gamma = 0."""


@dataclass(frozen=True)
class EvolutionResult:
    """Endpoint moments plus an optional sampled (t, var_x, var_p) path."""

    moments: GaussianMoments
    elapsed: float
    trajectory: np.ndarray | None = None  # shape (n, 3), rows (t, var_x, var_p)


@dataclass(frozen=True)
class TimeBudget:
    """One point of the total-runtime curve; total is exactly t1 + t2."""

    t1: float
    t2: float
    total: float
    reachable: bool = True


@dataclass(frozen=True)
class ThresholdResult:
    """Outcome of the detection-probability threshold search."""

    t2: float | None
    reachable: bool
    cumulative_at_horizon: float | None = None


def phase1_rhs(m: GaussianMoments, p: ProtocolParams, t: float) -> tuple[float, float]:
    """Time derivatives of (var_x, var_p) during homodyne monitoring."""
    kN = p.kappa * p.n_atoms
    g = p.gamma
    dvx = kN / 8.0 * math.exp(-4.0 * g * t) - 2.0 * g * m.var_x + g
    dvp = -p.eta * kN / 2.0 * m.var_p**2 - 2.0 * g * m.var_p + g
    return dvx, dvp


def phase2_rhs(m: GaussianMoments, p: ProtocolParams, t: float) -> tuple[float, float]:
    """Time derivatives during the pre-click phase; t counts from the
    phase-II start, with p.t1 setting the accumulated frame damping."""
    kN = p.kappa * p.n_atoms
    g = p.gamma
    dvx = kN * (1.0 - p.eta / 2.0) / 8.0 * math.exp(-4.0 * g * (t + p.t1)) - 2.0 * g * m.var_x + g
    dvp = -p.eta * kN / 4.0 * m.var_p**2 - 2.0 * g * m.var_p + g
    return dvx, dvp


class _TrialMoments:
    """Unvalidated (var_x, var_p) pair handed to the RHS during Runge-
    Kutta stages, where coarse trial steps may overshoot below zero."""

    __slots__ = ("var_x", "var_p")

    def __init__(self, var_x: float, var_p: float):
        self.var_x = var_x
        self.var_p = var_p


def _rk4_pass(rhs: RHS, y0: np.ndarray, duration: float, n_steps: int,
              record: bool) -> tuple[np.ndarray, np.ndarray | None]:
    h = duration / n_steps
    y = y0.copy()
    t = 0.0
    path = np.empty((n_steps + 1, 3)) if record else None
    if record:
        path[0] = (0.0, y[0], y[1])

    def f(yv, tv):
        return np.asarray(rhs(_TrialMoments(yv[0], yv[1]), tv))

    last_good = y0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            k1 = f(y, t)
            k2 = f(y + 0.5 * h * k1, t + 0.5 * h)
            k3 = f(y + 0.5 * h * k2, t + 0.5 * h)
            k4 = f(y + h * k3, t + h)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = (i + 1) * h
            if not np.all(np.isfinite(y)):
                raise NonfiniteStateError(i * h, tuple(last_good))
            last_good = y
            if record:
                path[i + 1] = (t, y[0], y[1])
    return y, path


def integrate(rhs: RHS, m0: GaussianMoments, duration: float, *,
              rel_tol: float = INTEGRATOR_REL_TOL,
              n_samples: int = 0,
              initial_steps: int = 32,
              max_steps: int = 1 << 22) -> EvolutionResult:
    """Fixed-step RK4 with step halving until two successive refinements
    agree to rel_tol on both variances.  n_samples > 0 asks for a sampled
    trajectory of roughly that many rows (endpoints always included)."""
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    if duration == 0.0:
        traj = None
        if n_samples > 0:
            traj = np.array([[0.0, m0.var_x, m0.var_p]])
        return EvolutionResult(m0, 0.0, traj)

    y0 = np.array([m0.var_x, m0.var_p])
    n = initial_steps
    prev = None
    blowup: NonfiniteStateError | None = None
    while True:
        # a pass that overflows at this resolution is simply not yet
        # converged: halve the step like any other failed refinement,
        # and only report the blowup if the finest grid still explodes
        try:
            cur, _ = _rk4_pass(rhs, y0, duration, n, record=False)
        except NonfiniteStateError as err:
            blowup = err
            cur = None
        if cur is not None and prev is not None:
            scale = np.maximum(np.abs(cur), 1e-300)
            if np.all(np.abs(cur - prev) / scale < rel_tol):
                break
        if n >= max_steps:
            if blowup is not None and cur is None:
                raise blowup
            raise RuntimeError(f"integrator failed to converge below {rel_tol} "
                               f"within {max_steps} steps")
        prev = cur
        n *= 2

    traj = None
    if n_samples > 0:
        _, path = _rk4_pass(rhs, y0, duration, n, record=True)
        stride = max(1, n // max(1, n_samples - 1))
        idx = np.unique(np.concatenate([np.arange(0, n + 1, stride), [n]]))
        traj = path[idx]
        cur = path[-1, 1:]
    return EvolutionResult(GaussianMoments(cur[0], cur[1]), duration, traj)


# ---------------------------------------------------------------------------
# Exact solutions.  dV/dt = -a V^2 - 2 g V + g with constant a, g is a
# constant-coefficient Riccati equation; substituting V = u'/(a u) gives
# u'' + 2 g u' - a g u = 0 with rates -g +/- mu, mu = sqrt(g (g + a)).
# ---------------------------------------------------------------------------

def riccati_value(v0: float, a: float, g: float, t: float) -> float:
    """V(t) for dV/dt = -a V^2 - 2g V + g, V(0) = v0."""
    if t == 0.0:
        return v0
    if a == 0.0:
        if g == 0.0:
            return v0
        return 0.5 + (v0 - 0.5) * math.exp(-2.0 * g * t)
    if g == 0.0:
        return v0 / (1.0 + a * v0 * t)
    mu = math.sqrt(g * (g + a))
    q = (a * v0 + g) / mu
    th = math.tanh(mu * t)
    return (mu * (q + th) / (1.0 + q * th) - g) / a


def riccati_integral(v0: float, a: float, g: float, t: float) -> float:
    """Integral of V(s) ds over [0, t] for the same Riccati flow."""
    if t == 0.0:
        return 0.0
    if a == 0.0:
        if g == 0.0:
            return v0 * t
        return 0.5 * t + (v0 - 0.5) * -math.expm1(-2.0 * g * t) / (2.0 * g)
    if g == 0.0:
        return math.log1p(a * v0 * t) / a
    mu = math.sqrt(g * (g + a))
    q = (a * v0 + g) / mu
    x = mu * t
    # log(cosh x + q sinh x), written to survive large x
    log_term = x + math.log(0.5 * (1.0 + q) + 0.5 * (1.0 - q) * math.exp(-2.0 * x))
    return (log_term - g * t) / a


def squeezing_hyperbolic_rate(p: ProtocolParams) -> float:
    """Hyperbolic rate zeta = sqrt(gamma (2 gamma + eta kappa N)) of the
    phase-I squeezing solution.

    The phase-I Vp Riccati equation linearises to u'' + 2 gamma u' -
    (eta kappa N / 2) gamma u = 0, whose root splitting is
    2 sqrt(gamma^2 + eta kappa N gamma / 2) = sqrt(2) * zeta; the closed
    form for Vp(t1) below is the coth solution written with this rate.
    Derived here because the published endpoint expression uses the
    symbol without defining it; unit tests pin it against the integrator.
    """
    return math.sqrt(p.gamma * (2.0 * p.gamma + p.eta * p.kappa * p.n_atoms))


def phase1_var_p(p: ProtocolParams, t1: float) -> float:
    """Closed-form squeezed variance after homodyne time t1."""
    a = p.eta * p.kappa * p.n_atoms / 2.0
    if p.gamma == 0.0 or a == 0.0:
        return riccati_value(0.5, a, p.gamma, t1)
    mu = squeezing_hyperbolic_rate(p) / math.sqrt(2.0)
    q = (a * 0.5 + p.gamma) / mu
    th = math.tanh(mu * t1)
    return (mu * (q + th) / (1.0 + q * th) - p.gamma) / a


def phase1_var_x(p: ProtocolParams, t1: float) -> float:
    """Closed-form anti-squeezed variance after homodyne time t1."""
    kN = p.kappa * p.n_atoms
    g = p.gamma
    if g == 0.0:
        return 0.5 + kN * t1 / 8.0
    return 0.5 + kN / (16.0 * g) * (math.exp(-2.0 * g * t1) - math.exp(-4.0 * g * t1))


def closed_form_final(p: ProtocolParams) -> GaussianMoments:
    """Pre-click moments after phase-I (t1), the pi/2 rotation, and
    phase-II no-click evolution (t2), evaluated from the exact solutions.

    Requires gamma > 0 (the published expressions carry 1/gamma and
    sqrt(gamma) factors); use integrate() for the gamma = 0 limit.
    """
    if p.gamma <= 0.0:
        raise GammaDomainError("closed_form_final requires gamma > 0; use integrate()")
    g = p.gamma
    kN = p.kappa * p.n_atoms
    vp1 = phase1_var_p(p, p.t1)
    vx1 = phase1_var_x(p, p.t1)
    # rotation swaps the quadratures; phase-II then squeezes P and
    # diffuses X with the accumulated frame damping exp(-4 g t1)
    vx0, vp0 = vp1, vx1
    vp2 = riccati_value(vp0, p.eta * kN / 4.0, g, p.t2)
    e2, e4 = math.exp(-2.0 * g * p.t2), math.exp(-4.0 * g * p.t2)
    vx2 = (vx0 * e2
           + kN * (2.0 - p.eta) / (32.0 * g) * math.exp(-4.0 * g * p.t1) * (e2 - e4)
           + 0.5 * (1.0 - e2))
    return GaussianMoments(vx2, vp2)


def pre_click_moments(p: ProtocolParams, *, rel_tol: float = INTEGRATOR_REL_TOL,
                      ) -> GaussianMoments:
    """Moments just before the click, valid for every gamma >= 0."""
    if p.gamma > 0.0:
        return closed_form_final(p)
    after1 = integrate(lambda m, t: phase1_rhs(m, p, t), GaussianMoments(0.5, 0.5),
                       p.t1, rel_tol=rel_tol).moments
    rotated = rotate_half_pi(after1)
    return integrate(lambda m, t: phase2_rhs(m, p, t), rotated,
                     p.t2, rel_tol=rel_tol).moments


def detection_rate(m: GaussianMoments, p: ProtocolParams) -> float:
    """Detected single-photon click rate eta * kappa * N * <P^2> / 8.

    The bare scattering rate is kappa*N*<P^2>/8; only the fraction eta
    of scattered signal photons reaches the detector.
    """
    return p.eta * p.kappa * p.n_atoms * m.var_p / 8.0


def detection_cumulative(p: ProtocolParams, t1: float, t2: float) -> float:
    """Integral of the detected rate over phase-II up to t2, i.e. the
    exponent of the no-click survival probability."""
    v0 = phase1_var_x(p, t1)  # anti-squeezed variance faces the detector
    a2 = p.eta * p.kappa * p.n_atoms / 4.0
    return p.eta * p.kappa * p.n_atoms / 8.0 * riccati_integral(v0, a2, p.gamma, t2)


def detection_probability(p: ProtocolParams, t1: float, t2: float) -> float:
    """Cumulative click probability 1 - exp(-int rate dt) by time t2."""
    return -math.expm1(-detection_cumulative(p, t1, t2))


def t2_for_threshold(t1: float, p: ProtocolParams, *,
                     horizon: float = 1e6,
                     rel_tol: float = 1e-6) -> ThresholdResult:
    """Smallest t2 with cumulative detection probability >= p.p_threshold.

    Bisection on the exact cumulative to relative tolerance rel_tol.
    Returns an unreachable result (never raises) when the accumulated
    probability cannot cross the threshold before the horizon.
    """
    thr = p.p_threshold
    if thr == 0.0:
        return ThresholdResult(0.0, True)
    target = -math.log1p(-thr)
    if p.eta * p.kappa * p.n_atoms == 0.0:
        return ThresholdResult(None, False, 0.0)
    if detection_cumulative(p, t1, horizon) < target:
        prob = detection_probability(p, t1, horizon)
        return ThresholdResult(None, False, prob)

    lo, hi = 0.0, min(1.0, horizon)
    while detection_cumulative(p, t1, hi) < target:
        hi = min(hi * 2.0, horizon)
        if hi >= horizon:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if detection_cumulative(p, t1, mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * hi:
            break
    return ThresholdResult(hi, True)


def total_time_curve(t1_grid: Sequence[float], p: ProtocolParams, *,
                     horizon: float = 1e6) -> list[TimeBudget]:
    """T(t1) = t1 + t2(t1) for the configured threshold, one TimeBudget
    per grid point; unreachable points carry t2 = inf and a flag."""
    t1_grid = list(t1_grid)
    if not t1_grid:
        raise ValueError("t1 grid must be nonempty")
    if any(b <= a for a, b in zip(t1_grid, t1_grid[1:])):
        raise ValueError("t1 grid must be strictly increasing")
    out = []
    for t1 in t1_grid:
        res = t2_for_threshold(t1, p, horizon=horizon)
        if res.reachable:
            out.append(TimeBudget(t1, res.t2, t1 + res.t2))
        else:
            out.append(TimeBudget(t1, math.inf, math.inf, reachable=False))
    return out
