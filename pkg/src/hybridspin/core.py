"""Domain types and stage machine for the hybrid measurement protocol.

Conventions used throughout the package: bosonic quadratures with
[X, P] = i, so a spin coherent state maps to vacuum with variance 1/2
in each quadrature.  The stochastic homodyne displacement is fixed to
zero, so every Gaussian state here is zero-mean and fully described by
the pair (var_x, var_p).  Times are in whatever unit 1/kappa and
1/gamma are expressed in; the shipped scenarios use units of 1/gamma.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace


class ParameterError(ValueError):
    """Invalid protocol parameters.  Carries every violation at once."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(violations))


@dataclass(frozen=True)
class ProtocolParams:
    """Physical rates and times of one protocol configuration.

    kappa        measurement rate (same time unit as gamma)
    gamma        optical pumping rate
    n_atoms      ensemble size N_A
    eta          detection efficiency in [0, 1]
    t1           phase-I (homodyne) duration
    t2           phase-II (pre-click single photon detection) duration
    p_threshold  cumulative detection-probability target in [0, 1)
    """

    kappa: float
    gamma: float
    n_atoms: int
    eta: float = 1.0
    t1: float = 0.0
    t2: float = 0.0
    p_threshold: float = 0.2

    def __post_init__(self):
        violations = []
        if not self.kappa >= 0:
            violations.append(f"kappa must be >= 0, got {self.kappa}")
        if not self.gamma >= 0:
            violations.append(f"gamma must be >= 0, got {self.gamma}")
        if not (self.kappa > 0 or self.gamma > 0):
            violations.append("at least one of kappa, gamma must be positive")
        if not (isinstance(self.n_atoms, int) and self.n_atoms >= 1):
            violations.append(f"n_atoms must be a positive integer, got {self.n_atoms}")
        if not 0.0 <= self.eta <= 1.0:
            violations.append(f"eta must lie in [0, 1], got {self.eta}")
        if not self.t1 >= 0:
            violations.append(f"t1 must be >= 0, got {self.t1}")
        if not self.t2 >= 0:
            violations.append(f"t2 must be >= 0, got {self.t2}")
        if not 0.0 <= self.p_threshold < 1.0:
            violations.append(f"p_threshold must lie in [0, 1), got {self.p_threshold}")
        if violations:
            raise ParameterError(violations)

    def with_times(self, t1: float | None = None, t2: float | None = None) -> "ProtocolParams":
        kw = {}
        if t1 is not None:
            kw["t1"] = t1
        if t2 is not None:
            kw["t2"] = t2
        return replace(self, **kw)


@dataclass(frozen=True)
class GaussianMoments:
    """Second moments (<X^2>, <P^2>) of a zero-mean Gaussian state.

    With gamma = 0 and eta = 1 the protocol preserves the minimum
    uncertainty product var_x * var_p = 1/4 through both phases.
    """

    var_x: float
    var_p: float

    def __post_init__(self):
        if not (self.var_x > 0 and self.var_p > 0):
            raise ValueError(f"variances must be positive, got ({self.var_x}, {self.var_p})")

    @property
    def uncertainty_product(self) -> float:
        return self.var_x * self.var_p


class StageTag(enum.Enum):
    INITIAL = "Initial"
    PHASE_I = "PhaseI"
    ROTATED = "Rotated"
    PHASE_II = "PhaseII"
    POST_CLICK = "PostClick"


_STAGE_ORDER = list(StageTag)


@dataclass(frozen=True)
class ProtocolStage:
    """Position in the protocol sequence plus total elapsed time.

    Transitions only advance through Initial -> PhaseI -> Rotated ->
    PhaseII -> PostClick, and elapsed time never decreases.
    """

    tag: StageTag = StageTag.INITIAL
    elapsed: float = 0.0

    def advance(self, tag: StageTag, dt: float = 0.0) -> "ProtocolStage":
        if dt < 0:
            raise ValueError(f"stage duration must be >= 0, got {dt}")
        here = _STAGE_ORDER.index(self.tag)
        there = _STAGE_ORDER.index(tag)
        if there != here + 1:
            raise ValueError(f"illegal stage transition {self.tag.value} -> {tag.value}")
        return ProtocolStage(tag, self.elapsed + dt)


def initial_scs() -> GaussianMoments:
    """Spin coherent state along J_x: vacuum in the bosonic picture."""
    return GaussianMoments(0.5, 0.5)


def rotate_half_pi(m: GaussianMoments) -> GaussianMoments:
    """pi/2 rotation about J_x: exchanges the X and P quadratures.

    Applied between the phases so the anti-squeezed quadrature faces
    the photon detector.  Involution: applying it twice is the identity.
    """
    return GaussianMoments(var_x=m.var_p, var_p=m.var_x)
