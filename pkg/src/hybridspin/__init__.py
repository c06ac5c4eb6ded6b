"""Hybrid homodyne + single-photon measurement protocol simulator.

Moment dynamics with optical pumping and finite detection efficiency,
Wigner-grid phase-space numerics with analytic photon subtraction, Fock
reconstruction, and Fisher-information metrology for rotation sensing.
"""

from ._kernels import BACKEND
from .core import (
    GaussianMoments,
    ParameterError,
    ProtocolParams,
    ProtocolStage,
    StageTag,
    initial_scs,
    rotate_half_pi,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "GaussianMoments",
    "ParameterError",
    "ProtocolParams",
    "ProtocolStage",
    "StageTag",
    "initial_scs",
    "rotate_half_pi",
    "__version__",
]
