"""Kernel dispatch: compiled extension when available, NumPy otherwise.

Set HYBRIDSPIN_PURE=1 to force the NumPy lane (used by the benchmark
and by tests that compare the two lanes).
"""

from __future__ import annotations

import os

from . import _ref
from ._ref import JacobiNonconvergence

_impl = _ref
if os.environ.get("HYBRIDSPIN_PURE", "") != "1":
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _ref

BACKEND: str = _impl.BACKEND

airy_ai_array = _impl.airy_ai_array
phi_wigner_values = _impl.phi_wigner_values
jacobi_eigh = _impl.jacobi_eigh

__all__ = [
    "BACKEND",
    "JacobiNonconvergence",
    "airy_ai_array",
    "phi_wigner_values",
    "jacobi_eigh",
]
