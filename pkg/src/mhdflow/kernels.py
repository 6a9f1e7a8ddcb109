"""Kernel implementation selector.

Prefers the compiled extension ``mhdflow._kernels`` when it built
successfully, else falls back to the NumPy reference ``_kernels_py``.
Set the environment variable MHDFLOW_PURE_PYTHON=1 to force the fallback
(useful for benchmarking and for debugging kernel parity).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("MHDFLOW_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

IMPL = _impl.IMPL
transport_matrix_coo = _impl.transport_matrix_coo
mass_fluxes = _impl.mass_fluxes
convection_matrix_coo = _impl.convection_matrix_coo
pair_matrix_coo = _impl.pair_matrix_coo
