"""Kernel backend selection.

The compiled extension (``spectralstrip._kernels``) is preferred when it has
been built; the numpy fallback has identical semantics.  Set the environment
variable SPECTRALSTRIP_PURE=1 to force the fallback (used by the benchmark
and the parity tests).
"""

import os

from . import _kernels_py

_force_pure = os.environ.get("SPECTRALSTRIP_PURE", "") not in ("", "0")

if not _force_pure:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

BACKEND = "compiled" if getattr(_impl, "COMPILED", False) else "pure"

inertia_count = _impl.inertia_count
riccati_sweep = _impl.riccati_sweep

pure_inertia_count = _kernels_py.inertia_count
pure_riccati_sweep = _kernels_py.riccati_sweep
