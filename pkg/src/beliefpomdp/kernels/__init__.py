"""Backup-sweep kernel with a compiled core and a numpy fallback.

The Cython extension is picked at import when it was built; setting the
environment variable ``BELIEFPOMDP_BACKEND=numpy`` forces the fallback
(useful for benchmarking and backend-equivalence tests).
"""

import os

if os.environ.get("BELIEFPOMDP_BACKEND", "").lower() in ("numpy", "python"):
    from .fallback import backup_sweep

    BACKEND = "numpy"
else:
    try:
        from ._sweep import backup_sweep

        BACKEND = "cython"
    except ImportError:
        from .fallback import backup_sweep

        BACKEND = "numpy"

__all__ = ["backup_sweep", "BACKEND"]
