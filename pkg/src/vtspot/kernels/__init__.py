"""Hot numeric kernels with selectable backend.

By default the numba-compiled twins are used; set the environment variable
VTSPOT_NO_NUMBA (to any non-empty value) before import to force the pure
numpy/python reference path. ``BACKEND`` reports which one is active.
Both backends order their arithmetic identically, so results agree bit
for bit.
"""

import os

if os.environ.get("VTSPOT_NO_NUMBA"):
    from ._reference import bilinear_warp, convex_clip_area, solve_assignment

    BACKEND = "numpy"
else:
    try:
        from ._jit import bilinear_warp, convex_clip_area, solve_assignment

        BACKEND = "numba"
    except ImportError:
        from ._reference import bilinear_warp, convex_clip_area, solve_assignment

        BACKEND = "numpy"

__all__ = ["bilinear_warp", "convex_clip_area", "solve_assignment", "BACKEND"]
