"""Numba-compiled twins of the reference kernels.

Importing this module triggers (cached) compilation; callers that want to
avoid numba entirely go through ``kernels/__init__`` with VTSPOT_NO_NUMBA
set, which never imports this file.
"""

from numba import njit

from ._reference import bilinear_warp_loops, convex_clip_area, solve_assignment

bilinear_warp = njit(cache=True)(bilinear_warp_loops)
convex_clip_area = njit(cache=True)(convex_clip_area)
solve_assignment = njit(cache=True)(solve_assignment)
