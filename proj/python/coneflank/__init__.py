"""Cone-envelope detection and hyperosculating cone reconstruction."""

from ._coneflank import (
    ConeflankError,
    __version__,
    classify,
    cones,
    isotropic_to_plane,
    jet,
    perturb_normals,
    plane_to_isotropic,
    run_analysis,
    solve,
    trace_circle,
)

__all__ = [
    "ConeflankError",
    "__version__",
    "classify",
    "cones",
    "isotropic_to_plane",
    "jet",
    "perturb_normals",
    "plane_to_isotropic",
    "run_analysis",
    "solve",
    "trace_circle",
]
