"""Subdivision, simplicial approximation and partition-of-unity smoothing of maps
between polyhedra, with sampling-based verification."""

from .complex import Complex, InvalidComplex, NotInPolyhedron, simplex_complex
from .maps import (IterationCapExceeded, MapEvaluator, PLMap, SimplicialMap, StageFailure,
                   WeaklySimplicialMap, check_star_condition, staged_weakly_simplicial,
                   zeeman_relative)
from .shrink_widen import Covering, build_covering, shrink, shrink_family, tubular_project
from .smoothing import SmoothMap, approximate, identity_smoother, smoother_sequence, synthesize
from .subdivision import Subdivision, sd, sd_iter, sd_mod

__all__ = [
    "Complex", "InvalidComplex", "NotInPolyhedron", "simplex_complex",
    "IterationCapExceeded", "MapEvaluator", "PLMap", "SimplicialMap", "StageFailure",
    "WeaklySimplicialMap", "check_star_condition", "staged_weakly_simplicial", "zeeman_relative",
    "Covering", "build_covering", "shrink", "shrink_family", "tubular_project",
    "SmoothMap", "approximate", "identity_smoother", "smoother_sequence", "synthesize",
    "Subdivision", "sd", "sd_iter", "sd_mod",
]
