"""Geometric multigrid for discrete exterior calculus on 2-D simplicial complexes."""

__version__ = "0.1.0"

from .maps import GeometricMap, compose, interpolate, matrix_of, restrict, restriction_matrix
from .mesh import (
    EmbeddedComplex2D,
    build_dual,
    make_equilateral_grid,
    make_triangulated_grid,
    read_obj,
    validate_complex,
    write_obj,
)
from .multigrid import CyclePlan, SolveReport, build_hierarchy, run_cycle, standard_plans
from .operators import Cochain, DECOperators
from .subdivision import binary_subdivide, cubic_subdivide, subdivide, subdivision_tower

__all__ = [
    "GeometricMap",
    "compose",
    "interpolate",
    "matrix_of",
    "restrict",
    "restriction_matrix",
    "EmbeddedComplex2D",
    "build_dual",
    "make_equilateral_grid",
    "make_triangulated_grid",
    "read_obj",
    "validate_complex",
    "write_obj",
    "CyclePlan",
    "SolveReport",
    "build_hierarchy",
    "run_cycle",
    "standard_plans",
    "Cochain",
    "DECOperators",
    "binary_subdivide",
    "cubic_subdivide",
    "subdivide",
    "subdivision_tower",
]
