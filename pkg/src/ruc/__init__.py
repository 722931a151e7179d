"""Reduced unit cells for periodic homogenization.

Equivalence relations between a cell and its neighbours, load admissibility
and load reversal factors, periodic constraint equations for meshed cells,
and a small finite element solver to check a reduced cell against the full
periodic cell.
"""

from .admissibility import (
    GammaAssignment,
    Inadmissible,
    LoadCase,
    check_admissibility,
    enumerate_load_cases,
)
from .cellspec import CellSpec, Kind, classical_uc_spec, load_spec, validate
from .constraints import ConstraintEquation, MissingGamma, build_constraints, emit
from .equivalence import (
    BoundaryRegion,
    EquivalenceRelation,
    inverse_map,
    map_point,
    transform_displacement,
    transform_strain,
)
from .fem import FieldSolution, Solver, assemble, homogenize, solve_ruc, volume_average
from .materials import Material, MaterialTable
from .mesh import Mesh, structured_mesh
from .pairing import pair_boundary_nodes, resolve
from .tiling import tile_mesh, verify_equivalence

__version__ = "0.1.0"
