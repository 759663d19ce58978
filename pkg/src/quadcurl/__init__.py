"""HDG solver for the 3D mixed quad-curl boundary value problem."""

from .mesh import Mesh, generate_box_mesh, generate_lshape_mesh, mesh_report, write_vtk
from .errors import (
    QuadCurlError, InvalidParameterError, UnsupportedDegreeError, AssemblyError,
    CondensationError, SolverError, SingularMatrixError, SizeLimitError,
)

__all__ = [
    "Mesh", "generate_box_mesh", "generate_lshape_mesh", "mesh_report",
    "write_vtk", "QuadCurlError", "InvalidParameterError",
    "UnsupportedDegreeError", "AssemblyError", "CondensationError",
    "SolverError", "SingularMatrixError", "SizeLimitError",
]

__version__ = "0.1.0"
