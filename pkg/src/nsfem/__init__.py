"""2D incompressible Navier-Stokes with divergence-free mixed elements.

Library layout:

- :mod:`nsfem.mesh` -- structured triangulations, refinement, Alfeld split
- :mod:`nsfem.element` -- reference bases and quadrature
- :mod:`nsfem.space` -- global velocity/pressure spaces and FE functions
- :mod:`nsfem.assembly` -- sparse form assembly
- :mod:`nsfem.saddle` -- saddle-point solves and the inf-sup constant
- :mod:`nsfem.projections` -- divergence-free L2 and Stokes-Ritz projections
- :mod:`nsfem.timestepper` -- graded grids and the semi-implicit Euler loop
- :mod:`nsfem.study` -- norms, cross-mesh errors, convergence studies
- :mod:`nsfem.initial_data` -- the two singular example data sets
- :mod:`nsfem.cli` -- command-line driver
"""

__version__ = "0.1.0"

from .mesh import (Mesh, alfeld_split, build_structured_mesh, locate_point,
                   refine_uniform)
from .space import (FEFunction, FESpace, build_pressure_space,
                    build_velocity_space, evaluate)
from .timestepper import GradedGrid, build_graded_grid

__all__ = [
    "Mesh", "alfeld_split", "build_structured_mesh", "locate_point",
    "refine_uniform", "FEFunction", "FESpace", "build_pressure_space",
    "build_velocity_space", "evaluate", "GradedGrid", "build_graded_grid",
]
