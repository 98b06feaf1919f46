"""Build meshes, refine them, and inspect the velocity/pressure pair.

Walks the geometric toolbox: the structured unit-square mesh with its fixed
diagonal, nested uniform refinement, the Alfeld (barycentric) split that
makes the low-order pair stable, and the plain-text mesh dump.
"""

import io

from nsfem.mesh import (alfeld_split, build_structured_mesh, check_conformity,
                        locate_point, refine_uniform,
                        singular_corner_vertices)
from nsfem.space import build_pressure_space, build_velocity_space

mesh = build_structured_mesh(4)
print("structured n=4:", mesh)
print("  area sum:", mesh.areas.sum())
check_conformity(mesh)

fine = refine_uniform(mesh)
print("refined:", fine, "| h halves exactly:", fine.h == mesh.h / 2)

split = alfeld_split(mesh)
print("alfeld split:", split)

# The fixed-diagonal mesh has two singular boundary corners; the divergence
# of any zero-trace velocity vanishes there, so the pressure space carries
# one point constraint per corner.  The split removes them.
print("singular corners, plain :", singular_corner_vertices(mesh))
print("singular corners, alfeld:", singular_corner_vertices(split))

V = build_velocity_space(split, 2)
Q = build_pressure_space(split, 1)
print("velocity space:", V)
print("pressure space:", Q, "| constraint columns:", Q.constraints.shape[1])

V4 = build_velocity_space(mesh, 4)
Q3 = build_pressure_space(mesh, 3)
print("k=4 pair on the plain mesh:", V4.num_dofs, "velocity DOFs,",
      Q3.num_dofs, "pressure DOFs,", Q3.constraints.shape[1],
      "constraint columns")

cell, bary = locate_point(mesh, (0.3, 0.7))
print("point (0.3, 0.7) lies in cell", cell, "with barycentric", bary)

buf = io.StringIO()
build_structured_mesh(1).dump(buf)
print("plain-text dump of the two-cell mesh:")
print(buf.getvalue())
