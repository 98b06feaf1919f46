"""The two discrete projections, the discrete Stokes operator, and the
inf-sup constant.

For a smooth divergence-free field both projections converge at second
order in L2; the inf-sup constant stays bounded away from zero under
refinement, which is what makes the pressure well-posed.
"""

from nsfem.initial_data import smooth_curl_field
from nsfem.mesh import alfeld_split, build_structured_mesh
from nsfem.projections import (DiscreteStokesOperator, l2_project_divfree,
                               stokes_ritz_project)
from nsfem.saddle import infsup_constant
from nsfem.space import build_pressure_space, build_velocity_space
from nsfem.study import h1_error_field, l2_error_field

field = smooth_curl_field()
print("projection errors for the smooth curl field (k = 2, Alfeld):")
for n in (4, 8, 16):
    mesh = alfeld_split(build_structured_mesh(n))
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    u0, _ = l2_project_divfree(field, V, Q)
    r = stokes_ritz_project(field, V, Q)
    print(f"  h=1/{n:<3d} |v-Pv|_L2 = {l2_error_field(u0, field):.3e}   "
          f"|v-Rv|_L2 = {l2_error_field(r, field):.3e}   "
          f"|grad(v-Rv)|_L2 = {h1_error_field(r, field.gradient):.3e}")

print("\ndiscrete Stokes operator on the projected field (h = 1/8):")
mesh = alfeld_split(build_structured_mesh(8))
V = build_velocity_space(mesh, 2)
Q = build_pressure_space(mesh, 1)
op = DiscreteStokesOperator(V, Q)
u0, _ = l2_project_divfree(field, V, Q)
Au = op.apply(u0)
energy = Au.coeffs @ (op.M @ u0.coeffs)
print(f"  (A_h u, u) = {energy:.4f} = -|grad u|^2 = "
      f"{-u0.coeffs @ (op.K @ u0.coeffs):.4f}")

print("\ninf-sup constants:")
for kind, k, ns in (("plain", 4, (2, 4)), ("alfeld", 2, (4, 8))):
    betas = []
    for n in ns:
        mesh = build_structured_mesh(n)
        if kind == "alfeld":
            mesh = alfeld_split(mesh)
        V = build_velocity_space(mesh, k)
        Q = build_pressure_space(mesh, k - 1)
        betas.append(infsup_constant(V, Q))
    print(f"  {kind} k={k}: beta = " +
          ", ".join(f"{b:.4f}" for b in betas))
