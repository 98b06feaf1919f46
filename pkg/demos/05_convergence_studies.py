"""Desk-scale time and space convergence studies.

Same protocol as the full tables, shrunk to run in about a minute: errors
against a same-method reference at t = T, with both the least-squares and
last-interval rates.  First order in time and about 1.5 in space are the
expected signatures for L2-only initial data.
"""

from nsfem.initial_data import initial_data_example1
from nsfem.mesh import alfeld_split, build_structured_mesh
from nsfem.space import build_pressure_space, build_velocity_space
from nsfem.study import run_space_study, run_time_study


def spaces(n):
    mesh = alfeld_split(build_structured_mesh(n))
    return build_velocity_space(mesh, 2), build_pressure_space(mesh, 1)


V, Q = spaces(8)
report = run_time_study(initial_data_example1(), V, Q,
                        [1 / 20, 1 / 40, 1 / 80], 1 / 320,
                        T=0.1, mu=0.05, alpha=0.55)
print("time study (h = 1/8, k = 2):")
for label, err in report.rows:
    print(f"  tau = {label:>6}   error = {err:.4e}")
print(f"  rate: LS = {report.rate_ls:.3f}, last interval = "
      f"{report.rate_last:.3f}\n")

report = run_space_study(initial_data_example1(), spaces, [2, 4, 8], 16,
                         1 / 160, T=0.1, mu=0.05, alpha=0.55)
print("space study (tau = 1/160, k = 2):")
for label, err in report.rows:
    print(f"  h = {label:>6}   error = {err:.4e}")
print(f"  rate: LS = {report.rate_ls:.3f}, last interval = "
      f"{report.rate_last:.3f}")
print("\nCSV form:\n" + report.to_csv())
