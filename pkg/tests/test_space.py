import numpy as np
import pytest

from nsfem.errors import UnstablePairError
from nsfem.mesh import alfeld_split
from nsfem.space import (FEFunction, build_pressure_space,
                         build_velocity_space, constant_pressure,
                         divergence_coefficients, divergence_values,
                         evaluate, interpolate_velocity, project_pressure)
from nsfem.element import quadrature


def test_k4_two_cell_counts(spaces_k4_two_cell):
    V, _ = spaces_k4_two_cell
    # 4 vertices + 3 nodes on each of 5 edges + 3 interior nodes per cell
    assert V.num_scalar_dofs == 25
    assert V.num_dofs == 50
    # free scalar nodes: 3 on the diagonal edge + 6 cell-interior
    assert V.num_free_dofs == 18
    assert V.dirichlet_dofs.size == 32


def test_k2_two_cell_scalar_count(two_cell):
    V = build_velocity_space(two_cell, 2, allow_unstable=True)
    assert V.num_scalar_dofs == 9   # 4 vertices + 5 edges


def test_unstable_pair_guard(two_cell):
    with pytest.raises(UnstablePairError):
        build_velocity_space(two_cell, 2)
    build_velocity_space(alfeld_split(two_cell), 2)


def test_degree_validation(two_cell):
    with pytest.raises(ValueError):
        build_velocity_space(two_cell, 5)


def test_pressure_dofs(two_cell):
    Q = build_pressure_space(two_cell, 3)
    assert Q.num_dofs == 20


def test_mean_vector_constant(two_cell):
    Q = build_pressure_space(two_cell, 3)
    one = constant_pressure(Q)
    assert abs(Q.mean_vector @ one.coeffs - 1.0) <= 1e-14


def test_mean_vector_odd_function(two_cell):
    Q = build_pressure_space(two_cell, 3)
    p = project_pressure(Q, lambda x: x[:, 0] - 0.5, quadrature(8))
    assert abs(Q.mean_vector @ p.coeffs) <= 1e-14


def test_pressure_constraints_on_singular_mesh(two_cell):
    Q = build_pressure_space(two_cell, 3)
    assert Q.constraints.shape == (20, 3)
    Qa = build_pressure_space(alfeld_split(two_cell), 1)
    assert Qa.constraints.shape[1] == 1


def test_evaluate_zero(spaces_k2_alfeld4):
    V, _ = spaces_k2_alfeld4
    assert evaluate(FEFunction(V), (0.3, 0.7)) == (0.0, 0.0)


def test_evaluate_linear_reproduction(spaces_k2_alfeld4):
    V, _ = spaces_k2_alfeld4
    u = interpolate_velocity(V, lambda p: p)
    got = evaluate(u, (0.25, 0.75))
    assert abs(got[0] - 0.25) <= 1e-13
    assert abs(got[1] - 0.75) <= 1e-13


def test_evaluate_vertex_nodal(spaces_k2_alfeld4):
    V, _ = spaces_k2_alfeld4
    mesh = V.mesh
    u = interpolate_velocity(
        V, lambda p: np.column_stack([p[:, 0] * p[:, 1], p[:, 0] - p[:, 1]]))
    v = 12  # arbitrary interior vertex
    x, y = mesh.vertices[v]
    got = evaluate(u, (x, y))
    assert abs(got[0] - x * y) <= 1e-13
    assert abs(got[1] - (x - y)) <= 1e-13


def test_shared_edge_dofs_identical(spaces_k4_two_cell):
    V, _ = spaces_k4_two_cell
    mesh = V.mesh
    dm = V.dofmap
    for e in np.flatnonzero(~mesh.boundary_edge):
        c1, c2 = mesh.edge_cells[e]
        shared = set(dm.cell_dofs[c1]) & set(dm.cell_dofs[c2])
        # two endpoint vertices plus k-1 edge nodes
        assert len(shared) == 2 + (V.degree - 1)


def test_dirichlet_classification(spaces_k2_alfeld4):
    V, _ = spaces_k2_alfeld4
    coords = V.dofmap.dof_coords
    on_boundary = ((coords == 0.0) | (coords == 1.0)).any(axis=1)
    assert np.array_equal(on_boundary, V.dirichlet_scalar)


def test_divergence_in_pressure_space(spaces_k2_alfeld4, rng):
    """Property (P2): the per-cell divergence is exactly degree k-1."""
    V, Q = spaces_k2_alfeld4
    rule = quadrature(2 * V.degree)
    for _ in range(20):
        u = FEFunction(V, rng.standard_normal(V.num_dofs))
        div = divergence_values(u, rule)
        coef = divergence_coefficients(u)
        pvals, _ = Q.basis.eval(rule.points)
        recon = np.einsum("cj,qj->cq", coef, pvals)
        num = np.einsum("q,cq,c->", rule.weights, (div - recon) ** 2,
                        2 * V.mesh.areas)
        den = np.einsum("q,cq,c->", rule.weights, div ** 2, 2 * V.mesh.areas)
        assert np.sqrt(num / den) <= 1e-11
