import numpy as np
import pytest

from nsfem.errors import NumericDataError
from nsfem.element import quadrature
from nsfem.assembly import cell_geometry
from nsfem.initial_data import (initial_data_example1, initial_data_example2,
                                smooth_curl_field)
from nsfem.mesh import alfeld_split, build_structured_mesh


def _quad_norm_sq(field, mesh, rule):
    geo = cell_geometry(mesh)
    pts = geo.physical_points(rule.points)
    vals = field(pts.reshape(-1, 2)).reshape(pts.shape)
    return float(np.einsum("q,cq,c->", rule.weights,
                           (vals ** 2).sum(axis=2), geo.detJ))


def test_example1_divergence_free_fd(rng):
    """4th-order central differences: div u0 = 0 at random interior points."""
    field = initial_data_example1()
    pts = rng.uniform(0.1, 0.9, size=(100, 2))
    h = 2e-4
    div = np.zeros(len(pts))
    for axis, comp in ((0, 0), (1, 1)):
        for offset, weight in ((-2, 1 / 12), (-1, -8 / 12),
                               (1, 8 / 12), (2, -1 / 12)):
            shifted = pts.copy()
            shifted[:, axis] += offset * h
            div += weight * field(shifted)[:, comp] / h
    assert np.abs(div).max() <= 1e-10


def test_example1_center_value():
    field = initial_data_example1()
    val = field(np.array([[0.5, 0.5]]))
    assert np.abs(val).max() <= 1e-14


def test_example1_singular_line_rejected():
    field = initial_data_example1()
    with pytest.raises(NumericDataError):
        field(np.array([[0.0, 0.5]]))


def _project(field, n=16, rule=None):
    from nsfem.projections import l2_project_divfree
    from nsfem.space import build_pressure_space, build_velocity_space
    mesh = alfeld_split(build_structured_mesh(n))
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    u0, _ = l2_project_divfree(field, V, Q, rule=rule)
    return u0


def test_example1_norm_quadrature_stability():
    """The raw quadrature norm of the singular data drifts between rules
    (its mass spreads logarithmically toward the boundary); the projected
    datum, which is what every run consumes, is rule-stable to well under
    one percent."""
    from nsfem.study import l2_norm
    field = initial_data_example1()
    mesh = build_structured_mesh(16)
    n20 = _quad_norm_sq(field, mesh, quadrature(20))
    n16 = _quad_norm_sq(field, mesh, quadrature(16))
    assert np.isfinite(n20)
    assert abs(n20 - n16) <= 0.10 * n20
    p20 = l2_norm(_project(field, rule=quadrature(20)))
    p16 = l2_norm(_project(field, rule=quadrature(16)))
    assert abs(p20 - p16) <= 0.01 * p20


def test_example2_corner_value():
    field = initial_data_example2()
    val = field(np.array([[1.0, 1.0]]))
    assert np.allclose(val, [[1.0, 1.0]], atol=1e-14)


def test_example2_norm_undershoots_exact_value():
    """|w|_L2^2 = 2/(2*eps) = 100 exactly, but ~98% of that mass is spread
    log-uniformly toward the singular edges, so any fixed interior rule
    captures only the part above its resolution floor.  The quadrature value
    must undershoot, and grow monotonically toward 100 under refinement."""
    field = initial_data_example2()
    got = [_quad_norm_sq(field, build_structured_mesh(n), quadrature(20))
           for n in (8, 16, 32)]
    assert all(0 < g < 100.0 for g in got)
    assert got[0] < got[1] < got[2]
    # the rule-insensitive quantity is the projected datum
    from nsfem.study import l2_norm
    p20 = l2_norm(_project(field, rule=quadrature(20)))
    p16 = l2_norm(_project(field, rule=quadrature(16)))
    assert abs(p20 - p16) <= 0.01 * p20


def test_example2_singular_edges_rejected():
    field = initial_data_example2()
    with pytest.raises(NumericDataError):
        field(np.array([[0.0, 0.5]]))
    with pytest.raises(NumericDataError):
        field(np.array([[0.5, 0.0]]))


def test_example2_projection_nonexpansive():
    from nsfem.projections import l2_project_divfree, singular_data_rule
    from nsfem.space import build_pressure_space, build_velocity_space
    from nsfem.study import l2_norm
    mesh = alfeld_split(build_structured_mesh(8))
    V = build_velocity_space(mesh, 2)
    Q = build_pressure_space(mesh, 1)
    field = initial_data_example2()
    u0, _ = l2_project_divfree(field, V, Q)
    data_norm = np.sqrt(_quad_norm_sq(field, mesh, singular_data_rule()))
    assert l2_norm(u0) <= data_norm


def test_smooth_field_gradient_consistent(rng):
    field = smooth_curl_field()
    pts = rng.uniform(0.1, 0.9, size=(50, 2))
    g = field.gradient(pts)
    assert np.abs(g[:, 0, 0] + g[:, 1, 1]).max() <= 1e-12  # divergence free
    h = 1e-6
    for i in range(2):
        for j in range(2):
            shifted_p = pts.copy()
            shifted_m = pts.copy()
            shifted_p[:, j] += h
            shifted_m[:, j] -= h
            fd = (field(shifted_p)[:, i] - field(shifted_m)[:, i]) / (2 * h)
            assert np.abs(fd - g[:, i, j]).max() <= 1e-4
