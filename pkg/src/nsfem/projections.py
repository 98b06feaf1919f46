"""Discrete projections onto the divergence-free subspace.

- ``l2_project_divfree``: the L2-orthogonal projection used for discrete
  initial data, via the mass saddle system with an auxiliary pressure-like
  multiplier.
- ``stokes_ritz_project``: the energy-orthogonal (Stokes-Ritz) projection.
- ``apply_discrete_stokes``: the discrete Stokes operator z with
  (z, v) = -(grad phi, grad v) for all discretely divergence-free v.
"""

import numpy as np

from .assembly import assemble_load, assemble_mass, assemble_stiffness
from .element import SINGULAR_DATA_EXACTNESS, quadrature
from .saddle import FactorizedSaddle, make_system, solve_fields
from .space import FEFunction


def singular_data_rule():
    """The fixed interior rule used for possibly-singular initial data.

    A single high-order rule applied identically at every mesh resolution,
    so the discrete data are a deterministic function of the mesh alone.
    """
    return quadrature(SINGULAR_DATA_EXACTNESS)


def _load_vector(V, data, rule):
    if isinstance(data, FEFunction):
        if data.space is V or data.space.num_dofs == V.num_dofs:
            return assemble_mass(V) @ data.coeffs
        raise ValueError("FE data must live on the target space")
    rule = rule or singular_data_rule()
    return assemble_load(V, data, rule)


def l2_project_divfree(data, V, Q, rule=None, backend="direct"):
    """Divergence-free L2 projection of ``data`` into the velocity space.

    Solves (u0 - u0_h, v) - (eta, div v) = 0, (div u0_h, q) = 0 and returns
    ``(u0_h, eta)``.
    """
    f = _load_vector(V, data, rule)
    system = make_system(V, Q, assemble_mass(V), f, backend=backend)
    u, eta, report = solve_fields(V, Q, system)
    u.solve_report = report
    return u, eta


def stokes_ritz_project(v, V, Q, rule=None, backend="direct"):
    """Stokes-Ritz projection: (grad(v - Rv), grad w) = 0 on X_h.

    ``v`` is either an FE velocity on V or a field object exposing
    ``gradient(points) -> (m, 2, 2)`` with entries du_i/dx_j, used to
    assemble the right-hand side (grad v, grad w_h) by quadrature.
    """
    K = assemble_stiffness(V)
    if isinstance(v, FEFunction):
        f = K @ v.coeffs
    else:
        rule = rule or quadrature(SINGULAR_DATA_EXACTNESS)
        f = _gradient_load(V, v, rule)
    system = make_system(V, Q, K, f, backend=backend)
    u, eta, report = solve_fields(V, Q, system)
    u.solve_report = report
    return u


def _gradient_load(V, field, rule):
    """b_i = integral(grad v : grad phi_i) for an analytic field."""
    from .assembly import _tabulate, cell_geometry
    dm = V.dofmap
    geo = cell_geometry(dm.mesh)
    _, gref = _tabulate(dm.basis, rule)
    pts = geo.physical_points(rule.points)
    G = np.asarray(field.gradient(pts.reshape(-1, 2)), dtype=float)
    G = G.reshape(pts.shape[0], pts.shape[1], 2, 2)     # (nc, nq, i, j)
    S = dm.ndofs
    b = np.zeros(2 * S)
    grad = np.einsum("cab,qib->cqia", geo.invJT, gref)  # (nc, nq, nloc, 2)
    loc_x = np.einsum("q,cqa,cqia,c->ci", rule.weights, G[:, :, 0, :], grad,
                      geo.detJ, optimize=True)
    loc_y = np.einsum("q,cqa,cqia,c->ci", rule.weights, G[:, :, 1, :], grad,
                      geo.detJ, optimize=True)
    np.add.at(b, dm.cell_dofs, loc_x)
    np.add.at(b[S:], dm.cell_dofs, loc_y)
    return b


def apply_discrete_stokes(phi, V, Q, factorized=None):
    """Apply the discrete Stokes operator to a divergence-free FE velocity.

    Returns z in X_h with (z, v) = -(grad phi, grad v) for all v in X_h.
    Pass a :class:`DiscreteStokesOperator` for repeated applications.
    """
    op = factorized or DiscreteStokesOperator(V, Q)
    return op.apply(phi)


class DiscreteStokesOperator:
    """Cached mass-saddle factorization for the discrete Stokes operator."""

    def __init__(self, V, Q, backend="direct"):
        self.V = V
        self.Q = Q
        self.M = assemble_mass(V)
        self.K = assemble_stiffness(V)
        system = make_system(V, Q, self.M, np.zeros(V.num_dofs),
                             backend=backend)
        self._fact = FactorizedSaddle(system)

    def apply(self, phi):
        f = -(self.K @ phi.coeffs)
        z_free, _ = self._fact.solve(f[self.V.free_dofs])
        from .assembly import scatter_free
        return FEFunction(self.V, scatter_free(self.V, z_free))

    def project(self, f_full):
        """Divergence-free L2 projection of a full-DOF load vector."""
        u_free, eta = self._fact.solve(f_full[self.V.free_dofs])
        from .assembly import scatter_free
        return (FEFunction(self.V, scatter_free(self.V, u_free)),
                FEFunction(self.Q, eta))
