"""Global finite element spaces and functions.

Velocity: continuous vector P_k with zero trace, stored component-major
(x-block then y-block over the scalar DOFs).  Pressure: discontinuous
P_{k-1} with a zero-mean constraint handled by the saddle solver through
``mean_vector``; on meshes with singular boundary corners the pressure
space additionally carries point constraints there (the divergence of any
zero-trace velocity vanishes at such corners, so unconstrained pressures
would contain spurious modes).
"""

import numpy as np

from . import mesh as meshmod
from .element import lagrange_basis, pressure_basis
from .errors import UnstablePairError


class ScalarDofMap:
    """Continuous scalar Lagrange DOF map.

    Global numbering: vertex DOFs, then (k-1) DOFs per edge ordered from the
    edge's lower-numbered vertex, then cell-interior DOFs.
    """

    def __init__(self, mesh, k):
        self.mesh = mesh
        self.k = k
        self.basis = lagrange_basis(k)
        nv = mesh.num_vertices
        ne = mesh.edges.shape[0]
        nc = mesh.num_cells
        per_edge = k - 1
        n_int = (k - 1) * (k - 2) // 2
        self.ndofs = nv + ne * per_edge + nc * n_int
        nloc = self.basis.dim
        cell_dofs = np.empty((nc, nloc), dtype=np.int64)
        cell_dofs[:, 0:3] = mesh.cells
        local_edges = ((0, 1), (1, 2), (2, 0))
        for le, (a, b) in enumerate(local_edges):
            e = mesh.cell_edges[:, le]
            base = nv + e * per_edge
            ga = mesh.cells[:, a]
            gb = mesh.cells[:, b]
            forward = ga < gb
            for s in range(per_edge):
                slot = np.where(forward, s, per_edge - 1 - s)
                cell_dofs[:, 3 + le * per_edge + s] = base + slot
        int_base = nv + ne * per_edge
        for s in range(n_int):
            cell_dofs[:, 3 + 3 * per_edge + s] = \
                int_base + np.arange(nc) * n_int + s
        self.cell_dofs = cell_dofs

        boundary = np.zeros(self.ndofs, dtype=bool)
        boundary[:nv] = mesh.boundary_vertex
        for e in np.flatnonzero(mesh.boundary_edge):
            boundary[nv + e * per_edge: nv + (e + 1) * per_edge] = True
        self.boundary = boundary

        coords = np.empty((self.ndofs, 2))
        coords[:nv] = mesh.vertices
        for s in range(per_edge):
            t = (s + 1) / k
            lo = np.minimum(mesh.edges[:, 0], mesh.edges[:, 1])
            hi = np.maximum(mesh.edges[:, 0], mesh.edges[:, 1])
            coords[nv + np.arange(ne) * per_edge + s] = \
                (1 - t) * mesh.vertices[lo] + t * mesh.vertices[hi]
        if n_int:
            ref_int = self.basis.nodes[3 + 3 * per_edge:]
            v0 = mesh.vertices[mesh.cells[:, 0]]
            v1 = mesh.vertices[mesh.cells[:, 1]]
            v2 = mesh.vertices[mesh.cells[:, 2]]
            for s, (xr, yr) in enumerate(ref_int):
                pts = v0 * (1 - xr - yr) + v1 * xr + v2 * yr
                coords[int_base + np.arange(nc) * n_int + s] = pts
        self.dof_coords = coords


class FESpace:
    """A global velocity or pressure space bound to a mesh."""

    def __init__(self, mesh, kind, degree):
        self.mesh = mesh
        self.kind = kind
        self.degree = degree

    def __repr__(self):
        return (f"FESpace({self.kind}, degree={self.degree}, "
                f"dofs={self.num_dofs}, mesh={self.mesh!r})")


def build_velocity_space(mesh, k, allow_unstable=False):
    """Continuous vector P_k space with homogeneous Dirichlet boundary.

    For k in {2, 3} the mesh must be an Alfeld split, where the pair with
    discontinuous P_{k-1} pressure is inf-sup stable; k = 4 is stable on
    general meshes.  ``allow_unstable`` skips the guard (useful for DOF
    counting, never for solving).
    """
    if k not in (2, 3, 4):
        raise ValueError(f"velocity degree must be 2, 3 or 4, got {k}")
    if k < 4 and not mesh.is_alfeld and not allow_unstable:
        raise UnstablePairError(
            f"P{k}/P{k - 1} is not inf-sup stable on a non-Alfeld mesh; "
            "apply alfeld_split first or use k=4")
    V = FESpace(mesh, "velocity", k)
    dm = ScalarDofMap(mesh, k)
    V.dofmap = dm
    V.num_scalar_dofs = dm.ndofs
    V.num_dofs = 2 * dm.ndofs
    V.dirichlet_scalar = dm.boundary
    free_scalar = np.flatnonzero(~dm.boundary)
    V.free_scalar = free_scalar
    V.free_dofs = np.concatenate([free_scalar, dm.ndofs + free_scalar])
    dirichlet_scalar = np.flatnonzero(dm.boundary)
    V.dirichlet_dofs = np.concatenate(
        [dirichlet_scalar, dm.ndofs + dirichlet_scalar])
    V.num_free_dofs = V.free_dofs.size
    return V


def build_pressure_space(mesh, degree):
    """Discontinuous P_degree space with zero-mean bookkeeping.

    ``mean_vector`` satisfies ``mean_vector @ p == integral of p`` for any
    coefficient vector p.  ``constraints`` holds the zero-mean row plus one
    point constraint per singular boundary corner of the mesh.
    """
    Q = FESpace(mesh, "pressure", degree)
    basis = pressure_basis(degree)
    Q.basis = basis
    m = basis.dim
    Q.block_size = m
    nc = mesh.num_cells
    Q.num_dofs = nc * m
    Q.num_free_dofs = Q.num_dofs
    cell_area2 = 2.0 * mesh.areas                       # |det J| per cell
    mean = np.zeros(Q.num_dofs)
    for j in range(m):
        mean[j::m] = cell_area2 * basis.integrals[j]
    Q.mean_vector = mean
    corners = meshmod.singular_corner_vertices(mesh)
    Q.singular_corners = corners
    constraints = [mean]
    ref_vertex = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for v, c in corners:
        local = int(np.flatnonzero(mesh.cells[c] == v)[0])
        vals, _ = basis.eval(ref_vertex[local][None, :])
        ell = np.zeros(Q.num_dofs)
        ell[c * m:(c + 1) * m] = vals[0]
        constraints.append(ell)
    Q.constraints = np.column_stack(constraints)
    return Q


class FEFunction:
    """Coefficient vector bound to a space."""

    def __init__(self, space, coeffs=None):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros(space.num_dofs)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.num_dofs,):
            raise ValueError(
                f"expected {space.num_dofs} coefficients, got {coeffs.shape}")
        self.coeffs = coeffs

    def copy(self):
        return FEFunction(self.space, self.coeffs.copy())

    def components(self):
        """Velocity (x, y) scalar coefficient blocks."""
        s = self.space.num_scalar_dofs
        return self.coeffs[:s], self.coeffs[s:]

    def __call__(self, x):
        return evaluate(self, x)


def zero_function(space):
    return FEFunction(space)


def evaluate(f, x):
    """Point value of an FE function: (ux, uy) for velocity, scalar for pressure."""
    out = evaluate_many(f, np.asarray(x, dtype=float)[None, :])
    if f.space.kind == "velocity":
        return float(out[0, 0]), float(out[0, 1])
    return float(out[0])


def evaluate_many(f, points):
    """Vectorized point evaluation via point location."""
    space = f.space
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cells, bary = meshmod.locate_points(space.mesh, pts)
    ref = bary[:, 1:]                                   # reference coordinates
    if space.kind == "velocity":
        vals, _ = space.dofmap.basis.eval(ref)
        dofs = space.dofmap.cell_dofs[cells]            # (m, nloc)
        cx, cy = f.components()
        ux = np.einsum("mi,mi->m", cx[dofs], vals)
        uy = np.einsum("mi,mi->m", cy[dofs], vals)
        return np.column_stack([ux, uy])
    vals, _ = space.basis.eval(ref)
    m = space.block_size
    blocks = f.coeffs.reshape(-1, m)[cells]
    return np.einsum("mi,mi->m", blocks, vals)


def interpolate_velocity(V, field):
    """Nodal interpolant of a vector field (callable on (m, 2) points)."""
    coords = V.dofmap.dof_coords
    vals = np.asarray(field(coords), dtype=float)
    u = FEFunction(V)
    s = V.num_scalar_dofs
    u.coeffs[:s] = vals[:, 0]
    u.coeffs[s:] = vals[:, 1]
    return u


def project_pressure(Q, fn, rule):
    """Per-cell L2 projection of a scalar function into the modal basis."""
    from .assembly import cell_geometry
    mesh = Q.mesh
    geo = cell_geometry(mesh)
    vals, _ = Q.basis.eval(rule.points)                 # (nq, m)
    pts = geo.physical_points(rule.points)              # (nc, nq, 2)
    f = np.asarray(fn(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
    # orthonormal reference basis: coefficient = reference integral of f q_j
    coef = np.einsum("q,cq,qj->cj", rule.weights, f, vals)
    p = FEFunction(Q)
    p.coeffs[:] = coef.ravel()
    return p


def constant_pressure(Q, value=1.0):
    """The constant function as a member of Q."""
    p = FEFunction(Q)
    p.coeffs[0::Q.block_size] = value / float(Q.basis.coeffs[0, 0])
    return p


def divergence_coefficients(u):
    """Coefficients in P_{k-1} modal form of div u, exact per cell.

    For the divergence-conforming pair this *is* the pointwise divergence:
    div u of a P_k velocity is a degree k-1 polynomial on every cell.
    """
    from .element import quadrature
    V = u.space
    k = V.degree
    pb = pressure_basis(k - 1)
    rule = quadrature(max(1, 2 * (k - 1)))
    div = divergence_values(u, rule)                    # (nc, nq)
    pvals, _ = pb.eval(rule.points)
    coef = np.einsum("q,cq,qj->cj", rule.weights, div, pvals)
    return coef


def divergence_values(u, rule):
    """Pointwise div u at the rule's points of every cell; shape (nc, nq)."""
    from .assembly import cell_geometry
    V = u.space
    geo = cell_geometry(V.mesh)
    _, gref = V.dofmap.basis.eval(rule.points)          # (nq, nloc, 2)
    grad = np.einsum("cab,qib->cqia", geo.invJT, gref)  # physical gradients
    dofs = V.dofmap.cell_dofs
    cx, cy = u.components()
    return (np.einsum("ci,cqi->cq", cx[dofs], grad[:, :, :, 0])
            + np.einsum("ci,cqi->cq", cy[dofs], grad[:, :, :, 1]))
