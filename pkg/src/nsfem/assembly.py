"""Sparse assembly of the mass, stiffness, divergence, convection and load
forms.

All matrices are returned in CSR layout on the full DOF set; Dirichlet
elimination is a separate restriction step (`restrict_matrix`).  Assembly is
cell-vectorized with einsum and deterministic: identical inputs give
bit-identical CSR arrays.
"""

import numpy as np
import scipy.sparse as sp

from .element import DEFAULT_ASSEMBLY_EXACTNESS, quadrature
from .errors import NumericDataError

_CHUNK = 4096


class CellGeometry:
    """Per-cell affine maps x = v0 + J xhat."""

    def __init__(self, mesh):
        coords = mesh.vertices[mesh.cells]              # (nc, 3, 2)
        self.v0 = coords[:, 0]
        J = np.stack([coords[:, 1] - self.v0, coords[:, 2] - self.v0], axis=2)
        self.J = J
        self.detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1]
        inv[:, 0, 1] = -J[:, 1, 0]
        inv[:, 1, 0] = -J[:, 0, 1]
        inv[:, 1, 1] = J[:, 0, 0]
        self.invJT = inv / self.detJ[:, None, None]

    def physical_points(self, ref_points):
        """Map reference points to every cell; shape (nc, nq, 2)."""
        return (self.v0[:, None, :]
                + np.einsum("cab,qb->cqa", self.J, ref_points))


def cell_geometry(mesh):
    geo = getattr(mesh, "_geometry", None)
    if geo is None:
        geo = CellGeometry(mesh)
        mesh._geometry = geo
    return geo


def default_rule(k):
    return quadrature(DEFAULT_ASSEMBLY_EXACTNESS[k])


def _tabulate(basis, rule):
    key = (id(basis), rule.exactness_degree)
    cache = _tabulate.cache
    if key not in cache:
        cache[key] = basis.eval(rule.points)
    return cache[key]


_tabulate.cache = {}


def _scalar_mass_local(dofmap, rule):
    vals, _ = _tabulate(dofmap.basis, rule)
    base = vals.T @ (rule.weights[:, None] * vals)      # reference mass
    base = 0.5 * (base + base.T)                        # exact symmetry
    detJ = cell_geometry(dofmap.mesh).detJ
    return np.einsum("c,ij->cij", detJ, base)


def _scalar_stiffness_local(dofmap, rule):
    _, gref = _tabulate(dofmap.basis, rule)
    geo = cell_geometry(dofmap.mesh)
    nc = dofmap.mesh.num_cells
    nloc = dofmap.basis.dim
    out = np.empty((nc, nloc, nloc))
    for lo in range(0, nc, _CHUNK):
        hi = min(lo + _CHUNK, nc)
        g = np.einsum("cab,qib->cqia", geo.invJT[lo:hi], gref)
        loc = np.einsum("q,cqia,cqja,c->cij", rule.weights, g, g,
                        geo.detJ[lo:hi], optimize=True)
        out[lo:hi] = 0.5 * (loc + loc.transpose(0, 2, 1))
    return out


def _scatter_scalar(dofmap, local):
    nloc = local.shape[1]
    rows = np.repeat(dofmap.cell_dofs, nloc, axis=1).ravel()
    cols = np.tile(dofmap.cell_dofs, (1, nloc)).ravel()
    return rows, cols, local.ravel()


def _vector_from_scalar(dofmap, local):
    """Block-diagonal vector matrix [[A, 0], [0, A]] from scalar locals."""
    S = dofmap.ndofs
    r, c, v = _scatter_scalar(dofmap, local)
    rows = np.concatenate([r, r + S])
    cols = np.concatenate([c, c + S])
    vals = np.concatenate([v, v])
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(2 * S, 2 * S)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_mass(V, rule=None):
    """Vector mass matrix M_ij = integral(phi_i . phi_j)."""
    rule = rule or default_rule(V.degree)
    return _vector_from_scalar(V.dofmap, _scalar_mass_local(V.dofmap, rule))


def assemble_stiffness(V, rule=None):
    """Vector stiffness K_ij = integral(grad phi_i : grad phi_j)."""
    rule = rule or default_rule(V.degree)
    return _vector_from_scalar(V.dofmap,
                               _scalar_stiffness_local(V.dofmap, rule))


def assemble_divergence(V, Q, rule=None):
    """B with B[p, j] = integral(q_p * div phi_j); shape (nQ, 2S)."""
    rule = rule or default_rule(V.degree)
    dm = V.dofmap
    geo = cell_geometry(dm.mesh)
    _, gref = _tabulate(dm.basis, rule)
    pvals, _ = _tabulate(Q.basis, rule)
    nc = dm.mesh.num_cells
    nloc = dm.basis.dim
    m = Q.block_size
    S = dm.ndofs
    rows_all, cols_all, vals_all = [], [], []
    for lo in range(0, nc, _CHUNK):
        hi = min(lo + _CHUNK, nc)
        g = np.einsum("cab,qib->cqia", geo.invJT[lo:hi], gref)
        # (chunk, m, nloc, comp)
        loc = np.einsum("q,qj,cqia,c->cjia", rule.weights, pvals, g,
                        geo.detJ[lo:hi], optimize=True)
        prow = (np.arange(lo, hi)[:, None] * m
                + np.arange(m)[None, :])                # (chunk, m)
        rows = np.repeat(prow[:, :, None], nloc * 2, axis=2).ravel()
        vcol = dm.cell_dofs[lo:hi]                      # (chunk, nloc)
        cols_c = np.concatenate([vcol, vcol + S], axis=1)  # x then y block
        cols = np.broadcast_to(cols_c[:, None, :],
                               (hi - lo, m, 2 * nloc)).ravel()
        vals = np.concatenate([loc[:, :, :, 0], loc[:, :, :, 1]],
                              axis=2).ravel()
        rows_all.append(rows)
        cols_all.append(cols)
        vals_all.append(vals)
    B = sp.coo_matrix((np.concatenate(vals_all),
                       (np.concatenate(rows_all), np.concatenate(cols_all))),
                      shape=(Q.num_dofs, 2 * S)).tocsr()
    B.sum_duplicates()
    B.sort_indices()
    return B


def assemble_convection(V, w, rule=None):
    """N(w)_ij = integral((w . grad phi_j) . phi_i) for a frozen velocity w.

    Nonsymmetric; block-diagonal over components.  w must live on the same
    mesh (normally the same space).
    """
    if w.space.mesh is not V.mesh:
        raise ValueError("convection velocity must live on the same mesh")
    rule = rule or default_rule(max(V.degree, w.space.degree))
    dm = V.dofmap
    geo = cell_geometry(dm.mesh)
    vals, gref = _tabulate(dm.basis, rule)
    wvals, _ = _tabulate(w.space.dofmap.basis, rule)
    wdofs = w.space.dofmap.cell_dofs
    wx, wy = w.components()
    nc = dm.mesh.num_cells
    nloc = dm.basis.dim
    out = np.empty((nc, nloc, nloc))
    for lo in range(0, nc, _CHUNK):
        hi = min(lo + _CHUNK, nc)
        g = np.einsum("cab,qib->cqia", geo.invJT[lo:hi], gref)
        wqx = wx[wdofs[lo:hi]] @ wvals.T                # (chunk, nq)
        wqy = wy[wdofs[lo:hi]] @ wvals.T
        conv = (wqx[:, :, None] * g[:, :, :, 0]
                + wqy[:, :, None] * g[:, :, :, 1])      # (chunk, nq, nloc)
        out[lo:hi] = np.einsum("q,qi,cqj,c->cij", rule.weights, vals, conv,
                               geo.detJ[lo:hi], optimize=True)
    return _vector_from_scalar(dm, out)


def assemble_load(V, f, rule):
    """Load vector b_i = quadrature of integral(f . phi_i) with the rule.

    ``f`` maps (m, 2) points to (m, 2) values; non-finite samples raise
    :class:`NumericDataError`.
    """
    dm = V.dofmap
    geo = cell_geometry(dm.mesh)
    vals, _ = _tabulate(dm.basis, rule)
    pts = geo.physical_points(rule.points)              # (nc, nq, 2)
    fv = np.asarray(f(pts.reshape(-1, 2)), dtype=float)
    if not np.all(np.isfinite(fv)):
        raise NumericDataError("load data evaluated to a non-finite value")
    fv = fv.reshape(pts.shape[0], pts.shape[1], 2)
    S = dm.ndofs
    b = np.zeros(2 * S)
    loc_x = np.einsum("q,cq,qi,c->ci", rule.weights, fv[:, :, 0], vals,
                      geo.detJ, optimize=True)
    loc_y = np.einsum("q,cq,qi,c->ci", rule.weights, fv[:, :, 1], vals,
                      geo.detJ, optimize=True)
    np.add.at(b, dm.cell_dofs, loc_x)
    np.add.at(b[S:], dm.cell_dofs, loc_y)
    return b


def restrict_matrix(mat, rows, cols):
    """Symmetric-style Dirichlet elimination: keep the given rows/columns."""
    return mat[rows][:, cols].tocsr()


def scatter_free(V, u_free):
    """Embed a free-DOF vector into the full DOF set with zero boundary."""
    full = np.zeros(V.num_dofs)
    full[V.free_dofs] = u_free
    return full
