"""Conforming triangulations of the unit square.

Provides structured meshes with a fixed diagonal direction, nested uniform
refinement, the Alfeld (barycentric) split, and point location with
barycentric coordinates.
"""

import math

import numpy as np

from .errors import PointOutsideDomainError

GEOM_TOL = 1e-12


class Mesh:
    """Immutable conforming triangulation.

    Attributes
    ----------
    vertices : ndarray, shape (nv, 2)
        Vertex coordinates.
    cells : ndarray, shape (nc, 3)
        Vertex indices per cell, counterclockwise.
    edges : ndarray, shape (ne, 2)
        Endpoint pairs with ``edges[:, 0] < edges[:, 1]``.
    edge_cells : ndarray, shape (ne, 2)
        Adjacent cell indices per edge; second entry is -1 on the boundary.
    cell_edges : ndarray, shape (nc, 3)
        Global edge index of the local edges (0,1), (1,2), (2,0).
    boundary_edge, boundary_vertex : ndarray of bool
        Flags for entities on the domain boundary.
    h : float
        Maximal cell diameter (longest edge).
    parent : Mesh or None
        Mesh this one refines, if any.
    child_to_parent : ndarray or None
        Parent cell index per cell when ``parent`` is set.
    """

    def __init__(self, vertices, cells, parent=None, child_to_parent=None,
                 provenance=("custom",)):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (nv, 2)")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise ValueError("cells must have shape (nc, 3)")
        areas = signed_areas(self.vertices, self.cells)
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise ValueError(f"cell {bad} is degenerate or clockwise "
                             f"(signed area {areas[bad]:.3e})")
        self.areas = areas
        self.parent = parent
        self.child_to_parent = (np.asarray(child_to_parent, dtype=np.int64)
                                if child_to_parent is not None else None)
        self.provenance = provenance
        self._build_connectivity()
        self._locator = None

    def _build_connectivity(self):
        c = self.cells
        # local edges (0,1),(1,2),(2,0); key by sorted endpoints
        raw = np.concatenate([c[:, [0, 1]], c[:, [1, 2]], c[:, [2, 0]]])
        keys = np.sort(raw, axis=1)
        uniq, inverse, counts = np.unique(
            keys, axis=0, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            raise ValueError("non-conforming mesh: an edge belongs to more "
                             "than two cells")
        self.edges = uniq
        nc = c.shape[0]
        self.cell_edges = inverse.reshape(3, nc).T.copy()
        ne = uniq.shape[0]
        edge_cells = -np.ones((ne, 2), dtype=np.int64)
        owner = np.tile(np.arange(nc), 3)
        for e, cell in zip(inverse, owner):
            if edge_cells[e, 0] < 0:
                edge_cells[e, 0] = cell
            elif edge_cells[e, 0] != cell:
                edge_cells[e, 1] = max(edge_cells[e, 1], cell) \
                    if edge_cells[e, 1] >= 0 else cell
        self.edge_cells = edge_cells
        self.boundary_edge = counts == 1
        self.boundary_vertex = np.zeros(len(self.vertices), dtype=bool)
        self.boundary_vertex[self.edges[self.boundary_edge].ravel()] = True
        lengths = np.linalg.norm(
            self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]],
            axis=1)
        self.edge_lengths = lengths
        self.h = float(lengths.max())

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    @property
    def is_alfeld(self):
        return self.provenance[0] == "alfeld"

    def cell_coords(self, index):
        return self.vertices[self.cells[index]]

    def __repr__(self):
        return (f"Mesh({self.num_vertices} vertices, {self.num_cells} cells, "
                f"h={self.h:.4g})")

    def dump(self, stream):
        """Write the plain-text form: `v x y` per vertex, `c i j k` per cell."""
        for x, y in self.vertices:
            stream.write(f"v {float(x)!r} {float(y)!r}\n")
        for i, j, k in self.cells:
            stream.write(f"c {i} {j} {k}\n")


def signed_areas(vertices, cells):
    a = vertices[cells[:, 0]]
    b = vertices[cells[:, 1]]
    c = vertices[cells[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def build_structured_mesh(n):
    """Uniform mesh of (0,1)^2 with 2*n^2 right triangles.

    Every lattice square is split along its lower-left to upper-right
    diagonal, which keeps uniform refinement exactly nested.

    Parameters
    ----------
    n : int
        Subdivisions per side, n >= 1.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    side = np.arange(n + 1) / n
    xx, yy = np.meshgrid(side, side, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    k = 0
    for i in range(n):
        for j in range(n):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v11 = vid(i + 1, j + 1)
            v01 = vid(i, j + 1)
            cells[k] = (v00, v10, v11)
            cells[k + 1] = (v00, v11, v01)
            k += 2
    return Mesh(vertices, cells, provenance=("structured", int(n)))


def refine_uniform(mesh):
    """Split every cell into four by connecting edge midpoints.

    The children of cell ``t`` are ``4*t .. 4*t+3`` and the result records
    ``mesh`` as its parent.
    """
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]]
                 + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mid])
    offset = mesh.num_vertices
    nc = mesh.num_cells
    cells = np.empty((4 * nc, 3), dtype=np.int64)
    for t in range(nc):
        v0, v1, v2 = mesh.cells[t]
        e01, e12, e20 = mesh.cell_edges[t] + offset
        cells[4 * t + 0] = (v0, e01, e20)
        cells[4 * t + 1] = (v1, e12, e01)
        cells[4 * t + 2] = (v2, e20, e12)
        cells[4 * t + 3] = (e01, e12, e20)
    child_to_parent = np.repeat(np.arange(nc), 4)
    prov = mesh.provenance
    if prov[0] == "structured":
        prov = ("structured", 2 * prov[1])
    elif prov[0] == "alfeld":
        prov = ("refined", prov)
    else:
        prov = ("refined", prov)
    return Mesh(vertices, cells, parent=mesh, child_to_parent=child_to_parent,
                provenance=prov)


def alfeld_split(mesh):
    """Replace every cell by three cells sharing its barycenter.

    The children of cell ``t`` are ``3*t .. 3*t+2``; each barycenter is a
    new interior vertex appended after the original vertex set.
    """
    bary = mesh.vertices[mesh.cells].mean(axis=1)
    vertices = np.vstack([mesh.vertices, bary])
    offset = mesh.num_vertices
    nc = mesh.num_cells
    cells = np.empty((3 * nc, 3), dtype=np.int64)
    for t in range(nc):
        v0, v1, v2 = mesh.cells[t]
        b = offset + t
        cells[3 * t + 0] = (v0, v1, b)
        cells[3 * t + 1] = (v1, v2, b)
        cells[3 * t + 2] = (v2, v0, b)
    child_to_parent = np.repeat(np.arange(nc), 3)
    return Mesh(vertices, cells, parent=mesh, child_to_parent=child_to_parent,
                provenance=("alfeld", mesh.provenance))


class _BucketLocator:
    """Uniform-grid acceleration index for point location.

    Cells are binned into every bucket their bounding box overlaps, in
    ascending cell order, so scanning a bucket front to back reproduces the
    lowest-cell-index tie break of a direct scan.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        v = mesh.vertices
        self.lo = v.min(axis=0)
        self.hi = v.max(axis=0)
        span = np.maximum(self.hi - self.lo, 1e-30)
        self.span = span
        g = max(1, int(math.sqrt(mesh.num_cells / 2.0)))
        self.g = g
        coords = v[mesh.cells]                     # (nc, 3, 2)
        cmin = coords.min(axis=1)
        cmax = coords.max(axis=1)
        i0 = np.clip(((cmin - self.lo) / span * g).astype(int), 0, g - 1)
        i1 = np.clip(((cmax - self.lo) / span * g).astype(int), 0, g - 1)
        buckets = [[] for _ in range(g * g)]
        for c in range(mesh.num_cells):
            for bi in range(i0[c, 0], i1[c, 0] + 1):
                for bj in range(i0[c, 1], i1[c, 1] + 1):
                    buckets[bi * g + bj].append(c)
        self.buckets = [np.asarray(b, dtype=np.int64) for b in buckets]
        # affine inverse per cell for barycentric coordinates
        a = coords[:, 0]
        J = np.stack([coords[:, 1] - a, coords[:, 2] - a], axis=2)  # (nc,2,2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1]
        inv[:, 0, 1] = -J[:, 0, 1]
        inv[:, 1, 0] = -J[:, 1, 0]
        inv[:, 1, 1] = J[:, 0, 0]
        self.origin = a
        self.invJ = inv / det[:, None, None]

    def bucket_of(self, pts):
        idx = ((pts - self.lo) / self.span * self.g).astype(int)
        idx = np.clip(idx, 0, self.g - 1)
        return idx[:, 0] * self.g + idx[:, 1]

    def barycentric(self, cells, pts):
        """Barycentric coordinates of pts[i] in cells[i]; both length m."""
        d = pts - self.origin[cells]
        lam = np.einsum("cab,cb->ca", self.invJ[cells], d)
        lam0 = 1.0 - lam.sum(axis=1)
        return np.column_stack([lam0, lam])


def _locator(mesh):
    if mesh._locator is None:
        mesh._locator = _BucketLocator(mesh)
    return mesh._locator


def locate_points(mesh, points, tol=GEOM_TOL):
    """Locate many points at once.

    Returns
    -------
    cells : ndarray of int, shape (m,)
    bary : ndarray, shape (m, 3)
        Barycentric coordinates with respect to the containing cell's
        vertex order.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts < -tol) or np.any(pts > 1.0 + tol):
        bad = pts[np.any((pts < -tol) | (pts > 1.0 + tol), axis=1)][0]
        raise PointOutsideDomainError(
            f"point ({float(bad[0])!r}, {float(bad[1])!r}) lies outside "
            "the unit square")
    loc = _locator(mesh)
    m = pts.shape[0]
    out_cell = -np.ones(m, dtype=np.int64)
    out_bary = np.zeros((m, 3))
    keys = loc.bucket_of(pts)
    order = np.argsort(keys, kind="stable")
    start = 0
    while start < m:
        stop = start
        key = keys[order[start]]
        while stop < m and keys[order[stop]] == key:
            stop += 1
        sel = order[start:stop]
        cand = loc.buckets[key]
        remaining = sel
        for c in cand:
            if remaining.size == 0:
                break
            lam = loc.barycentric(np.full(remaining.size, c), pts[remaining])
            inside = np.all(lam >= -tol, axis=1)
            hit = remaining[inside]
            out_cell[hit] = c
            out_bary[hit] = lam[inside]
            remaining = remaining[~inside]
        start = stop
    missed = np.flatnonzero(out_cell < 0)
    if missed.size:
        # fall back to a direct scan with a slightly looser tolerance
        for i in missed:
            c, lam = _direct_scan(mesh, loc, pts[i], 10 * tol)
            out_cell[i] = c
            out_bary[i] = lam
    return out_cell, out_bary


def _direct_scan(mesh, loc, x, tol):
    for c in range(mesh.num_cells):
        lam = loc.barycentric(np.array([c]), x[None, :])[0]
        if np.all(lam >= -tol):
            return c, lam
    raise PointOutsideDomainError(
        f"point ({float(x[0])!r}, {float(x[1])!r}) not contained in any cell")


def locate_point(mesh, x, tol=GEOM_TOL):
    """Locate a single point; ties on shared edges go to the lowest cell index."""
    cells, bary = locate_points(mesh, np.asarray(x, dtype=float)[None, :], tol)
    return int(cells[0]), bary[0]


def check_conformity(mesh, expect_unit_square=True, tol=1e-13):
    """Exhaustive conformity audit; raises AssertionError on violation."""
    areas = signed_areas(mesh.vertices, mesh.cells)
    assert np.all(areas > 0), "cells must be counterclockwise with positive area"
    if expect_unit_square:
        total = float(np.sum(areas))
        assert abs(total - 1.0) <= tol, f"area sum {total} != 1"
    counts = np.where(mesh.boundary_edge, 1, 2)
    assert np.all((mesh.edge_cells >= 0).sum(axis=1) == counts)
    # every single-cell edge must lie on the square boundary: otherwise the
    # triangulation has a hanging node or a hole
    if expect_unit_square:
        for e in np.flatnonzero(mesh.boundary_edge):
            a, b = mesh.vertices[mesh.edges[e]]
            on_side = False
            for axis in (0, 1):
                for val in (0.0, 1.0):
                    if abs(a[axis] - val) <= tol and abs(b[axis] - val) <= tol:
                        on_side = True
            assert on_side, f"interior edge {e} has only one adjacent cell"
    # duplicate cell guard
    sorted_cells = np.sort(mesh.cells, axis=1)
    uniq = np.unique(sorted_cells, axis=0)
    assert uniq.shape[0] == mesh.num_cells, "duplicate cells"
    return True


def singular_corner_vertices(mesh, tol=1e-12):
    """Boundary vertices whose incident edges lie on only two lines.

    For the velocity space with zero trace, the divergence of every member
    vanishes at such a vertex when it belongs to a single cell, so the
    discontinuous pressure space must be constrained there.  Returns a list
    of ``(vertex_index, cell_index)``.  Raises NotImplementedError if a
    singular vertex with more than one incident cell is found (no such mesh
    is produced by this package).
    """
    nv = mesh.num_vertices
    incident_edges = [[] for _ in range(nv)]
    for e, (a, b) in enumerate(mesh.edges):
        incident_edges[a].append(e)
        incident_edges[b].append(e)
    incident_cells = [[] for _ in range(nv)]
    for c, tri in enumerate(mesh.cells):
        for v in tri:
            incident_cells[v].append(c)
    found = []
    for v in range(nv):
        if not mesh.boundary_vertex[v]:
            # interior vertex: singular iff edges lie on exactly 2 lines
            ndir = _count_lines(mesh, v, incident_edges[v], tol)
            if ndir <= 2:
                raise NotImplementedError(
                    f"interior singular vertex {v}: pressure-space reduction "
                    "for crisscross meshes is not supported")
            continue
        ndir = _count_lines(mesh, v, incident_edges[v], tol)
        if ndir <= 2:
            if len(incident_cells[v]) != 1:
                raise NotImplementedError(
                    f"boundary singular vertex {v} with "
                    f"{len(incident_cells[v])} cells is not supported")
            found.append((v, incident_cells[v][0]))
    return found


def _count_lines(mesh, v, edge_ids, tol):
    dirs = []
    for e in edge_ids:
        a, b = mesh.edges[e]
        d = mesh.vertices[b] - mesh.vertices[a]
        d = d / np.linalg.norm(d)
        if d[0] < 0 or (d[0] == 0 and d[1] < 0):
            d = -d
        dirs.append(d)
    lines = []
    for d in dirs:
        if not any(abs(d @ np.array([-l[1], l[0]])) <= tol for l in lines):
            lines.append(d)
    return len(lines)
