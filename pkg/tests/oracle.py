"""Slow exact-arithmetic verifiers, used only by tests.

Everything here integrates polynomials symbolically (exact rational
monomial integrals over mapped triangles) instead of quadrature, inverts
matrices densely instead of sparsely, and never calls the package's
assembly kernels, so agreement with the fast path is evidence rather than
tautology.
"""

import math
from fractions import Fraction

import numpy as np


def monomial_integral(a, b):
    """Exact integral of x^a y^b over the reference triangle: a!b!/(a+b+2)!."""
    if a < 0 or b < 0 or a + b > 40:
        raise ValueError(f"exponents ({a}, {b}) out of supported range")
    return Fraction(math.factorial(a) * math.factorial(b),
                    math.factorial(a + b + 2))


# ---------------------------------------------------------------- polynomials

def poly_mul(p, q):
    out = {}
    for (a1, b1), c1 in p.items():
        for (a2, b2), c2 in q.items():
            key = (a1 + a2, b1 + b2)
            out[key] = out.get(key, 0) + c1 * c2
    return out


def poly_diff(p, axis):
    out = {}
    for (a, b), c in p.items():
        if axis == 0 and a > 0:
            out[(a - 1, b)] = out.get((a - 1, b), 0) + a * c
        if axis == 1 and b > 0:
            out[(a, b - 1)] = out.get((a, b - 1), 0) + b * c
    return out


def poly_integral_ref(p):
    return sum(c * monomial_integral(a, b) for (a, b), c in p.items())


def exponents(degree):
    return [(a, d - a) for d in range(degree + 1) for a in range(d + 1)]


def solve_fraction(A, rhs_cols):
    """Exact dense solve of A X = I-like systems; A list-of-lists Fraction."""
    n = len(A)
    m = [row[:] + rhs[:] for row, rhs in zip(A, rhs_cols)]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        inv = Fraction(1) / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [v - f * w for v, w in zip(m[r], m[col])]
    return [row[n:] for row in m]


def lagrange_polynomials(k):
    """Exact monomial dicts of the degree-k Lagrange basis, in the same
    node order as the package (vertices, edges (0,1),(1,2),(2,0), interior)."""
    verts = [(Fraction(0), Fraction(0)), (Fraction(1), Fraction(0)),
             (Fraction(0), Fraction(1))]
    nodes = list(verts)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        for s in range(1, k):
            t = Fraction(s, k)
            nodes.append((verts[a][0] * (1 - t) + verts[b][0] * t,
                          verts[a][1] * (1 - t) + verts[b][1] * t))
    for i in range(1, k):
        for j in range(1, k - i):
            nodes.append((Fraction(i, k), Fraction(j, k)))
    exps = exponents(k)
    vand = [[x ** a * y ** b for (a, b) in exps] for (x, y) in nodes]
    eye = [[Fraction(int(i == j)) for j in range(len(exps))]
           for i in range(len(exps))]
    inv = solve_fraction(vand, eye)
    polys = []
    for i in range(len(exps)):
        polys.append({exps[j]: inv[j][i] for j in range(len(exps))
                      if inv[j][i] != 0})
    return polys


# ------------------------------------------------------------ cell geometry

def cell_jacobian(mesh, c):
    v = [mesh.vertices[i] for i in mesh.cells[c]]
    fr = [[_to_fraction(x) for x in p] for p in v]
    J = [[fr[1][0] - fr[0][0], fr[2][0] - fr[0][0]],
         [fr[1][1] - fr[0][1], fr[2][1] - fr[0][1]]]
    det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
    invJT = [[J[1][1] / det, -J[1][0] / det],
             [-J[0][1] / det, J[0][0] / det]]
    return J, det, invJT


def _to_fraction(x):
    return Fraction(x).limit_denominator(10**12)


# ------------------------------------------------------- reference integrals

class ReferenceTables:
    """Exact reference-triangle integrals of basis products."""

    def __init__(self, k):
        self.k = k
        self.phi = lagrange_polynomials(k)
        self.grad = [[poly_diff(p, 0), poly_diff(p, 1)] for p in self.phi]
        n = len(self.phi)
        self.mass = [[poly_integral_ref(poly_mul(self.phi[i], self.phi[j]))
                      for j in range(n)] for i in range(n)]
        self.stiff = [[[[poly_integral_ref(
            poly_mul(self.grad[i][a], self.grad[j][b]))
            for b in range(2)] for a in range(2)]
            for j in range(n)] for i in range(n)]

    def convection_table(self):
        """T[a][i][b][j] = integral(phi_a phi_i d_b phi_j)."""
        n = len(self.phi)
        pair = {}
        T = [[[[None] * n for _ in range(2)] for _ in range(n)]
             for _ in range(n)]
        for a in range(n):
            for i in range(n):
                key = (min(a, i), max(a, i))
                if key not in pair:
                    pair[key] = poly_mul(self.phi[key[0]], self.phi[key[1]])
                prod = pair[key]
                for b in range(2):
                    for j in range(n):
                        T[a][i][b][j] = poly_integral_ref(
                            poly_mul(prod, self.grad[j][b]))
        return T


_tables = {}


def tables(k):
    if k not in _tables:
        _tables[k] = ReferenceTables(k)
    return _tables[k]


# ------------------------------------------------------------ dense assembly

def dense_mass(V):
    tab = tables(V.degree)
    S = V.num_scalar_dofs
    M = np.zeros((2 * S, 2 * S))
    for c in range(V.mesh.num_cells):
        _, det, _ = cell_jacobian(V.mesh, c)
        dofs = V.dofmap.cell_dofs[c]
        for li, gi in enumerate(dofs):
            for lj, gj in enumerate(dofs):
                val = float(det * tab.mass[li][lj])
                M[gi, gj] += val
                M[S + gi, S + gj] += val
    return M


def dense_stiffness(V):
    tab = tables(V.degree)
    S = V.num_scalar_dofs
    K = np.zeros((2 * S, 2 * S))
    for c in range(V.mesh.num_cells):
        _, det, invJT = cell_jacobian(V.mesh, c)
        dofs = V.dofmap.cell_dofs[c]
        for li, gi in enumerate(dofs):
            for lj, gj in enumerate(dofs):
                acc = Fraction(0)
                for r in range(2):          # physical derivative direction
                    for a in range(2):
                        for b in range(2):
                            acc += (invJT[r][a] * invJT[r][b]
                                    * tab.stiff[li][lj][a][b])
                val = float(det * acc)
                K[gi, gj] += val
                K[S + gi, S + gj] += val
    return K


def dense_divergence(V, Q):
    """B[p, j] = integral(q_p div phi_j), modal pressure given as data."""
    tab = tables(V.degree)
    pb = Q.basis
    pexp = exponents(Q.degree)
    S = V.num_scalar_dofs
    B = np.zeros((Q.num_dofs, 2 * S))
    n = len(tab.phi)
    # exact integrals of monomial * d_b phi_j
    mono_grad = [[[poly_integral_ref(poly_mul({e: Fraction(1)}, tab.grad[j][b]))
                   for j in range(n)] for b in range(2)] for e in pexp]
    for c in range(V.mesh.num_cells):
        _, det, invJT = cell_jacobian(V.mesh, c)
        dofs = V.dofmap.cell_dofs[c]
        for jp in range(Q.block_size):
            row = c * Q.block_size + jp
            for comp in range(2):
                for lj, gj in enumerate(dofs):
                    acc = 0.0
                    for m_idx in range(len(pexp)):
                        cm = pb.coeffs[m_idx, jp]
                        if cm == 0.0:
                            continue
                        term = (invJT[comp][0] * mono_grad[m_idx][0][lj]
                                + invJT[comp][1] * mono_grad[m_idx][1][lj])
                        acc += cm * float(term)
                    B[row, comp * S + gj] += float(det) * acc
    return B


def dense_convection(V, w):
    tab = tables(V.degree)
    T = tab.convection_table()
    S = V.num_scalar_dofs
    N = np.zeros((2 * S, 2 * S))
    wx, wy = w.components()
    n = len(tab.phi)
    for c in range(V.mesh.num_cells):
        _, det, invJT = cell_jacobian(V.mesh, c)
        dofs = V.dofmap.cell_dofs[c]
        loc = np.zeros((n, n))
        for la in range(n):
            ax, ay = wx[dofs[la]], wy[dofs[la]]
            if ax == 0.0 and ay == 0.0:
                continue
            for li in range(n):
                for lj in range(n):
                    # physical w . grad: sum over reference directions
                    gx = (float(invJT[0][0]) * float(T[la][li][0][lj])
                          + float(invJT[0][1]) * float(T[la][li][1][lj]))
                    gy = (float(invJT[1][0]) * float(T[la][li][0][lj])
                          + float(invJT[1][1]) * float(T[la][li][1][lj]))
                    loc[li, lj] += ax * gx + ay * gy
        loc *= float(det)
        for li, gi in enumerate(dofs):
            for lj, gj in enumerate(dofs):
                N[gi, gj] += loc[li, lj]
                N[S + gi, S + gj] += loc[li, lj]
    return N


def dense_saddle_solve(A, B, f, g, constraints):
    """Dense factorization of the augmented saddle matrix."""
    n = A.shape[0]
    nq = B.shape[0]
    ncon = constraints.shape[1]
    size = n + nq + ncon
    K = np.zeros((size, size))
    K[:n, :n] = A
    K[:n, n:n + nq] = -B.T
    K[n:n + nq, :n] = B
    K[n:n + nq, n + nq:] = constraints
    K[n + nq:, n:n + nq] = constraints.T
    rhs = np.concatenate([f, g, np.zeros(ncon)])
    sol = np.linalg.solve(K, rhs)
    return sol[:n], sol[n:n + nq]


# --------------------------------------------------- two-mesh L2 integrator

def cross_error_bruteforce(coarse, fine):
    """Exact L2 distance between FE velocities on nested meshes.

    Reconstructs both functions as exact local polynomials on every fine
    cell (values at lattice nodes -> rational Vandermonde solve), then
    integrates the squared difference symbolically.
    """
    from nsfem.space import evaluate_many
    kc = coarse.space.degree
    kf = fine.space.degree
    k = max(kc, kf)
    exps = exponents(k)
    nodes = _lattice(k)
    vand = [[x ** a * y ** b for (a, b) in exps] for (x, y) in nodes]
    eye = [[Fraction(int(i == j)) for j in range(len(exps))]
           for i in range(len(exps))]
    inv = np.array(solve_fraction(vand, eye), dtype=float)   # mono x node
    mesh = fine.space.mesh
    total = 0.0
    mono_int = {(a1 + a2, b1 + b2): float(monomial_integral(a1 + a2, b1 + b2))
                for (a1, b1) in exps for (a2, b2) in exps}
    for c in range(mesh.num_cells):
        J, det, _ = cell_jacobian(mesh, c)
        v0 = mesh.vertices[mesh.cells[c][0]]
        pts = np.array([[float(v0[0] + J[0][0] * x + J[0][1] * y),
                         float(v0[1] + J[1][0] * x + J[1][1] * y)]
                        for (x, y) in nodes])
        vals_c = evaluate_many(coarse, pts)
        vals_f = evaluate_many(fine, pts)
        diff = vals_c - vals_f                              # (nodes, 2)
        for comp in range(2):
            coef = inv @ diff[:, comp]                      # monomial coeffs
            acc = 0.0
            for i1, e1 in enumerate(exps):
                for i2, e2 in enumerate(exps):
                    acc += coef[i1] * coef[i2] * \
                        mono_int[(e1[0] + e2[0], e1[1] + e2[1])]
            total += float(det) * acc
    return math.sqrt(total)


def _lattice(k):
    out = []
    for i in range(k + 1):
        for j in range(k + 1 - i):
            out.append((Fraction(i, k), Fraction(j, k)))
    return out
