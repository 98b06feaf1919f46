"""Reference-triangle bases and quadrature.

The reference triangle has vertices (0,0), (1,0), (0,1) and area 1/2.
Lagrange bases are built from an exact rational Vandermonde inverse on the
degree-k lattice; the discontinuous pressure basis is an L2-orthonormalized
monomial basis (better conditioned than Lagrange, same span).
"""

from fractions import Fraction
from functools import lru_cache
import math

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_LAGRANGE_DEGREE = 4
MAX_QUADRATURE_DEGREE = 20
#: assembly rules integrate the trilinear convection form k+(k-1)+k exactly
DEFAULT_ASSEMBLY_EXACTNESS = {k: 3 * k for k in range(1, 5)}
#: fixed interior rule used for singular initial data at every resolution
SINGULAR_DATA_EXACTNESS = 20


def monomial_exponents(degree):
    """Exponent pairs (a, b) with a+b <= degree, ordered by total degree."""
    return [(a, d - a) for d in range(degree + 1) for a in range(d + 1)]


def lattice_nodes(k):
    """Lagrange nodes: vertices, then edges (0,1),(1,2),(2,0), then interior.

    Edge nodes are ordered along the edge from its first to its second
    vertex; this fixed layout is what the global DOF map relies on.
    """
    verts = [Fraction(0), Fraction(0)], [Fraction(1), Fraction(0)], \
        [Fraction(0), Fraction(1)]
    nodes = [list(v) for v in verts]
    edges = [(0, 1), (1, 2), (2, 0)]
    vcoords = [np.array(v, dtype=object) for v in verts]
    for a, b in edges:
        for s in range(1, k):
            t = Fraction(s, k)
            nodes.append(list(vcoords[a] * (1 - t) + vcoords[b] * t))
    for i in range(1, k):
        for j in range(1, k - i):
            nodes.append([Fraction(i, k), Fraction(j, k)])
    return nodes


def _fraction_inverse(mat):
    """Exact inverse of a list-of-lists Fraction matrix (Gauss-Jordan)."""
    n = len(mat)
    a = [row[:] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(mat)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        inv_p = Fraction(1) / a[col][col]
        a[col] = [x * inv_p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


class ReferenceBasis:
    """Polynomial basis on the reference triangle.

    ``coeffs[j, i]`` multiplies monomial j in basis function i, so that
    values at points are ``monomial_vandermonde(points) @ coeffs``.
    """

    def __init__(self, degree, coeffs, continuity, nodes=None):
        self.degree = degree
        self.coeffs = coeffs
        self.continuity = continuity
        self.nodes = nodes
        self.exponents = monomial_exponents(degree)
        self.dim = len(self.exponents)

    def eval(self, points):
        """Values and gradients at points (m, 2).

        Returns
        -------
        values : ndarray (m, dim)
        grads : ndarray (m, dim, 2)
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        v, gx, gy = _monomial_tables(self.degree, pts)
        values = v @ self.coeffs
        grads = np.stack([gx @ self.coeffs, gy @ self.coeffs], axis=2)
        return values, grads


def _monomial_tables(degree, pts):
    x = pts[:, 0]
    y = pts[:, 1]
    exps = monomial_exponents(degree)
    m = len(exps)
    v = np.empty((len(x), m))
    gx = np.zeros((len(x), m))
    gy = np.zeros((len(x), m))
    xp = [np.ones_like(x)]
    yp = [np.ones_like(y)]
    for _ in range(degree):
        xp.append(xp[-1] * x)
        yp.append(yp[-1] * y)
    for j, (a, b) in enumerate(exps):
        v[:, j] = xp[a] * yp[b]
        if a > 0:
            gx[:, j] = a * xp[a - 1] * yp[b]
        if b > 0:
            gy[:, j] = b * xp[a] * yp[b - 1]
    return v, gx, gy


@lru_cache(maxsize=None)
def lagrange_basis(k):
    """Nodal Lagrange basis of degree k on the reference triangle."""
    if not 1 <= k <= MAX_LAGRANGE_DEGREE:
        raise ValueError(f"unsupported Lagrange degree {k}, need 1..4")
    nodes = lattice_nodes(k)
    exps = monomial_exponents(k)
    vand = [[x ** a * y ** b for (a, b) in exps] for x, y in nodes]
    inv = _fraction_inverse(vand)
    coeffs = np.array([[float(inv[i][j]) for j in range(len(exps))]
                       for i in range(len(exps))])
    node_arr = np.array([[float(x), float(y)] for x, y in nodes])
    return ReferenceBasis(k, coeffs, "continuous", nodes=node_arr)


def lagrange_eval(k, points):
    """Values and gradients of the degree-k Lagrange basis at points."""
    basis = lagrange_basis(k)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts < -1e-12) or np.any(pts.sum(axis=1) > 1 + 1e-12):
        raise ValueError("evaluation point outside the reference triangle")
    return basis.eval(pts)


def reference_monomial_integral(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    return Fraction(math.factorial(a) * math.factorial(b),
                    math.factorial(a + b + 2))


@lru_cache(maxsize=None)
def pressure_basis(degree):
    """L2-orthonormal modal basis of the given total degree.

    The first function is the normalized constant sqrt(2); per-cell mass
    matrices are therefore multiples of the identity.
    """
    if degree < 0:
        raise ValueError("pressure degree must be nonnegative")
    exps = monomial_exponents(degree)
    m = len(exps)
    gram = np.array([[float(reference_monomial_integral(a1 + a2, b1 + b2))
                      for (a2, b2) in exps] for (a1, b1) in exps])
    chol = np.linalg.cholesky(gram)
    coeffs = np.linalg.solve(chol, np.eye(m)).T  # basis = L^{-1} monomials
    basis = ReferenceBasis(degree, coeffs, "discontinuous")
    # exact reference integrals: sqrt(2) * <q_j, q_0> = delta_{j0}/sqrt(2)
    mono_int = np.array([float(reference_monomial_integral(a, b))
                         for (a, b) in exps])
    basis.integrals = coeffs.T @ mono_int
    return basis


class QuadratureRule:
    """Interior quadrature rule on the reference triangle."""

    def __init__(self, points, weights, exactness_degree):
        self.points = points
        self.weights = weights
        self.exactness_degree = exactness_degree

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def quadrature(exactness_degree):
    """Rule exact for all polynomials up to ``exactness_degree``.

    A tensor Gauss-Legendre x Gauss-Jacobi grid collapsed onto the triangle
    (Duffy map); all points are strictly interior, which matters for the
    singular initial data integrated in the projections.
    """
    d = exactness_degree
    if not 1 <= d <= MAX_QUADRATURE_DEGREE:
        raise ValueError(f"exactness degree {d} out of range 1..20")
    m = (d + 2) // 2
    gx, gw = roots_legendre(m)
    jx, jw = roots_jacobi(m, 1.0, 0.0)
    xi = 0.5 * (gx + 1.0)
    wx = 0.5 * gw
    eta = 0.5 * (jx + 1.0)
    weta = 0.25 * jw
    X = np.outer(xi, 1.0 - eta).ravel()
    Y = np.tile(eta, m)
    W = np.outer(wx, weta).ravel()
    return QuadratureRule(np.column_stack([X, Y]), W, d)
