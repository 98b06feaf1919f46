"""The example initial data sets and smooth test fields.

Both example data sets are in L2 but just outside H^epsilon with
epsilon = 0.01; their discrete counterparts come from the divergence-free
L2 projection, integrated with the fixed interior high-order rule.
"""

import numpy as np

from .errors import NumericDataError

EPSILON = 0.01


class VectorField:
    """Point-evaluable vector field, optionally with an analytic gradient."""

    def __init__(self, fn, grad=None, name="field"):
        self._fn = fn
        self._grad = grad
        self.name = name

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = self._fn(pts)
        if not np.all(np.isfinite(vals)):
            raise NumericDataError(
                f"{self.name} evaluated to a non-finite value (sample on a "
                "singular line?)")
        return vals

    def gradient(self, points):
        if self._grad is None:
            raise AttributeError(f"{self.name} has no analytic gradient")
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self._grad(pts)


def initial_data_example1(eps=EPSILON):
    """Curl field of w = sin(pi x)^(eps+1/2) sin(pi y)^(eps+1/2).

    Returns (w_y, -w_x); the derivative factors sin^(eps-1/2) blow up on the
    boundary, so evaluation points must be strictly interior (quadrature
    points are).
    """
    p = eps + 0.5

    def fn(pts):
        sx = np.sin(np.pi * pts[:, 0])
        sy = np.sin(np.pi * pts[:, 1])
        if np.any(sx <= 0.0) or np.any(sy <= 0.0):
            raise NumericDataError(
                "example-1 data sampled on the singular set sin(pi x) "
                "sin(pi y) = 0")
        cx = np.cos(np.pi * pts[:, 0])
        cy = np.cos(np.pi * pts[:, 1])
        w_y = p * np.pi * sx**p * sy**(p - 1.0) * cy
        w_x = p * np.pi * sx**(p - 1.0) * cx * sy**p
        return np.column_stack([w_y, -w_x])

    return VectorField(fn, name="example1")


def initial_data_example2(eps=EPSILON):
    """Raw data w = (y^(eps-1/2), x^(eps-1/2)).

    The discrete initial value is its divergence-free projection, computed
    downstream; |w|_L2^2 = 2/(2*eps) = 100 exactly for eps = 0.01.
    """
    q = eps - 0.5

    def fn(pts):
        x = pts[:, 0]
        y = pts[:, 1]
        if np.any(x <= 0.0) or np.any(y <= 0.0):
            raise NumericDataError(
                "example-2 data sampled on the singular edges x=0 or y=0")
        return np.column_stack([y**q, x**q])

    return VectorField(fn, name="example2")


def smooth_curl_field():
    """v = curl(psi) with psi = sin^2(pi x) sin^2(pi y): smooth, zero trace,
    pointwise divergence-free.  Used by the projection rate studies and the
    `manufactured` run mode."""

    def fn(pts):
        x = pts[:, 0]
        y = pts[:, 1]
        sx, cx = np.sin(np.pi * x), np.cos(np.pi * x)
        sy, cy = np.sin(np.pi * y), np.cos(np.pi * y)
        return np.column_stack([2 * np.pi * sx**2 * sy * cy,
                                -2 * np.pi * sx * cx * sy**2])

    def grad(pts):
        x = pts[:, 0]
        y = pts[:, 1]
        sx, cx = np.sin(np.pi * x), np.cos(np.pi * x)
        sy, cy = np.sin(np.pi * y), np.cos(np.pi * y)
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = 4 * np.pi**2 * sx * cx * sy * cy
        g[:, 0, 1] = 2 * np.pi**2 * sx**2 * np.cos(2 * np.pi * y)
        g[:, 1, 0] = -2 * np.pi**2 * np.cos(2 * np.pi * x) * sy**2
        g[:, 1, 1] = -4 * np.pi**2 * sx * cx * sy * cy
        return g

    return VectorField(fn, grad=grad, name="smooth-curl")


EXAMPLES = {
    "example1": initial_data_example1,
    "example2": initial_data_example2,
    "manufactured": smooth_curl_field,
}
