"""P1 and boundary-DG0 spaces, quadrature rules, and discrete evaluation.

All rules carry positive weights. Triangle rules are the classical
symmetric rules on the reference triangle (0,0)-(1,0)-(0,1); edge rules
are Gauss-Legendre on [0,1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

DEFAULT_VOLUME_DEGREE = 4
DEFAULT_EDGE_POINTS = 6


@dataclass(frozen=True)
class QuadratureRule:
    """Reference-domain points and weights, exact up to `degree`."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


def _sym3(a):
    """Three-point orbit (a, a), (1-2a, a), (a, 1-2a)."""
    return [(a, a), (1.0 - 2.0 * a, a), (a, 1.0 - 2.0 * a)]


def _sym6(a, b):
    c = 1.0 - a - b
    return [(a, b), (b, a), (a, c), (c, a), (b, c), (c, b)]


def triangle_quadrature(degree: int) -> QuadratureRule:
    """Symmetric Gauss rule on the reference triangle, exact to `degree`.

    Supported degrees are 1..6; weights sum to the reference area 1/2.
    """
    if degree == 1:
        pts = [(1.0 / 3.0, 1.0 / 3.0)]
        wts = [1.0]
    elif degree == 2:
        pts = _sym3(1.0 / 6.0)
        wts = [1.0 / 3.0] * 3
    elif degree in (3, 4):
        # 6-point rule of degree 4 (also used for degree 3: all weights positive)
        a1, w1 = 0.445948490915965, 0.223381589678011
        a2, w2 = 0.091576213509771, 0.109951743655322
        pts = _sym3(a1) + _sym3(a2)
        wts = [w1] * 3 + [w2] * 3
    elif degree == 5:
        s15 = np.sqrt(15.0)
        a1, w1 = (6.0 + s15) / 21.0, (155.0 + s15) / 1200.0
        a2, w2 = (6.0 - s15) / 21.0, (155.0 - s15) / 1200.0
        pts = [(1.0 / 3.0, 1.0 / 3.0)] + _sym3(a1) + _sym3(a2)
        wts = [9.0 / 40.0] + [w1] * 3 + [w2] * 3
    elif degree == 6:
        a1, w1 = 0.063089014491502, 0.050844906370207
        a2, w2 = 0.249286745170910, 0.116786275726379
        w3 = 0.082851075618374
        pts = _sym3(a1) + _sym3(a2) + _sym6(0.310352451033785, 0.636502499121399)
        wts = [w1] * 3 + [w2] * 3 + [w3] * 6
    else:
        raise ValueError(f"unsupported triangle quadrature degree {degree}")
    points = np.array(pts)
    weights = 0.5 * np.array(wts)
    return QuadratureRule(points=points, weights=weights, degree=degree)


def edge_quadrature(points: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0,1] with `points` nodes, exact to 2p-1."""
    if not 1 <= points <= 10:
        raise ValueError(f"unsupported edge quadrature point count {points}")
    x, w = np.polynomial.legendre.leggauss(points)
    return QuadratureRule(
        points=0.5 * (x + 1.0), weights=0.5 * w, degree=2 * points - 1
    )


def eval_basis(vertices, x):
    """Barycentric P1 basis values and gradients on one triangle.

    Parameters
    ----------
    vertices : (3, 2) array
        Triangle corners, positively oriented.
    x : (2,) array
        Evaluation point; must lie in the (slightly fattened) triangle.

    Returns
    -------
    values : (3,) array of barycentric coordinates at x.
    gradients : (3, 2) array of the constant basis gradients.
    """
    vertices = np.asarray(vertices, dtype=float)
    x = np.asarray(x, dtype=float)
    e1 = vertices[1] - vertices[0]
    e2 = vertices[2] - vertices[0]
    det = e1[0] * e2[1] - e1[1] * e2[0]
    if det <= 0.0:
        raise ValueError(f"degenerate or misoriented triangle (2*area={det})")
    binv = np.array([[e2[1], -e2[0]], [-e1[1], e1[0]]]) / det
    xi = binv @ (x - vertices[0])
    values = np.array([1.0 - xi[0] - xi[1], xi[0], xi[1]])
    if values.min() < -1e-12 or values.max() > 1.0 + 1e-12:
        raise ValueError(f"point {x} lies outside the triangle")
    gradients = np.vstack([-binv[0] - binv[1], binv[0], binv[1]])
    return values, gradients


class P1Space:
    """Continuous piecewise linears; one dof per mesh vertex.

    Precomputes per-triangle areas, basis gradients, and the inverse
    affine maps used for vectorized point evaluation.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.n_dofs = mesh.n_vertices
        v = mesh.vertices[mesh.triangles]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self.areas = 0.5 * det
        binv = np.empty((mesh.n_triangles, 2, 2))
        binv[:, 0, 0] = e2[:, 1]
        binv[:, 0, 1] = -e2[:, 0]
        binv[:, 1, 0] = -e1[:, 1]
        binv[:, 1, 1] = e1[:, 0]
        binv /= det[:, None, None]
        self.inverse_maps = binv
        grads = np.empty((mesh.n_triangles, 3, 2))
        grads[:, 1] = binv[:, 0]
        grads[:, 2] = binv[:, 1]
        grads[:, 0] = -binv[:, 0] - binv[:, 1]
        self.gradients = grads
        self.origins = v[:, 0]

    def dof(self, vertex: int) -> int:
        return vertex

    def quadrature_points(self, rule: QuadratureRule) -> np.ndarray:
        """Physical quadrature points, shape (n_triangles, n_q, 2)."""
        v = self.mesh.vertices[self.mesh.triangles]
        xi = rule.points
        return (
            v[:, None, 0, :]
            + xi[None, :, 0, None] * (v[:, 1] - v[:, 0])[:, None, :]
            + xi[None, :, 1, None] * (v[:, 2] - v[:, 0])[:, None, :]
        )


class TraceDG0Space:
    """Facet-wise constants on the boundary trace mesh; one dof per facet."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.n_dofs = mesh.n_facets


def nodal_interpolant(f, space: P1Space) -> np.ndarray:
    """Coefficients of the vertex interpolant of f; exact for affine f."""
    v = space.mesh.vertices
    coeffs = np.asarray(f(v[:, 0], v[:, 1]), dtype=float)
    coeffs = np.broadcast_to(coeffs, (space.n_dofs,)).copy()
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("interpolated function is not finite at some vertex")
    return coeffs


def locate_triangle(mesh: Mesh, points) -> np.ndarray:
    """Triangle index for each point of an (..., 2) array.

    O(1) lookup on the structured grid: cell from floor division, then a
    diagonal test. Points on mesh lines resolve deterministically; points
    outside [0,1]^2 by more than 1e-12 raise.
    """
    pts = np.asarray(points, dtype=float)
    n = mesh.grid_n
    x, y = pts[..., 0], pts[..., 1]
    if np.any(x < -1e-12) or np.any(x > 1 + 1e-12) or np.any(y < -1e-12) or np.any(y > 1 + 1e-12):
        raise ValueError("point outside the unit square cannot be located")
    ix = np.clip(np.floor(x * n).astype(np.int64), 0, n - 1)
    iy = np.clip(np.floor(y * n).astype(np.int64), 0, n - 1)
    s = x * n - ix
    t = y * n - iy
    return 2 * (iy * n + ix) + (t > s)


def eval_discrete(coeffs, x, space: P1Space):
    """Value and gradient of a P1 function at one point."""
    values, gradients = eval_discrete_many(coeffs, np.asarray(x, dtype=float)[None, :], space)
    return float(values[0]), gradients[0]


def eval_discrete_many(coeffs, points, space: P1Space):
    """Vectorized P1 evaluation at an (m, 2) array of points.

    Returns (values (m,), gradients (m, 2)); the gradient is the constant
    of whichever triangle the point locates into, so on interior edges it
    is one-sided.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    pts = np.asarray(points, dtype=float)
    tri = locate_triangle(space.mesh, pts)
    local = np.einsum("mij,mj->mi", space.inverse_maps[tri], pts - space.origins[tri])
    bary = np.column_stack([1.0 - local[:, 0] - local[:, 1], local[:, 0], local[:, 1]])
    nodal = coeffs[space.mesh.triangles[tri]]
    values = np.einsum("mi,mi->m", bary, nodal)
    gradients = np.einsum("mi,mid->md", nodal, space.gradients[tri])
    return values, gradients


def facet_quadrature_geometry(mesh: Mesh, edge_points: int = DEFAULT_EDGE_POINTS):
    """Shared geometry for boundary-facet integrals.

    Returns (t, w, X) with Gauss parameters t (q,), weights w (q,), and
    physical points X (n_facets, q, 2). An integral over the boundary is
    then sum over facets of length * sum_q w_q * integrand(X).
    """
    rule = edge_quadrature(edge_points)
    return rule.points, rule.weights, mesh.facet_points(rule.points)
