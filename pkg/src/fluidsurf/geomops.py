"""Pointwise surface geometry and differential operators at quadrature points.

`GeometryData` precomputes, for every element and quadrature point of a
curved geometry: position, Jacobian, inverse metric, outward normal, the
projection P = I - nu x nu, the shape operator B = -grad_P nu, its trace H
and the bending coefficient beta = |B|^2 - H^2 / 2, plus the surface
measure weights used by `integrate`.

Sign convention: with the outward normal, the unit sphere has B = -P and
H = -2, so that H nu equals the surface Laplacian of the position.
"""

import numpy as np

from . import fespace

__all__ = [
    "GeometryData",
    "GeomFrame",
    "frame_at",
    "integrate",
    "scalar_at",
    "scalar_gradient",
    "vector_at",
    "vector_gradient",
    "divergence",
    "scalar_laplacian",
]


class GeometryData:
    """Geometric quantities of a curved geometry at quadrature points.

    All arrays are indexed (element, quadrature point, ...).  Basis tables
    and tangential-gradient operators for the function spaces living on the
    same mesh are cached per polynomial order.
    """

    def __init__(self, geometry, quad_degree=None):
        if quad_degree is None:
            quad_degree = 2 * geometry.order + 2
        self.geometry = geometry
        self.rule = fespace.quadrature(quad_degree)
        pts = self.rule.points
        vals, grads, hess = fespace.basis_tables(geometry.order, pts)
        coords = geometry.element_coords()  # (m, nloc, 3)

        self.position = np.einsum("qa,mai->mqi", vals, coords)
        jac = np.einsum("qad,mai->mqid", grads, coords)
        self.jacobian = jac
        G = np.einsum("mqid,mqie->mqde", jac, jac)
        detG = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
        if np.any(detG <= 0):
            raise ValueError("degenerate element Jacobian")
        self.sqrt_det = np.sqrt(detG)
        self.weight = self.sqrt_det * self.rule.weights[None, :]
        Ginv = np.empty_like(G)
        Ginv[..., 0, 0] = G[..., 1, 1]
        Ginv[..., 1, 1] = G[..., 0, 0]
        Ginv[..., 0, 1] = -G[..., 0, 1]
        Ginv[..., 1, 0] = -G[..., 1, 0]
        Ginv /= detG[..., None, None]
        self.metric_inv = Ginv

        n = np.cross(jac[..., 0], jac[..., 1])
        self.normal = n / self.sqrt_det[..., None]
        self.projection = np.eye(3) - np.einsum(
            "mqi,mqj->mqij", self.normal, self.normal)

        # shape operator from derivatives of the discrete normal (zero for k=1)
        d2x = np.einsum("qade,mai->mqide", hess, coords)
        dn = np.stack([
            np.cross(d2x[..., 0, 0], jac[..., 1]) + np.cross(jac[..., 0], d2x[..., 1, 0]),
            np.cross(d2x[..., 0, 1], jac[..., 1]) + np.cross(jac[..., 0], d2x[..., 1, 1]),
        ], axis=-1)  # (m, q, 3, 2) derivative of unnormalized normal
        dnu = np.einsum("mqij,mqjd->mqid", self.projection, dn) / self.sqrt_det[..., None, None]
        # surface gradient of each normal component: S[i, j] = (grad_S nu_j)_i
        S = np.einsum("mqid,mqde,mqje->mqij", jac, Ginv, dnu)
        B = -np.einsum("mqik,mqkl,mqlj->mqij", self.projection, S, self.projection)
        self.shape_operator = 0.5 * (B + np.swapaxes(B, -1, -2))
        self.mean_curvature = np.einsum("mqii->mq", self.shape_operator)
        B2 = np.einsum("mqij,mqij->mq", self.shape_operator, self.shape_operator)
        self.beta = B2 - 0.5 * self.mean_curvature ** 2

        self._hess_geo = d2x
        self._tables = {}
        self._dphi = {}

    # -- cached basis data for FE fields on this geometry --------------------

    def tables(self, order):
        if order not in self._tables:
            self._tables[order] = fespace.basis_tables(order, self.rule.points)
        return self._tables[order]

    def phi(self, order):
        return self.tables(order)[0]

    def dphi(self, order):
        """Tangential gradients of the scalar basis, shape (m, q, nloc, 3)."""
        if order not in self._dphi:
            _, grads, _ = self.tables(order)
            self._dphi[order] = np.einsum(
                "mqid,mqde,qae->mqai", self.jacobian, self.metric_inv, grads)
        return self._dphi[order]

    def area(self):
        return float(self.weight.sum())

    def volume(self):
        """Enclosed volume via (1/3) int x . nu dS."""
        return float(np.einsum(
            "mq,mqi,mqi->", self.weight, self.position, self.normal) / 3.0)


class GeomFrame:
    """Geometry at a single surface point (see module docstring)."""

    def __init__(self, position, tangents, normal, projection,
                 shape_operator, mean_curvature, weight):
        self.position = position
        self.tangents = tangents
        self.normal = normal
        self.projection = projection
        self.shape_operator = shape_operator
        self.mean_curvature = mean_curvature
        self.weight = weight


def frame_at(geometry, element, point):
    """Evaluate the geometric frame of one element at a reference point."""
    pts = np.asarray(point, dtype=float)[None, :]
    vals, grads, hess = fespace.basis_tables(geometry.order, pts)
    coords = geometry.element_coords()[element]
    x = vals[0] @ coords
    jac = np.einsum("ad,ai->id", grads[0], coords)
    G = jac.T @ jac
    detG = np.linalg.det(G)
    if detG <= 0:
        raise ValueError("degenerate element Jacobian")
    n = np.cross(jac[:, 0], jac[:, 1])
    sd = np.sqrt(detG)
    nu = n / sd
    P = np.eye(3) - np.outer(nu, nu)
    d2x = np.einsum("ade,ai->ide", hess[0], coords)
    dn = np.stack([
        np.cross(d2x[:, 0, 0], jac[:, 1]) + np.cross(jac[:, 0], d2x[:, 1, 0]),
        np.cross(d2x[:, 0, 1], jac[:, 1]) + np.cross(jac[:, 0], d2x[:, 1, 1]),
    ], axis=-1)
    dnu = (P @ dn) / sd
    S = np.einsum("id,de,je->ij", jac, np.linalg.inv(G), dnu)
    B = -P @ S @ P
    B = 0.5 * (B + B.T)
    return GeomFrame(x, jac, nu, P, B, float(np.trace(B)), sd)


# ---------------------------------------------------------------------------
# FE field evaluation at the quadrature points of a GeometryData
# ---------------------------------------------------------------------------

def scalar_at(gd, space, coeffs):
    """Scalar field values, shape (m, q)."""
    return np.einsum("qa,ma->mq", gd.phi(space.order),
                     coeffs[space.elem_nodes])


def scalar_gradient(gd, space, coeffs):
    """Tangential surface gradient of a scalar field, shape (m, q, 3)."""
    return np.einsum("mqai,ma->mqi", gd.dphi(space.order),
                     coeffs[space.elem_nodes])


def vector_at(gd, space, coeffs):
    """Vector field values, shape (m, q, 3)."""
    c = space.split(coeffs)  # (3, n_nodes)
    return np.einsum("qa,cma->mqc", gd.phi(space.order),
                     c[:, space.elem_nodes])


def vector_gradient(gd, space, coeffs):
    """Componentwise tangential gradient, shape (m, q, 3, 3).

    Entry [c, i] is the i-th component of the surface gradient of the c-th
    field component; each row is tangential.  The fully tangential
    derivative (P grad w P) is obtained by applying the projection from
    the left; the tangential divergence is the trace.
    """
    c = space.split(coeffs)
    return np.einsum("mqai,cma->mqci", gd.dphi(space.order),
                     c[:, space.elem_nodes])


def divergence(gd, space, coeffs):
    """Tangential divergence div_P of a vector field, shape (m, q)."""
    g = vector_gradient(gd, space, coeffs)
    return np.einsum("mqcc->mq", g)


def tangential_gradient(gd, space, coeffs):
    """Fully tangential gradient P (grad w) P, shape (m, q, 3, 3)."""
    g = vector_gradient(gd, space, coeffs)
    return np.einsum("mqik,mqkj->mqij", gd.projection, g)


def rate_of_deformation(gd, space, coeffs):
    """Symmetric part of the tangential gradient, shape (m, q, 3, 3)."""
    g = tangential_gradient(gd, space, coeffs)
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def scalar_laplacian(gd, space, coeffs):
    """Strong surface Laplacian of a scalar FE field, shape (m, q).

    Uses the Laplace-Beltrami formula in reference coordinates with the
    Christoffel symbols of the element maps; requires order >= 2 fields for
    a nonzero second-derivative part.
    """
    _, grads, hess = gd.tables(space.order)
    ce = coeffs[space.elem_nodes]
    df = np.einsum("qad,ma->mqd", grads, ce)          # reference gradient
    d2f = np.einsum("qade,ma->mqde", hess, ce)        # reference Hessian
    # Gamma^c_{ab} = Ginv^{cd} (X_{,ab} . X_{,d})
    gam_low = np.einsum("mqiab,mqid->mqabd", gd._hess_geo, gd.jacobian)
    gam = np.einsum("mqcd,mqabd->mqcab", gd.metric_inv, gam_low)
    corr = np.einsum("mqcab,mqc->mqab", gam, df)
    return np.einsum("mqab,mqab->mq", gd.metric_inv, d2f - corr)


def integrate(gd, values):
    """Integrate a quadrature-point sampled quantity over the surface.

    `values` may be scalar (m, q) or carry trailing tensor axes, in which
    case the integral is taken per component.
    """
    values = np.asarray(values)
    extra = values.ndim - 2
    w = gd.weight.reshape(gd.weight.shape + (1,) * extra)
    return (values * w).sum(axis=(0, 1))


def l2_norm(gd, values):
    """L2 norm over the surface of a scalar or vector sampled quantity."""
    values = np.asarray(values)
    if values.ndim > 2:
        sq = np.sum(values ** 2, axis=tuple(range(2, values.ndim)))
    else:
        sq = values ** 2
    return float(np.sqrt(integrate(gd, sq)))
