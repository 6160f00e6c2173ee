"""Lagrange finite element spaces on curved triangle meshes.

Provides the reference-triangle machinery (uniform Lagrange node lattice,
basis evaluation via monomial Vandermonde, quadrature rules) and the global
degree-of-freedom management shared by the geometry representation and the
solution spaces.
"""

import numpy as np

__all__ = [
    "lattice_nodes",
    "lattice_triangles",
    "eval_basis",
    "basis_tables",
    "quadrature",
    "QuadratureRule",
    "build_dofmap",
    "FESpace",
    "TaylorHoodSpace",
]


# ---------------------------------------------------------------------------
# Reference element: uniform Lagrange lattice on the triangle
#   {(x, y) : x >= 0, y >= 0, x + y <= 1}
# Canonical local node order: corner vertices (0,0), (1,0), (0,1), then the
# interior nodes of edges (v0,v1), (v1,v2), (v2,v0) walked from first to
# second endpoint, then interior lattice nodes in lexicographic order.
# ---------------------------------------------------------------------------

def lattice_nodes(order):
    """Integer lattice indices (i, j) of the order-`order` Lagrange nodes.

    The reference coordinate of index (i, j) is (i/order, j/order).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    nodes = [(0, 0), (order, 0), (0, order)]
    for t in range(1, order):
        nodes.append((t, 0))            # edge v0 -> v1
    for t in range(1, order):
        nodes.append((order - t, t))    # edge v1 -> v2
    for t in range(1, order):
        nodes.append((0, order - t))    # edge v2 -> v0
    for i in range(1, order):
        for j in range(1, order - i):
            nodes.append((i, j))
    return nodes


def lattice_index_map(order):
    """Map from lattice index (i, j) to canonical local node number."""
    return {ij: a for a, ij in enumerate(lattice_nodes(order))}


def lattice_triangles(order):
    """Subdivision of the reference triangle into order**2 subtriangles.

    Returns local-node-number triples, consistently oriented with the
    parent triangle.
    """
    idx = lattice_index_map(order)
    tris = []
    for i in range(order):
        for j in range(order - i):
            tris.append((idx[(i, j)], idx[(i + 1, j)], idx[(i, j + 1)]))
            if i + j <= order - 2:
                tris.append((idx[(i + 1, j)], idx[(i + 1, j + 1)], idx[(i, j + 1)]))
    return np.array(tris, dtype=int)


def n_local_nodes(order):
    return (order + 1) * (order + 2) // 2


def _monomial_exponents(order):
    return [(a, b) for a in range(order + 1) for b in range(order + 1 - a)]


def _monomial_matrix(exps, pts, dx=0, dy=0):
    """Evaluate (derivatives of) monomials x^a y^b at pts, shape (npts, nmono)."""
    pts = np.asarray(pts, dtype=float)
    out = np.empty((pts.shape[0], len(exps)))
    for m, (a, b) in enumerate(exps):
        ca = 1.0
        for d in range(dx):
            ca *= a - d
        cb = 1.0
        for d in range(dy):
            cb *= b - d
        ea, eb = a - dx, b - dy
        if ea < 0 or eb < 0 or ca == 0.0 or cb == 0.0:
            out[:, m] = 0.0
        else:
            out[:, m] = ca * cb * pts[:, 0] ** ea * pts[:, 1] ** eb
    return out


_COEFF_CACHE = {}


def _basis_coefficients(order):
    """Monomial coefficients of the Lagrange basis (Vandermonde inverse)."""
    if order not in _COEFF_CACHE:
        exps = _monomial_exponents(order)
        pts = np.array(lattice_nodes(order), dtype=float) / order
        V = _monomial_matrix(exps, pts)
        _COEFF_CACHE[order] = (exps, np.linalg.inv(V))
    return _COEFF_CACHE[order]


def eval_basis(order, point):
    """Values and reference gradients of all local basis functions at `point`.

    Returns (values, grads) with shapes (nloc,) and (nloc, 2).
    """
    vals, grads, _ = basis_tables(order, np.asarray(point, float)[None, :])
    return vals[0], grads[0]


def basis_tables(order, points):
    """Tabulate basis values, gradients and Hessians at reference points.

    Returns arrays of shape (npts, nloc), (npts, nloc, 2), (npts, nloc, 2, 2).
    """
    exps, C = _basis_coefficients(order)
    points = np.asarray(points, dtype=float)
    vals = _monomial_matrix(exps, points) @ C
    grads = np.stack(
        [_monomial_matrix(exps, points, 1, 0) @ C,
         _monomial_matrix(exps, points, 0, 1) @ C], axis=-1)
    dxx = _monomial_matrix(exps, points, 2, 0) @ C
    dxy = _monomial_matrix(exps, points, 1, 1) @ C
    dyy = _monomial_matrix(exps, points, 0, 2) @ C
    hess = np.empty(points.shape[:1] + (C.shape[1], 2, 2))
    hess[..., 0, 0] = dxx
    hess[..., 0, 1] = dxy
    hess[..., 1, 0] = dxy
    hess[..., 1, 1] = dyy
    return vals, grads, hess


# ---------------------------------------------------------------------------
# Quadrature on the reference triangle
# ---------------------------------------------------------------------------

class QuadratureRule:
    """Points (reference coordinates) and positive weights summing to 1/2."""

    def __init__(self, points, weights, degree):
        self.points = np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.degree = degree

    def __len__(self):
        return len(self.weights)


def _symmetric_rule(degree):
    if degree == 1:
        return [(1 / 3, 1 / 3)], [0.5]
    if degree == 2:
        a = 1 / 6
        return [(a, a), (2 / 3, a), (a, 2 / 3)], [1 / 6] * 3
    if degree in (3, 4):
        pts, wts = [], []
        for a, w in [(0.445948490915965, 0.223381589678011),
                     (0.091576213509771, 0.109951743655322)]:
            pts += [(a, a), (1 - 2 * a, a), (a, 1 - 2 * a)]
            wts += [w / 2] * 3
        return pts, wts
    if degree == 5:
        pts = [(1 / 3, 1 / 3)]
        wts = [0.225 / 2]
        for a, w in [(0.470142064105115, 0.132394152788506),
                     (0.101286507323456, 0.125939180544827)]:
            pts += [(a, a), (1 - 2 * a, a), (a, 1 - 2 * a)]
            wts += [w / 2] * 3
        return pts, wts
    return None


def _collapsed_rule(degree):
    # Duffy-type product rule: Gauss-Legendre x Gauss-Jacobi(1,0), exact
    # for the requested total degree, all weights positive.
    from scipy.special import roots_jacobi

    n = (degree + 2) // 2
    xl, wl = np.polynomial.legendre.leggauss(n)
    xl = (xl + 1) / 2
    wl = wl / 2
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xj = (xj + 1) / 2
    wj = wj / 4
    pts, wts = [], []
    for j in range(n):
        for i in range(n):
            pts.append((xl[i] * (1 - xj[j]), xj[j]))
            wts.append(wl[i] * wj[j])
    return pts, wts


def quadrature(degree):
    """Quadrature rule on the reference triangle, exact to `degree`."""
    if degree < 1:
        raise ValueError("quadrature degree must be >= 1")
    rule = _symmetric_rule(degree)
    if rule is None:
        rule = _collapsed_rule(degree)
    pts, wts = rule
    return QuadratureRule(pts, wts, degree)


# ---------------------------------------------------------------------------
# Global degree-of-freedom maps
# ---------------------------------------------------------------------------

def build_dofmap(mesh, order):
    """Element-local to global Lagrange node numbering of given order.

    Nodes are numbered deterministically: mesh vertices first, then edge
    nodes grouped by edge id (walked from the lower- to the higher-numbered
    vertex), then per-element interior nodes.

    Returns (elem_nodes, n_nodes) with elem_nodes of shape (ntri, nloc)
    following the canonical local order of `lattice_nodes`.
    """
    nv = len(mesh.vertices)
    nt = len(mesh.triangles)
    ne = len(mesh.edges)
    npe = order - 1
    npi = (order - 1) * (order - 2) // 2
    n_nodes = nv + ne * npe + nt * npi
    nloc = n_local_nodes(order)
    elem_nodes = np.empty((nt, nloc), dtype=int)
    elem_nodes[:, :3] = mesh.triangles

    if npe > 0:
        # local edge e of a triangle runs vertex e -> vertex (e+1) % 3
        for e in range(3):
            eids = mesh.tri_edges[:, e]
            forward = mesh.tri_edge_forward[:, e]
            base = nv + eids * npe
            for t in range(npe):
                pos = np.where(forward, t, npe - 1 - t)
                elem_nodes[:, 3 + e * npe + t] = base + pos
    if npi > 0:
        base = nv + ne * npe + np.arange(nt) * npi
        for t in range(npi):
            elem_nodes[:, 3 + 3 * npe + t] = base + t
    return elem_nodes, n_nodes


class FESpace:
    """Scalar or vector Lagrange space of order `order` on a curved mesh.

    Vector spaces use a component-blocked dof layout: dof index of
    (component c, node n) is c * n_nodes + n.
    """

    def __init__(self, geometry, order, components=1):
        if order < 1:
            raise ValueError("order must be >= 1")
        if components not in (1, 3):
            raise ValueError("components must be 1 or 3")
        self.geometry = geometry
        self.order = order
        self.components = components
        self.elem_nodes, self.n_nodes = build_dofmap(geometry.mesh, order)
        self.n_dofs = components * self.n_nodes

    def node_positions(self):
        """Physical coordinates of the global Lagrange nodes, shape (n, 3)."""
        ref = np.array(lattice_nodes(self.order), dtype=float) / self.order
        vals, _, _ = basis_tables(self.geometry.order, ref)
        # (ntri, nloc_space, 3) positions through the geometry map
        coords = self.geometry.nodes[self.geometry.elem_nodes]
        pos_e = np.einsum("la,mai->mli", vals, coords)
        pos = np.empty((self.n_nodes, 3))
        pos[self.elem_nodes.ravel()] = pos_e.reshape(-1, 3)
        return pos

    def interpolate(self, f):
        """Nodal interpolant of a point function; returns dof coefficients.

        `f` maps an (n, 3) array of positions to (n,) values for scalar
        spaces or (n, 3) values for vector spaces.
        """
        pos = self.node_positions()
        vals = np.asarray(f(pos), dtype=float)
        if self.components == 1:
            if vals.shape != (self.n_nodes,):
                raise ValueError("scalar interpolation expects shape (n,)")
            return vals.copy()
        if vals.shape != (self.n_nodes, 3):
            raise ValueError("vector interpolation expects shape (n, 3)")
        return vals.T.reshape(-1).copy()

    def split(self, coeffs):
        """View vector coefficients as (components, n_nodes)."""
        return np.asarray(coeffs).reshape(self.components, self.n_nodes)


class TaylorHoodSpace:
    """Mixed space: velocity V_k^3, pressure V_{k-1}, curvature V_k, update V_k^3.

    Global layout is the concatenation (u | p | H | Y) with contiguous
    blocks; offsets index into the coupled system vector.
    """

    def __init__(self, geometry):
        k = geometry.order
        if k < 2:
            raise ValueError("Taylor-Hood requires geometry order >= 2")
        self.geometry = geometry
        self.velocity = FESpace(geometry, k, components=3)
        self.pressure = FESpace(geometry, k - 1, components=1)
        self.curvature = FESpace(geometry, k, components=1)
        self.update = FESpace(geometry, k, components=3)
        nu = self.velocity.n_dofs
        np_ = self.pressure.n_dofs
        nh = self.curvature.n_dofs
        ny = self.update.n_dofs
        self.offset_u = 0
        self.offset_p = nu
        self.offset_h = nu + np_
        self.offset_y = nu + np_ + nh
        self.n_dofs = nu + np_ + nh + ny

    def split(self, vec):
        """Split a coupled vector into (u, p, H, Y) coefficient arrays."""
        return (vec[self.offset_u:self.offset_p],
                vec[self.offset_p:self.offset_h],
                vec[self.offset_h:self.offset_y],
                vec[self.offset_y:self.n_dofs])

    def join(self, u, p, H, Y):
        return np.concatenate([u, p, H, Y])
