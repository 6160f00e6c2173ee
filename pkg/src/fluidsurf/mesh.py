"""Closed triangle meshes and their higher-order curved lifts.

A `ReferenceMesh` is the piecewise-linear triangulation with full edge
adjacency; a `CurvedGeometry` lifts it with an order-k Lagrange map stored
as one global node-coordinate array so that shared nodes cannot drift apart.
"""

import numpy as np

from . import fespace

__all__ = [
    "ReferenceMesh",
    "CurvedGeometry",
    "icosphere",
    "perturbed_sphere",
    "torus",
    "curved_from_mesh",
    "mesh_size",
    "update_geometry",
    "MeshError",
]


class MeshError(ValueError):
    pass


class ReferenceMesh:
    """Piecewise-linear closed surface triangulation with adjacency.

    Parameters
    ----------
    vertices : (nv, 3) float array
    triangles : (nt, 3) int array, consistently oriented

    Derived attributes: `edges` (ne, 2) with sorted vertex pairs in
    lexicographic order, `tri_edges` (nt, 3) edge ids where local edge e
    joins local vertices e and (e+1) % 3, `tri_edge_forward` (nt, 3) bool
    flags (True if the local traversal runs low -> high vertex id), and
    `edge_tris` (ne, 2) incident triangles.
    """

    def __init__(self, vertices, triangles):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=int)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must have shape (nv, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must have shape (nt, 3)")
        if self.triangles.size and self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle index exceeds vertex count")
        self._build_edges()

    def _build_edges(self):
        t = self.triangles
        raw = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        key = np.sort(raw, axis=1)
        self.edges, inverse = np.unique(key, axis=0, return_inverse=True)
        nt = len(t)
        self.tri_edges = inverse.reshape(3, nt).T
        self.tri_edge_forward = (raw[:, 0] < raw[:, 1]).reshape(3, nt).T
        ne = len(self.edges)
        counts = np.bincount(inverse, minlength=ne)
        self._edge_counts = counts
        edge_tris = np.full((ne, 2), -1, dtype=int)
        slot = np.zeros(ne, dtype=int)
        tri_of = np.tile(np.arange(nt), 3)
        for eid, tid in zip(inverse, tri_of):
            if slot[eid] < 2:
                edge_tris[eid, slot[eid]] = tid
            slot[eid] += 1
        self.edge_tris = edge_tris

    def validate(self):
        """Check the closed-manifold, orientation and degeneracy invariants."""
        if np.any(self._edge_counts != 2):
            raise MeshError("mesh is not a closed 2-manifold: "
                            f"{np.sum(self._edge_counts != 2)} bad edges")
        # consistent orientation: each undirected edge must be traversed
        # once forward and once backward by its two triangles
        t = self.triangles
        raw = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        directed = set(map(tuple, raw))
        if len(directed) != len(raw):
            raise MeshError("duplicate directed edge (inconsistent orientation)")
        for a, b in raw:
            if (b, a) not in directed:
                raise MeshError("inconsistent orientation")
        v = self.vertices[self.triangles]
        if np.any(self.triangles[:, 0] == self.triangles[:, 1]) or \
           np.any(self.triangles[:, 1] == self.triangles[:, 2]) or \
           np.any(self.triangles[:, 0] == self.triangles[:, 2]):
            raise MeshError("degenerate triangle (repeated vertex)")
        areas = 0.5 * np.linalg.norm(
            np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
        if np.any(areas <= 0):
            raise MeshError("degenerate triangle (zero area)")
        return self

    def signed_volume(self):
        v = self.vertices[self.triangles]
        return np.einsum("mi,mi->", v[:, 0], np.cross(v[:, 1], v[:, 2])) / 6.0


class CurvedGeometry:
    """Order-k Lagrange surface parameterization over a reference mesh.

    `nodes` holds the coordinates of all global geometry Lagrange nodes,
    `elem_nodes` maps each triangle to its local node set (canonical local
    order of `fespace.lattice_nodes`).  For k = 1 the curved surface
    coincides with the reference mesh.
    """

    def __init__(self, mesh, order, nodes, elem_nodes=None):
        self.mesh = mesh
        self.order = int(order)
        self.nodes = np.asarray(nodes, dtype=float)
        if elem_nodes is None:
            elem_nodes, n_nodes = fespace.build_dofmap(mesh, order)
            if n_nodes != len(self.nodes):
                raise MeshError("node array size does not match dof map")
        self.elem_nodes = elem_nodes

    @property
    def n_elements(self):
        return len(self.mesh.triangles)

    def element_coords(self):
        """Per-element geometry node coordinates, shape (nt, nloc, 3)."""
        return self.nodes[self.elem_nodes]

    def check_nondegenerate(self, quad_degree=None):
        """Raise if the first fundamental form is not SPD at quadrature points."""
        if quad_degree is None:
            quad_degree = 2 * self.order + 2
        rule = fespace.quadrature(quad_degree)
        _, grads, _ = fespace.basis_tables(self.order, rule.points)
        jac = np.einsum("qad,mai->mqid", grads, self.element_coords())
        G = np.einsum("mqid,mqie->mqde", jac, jac)
        det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
        if not np.all(det > 0) or not np.all(G[..., 0, 0] > 0):
            raise MeshError("degenerate element map (non-SPD metric)")
        return self


def _linear_node_positions(mesh, order):
    """Lattice node positions of the flat reference mesh, plus the dof map."""
    elem_nodes, n_nodes = fespace.build_dofmap(mesh, order)
    lat = np.array(fespace.lattice_nodes(order), dtype=float) / order
    bary = np.stack([1.0 - lat[:, 0] - lat[:, 1], lat[:, 0], lat[:, 1]], axis=1)
    corners = mesh.vertices[mesh.triangles]
    pos_e = np.einsum("lc,mci->mli", bary, corners)
    pos = np.empty((n_nodes, 3))
    pos[elem_nodes.ravel()] = pos_e.reshape(-1, 3)
    return pos, elem_nodes


def _subdivide(mesh, frequency):
    """Split every triangle into frequency**2 subtriangles (flat positions)."""
    if frequency == 1:
        return mesh
    pos, elem_nodes = _linear_node_positions(mesh, frequency)
    sub = fespace.lattice_triangles(frequency)
    tris = elem_nodes[:, sub].reshape(-1, 3)
    return ReferenceMesh(pos, tris)


_PHI = (1.0 + np.sqrt(5.0)) / 2.0

_ICOSA_VERTICES = np.array([
    [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
    [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
    [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
], dtype=float)

_ICOSA_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=int)


def icosphere(radius=1.0, level=0, order=1, frequency=None):
    """Subdivided icosahedron projected onto the sphere of given radius.

    `level` selects a 4-way refinement depth (frequency 2**level); an
    explicit `frequency` splits each icosahedron edge into that many
    segments instead, which allows intermediate mesh sizes.  All curved
    Lagrange nodes are projected radially onto the sphere.

    Returns (ReferenceMesh, CurvedGeometry).
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if frequency is None:
        frequency = 2 ** level
    base = ReferenceMesh(_ICOSA_VERTICES / np.linalg.norm(_ICOSA_VERTICES[0]),
                         _ICOSA_FACES)
    refined = _subdivide(base, frequency)
    verts = refined.vertices
    verts = radius * verts / np.linalg.norm(verts, axis=1, keepdims=True)
    mesh = ReferenceMesh(verts, refined.triangles).validate()
    if mesh.signed_volume() < 0:
        raise MeshError("icosphere orientation is inward")  # pragma: no cover
    pos, elem_nodes = _linear_node_positions(mesh, order)
    pos = radius * pos / np.linalg.norm(pos, axis=1, keepdims=True)
    return mesh, CurvedGeometry(mesh, order, pos, elem_nodes)


def perturbed_sphere(r0, level=0, order=1, frequency=None):
    """Sphere with radius 1 + r0 * cos(theta) * sin(3 psi).

    theta is the azimuthal angle atan2(y, x) and psi the polar angle
    arccos(z); the perturbation vanishes at the poles so the surface is
    smooth there.  Built from the unit icosphere by moving every Lagrange
    node radially.
    """
    if abs(r0) >= 1:
        raise ValueError("|r0| must be < 1 to keep the radius positive")
    mesh, geom = icosphere(1.0, level=level, order=order, frequency=frequency)

    def radial(pos):
        d = pos / np.linalg.norm(pos, axis=1, keepdims=True)
        theta = np.arctan2(d[:, 1], d[:, 0])
        psi = np.arccos(np.clip(d[:, 2], -1.0, 1.0))
        r = 1.0 + r0 * np.cos(theta) * np.sin(3.0 * psi)
        if np.any(r <= 0):
            raise MeshError("perturbation produces non-positive radius")
        return r[:, None] * d

    verts = radial(mesh.vertices)
    nodes = radial(geom.nodes)
    new_mesh = ReferenceMesh(verts, mesh.triangles).validate()
    return new_mesh, CurvedGeometry(new_mesh, order, nodes, geom.elem_nodes)


def torus(R=2.0, r=0.5, n_major=16, n_minor=8, order=1):
    """Structured torus mesh; curved nodes placed on the exact torus.

    Parameterization X(u, v) = ((R + r cos v) cos u, (R + r cos v) sin u,
    r sin v) with outward orientation.
    """
    if not (R > r > 0):
        raise ValueError("requires R > r > 0")

    def param(u, v):
        return np.stack([(R + r * np.cos(v)) * np.cos(u),
                         (R + r * np.cos(v)) * np.sin(u),
                         r * np.sin(v)], axis=-1)

    uu = 2 * np.pi * np.arange(n_major) / n_major
    vv = 2 * np.pi * np.arange(n_minor) / n_minor
    # vertex (i, j) -> index i * n_minor + j, periodic in both directions
    U, V = np.meshgrid(uu, vv, indexing="ij")
    verts = param(U.ravel(), V.ravel())
    uv = np.stack([U.ravel(), V.ravel()], axis=1)
    tris = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            tris.append((a, b, c))
            tris.append((a, c, d))
    mesh = ReferenceMesh(verts, np.array(tris)).validate()

    elem_nodes, n_nodes = fespace.build_dofmap(mesh, order)
    lat = np.array(fespace.lattice_nodes(order), dtype=float) / order
    bary = np.stack([1.0 - lat[:, 0] - lat[:, 1], lat[:, 0], lat[:, 1]], axis=1)
    corner_uv = uv[mesh.triangles]  # (nt, 3, 2)
    # unwrap each triangle's angles around its first corner before blending
    ref = corner_uv[:, :1, :]
    corner_uv = ref + (corner_uv - ref + np.pi) % (2 * np.pi) - np.pi
    uv_e = np.einsum("lc,mcd->mld", bary, corner_uv)
    pos = np.empty((n_nodes, 3))
    pos[elem_nodes.ravel()] = param(uv_e[..., 0].ravel(), uv_e[..., 1].ravel())
    return mesh, CurvedGeometry(mesh, order, pos, elem_nodes)


def curved_from_mesh(mesh, order):
    """Order-k geometry over an arbitrary reference mesh (flat elements:
    the curved Lagrange nodes sit on the input triangles)."""
    pos, elem_nodes = _linear_node_positions(mesh, order)
    return CurvedGeometry(mesh, order, pos, elem_nodes)


def mesh_size(geometry):
    """(h_max, h_min) of the longest corner-to-corner edge per element."""
    c = geometry.nodes[geometry.elem_nodes[:, :3]]
    d01 = np.linalg.norm(c[:, 0] - c[:, 1], axis=1)
    d12 = np.linalg.norm(c[:, 1] - c[:, 2], axis=1)
    d20 = np.linalg.norm(c[:, 2] - c[:, 0], axis=1)
    h = np.maximum(np.maximum(d01, d12), d20)
    return float(h.max()), float(h.min())


def element_sizes(geometry):
    """Longest corner edge h_T of every element."""
    c = geometry.nodes[geometry.elem_nodes[:, :3]]
    d01 = np.linalg.norm(c[:, 0] - c[:, 1], axis=1)
    d12 = np.linalg.norm(c[:, 1] - c[:, 2], axis=1)
    d20 = np.linalg.norm(c[:, 2] - c[:, 0], axis=1)
    return np.maximum(np.maximum(d01, d12), d20)


def update_geometry(geometry, Y, check=True):
    """Translate every geometry node by the update field Y.

    Y may be shaped (n_nodes, 3) or component-blocked flat (3 * n_nodes,).
    Returns a new CurvedGeometry; adjacency is shared with the input.
    """
    Y = np.asarray(Y, dtype=float)
    n = len(geometry.nodes)
    if Y.shape == (3 * n,):
        Y = Y.reshape(3, n).T
    if Y.shape != (n, 3):
        raise ValueError("update field shape does not match geometry nodes")
    new_nodes = geometry.nodes + Y
    # vertex nodes come first in the dof numbering
    new_mesh = ReferenceMesh(new_nodes[:len(geometry.mesh.vertices)],
                             geometry.mesh.triangles)
    out = CurvedGeometry(new_mesh, geometry.order, new_nodes,
                         geometry.elem_nodes)
    if check:
        out.check_nondegenerate()
    return out
