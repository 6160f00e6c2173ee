"""Scalar measurements of a simulation state: errors, energies, shape and
mesh-quality metrics, and the rigid-rotation equilibrium residuals."""

from dataclasses import dataclass

import numpy as np

from . import geomops, mesh as meshmod

__all__ = [
    "DiagnosticsRecord",
    "inextensibility_error",
    "area_volume",
    "energies",
    "shape_metrics",
    "mesh_quality",
    "killing_residuals",
    "reduced_volume",
]


@dataclass
class DiagnosticsRecord:
    t: float
    e: float            # L2 norm of div_P u
    dA: float           # relative area drift
    dV: float           # relative volume drift
    Ekin: float
    EH: float
    dS: float           # integrated squared deviation of H from sphere value
    qS: float           # mesh quasi-uniformity
    lam: float
    newton_iters: int
    phi: float

    FIELDS = ("t", "e", "dA", "dV", "Ekin", "EH", "dS", "qS",
              "lambda", "newton_iters", "phi")

    def row(self):
        return (self.t, self.e, self.dA, self.dV, self.Ekin, self.EH,
                self.dS, self.qS, self.lam, self.newton_iters, self.phi)


def inextensibility_error(state, geometry, space=None, gd=None):
    """L2 norm of the tangential divergence of the velocity."""
    space, gd = _setup(geometry, space, gd)
    div = geomops.divergence(gd, space.velocity, state.u)
    return geomops.l2_norm(gd, div)


def area_volume(geometry, reference=None, gd=None):
    """(area, volume, dA, dV); drifts are relative to `reference` = (A0, V0)."""
    if gd is None:
        gd = geomops.GeometryData(geometry)
    A = gd.area()
    V = gd.volume()
    if reference is None:
        return A, V, 0.0, 0.0
    A0, V0 = reference
    return A, V, abs(A - A0) / abs(A0), abs(V - V0) / abs(V0)


def energies(state, geometry, Re, Be, space=None, gd=None):
    """(kinetic energy, bending energy) on the current surface."""
    space, gd = _setup(geometry, space, gd)
    u = geomops.vector_at(gd, space.velocity, state.u)
    H = geomops.scalar_at(gd, space.curvature, state.H)
    Ekin = float(geomops.integrate(gd, np.sum(u * u, axis=-1)) / (2.0 * Re))
    EH = float(geomops.integrate(gd, H * H) / (2.0 * Be))
    return Ekin, EH


def shape_metrics(geometry, state=None, space=None, gd=None):
    """(d_S, r_S): curvature deviation from the equal-area sphere and the
    max/min node-radius aspect ratio about the center of mass."""
    space, gd = _setup(geometry, space, gd)
    A = gd.area()
    H_ref = -2.0 / np.sqrt(A / (4.0 * np.pi))
    if state is not None:
        H = geomops.scalar_at(gd, space.curvature, state.H)
    else:
        H = gd.mean_curvature
    dS = float(geomops.integrate(gd, (H - H_ref) ** 2))
    center = geomops.integrate(gd, gd.position) / A
    radii = np.linalg.norm(geometry.nodes - center, axis=1)
    rS = float(radii.max() / radii.min())
    return dS, rS


def mesh_quality(geometry, bins=20):
    """(q_S, (histogram, bin_edges)) of element size ratios.

    q_T of a triangle uses all mesh edges incident to at least one of its
    vertices (closure intersection).
    """
    m = geometry.mesh
    c = geometry.nodes[geometry.elem_nodes[:, :3]]
    hT = meshmod.element_sizes(geometry)
    qS = float(hT.max() / hT.min())

    # edge lengths from the curved corner vertices
    ev = geometry.nodes[:len(m.vertices)][m.edges]
    elen = np.linalg.norm(ev[:, 0] - ev[:, 1], axis=1)
    # vertex -> incident edge extremes
    nv = len(m.vertices)
    vmax = np.zeros(nv)
    vmin = np.full(nv, np.inf)
    for side in (0, 1):
        np.maximum.at(vmax, m.edges[:, side], elen)
        np.minimum.at(vmin, m.edges[:, side], elen)
    tmax = vmax[m.triangles].max(axis=1)
    tmin = vmin[m.triangles].min(axis=1)
    qT = tmax / tmin
    # perfectly uniform meshes have zero data range; widen it for binning
    lo, hi = float(qT.min()), float(qT.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    hist = np.histogram(qT, bins=bins, range=(lo, hi))
    return qS, hist, qT


def reduced_volume(geometry, gd=None):
    """Scale-invariant shape descriptor 6 sqrt(pi) V / A^(3/2) (1 for spheres)."""
    if gd is None:
        gd = geomops.GeometryData(geometry)
    return float(6.0 * np.sqrt(np.pi) * gd.volume() / gd.area() ** 1.5)


def fit_angular_velocity(state, geometry, space=None, gd=None):
    """Least-squares coefficient of u against the rigid rotation e_z x x."""
    space, gd = _setup(geometry, space, gd)
    u = geomops.vector_at(gd, space.velocity, state.u)
    x = gd.position
    rot = np.stack([-x[..., 1], x[..., 0], np.zeros_like(x[..., 0])], axis=-1)
    num = geomops.integrate(gd, np.sum(u * rot, axis=-1))
    den = geomops.integrate(gd, np.sum(rot * rot, axis=-1))
    return float(num / den)


def killing_residuals(state, geometry, Be, space=None, gd=None):
    """(omega, r0, r1, r2, r3) for the rotating-equilibrium force balance.

    omega is fitted by L2 projection onto the rigid rotation mode.  The
    centrifugal acceleration enters as omega^2 * (x0, x1, 0); the surface
    Laplacian of the curvature field is evaluated strongly per element.
    """
    space, gd = _setup(geometry, space, gd)
    omega = fit_angular_velocity(state, geometry, space, gd)
    u = geomops.vector_at(gd, space.velocity, state.u)
    x = gd.position
    nu = gd.normal
    rot = np.stack([-x[..., 1], x[..., 0], np.zeros_like(x[..., 0])], axis=-1)
    Fz = np.stack([-x[..., 0], -x[..., 1], np.zeros_like(x[..., 0])], axis=-1)

    r0 = geomops.l2_norm(gd, np.sum(u * nu, axis=-1))
    r1 = geomops.l2_norm(gd, u - omega * rot)

    grad_p = geomops.scalar_gradient(gd, space.pressure, state.p)
    PFz = np.einsum("mqij,mqj->mqi", gd.projection, Fz)
    r2 = geomops.l2_norm(gd, omega ** 2 * PFz + grad_p)

    H = geomops.scalar_at(gd, space.curvature, state.H)
    p = geomops.scalar_at(gd, space.pressure, state.p)
    lapH = geomops.scalar_laplacian(gd, space.curvature, state.H)
    bending = (-lapH - H * gd.beta) / Be
    r3 = geomops.l2_norm(
        gd, omega ** 2 * np.sum(Fz * nu, axis=-1) + p * H - bending)
    return omega, r0, r1, r2, r3


def _setup(geometry, space, gd):
    from .fespace import TaylorHoodSpace

    if space is None:
        space = TaylorHoodSpace(geometry)
    if gd is None:
        gd = geomops.GeometryData(geometry)
    return space, gd
