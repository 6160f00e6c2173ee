"""Assembly of the coupled per-timestep saddle-point system.

One time step solves, on the current surface, for the tuple
(u, p, H, Y) = (velocity, pressure, mean curvature, surface update):

    u-row: (u, phi) + tau (grad_v u, phi) - tau (p, div_P phi)
           + (2 tau / Re) (sigma(u), sigma(phi))
           - (tau / Be) [(grad_S H, grad_S(nu . phi)) - (beta H nu, phi)]
           = (u_old, phi) - tau lambda (nu, phi)
    p-row: (div_P u, q) = 0
    H-row: (Y . nu, h) - tau (u . nu, h) = 0
    Y-row: (H nu_i, Z_i) + (grad_S Y_i, grad_S Z_i) = -(grad_S X_i, grad_S Z_i)

All geometric data (normal, shape operator, measure) is frozen on the
current surface; the convection velocity v = u_old - Y_old / tau freezes the
transport direction, so the system is linear.  The curvature row uses the
sign convention of `geomops` (unit sphere: H = -2), under which H nu equals
the surface Laplacian of the position in the weak sense.

The volume-multiplier column (nu, phi) is kept out of the matrix and
returned separately; the scalar Newton loop in `solver` adds -tau lambda g
to the right-hand side.
"""

import numpy as np
from scipy import sparse

from . import geomops

__all__ = ["State", "SparseSystem", "assemble", "pressure_identity_report"]


class State:
    """Solution tuple at one time step (coefficient arrays, blocked layout)."""

    def __init__(self, u, p, H, Y, lam=0.0, t=0.0):
        self.u = np.asarray(u, dtype=float)
        self.p = np.asarray(p, dtype=float)
        self.H = np.asarray(H, dtype=float)
        self.Y = np.asarray(Y, dtype=float)
        self.lam = float(lam)
        self.t = float(t)

    @classmethod
    def zero(cls, space, t=0.0):
        return cls(np.zeros(space.velocity.n_dofs),
                   np.zeros(space.pressure.n_dofs),
                   np.zeros(space.curvature.n_dofs),
                   np.zeros(space.update.n_dofs), 0.0, t)

    def copy(self):
        return State(self.u.copy(), self.p.copy(), self.H.copy(),
                     self.Y.copy(), self.lam, self.t)


class SparseSystem:
    """Assembled coupled system: matrix, base right-hand side, constraint."""

    def __init__(self, matrix, rhs, constraint, space, tau):
        self.matrix = matrix
        self.rhs = rhs
        self.constraint = constraint
        self.space = space
        self.tau = tau


def _scatter(blocks, n):
    rows = np.concatenate([b[0].ravel() for b in blocks])
    cols = np.concatenate([b[1].ravel() for b in blocks])
    data = np.concatenate([b[2].ravel() for b in blocks])
    return sparse.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def assemble(state, geometry, tau, Re, Be, space=None, gd=None,
             with_convection=True):
    """Assemble the coupled system on the given geometry.

    `state` provides u_old and Y_old (for the frozen convection velocity).
    Returns a SparseSystem over the Taylor-Hood block layout (u | p | H | Y).
    """
    from .fespace import TaylorHoodSpace

    if space is None:
        space = TaylorHoodSpace(geometry)
    if gd is None:
        gd = geomops.GeometryData(geometry)
    if tau <= 0 or Re <= 0 or Be <= 0:
        raise ValueError("tau, Re, Be must be positive")

    vel = space.velocity
    prs = space.pressure
    Nk = vel.n_nodes
    Np = prs.n_nodes
    EN = vel.elem_nodes          # (m, nk), shared by u, H, Y spaces
    ENp = prs.elem_nodes
    nk = EN.shape[1]
    npl = ENp.shape[1]

    w = gd.weight                 # (m, q)
    nu = gd.normal                # (m, q, 3)
    P = gd.projection             # (m, q, 3, 3)
    B = gd.shape_operator
    beta = gd.beta
    phi = gd.phi(vel.order)       # (q, nk)
    dphi = gd.dphi(vel.order)     # (m, q, nk, 3)
    phip = gd.phi(prs.order)      # (q, npl)

    # velocity of the frame relative to the material, frozen at t^n
    u_old = geomops.vector_at(gd, vel, state.u)
    if with_convection:
        v = u_old - geomops.vector_at(gd, space.update, state.Y) / tau
    else:
        v = None

    # --- element tensors ----------------------------------------------------
    M = np.einsum("mq,qa,qb->mab", w, phi, phi, optimize=True)             # scalar mass
    K = np.einsum("mq,mqai,mqbi->mab", w, dphi, dphi, optimize=True)       # scalar stiffness
    if with_convection:
        C = np.einsum("mq,qa,mqbi,mqi->mab", w, phi, dphi, v, optimize=True)
    else:
        C = np.zeros_like(M)

    # viscous block (2 tau / Re)(sigma(u), sigma(phi)); with tangential
    # basis gradients g the contraction reduces to
    #   1/2 [ P_{xy} (g_a . g_b) + g_a[y] g_b[x] ],  x = test comp, y = trial
    visc = (tau / Re) * (
        np.einsum("mq,mqxy,mqai,mqbi->maxby", w, P, dphi, dphi, optimize=True)
        + np.einsum("mq,mqay,mqbx->maxby", w, dphi, dphi, optimize=True))

    # pressure coupling
    Gup = -tau * np.einsum("mq,qb,mqax->maxb", w, phip, dphi, optimize=True)
    Gpu = np.einsum("mq,qa,mqbx->mabx", w, phip, dphi, optimize=True)

    # bending: coupling of the implicit H with the velocity test functions
    bend = (-(tau / Be) * (
        np.einsum("mq,mqx,mqbi,mqai->maxb", w, nu, dphi, dphi, optimize=True)
        - np.einsum("mq,qa,mqix,mqbi->maxb", w, phi, B, dphi, optimize=True))
        + (tau / Be) * np.einsum("mq,mq,qb,mqx,qa->maxb", w, beta, phi, nu, phi, optimize=True))

    # normal-velocity and curvature couplings share one tensor
    NT = np.einsum("mq,qa,qb,mqx->mabx", w, phi, phi, nu, optimize=True)   # (h or Z, trial, comp)

    off_u, off_p = space.offset_u, space.offset_p
    off_h, off_y = space.offset_h, space.offset_y
    gu = EN                     # global node ids (m, nk)
    gp = ENp

    def udof(nodes, comp):
        return off_u + comp * Nk + nodes

    def ydof(nodes, comp):
        return off_y + comp * Nk + nodes

    blocks = []
    eye = np.eye(3)

    # u-u: mass + convection on the component diagonal, plus viscous coupling
    MC = M + tau * C
    ra = udof(gu[:, :, None, None, None], np.arange(3)[None, None, :, None, None])
    cb = udof(gu[:, None, None, :, None], np.arange(3)[None, None, None, None, :])
    dat = visc + MC[:, :, None, :, None] * eye[None, None, :, None, :]
    blocks.append((np.broadcast_to(ra, dat.shape), np.broadcast_to(cb, dat.shape), dat))

    # u-p and p-u
    ra = udof(gu[:, :, None, None], np.arange(3)[None, None, :, None])
    cb = (off_p + gp)[:, None, None, :]
    blocks.append((np.broadcast_to(ra, Gup.shape), np.broadcast_to(cb, Gup.shape), Gup))
    ra = (off_p + gp)[:, :, None, None]
    cb = udof(gu[:, None, :, None], np.arange(3)[None, None, None, :])
    blocks.append((np.broadcast_to(ra, Gpu.shape), np.broadcast_to(cb, Gpu.shape), Gpu))

    # u-H (bending)
    ra = udof(gu[:, :, None, None], np.arange(3)[None, None, :, None])
    cb = (off_h + gu)[:, None, None, :]
    blocks.append((np.broadcast_to(ra, bend.shape), np.broadcast_to(cb, bend.shape), bend))

    # H-row: (Y . nu, h) - tau (u . nu, h)
    ra = (off_h + gu)[:, :, None, None]
    cb = ydof(gu[:, None, :, None], np.arange(3)[None, None, None, :])
    blocks.append((np.broadcast_to(ra, NT.shape), np.broadcast_to(cb, NT.shape), NT))
    cb = udof(gu[:, None, :, None], np.arange(3)[None, None, None, :])
    blocks.append((np.broadcast_to(ra, NT.shape), np.broadcast_to(cb, NT.shape), -tau * NT))

    # Y-row: (H nu_x, Z_x) + stiffness on the component diagonal
    YH = np.einsum("mabx->maxb", NT)  # [test a, comp x, trial b]
    ra = ydof(gu[:, :, None, None], np.arange(3)[None, None, :, None])
    cb = (off_h + gu)[:, None, None, :]
    blocks.append((np.broadcast_to(ra, YH.shape), np.broadcast_to(cb, YH.shape), YH))
    ra = ydof(gu[:, :, None, None, None], np.arange(3)[None, None, :, None, None])
    cb = ydof(gu[:, None, None, :, None], np.arange(3)[None, None, None, None, :])
    dat = K[:, :, None, :, None] * eye[None, None, :, None, :]
    blocks.append((np.broadcast_to(ra, dat.shape), np.broadcast_to(cb, dat.shape), dat))

    A = _scatter(blocks, space.n_dofs)

    # --- right-hand side ----------------------------------------------------
    rhs = np.zeros(space.n_dofs)
    ru = np.einsum("mq,qa,mqx->max", w, phi, u_old)
    np.add.at(rhs, udof(gu[:, :, None], np.arange(3)[None, None, :]), ru)
    rY = -np.einsum("mq,mqax->max", w, dphi)
    np.add.at(rhs, ydof(gu[:, :, None], np.arange(3)[None, None, :]), rY)

    # volume-constraint direction g_i = (nu, phi_i) on the velocity block
    g = np.zeros(space.n_dofs)
    ge = np.einsum("mq,qa,mqx->max", w, phi, nu)
    np.add.at(g, udof(gu[:, :, None], np.arange(3)[None, None, :]), ge)

    return SparseSystem(A, rhs, g, space, tau)


def pressure_identity_report(geometry, p_func, phi_func, gd=None):
    """Self-test of (-grad_S p - p H nu, phi) = (p, div_P phi).

    Interpolates `p_func` into the pressure space and `phi_func` into the
    velocity space of a Taylor-Hood pair on `geometry`, evaluates both sides
    of the identity discretely and returns (lhs, rhs, difference).
    """
    from .fespace import TaylorHoodSpace

    space = TaylorHoodSpace(geometry)
    if gd is None:
        gd = geomops.GeometryData(geometry)
    p = space.pressure.interpolate(p_func)
    phi = space.velocity.interpolate(phi_func)
    pv = geomops.scalar_at(gd, space.pressure, p)
    gp = geomops.scalar_gradient(gd, space.pressure, p)
    phv = geomops.vector_at(gd, space.velocity, phi)
    divp = geomops.divergence(gd, space.velocity, phi)
    H = gd.mean_curvature
    lhs = geomops.integrate(gd, np.einsum("mqi,mqi->mq", -gp, phv)
                            - pv * H * np.einsum("mqi,mqi->mq", gd.normal, phv))
    rhs = geomops.integrate(gd, pv * divp)
    return float(lhs), float(rhs), float(lhs - rhs)
