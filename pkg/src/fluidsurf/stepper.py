"""Time integration driver: one semi-implicit step and the outer loop.

Each step assembles the coupled system on the current surface, solves it
(optionally inside the scalar volume-constraint Newton loop), moves the
geometry nodes by the solved update Y and carries the solution coefficients
over to the moved mesh by nodal identification.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from . import assembly, diagnostics, geomops, mesh as meshmod
from . import solver as solvermod
from .solver import LinearSolverConfig

__all__ = ["SimulationConfig", "time_step", "run", "initial_curvature",
           "relax_geometry"]


@dataclass
class SimulationConfig:
    Re: float = 1.0
    Be: float = 2.0
    tau: float = 1e-2
    t_end: float = 1.0
    order: int = 3
    resolution: int = 7            # icosphere edge subdivision frequency
    scenario: str = "killing"
    newton_eps: float = 1e-6
    volume_constraint: bool = True
    freeze_geometry: bool = False  # keep the surface fixed (debug/testing)
    quad_degree: int = 0           # 0 = default 2 * order + 2
    output_every: int = 10         # snapshot cadence in steps
    solver: LinearSolverConfig = field(default_factory=LinearSolverConfig)

    def __post_init__(self):
        if self.Re <= 0 or self.Be <= 0 or self.tau <= 0:
            raise ValueError("Re, Be and tau must be positive")
        if self.order not in (2, 3):
            raise ValueError("geometry/velocity order must be 2 or 3")

    def quadrature_degree(self):
        return self.quad_degree if self.quad_degree > 0 else 2 * self.order + 2


def initial_curvature(geometry, space, gd=None):
    """Curvature field at t = 0 from the weak curvature identity.

    Solves the vector mean-curvature equation (W, Z) = -(grad_S X, grad_S Z)
    with lumped-free mass solves, then projects W . nu into the scalar
    curvature space.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.linalg import spsolve

    if gd is None:
        gd = geomops.GeometryData(geometry)
    sp = space.curvature
    EN = sp.elem_nodes
    n = sp.n_nodes
    phi = gd.phi(sp.order)
    dphi = gd.dphi(sp.order)
    w = gd.weight
    Me = np.einsum("mq,qa,qb->mab", w, phi, phi)
    rows = np.broadcast_to(EN[:, :, None], Me.shape).ravel()
    cols = np.broadcast_to(EN[:, None, :], Me.shape).ravel()
    M = coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsc()

    rW = np.zeros((n, 3))
    np.add.at(rW, EN, -np.einsum("mq,mqax->max", w, dphi))
    W = np.column_stack([spsolve(M, rW[:, c]) for c in range(3)])

    Wq = np.einsum("qa,mac->mqc", phi, W[EN])  # (m, q, 3)
    Wn = np.einsum("mqc,mqc->mq", Wq, gd.normal)
    rH = np.zeros(n)
    np.add.at(rH, EN, np.einsum("mq,mq,qa->ma", w, Wn, phi))
    return spsolve(M, rH)


def relax_geometry(geometry, config, space=None, iters=2, tol=1e-8,
                   tau_relax=0.01):
    """Settle the initial mesh onto a discretely curvature-consistent surface.

    A raw mesh generally violates the discrete identity coupling curvature
    and position by a small h-dependent normal displacement.  Left in place,
    the kinematic row converts it into a spurious first-step velocity of
    size O(delta/tau).  This takes a few throwaway steps from rest (volume
    constraint off) and keeps only the geometry; the displacement is applied
    almost entirely in the first step, so two iterations suffice.  The
    genuine dynamic drift of the shape per throwaway step is O(tau^2) for
    near-equilibrium shapes and O(tau) in general, which is below the time
    discretization error of the subsequent run.

    Returns (geometry, H): the settled geometry together with the curvature
    coefficients it is discretely consistent with.  Runs started on the
    relaxed geometry must use this H -- recomputing the curvature by a
    stand-alone solve reintroduces the inconsistency on non-equilibrium
    shapes.

    The throwaway steps use the fixed step `tau_relax`, NOT the run's time
    step: the settled state is then a property of the scenario alone, so
    refinement ladders and temporal studies all start from the same
    (discretely resolved) initial state.  tau_relax must be large enough to
    apply the stored displacement in one step (>> its own square); the
    default 0.01 also damps grid-scale shape modes of coarse interpolated
    geometries that would otherwise drive a violent start-up transient.
    """
    from dataclasses import replace
    from .fespace import TaylorHoodSpace

    if space is None:
        space = TaylorHoodSpace(geometry)
    cfg = replace(config, tau=tau_relax, volume_constraint=False,
                  freeze_geometry=False)
    H = initial_curvature(geometry, space)
    for _ in range(iters):
        state = assembly.State.zero(space)
        state.H = H
        gd = geomops.GeometryData(geometry, cfg.quadrature_degree())
        state, geometry, _ = time_step(state, geometry, cfg, space, gd)
        H = np.asarray(state.H)
        # only normal inconsistency excites the velocity; tangential
        # equidistribution is slow and harmless
        Yq = geomops.vector_at(gd, space.update, np.asarray(state.Y))
        yn = float(np.abs(np.einsum("mqi,mqi->mq", Yq, gd.normal)).max())
        if yn < tol:
            break
    return geometry, H


def time_step(state, geometry, config, space=None, gd=None, reference=None):
    """Advance one step; returns (state, geometry, DiagnosticsRecord).

    The dof layout is connectivity-only, so a `space` built on the initial
    geometry stays valid across steps and may be reused.
    """
    from .fespace import TaylorHoodSpace

    if space is None:
        space = TaylorHoodSpace(geometry)
    if gd is None:
        gd = geomops.GeometryData(geometry, config.quadrature_degree())

    system = assembly.assemble(state, geometry, config.tau, config.Re,
                               config.Be, space=space, gd=gd)
    if config.volume_constraint:
        sol, report = solvermod.newton_volume(system, eps=config.newton_eps,
                                           config=config.solver)
    else:
        sol = solvermod.solve_linear(system.matrix, system.rhs, config.solver)
        nu = space.offset_p
        phi = float(system.constraint[:nu] @ sol[:nu])
        report = solvermod.NewtonReport(0.0, 0, phi, True)

    u, p, H, Y = space.split(sol)
    if config.freeze_geometry:
        new_geometry = geometry
        Y_carry = np.zeros_like(Y)
    else:
        new_geometry = meshmod.update_geometry(geometry, Y)
        Y_carry = Y.copy()

    new_state = assembly.State(u.copy(), p.copy(), H.copy(), Y_carry,
                               lam=report.lam, t=state.t + config.tau)
    record = measure(new_state, new_geometry, config, report=report,
                     reference=reference, space=space)
    return new_state, new_geometry, record


def measure(state, geometry, config, report=None, reference=None,
            space=None, gd=None):
    """Full diagnostics record for a state on its surface."""
    from .fespace import TaylorHoodSpace

    if space is None:
        space = TaylorHoodSpace(geometry)
    if gd is None:
        gd = geomops.GeometryData(geometry, config.quadrature_degree())
    e = diagnostics.inextensibility_error(state, geometry, space, gd)
    A, V, dA, dV = diagnostics.area_volume(geometry, reference, gd)
    Ekin, EH = diagnostics.energies(state, geometry, config.Re, config.Be,
                                    space, gd)
    dS, _ = diagnostics.shape_metrics(geometry, state, space, gd)
    qS = diagnostics.mesh_quality(geometry)[0]
    if report is None:
        report = solvermod.NewtonReport(state.lam, 0, 0.0, True)
    return diagnostics.DiagnosticsRecord(
        t=state.t, e=e, dA=dA, dV=dV, Ekin=Ekin, EH=EH, dS=dS, qS=qS,
        lam=report.lam, newton_iters=report.iterations, phi=report.phi)


def run(state, geometry, config, record_sink=None, snapshot_sink=None,
        reference=None):
    """Loop `time_step` until t_end; returns (state, geometry, records).

    `record_sink(record)` is called after every step (and once for the
    initial state); `snapshot_sink(state, geometry, step)` at the
    configured cadence.  `reference` overrides the (area, volume) pair
    drifts are measured against (used by restarts); by default it is taken
    from the initial surface.  Partial results are flushed before errors
    propagate.
    """
    from .fespace import TaylorHoodSpace

    space = TaylorHoodSpace(geometry)
    gd = geomops.GeometryData(geometry, config.quadrature_degree())
    if reference is None:
        reference = (gd.area(), gd.volume())
    records = []

    def emit(rec):
        records.append(rec)
        if record_sink is not None:
            record_sink(rec)

    emit(measure(state, geometry, config, reference=reference,
                 space=space, gd=gd))
    if snapshot_sink is not None:
        snapshot_sink(state, geometry, 0)

    n_steps = int(round(config.t_end / config.tau))
    for step in range(1, n_steps + 1):
        state, geometry, rec = time_step(state, geometry, config, space, gd,
                                         reference=reference)
        gd = geomops.GeometryData(geometry, config.quadrature_degree())
        emit(rec)
        if snapshot_sink is not None and step % config.output_every == 0:
            snapshot_sink(state, geometry, step)
    return state, geometry, records
