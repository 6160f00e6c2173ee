"""Canned experiments: rotating sphere, relaxing perturbed sphere, generic
mesh relaxation, and the convergence-study harness."""

import numpy as np

from . import geomops, io as iomod, mesh as meshmod, stepper
from .assembly import State
from .fespace import TaylorHoodSpace

__all__ = ["killing_scenario", "perturbed_sphere_scenario", "mesh_scenario",
           "build_scenario", "convergence_study", "eoc_table"]


def _init_state(geometry, config=None, u=None, relax=True):
    H = None
    if relax and config is not None:
        geometry, H = stepper.relax_geometry(geometry, config)
    # build the space on the settled geometry: interpolation samples the
    # final node positions; the dof layout is connectivity-only, so the
    # relaxed curvature coefficients remain valid
    space = TaylorHoodSpace(geometry)
    st = State.zero(space)
    st.H = H if H is not None else stepper.initial_curvature(geometry, space)
    if u is not None:
        st.u = space.velocity.interpolate(u)
    return st, geometry


def killing_scenario(config):
    """Unit sphere started in rigid rotation about the z axis.

    Initial velocity u(0, x) = (x1, -x0, 0); pressure zero; curvature from
    the stand-alone curvature solve.  Volume constraint defaults to off:
    the rotation preserves the enclosed volume by itself.
    """
    _, geometry = meshmod.icosphere(1.0, order=config.order,
                                    frequency=config.resolution)
    state, geometry = _init_state(
        geometry, config,
        u=lambda x: np.stack([x[:, 1], -x[:, 0], np.zeros(len(x))], axis=1))
    return state, geometry


def perturbed_sphere_scenario(config, r0=0.4):
    """Non-equilibrium perturbed sphere relaxing from rest.

    Radius field 1 + r0 cos(theta) sin(3 psi); u = 0.  Meant to run with
    the volume constraint on.
    """
    _, geometry = meshmod.perturbed_sphere(r0, order=config.order,
                                           frequency=config.resolution)
    state, geometry = _init_state(geometry, config)
    return state, geometry


def mesh_scenario(config, path):
    """Load an arbitrary closed triangle mesh and relax it from rest."""
    mesh = iomod.read_mesh(path)
    geometry = meshmod.curved_from_mesh(mesh, config.order)
    state, geometry = _init_state(geometry, config)
    return state, geometry


def build_scenario(config, mesh_path=None):
    """Dispatch on config.scenario; returns (state, geometry)."""
    if mesh_path is not None or config.scenario == "mesh":
        if mesh_path is None:
            raise ValueError("scenario 'mesh' needs a mesh file")
        return mesh_scenario(config, mesh_path)
    if config.scenario == "killing":
        return killing_scenario(config)
    if config.scenario == "perturbed_sphere":
        return perturbed_sphere_scenario(config)
    raise ValueError(f"unknown scenario {config.scenario!r}")


def eoc_table(hs, errors):
    """Experimental orders log(err_i/err_{i+1}) / log(h_i/h_{i+1}).

    Returns (eocs, monotone) where monotone flags a decreasing error
    sequence.
    """
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    eocs = np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])
    monotone = bool(np.all(np.diff(errors) < 0))
    return eocs, monotone


def convergence_study(config, frequencies, tau_rule="h3", t_end=None,
                      verbose=False):
    """Run one scenario over a ladder of mesh resolutions and report EOCs.

    tau_rule: "h3" scales the step as tau * (h/h_0)**3 from the coarsest
    level; "fixed" keeps config.tau on every level (use for the temporal
    study by passing shrinking taus through per-level configs instead).

    Returns a dict with per-level h, tau, L-infinity-in-time errors for the
    tangential divergence e and the area/volume drifts, the final bending
    energy (differenced against the finest level), and EOC rows.
    """
    from dataclasses import replace

    if len(frequencies) < 3:
        raise ValueError("need at least 3 resolution levels")
    if t_end is not None:
        config = replace(config, t_end=t_end)

    levels = []
    h0 = None
    for freq in frequencies:
        cfg = replace(config, resolution=freq)
        state, geometry = build_scenario(cfg)
        h = meshmod.mesh_size(geometry)[0]
        if h0 is None:
            h0 = h
        if tau_rule == "h3":
            tau = config.tau * (h / h0) ** 3
        elif tau_rule == "fixed":
            tau = config.tau
        else:
            raise ValueError(f"unknown tau rule {tau_rule!r}")
        # keep t_end an exact multiple of the step
        n = max(1, int(round(config.t_end / tau)))
        cfg = replace(cfg, tau=config.t_end / n)
        _, _, records = stepper.run(state, geometry, cfg)
        levels.append({
            "frequency": freq, "h": h, "tau": cfg.tau,
            "e": max(r.e for r in records),
            "eA": max(r.dA for r in records),
            "eV": max(r.dV for r in records),
            "EH_final": records[-1].EH,
        })
        if verbose:
            print(f"  freq={freq} h={h:.4g} tau={cfg.tau:.4g} "
                  f"e={levels[-1]['e']:.4g} eA={levels[-1]['eA']:.4g} "
                  f"eV={levels[-1]['eV']:.4g}")

    hs = [lv["h"] for lv in levels]
    out = {"levels": levels, "eoc": {}}
    for key in ("e", "eA", "eV"):
        errs = [lv[key] for lv in levels]
        if min(errs) > 0:
            eocs, mono = eoc_table(hs, errs)
            out["eoc"][key] = {"values": eocs.tolist(), "monotone": mono}
    # bending energy error against the finest level
    ref = levels[-1]["EH_final"]
    eH = [abs(lv["EH_final"] - ref) for lv in levels[:-1]]
    out["eH"] = eH
    if len(eH) >= 2 and min(eH) > 0:
        eocs, mono = eoc_table(hs[:-1], eH)
        out["eoc"]["eH"] = {"values": eocs.tolist(), "monotone": mono}
    return out
