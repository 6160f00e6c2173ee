"""Command-line entry point.

Subcommands: run, converge, validate-mesh, residuals.  Exit codes: 0 on
success, 1 on runtime failure (partial outputs are flushed), 2 on usage
errors.
"""

import argparse
import os
import sys
from dataclasses import replace

from . import diagnostics, io as iomod, mesh as meshmod, scenarios, stepper
from .mesh import MeshError
from .solver import SolverError
from .stepper import SimulationConfig

__all__ = ["main"]


def _build_parser():
    p = argparse.ArgumentParser(
        prog="fluidsurf",
        description="Finite element solver for fluid deformable surfaces")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a simulation")
    run.add_argument("--config", help="config file (ini-style sections)")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--mesh", help="input surface mesh (OFF/OBJ)")
    src.add_argument("--scenario",
                     choices=["killing", "perturbed_sphere"],
                     help="built-in initial condition")
    run.add_argument("--output", default=".", help="output directory")
    run.add_argument("--re", type=float, help="Reynolds number")
    run.add_argument("--be", type=float, help="bending capillary number")
    run.add_argument("--tau", type=float, help="time step")
    run.add_argument("--tmax", type=float, help="final time")
    run.add_argument("--order", type=int, choices=[2, 3])
    run.add_argument("--resolution", type=int,
                     help="icosphere edge subdivision frequency")
    run.add_argument("--volume-constraint", choices=["on", "off"])
    run.add_argument("--newton-eps", type=float)

    conv = sub.add_parser("converge", help="mesh convergence study")
    conv.add_argument("--scenario", default="killing",
                      choices=["killing", "perturbed_sphere"])
    conv.add_argument("--frequencies", default="2,3,4",
                      help="comma-separated resolution ladder")
    conv.add_argument("--order", type=int, default=3, choices=[2, 3])
    conv.add_argument("--tau", type=float, default=4e-3,
                      help="step at the coarsest level (scaled as h^3)")
    conv.add_argument("--tmax", type=float, default=0.05)
    conv.add_argument("--re", type=float, default=1.0)
    conv.add_argument("--be", type=float, default=2.0)
    conv.add_argument("--volume-constraint", choices=["on", "off"])

    vm = sub.add_parser("validate-mesh", help="check a surface mesh file")
    vm.add_argument("path")

    res = sub.add_parser("residuals",
                         help="rotating-equilibrium residuals of a checkpoint")
    res.add_argument("--checkpoint", required=True)
    res.add_argument("--be", type=float, required=True)
    return p


def _run_config(args):
    if args.config:
        cfg = iomod.load_config(args.config)
    else:
        cfg = SimulationConfig()
    over = {}
    if args.re is not None:
        over["Re"] = args.re
    if args.be is not None:
        over["Be"] = args.be
    if args.tau is not None:
        over["tau"] = args.tau
    if args.tmax is not None:
        over["t_end"] = args.tmax
    if args.order is not None:
        over["order"] = args.order
    if args.resolution is not None:
        over["resolution"] = args.resolution
    if args.newton_eps is not None:
        over["newton_eps"] = args.newton_eps
    if args.volume_constraint is not None:
        over["volume_constraint"] = args.volume_constraint == "on"
    if args.mesh:
        over["scenario"] = "mesh"
    elif args.scenario:
        over["scenario"] = args.scenario
        if args.scenario == "killing" and args.volume_constraint is None:
            over["volume_constraint"] = False
    return replace(cfg, **over)


def _cmd_run(args):
    cfg = _run_config(args)
    if args.mesh and not os.path.exists(args.mesh):
        print(f"error: mesh file not found: {args.mesh}", file=sys.stderr)
        return 2
    out = args.output
    os.makedirs(out, exist_ok=True)
    state, geometry = scenarios.build_scenario(cfg, mesh_path=args.mesh)
    provenance = args.mesh if args.mesh else cfg.scenario
    manifest = iomod.RunManifest(cfg, provenance)
    csv_path = os.path.join(out, "diagnostics.csv")
    records = []

    def snapshot(st, geo, step):
        path = os.path.join(out, f"snapshot_{step:06d}.vtk")
        iomod.write_snapshot(st, geo, path)
        manifest.add("snapshot", path)

    try:
        state, geometry, records = stepper.run(
            state, geometry, cfg, snapshot_sink=snapshot)
        rc = 0
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        rc = 1
    finally:
        if records:
            iomod.write_diagnostics(records, csv_path)
            manifest.add("diagnostics", csv_path)
        ck = os.path.join(out, "final.npz")
        iomod.write_checkpoint(state, geometry, cfg, ck)
        manifest.add("checkpoint", ck)
        cfg_path = os.path.join(out, "config.ini")
        iomod.save_config(cfg, cfg_path)
        manifest.add("config", cfg_path)
        manifest.write(os.path.join(out, "manifest.json"))
    if rc == 0 and records:
        r = records[-1]
        print(f"t={r.t:.4g} e={r.e:.3e} dA={r.dA:.3e} dV={r.dV:.3e} "
              f"Ekin={r.Ekin:.6g} EH={r.EH:.6g}")
    return rc


def _cmd_converge(args):
    freqs = [int(x) for x in args.frequencies.split(",")]
    vc = args.volume_constraint
    cfg = SimulationConfig(
        Re=args.re, Be=args.be, tau=args.tau, t_end=args.tmax,
        order=args.order, scenario=args.scenario,
        volume_constraint=(vc == "on" if vc is not None
                           else args.scenario == "perturbed_sphere"))
    table = scenarios.convergence_study(cfg, freqs, verbose=True)
    print(f"{'freq':>5} {'h':>10} {'tau':>10} {'e':>12} {'eA':>12} {'eV':>12}")
    for lv in table["levels"]:
        print(f"{lv['frequency']:>5} {lv['h']:>10.4g} {lv['tau']:>10.4g} "
              f"{lv['e']:>12.4e} {lv['eA']:>12.4e} {lv['eV']:>12.4e}")
    for key, row in table["eoc"].items():
        vals = " ".join(f"{v:.2f}" for v in row["values"])
        flag = "" if row["monotone"] else "  (non-monotone)"
        print(f"EOC {key}: {vals}{flag}")
    return 0


def _cmd_validate(args):
    if not os.path.exists(args.path):
        print(f"error: no such file: {args.path}", file=sys.stderr)
        return 2
    mesh = iomod.read_mesh(args.path)
    print(f"valid closed surface: {len(mesh.vertices)} vertices, "
          f"{len(mesh.triangles)} elements, {len(mesh.edges)} edges, "
          f"volume {mesh.signed_volume():.6g}")
    return 0


def _cmd_residuals(args):
    if not os.path.exists(args.checkpoint):
        print(f"error: no such file: {args.checkpoint}", file=sys.stderr)
        return 2
    state, geometry = iomod.read_checkpoint(args.checkpoint)
    omega, r0, r1, r2, r3 = diagnostics.killing_residuals(
        state, geometry, args.be)
    print(f"{'Be':>8} {'omega':>10} {'r0':>10} {'r1':>10} "
          f"{'r2':>10} {'r3':>10}")
    print(f"{args.be:>8.4g} {omega:>10.4f} {r0:>10.3e} {r1:>10.3e} "
          f"{r2:>10.3e} {r3:>10.3e}")
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "converge":
            return _cmd_converge(args)
        if args.command == "validate-mesh":
            return _cmd_validate(args)
        if args.command == "residuals":
            return _cmd_residuals(args)
    except (MeshError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
