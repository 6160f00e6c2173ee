"""File interfaces: mesh readers, VTK and CSV writers, config files and
checkpoints.  All writers are deterministic for fixed input."""

import configparser
import hashlib
import json
import os

import numpy as np

from . import diagnostics, fespace, geomops
from .assembly import State
from .mesh import CurvedGeometry, MeshError, ReferenceMesh
from .stepper import SimulationConfig
from .solver import LinearSolverConfig

__all__ = [
    "read_mesh", "write_snapshot", "write_diagnostics", "read_diagnostics",
    "load_config", "save_config", "config_hash",
    "write_checkpoint", "read_checkpoint", "RunManifest",
]

_FMT = "%.17g"


# ---------------------------------------------------------------------------
# Mesh input
# ---------------------------------------------------------------------------

def _fix_orientation(vertices, triangles):
    """Make triangle orientation globally consistent by region growing,
    then outward by the signed-volume test."""
    tris = [list(t) for t in triangles]
    edge_map = {}
    for tid, (a, b, c) in enumerate(tris):
        for e in ((a, b), (b, c), (c, a)):
            edge_map.setdefault(frozenset(e), []).append(tid)
    visited = [False] * len(tris)
    for seed in range(len(tris)):
        if visited[seed]:
            continue
        stack = [seed]
        visited[seed] = True
        while stack:
            tid = stack.pop()
            a, b, c = tris[tid]
            for e in ((a, b), (b, c), (c, a)):
                for nb in edge_map[frozenset(e)]:
                    if nb == tid or visited[nb]:
                        continue
                    if tuple(e) in {(tris[nb][0], tris[nb][1]),
                                    (tris[nb][1], tris[nb][2]),
                                    (tris[nb][2], tris[nb][0])}:
                        tris[nb].reverse()
                    visited[nb] = True
                    stack.append(nb)
    out = np.array(tris)
    if ReferenceMesh(vertices, out).signed_volume() < 0:
        out = out[:, ::-1]
    return out


def read_mesh(path, fmt=None):
    """Read an OFF or OBJ triangle mesh and validate it as a closed,
    consistently oriented manifold.  Inconsistent orientation is repaired
    when possible."""
    if fmt is None:
        fmt = os.path.splitext(path)[1].lstrip(".").upper()
    fmt = fmt.upper()
    if fmt == "OFF":
        verts, faces = _read_off(path)
    elif fmt == "OBJ":
        verts, faces = _read_obj(path)
    else:
        raise MeshError(f"unsupported mesh format {fmt!r}")
    mesh = ReferenceMesh(np.asarray(verts), np.asarray(faces, dtype=int))
    try:
        mesh.validate()
    except MeshError:
        fixed = _fix_orientation(mesh.vertices, mesh.triangles)
        mesh = ReferenceMesh(mesh.vertices, fixed)
        mesh.validate()
    if mesh.signed_volume() < 0:
        mesh = ReferenceMesh(mesh.vertices, mesh.triangles[:, ::-1])
    return mesh


def _read_off(path):
    with open(path) as f:
        tokens = []
        for line in f:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise MeshError("not an OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    verts = []
    for _ in range(nv):
        verts.append([float(x) for x in tokens[pos:pos + 3]])
        pos += 3
    faces = []
    for _ in range(nf):
        n = int(tokens[pos])
        if n != 3:
            raise MeshError(f"non-triangular face with {n} vertices")
        faces.append([int(x) for x in tokens[pos + 1:pos + 4]])
        pos += 1 + n
    return verts, faces


def _read_obj(path):
    verts, faces = [], []
    with open(path) as f:
        for line in f:
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshError(
                        f"non-triangular face with {len(idx)} vertices")
                faces.append([i - 1 for i in idx])
    if not verts or not faces:
        raise MeshError("OBJ file contains no triangle mesh")
    return verts, faces


# ---------------------------------------------------------------------------
# VTK snapshot output
# ---------------------------------------------------------------------------

def write_snapshot(state, geometry, path, space=None):
    """Write a legacy-VTK ASCII snapshot of the state.

    Curved elements are tessellated into order**2 flat subtriangles through
    their Lagrange nodes.  Point data: u, p, H and the tangential speed
    |P u|.
    """
    from .fespace import TaylorHoodSpace

    if space is None:
        space = TaylorHoodSpace(geometry)
    k = geometry.order
    points = geometry.nodes
    sub = fespace.lattice_triangles(k)
    cells = geometry.elem_nodes[:, sub].reshape(-1, 3)

    u = space.velocity.split(state.u).T       # (n, 3)
    H = state.H
    # pressure lives on the order k-1 lattice; evaluate it at the order-k nodes
    ref = np.array(fespace.lattice_nodes(k), dtype=float) / k
    pv, _, _ = fespace.basis_tables(k - 1, ref)
    pe = np.einsum("la,ma->ml", pv, state.p[space.pressure.elem_nodes])
    p = np.empty(len(points))
    p[geometry.elem_nodes.ravel()] = pe.ravel()
    # nodal normals per element (overwritten at shared nodes; viz only)
    vals, grads, _ = fespace.basis_tables(k, ref)
    jac = np.einsum("lad,mai->mlid", grads, geometry.element_coords())
    n = np.cross(jac[..., 0], jac[..., 1])
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    nrm = np.empty((len(points), 3))
    nrm[geometry.elem_nodes.ravel()] = n.reshape(-1, 3)
    pu = u - np.sum(u * nrm, axis=1, keepdims=True) * nrm
    speed = np.linalg.norm(pu, axis=1)

    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("fluid deformable surface snapshot\nASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(points)} double\n")
        for x in points:
            f.write((_FMT + " " + _FMT + " " + _FMT + "\n") % tuple(x))
        f.write(f"CELLS {len(cells)} {4 * len(cells)}\n")
        for c in cells:
            f.write("3 %d %d %d\n" % tuple(c))
        f.write(f"CELL_TYPES {len(cells)}\n")
        f.write("5\n" * len(cells))
        f.write(f"POINT_DATA {len(points)}\n")
        f.write("VECTORS u double\n")
        for x in u:
            f.write((_FMT + " " + _FMT + " " + _FMT + "\n") % tuple(x))
        for name, arr in (("p", p), ("H", H), ("tangential_speed", speed)):
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for x in arr:
                f.write((_FMT + "\n") % x)
    return path


# ---------------------------------------------------------------------------
# Diagnostics CSV
# ---------------------------------------------------------------------------

_CSV_HEADER = "t,e,dA,dV,Ekin,EH,dS,qS,lambda,newton_iters,phi"


def write_diagnostics(records, path):
    """Write diagnostics records to CSV at full double precision."""
    if not records:
        raise ValueError("no records to write")
    with open(path, "w") as f:
        f.write(_CSV_HEADER + "\n")
        for r in records:
            row = r.row()
            f.write(",".join(
                str(int(v)) if i == 9 else _FMT % v
                for i, v in enumerate(row)) + "\n")
    return path


def read_diagnostics(path):
    """Parse a diagnostics CSV back into records."""
    out = []
    with open(path) as f:
        header = f.readline().strip()
        if header != _CSV_HEADER:
            raise ValueError("unexpected diagnostics header")
        for line in f:
            v = line.strip().split(",")
            out.append(diagnostics.DiagnosticsRecord(
                t=float(v[0]), e=float(v[1]), dA=float(v[2]), dV=float(v[3]),
                Ekin=float(v[4]), EH=float(v[5]), dS=float(v[6]),
                qS=float(v[7]), lam=float(v[8]), newton_iters=int(v[9]),
                phi=float(v[10])))
    return out


# ---------------------------------------------------------------------------
# Config files (ini-style sections with flat key=value entries)
# ---------------------------------------------------------------------------

def save_config(config, path):
    cp = configparser.ConfigParser()
    cp["physics"] = {"re": _FMT % config.Re, "be": _FMT % config.Be}
    cp["discretization"] = {
        "order": str(config.order),
        "resolution": str(config.resolution),
        "tau": _FMT % config.tau,
        "t_end": _FMT % config.t_end,
        "quad_degree": str(config.quad_degree),
        "scenario": config.scenario,
    }
    cp["solver"] = {
        "method": config.solver.method,
        "tolerance": _FMT % config.solver.tolerance,
        "newton_eps": _FMT % config.newton_eps,
        "volume_constraint": "on" if config.volume_constraint else "off",
        "freeze_geometry": "on" if config.freeze_geometry else "off",
    }
    cp["output"] = {"every": str(config.output_every)}
    with open(path, "w") as f:
        cp.write(f)
    return path


def load_config(path):
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    cfg = SimulationConfig(
        Re=cp.getfloat("physics", "re", fallback=1.0),
        Be=cp.getfloat("physics", "be", fallback=2.0),
        tau=cp.getfloat("discretization", "tau", fallback=1e-2),
        t_end=cp.getfloat("discretization", "t_end", fallback=1.0),
        order=cp.getint("discretization", "order", fallback=3),
        resolution=cp.getint("discretization", "resolution", fallback=7),
        quad_degree=cp.getint("discretization", "quad_degree", fallback=0),
        scenario=cp.get("discretization", "scenario", fallback="killing"),
        newton_eps=cp.getfloat("solver", "newton_eps", fallback=1e-6),
        volume_constraint=cp.get(
            "solver", "volume_constraint", fallback="on") == "on",
        freeze_geometry=cp.get(
            "solver", "freeze_geometry", fallback="off") == "on",
        output_every=cp.getint("output", "every", fallback=10),
        solver=LinearSolverConfig(
            method=cp.get("solver", "method", fallback="direct"),
            tolerance=cp.getfloat("solver", "tolerance", fallback=1e-10)),
    )
    return cfg


def config_hash(config):
    payload = json.dumps({
        "Re": config.Re, "Be": config.Be, "tau": config.tau,
        "t_end": config.t_end, "order": config.order,
        "resolution": config.resolution, "scenario": config.scenario,
        "newton_eps": config.newton_eps,
        "volume_constraint": config.volume_constraint,
        "freeze_geometry": config.freeze_geometry,
        "quad_degree": config.quad_degree,
        "solver": [config.solver.method, config.solver.tolerance],
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def write_checkpoint(state, geometry, config, path, reference=None):
    """Self-describing binary dump of state + geometry + config hash.

    `reference` optionally stores the (area, volume) pair drifts are
    measured against, so a restarted run reproduces dA/dV exactly.
    """
    extra = {}
    if reference is not None:
        extra["reference"] = np.asarray(reference, dtype=float)
    np.savez(path,
             u=state.u, p=state.p, H=state.H, Y=state.Y,
             lam=np.float64(state.lam), t=np.float64(state.t),
             nodes=geometry.nodes, order=np.int64(geometry.order),
             vertices=geometry.mesh.vertices,
             triangles=geometry.mesh.triangles,
             config_hash=np.bytes_(config_hash(config).encode()),
             **extra)
    return path


def read_checkpoint(path, config=None, with_reference=False):
    """Load (state, geometry) from a checkpoint.

    If a config is supplied, its hash must match the one stored at write
    time.  With `with_reference=True` a third element is returned: the
    stored (area, volume) drift reference, or None.
    """
    with np.load(path) as z:
        if config is not None:
            stored = bytes(z["config_hash"]).decode()
            if stored != config_hash(config):
                raise ValueError("checkpoint was written with a different config")
        m = ReferenceMesh(z["vertices"], z["triangles"])
        geometry = CurvedGeometry(m, int(z["order"]), z["nodes"])
        state = State(z["u"], z["p"], z["H"], z["Y"],
                      lam=float(z["lam"]), t=float(z["t"]))
        reference = tuple(z["reference"]) if "reference" in z else None
    if with_reference:
        return state, geometry, reference
    return state, geometry


class RunManifest:
    """Index of all files produced by one simulation run."""

    def __init__(self, config, mesh_provenance, version="fluidsurf-0.1.0"):
        self.config_hash = config_hash(config)
        self.mesh_provenance = mesh_provenance
        self.version = version
        self.files = []

    def add(self, kind, path):
        self.files.append({"kind": kind, "path": os.path.basename(path)})

    def write(self, path):
        with open(path, "w") as f:
            json.dump({"version": self.version,
                       "config_hash": self.config_hash,
                       "mesh": self.mesh_provenance,
                       "files": self.files}, f, indent=2, sort_keys=True)
            f.write("\n")
        return path
