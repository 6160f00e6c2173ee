"""Surface finite element solver for fluid deformable surfaces.

Incompressible surface Navier-Stokes flow on an evolving closed surface,
coupled to bending elasticity of the shape, with local inextensibility and
optional conservation of the enclosed volume.  Curved isoparametric
triangle meshes, Taylor-Hood mixed elements, semi-implicit time stepping.
"""

from .mesh import (ReferenceMesh, CurvedGeometry, MeshError, icosphere,
                   perturbed_sphere, torus, curved_from_mesh, mesh_size,
                   update_geometry)
from .fespace import FESpace, TaylorHoodSpace, quadrature
from .geomops import GeometryData, frame_at
from .assembly import State, SparseSystem, assemble
from .solver import (LinearSolverConfig, NewtonReport, SolverError,
                     solve_linear, newton_volume)
from .stepper import SimulationConfig, time_step, run, initial_curvature
from .diagnostics import DiagnosticsRecord, killing_residuals, reduced_volume
from .scenarios import (killing_scenario, perturbed_sphere_scenario,
                        mesh_scenario, convergence_study, eoc_table)

__version__ = "0.1.0"
