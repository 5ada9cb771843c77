"""Stabilized isogeometric Stokes solver on hierarchically overlapping
spline patches.

Submodules:
 - splines: B-spline spaces, geometry maps, Taylor-Hood pairs
 - geometry: patch hierarchy, visibility clipping, interfaces, classification
 - stabilization: polynomial-extension operators for bad elements
 - assembly: Nitsche-coupled Stokes system, norms, errors
 - solve: Jacobi-scaled direct solver and condition numbers
 - harness / cli: experiment drivers and command-line interface
"""

from .assembly import (AssemblyConfig, StokesSystem, apply_dirichlet,
                       assemble_system, energy_norm, errors_vs_exact,
                       interface_pressure_jump, pressure_norm, split_solution)
from .cases import Case, gen_multi_patch, gen_two_patch, manufactured_solution
from .geometry import (ConfigurationError, GeometryError, Patch,
                       PatchHierarchy)
from .harness import run_condition_sweep, run_convergence, solve_case
from .solve import (SizeCapError, SolverError, condition_number, solve_direct)
from .splines import GeometryMap, TaylorHoodPair, TensorSplineSpace
from .stabilization import Stabilization, build_stabilization

__version__ = "0.1.0"
