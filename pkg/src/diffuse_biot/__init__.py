"""Diffuse-interface finite elements for time-dependent Stokes-Biot coupling."""

__version__ = "0.1.0"

from .mesh import Mesh, Rect, build_structured_mesh, quadrature_rule
from .phasefield import InterfaceGeometry, PhaseField, WeightFamily, eval_phi, eval_grad_phi
from .stokes_biot import (
    Discretization,
    PhysicalParams,
    ProblemData,
    SchemeConfig,
    SimulationConfig,
    State,
    StepFailure,
    run_simulation,
)

