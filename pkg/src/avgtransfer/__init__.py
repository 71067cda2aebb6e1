"""Averaged low-thrust orbit transfers toward circular orbits.

Minimum-time transfers reduce to a flow on the cylinder (psi, phi) driven by
the densities ``L`` (full control) and ``M`` (tangential thrust); the
minimum-energy problem is flat and handled in closed form.
"""

from .errors import (AvgTransferError, BracketNotFound, Capped, CircularSingularity,
                     DomainError, EscapeDomain, GraphViolation, NumericalFailure, OutOfSector,
                     QuadratureNonConvergence, StepFailure)
from .hamiltonian import (ControlMode, CylinderPoint, ExtremalState, eval_density, eval_L,
                          eval_M, ham_energy, ham_time_direct)
from .field import eval_field, find_Zb, saddle
from .flow import (FlowConfig, Region, StopCondition, Trajectory, classify, integrate,
                   trace_manifolds)
from .transfer import TransferProblem, TransferSolution, solve
from .energy import (energy_geodesic, energy_phase_flow, energy_reachable, first_integral,
                     from_flat, to_flat)
from .rawdyn import GaussState, averaging_check, gauss_rhs

__version__ = "0.1.0"
