"""Fuel-optimal 6-DoF rendezvous and docking trajectory generation.

Successive convexification over pulsed reaction-control thrusters with
minimum-pulse-width and plume-impingement constraints handled as
state-triggered constraints inside a second-order cone subproblem.
"""

from .driver import ScvxConfig, ScvxResult, run
from .dynamics import ChaserState, ImpulseSchedule
from .fuel import fuel_consumed, sweep_tf
from .problem import RendezvousProblem, apollo_problem
from .vehicle import VehicleModel, build_apollo_csm

__all__ = [
    "ChaserState",
    "ImpulseSchedule",
    "RendezvousProblem",
    "ScvxConfig",
    "ScvxResult",
    "VehicleModel",
    "apollo_problem",
    "build_apollo_csm",
    "fuel_consumed",
    "run",
    "sweep_tf",
]
