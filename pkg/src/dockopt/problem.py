"""Rendezvous problem definition and the Apollo transposition/docking case.

The target (lunar module) is passive; its state plus the docking-port
geometry determine the chaser's terminal state: the docking port sits ahead
of the target CoM along the port axis, the docking axis points outward from
the port toward the approach corridor, and the docked chaser CoM sits one
nose length further out along that axis with its nose on the port. Exact
Apollo station lengths live in archival documents, so every derived value
can be overridden.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import quaternions as quat
from .dynamics import ChaserState
from .vehicle import VehicleModel, build_apollo_csm

APOLLO_FUEL_TARGET_KG = 50.0  # G-type mission design allocation

# Geometry placeholders pending exact archival station data.
DEFAULT_PORT_OFFSET_M = 2.0
DEFAULT_NOSE_LENGTH_M = 4.5
DEFAULT_DOCK_ROLL_DEG = -60.0
DEFAULT_CLOSING_SPEED = 0.1  # m/s


@dataclass(frozen=True)
class RendezvousProblem:
    """Fixed-duration, fixed-boundary rendezvous instance."""

    t_f: float
    initial: ChaserState
    final: ChaserState
    lm: ChaserState  # passive target state
    p_d: np.ndarray  # docking port, inertial
    e_d: np.ndarray  # docking axis, unit, pointing out of the port
    r_a: float  # approach radius triggering impingement constraints, m
    dtheta_max: float  # rad, attitude error bound inside r_a
    gamma: float  # rad, approach cone half-angle
    vehicle: VehicleModel

    def __post_init__(self):
        object.__setattr__(self, "p_d", np.asarray(self.p_d, dtype=float))
        e_d = np.asarray(self.e_d, dtype=float)
        if abs(np.linalg.norm(e_d) - 1.0) > 1e-9:
            raise ValueError("docking axis must be a unit vector")
        object.__setattr__(self, "e_d", e_d)
        ratio = self.t_f / self.vehicle.t_c
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("t_f must be a positive integer multiple of t_c")
        if not 0.0 < self.gamma < np.pi / 2:
            raise ValueError("approach cone half-angle must lie in (0, pi/2)")
        if self.r_a <= 0.0 or self.dtheta_max <= 0.0:
            raise ValueError("r_a and dtheta_max must be positive")

    @property
    def n_intervals(self) -> int:
        return round(self.t_f / self.vehicle.t_c)


@dataclass(frozen=True)
class DockingGeometry:
    """Derived terminal state and port geometry for a passive target."""

    p_f: np.ndarray
    v_f: np.ndarray
    q_f: np.ndarray
    w_f: np.ndarray
    p_d: np.ndarray
    e_d: np.ndarray


def derive_docking_geometry(
    lm: ChaserState,
    *,
    port_axis_body=(1.0, 0.0, 0.0),
    port_offset: float = DEFAULT_PORT_OFFSET_M,
    nose_length: float = DEFAULT_NOSE_LENGTH_M,
    dock_roll_deg: float = DEFAULT_DOCK_ROLL_DEG,
    closing_speed: float = DEFAULT_CLOSING_SPEED,
    q0: np.ndarray | None = None,
) -> DockingGeometry:
    """Derive the chaser terminal state from the target state.

    The docked chaser nose points into the port (a 180 deg yaw flip of the
    target attitude) with an additional roll about the docking axis. The
    terminal velocity closes on the port at ``closing_speed`` on top of the
    target's own velocity. When ``q0`` is given, the terminal quaternion is
    sign-aligned with it so attitude interpolation takes the short path.
    """
    e_d = quat.rotate(lm.q, np.asarray(port_axis_body, dtype=float))
    p_d = lm.p + port_offset * e_d
    p_f = p_d + nose_length * e_d
    flip = quat.from_axis_angle([0.0, 0.0, 1.0], np.pi)
    roll = quat.from_axis_angle([1.0, 0.0, 0.0], np.deg2rad(dock_roll_deg))
    q_f = quat.quat_mul(quat.quat_mul(lm.q, flip), roll)
    if q0 is not None and float(q_f @ q0) < 0.0:
        q_f = -q_f
    v_f = lm.v - closing_speed * e_d
    return DockingGeometry(p_f, v_f, q_f, lm.w.copy(), p_d, e_d)


def apollo_problem(
    t_f: float = 150.0,
    vehicle: VehicleModel | None = None,
    *,
    initial: ChaserState | None = None,
    lm: ChaserState | None = None,
    r_a: float = 4.0,
    dtheta_max_deg: float = 2.0,
    gamma_deg: float = 30.0,
    geometry_overrides: dict | None = None,
) -> RendezvousProblem:
    """The CSM/LM transposition and docking case at its published parameters."""
    vehicle = vehicle or build_apollo_csm()
    if initial is None:
        initial = ChaserState(
            p=np.zeros(3),
            v=np.zeros(3),
            q=np.array([0.0, 0.0, 1.0, 0.0]),
            w=np.zeros(3),
        )
    if lm is None:
        lm = ChaserState(
            p=np.array([20.0, 0.0, 0.0]),
            v=np.zeros(3),
            q=np.array([0.0, 0.0, 1.0, 0.0]),
            w=np.zeros(3),
        )
    geometry = derive_docking_geometry(lm, q0=initial.q, **(geometry_overrides or {}))
    final = ChaserState(geometry.p_f, geometry.v_f, geometry.q_f, geometry.w_f)
    return RendezvousProblem(
        t_f=t_f,
        initial=initial,
        final=final,
        lm=lm,
        p_d=geometry.p_d,
        e_d=geometry.e_d,
        r_a=r_a,
        dtheta_max=np.deg2rad(dtheta_max_deg),
        gamma=np.deg2rad(gamma_deg),
        vehicle=vehicle,
    )


def with_duration(problem: RendezvousProblem, t_f: float) -> RendezvousProblem:
    """Same boundary data and geometry, different maneuver duration."""
    return replace(problem, t_f=t_f)
