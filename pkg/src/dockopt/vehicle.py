"""Chaser mass properties and parametric RCS thruster geometry.

The stock vehicle is the Apollo CSM at the start of transposition and
docking: 16 pulse-fired thrusters in four quads spaced 90 deg around the
service module, each quad rotated 7 deg 15 min off the y/z body axes, thrust
axes canted 10 deg out of the local hull tangent plane, and the two roll
engines of each quad offset-mounted axially. The cited Apollo documents give
exact station coordinates; here the layout is generated parametrically so
any source can be matched through overrides.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

APOLLO_MASS_KG = 30322.9
APOLLO_INERTIA = np.array(
    [
        [49248.7, 2862.1, -370.1],
        [2862.1, 108514.2, -3075.0],
        [-370.1, -3075.0, 110771.7],
    ]
)
APOLLO_THRUST_N = 445.0
QUAD_AZIMUTH_OFFSET_DEG = 7.0 + 15.0 / 60.0
THRUSTER_CANT_DEG = 10.0
ROLL_ENGINE_AXIAL_OFFSET_M = 0.048

_IN = 0.0254
# Documented service-module stations: quad ring 83.56 in radius at station
# 958.97 in, CoM at (933.9, 5.0, 4.7) in, fore/aft chambers 6.75 in from the
# quad center, roll chambers 3.125 in apart tangentially. The off-axis CoM
# matters: it breaks the 90 deg symmetry of the thruster set, which keeps
# the fuel-optimal pulse allocation unique instead of degenerate.
APOLLO_RING_RADIUS_M = 83.56 * _IN
APOLLO_QUAD_STATION_M = (958.97 - 933.9) * _IN
APOLLO_COM_OFFSET_M = (0.0, 5.0 * _IN, 4.7 * _IN)
APOLLO_FORE_AFT_OFFSET_M = 6.75 * _IN
APOLLO_ROLL_PAIR_SEPARATION_M = 2 * 3.125 * _IN


@dataclass(frozen=True)
class Thruster:
    """One RCS engine: mounting point and thrust axis in the body frame."""

    position: np.ndarray  # m
    direction: np.ndarray  # unit vector along the force on the vehicle
    magnitude: float  # N
    index: int  # 1-based

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError(f"thruster {self.index}: direction is not a unit vector")
        object.__setattr__(self, "direction", d)
        if self.magnitude <= 0.0:
            raise ValueError(f"thruster {self.index}: thrust magnitude must be > 0")

    @property
    def thrust_vector(self) -> np.ndarray:
        return self.magnitude * self.direction


@dataclass(frozen=True)
class VehicleModel:
    """Immutable rigid-body chaser with pulse-modulated thrusters."""

    mass: float  # kg
    inertia: np.ndarray  # kg m^2, body frame about the CoM
    thrusters: tuple[Thruster, ...]
    dt_min: float  # s, minimum realizable pulse width
    dt_max: float  # s
    t_c: float  # s, control interval between pulse starts
    forward_set: frozenset[int] = field(default_factory=frozenset)  # 1-based

    def __post_init__(self):
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        object.__setattr__(self, "thrusters", tuple(self.thrusters))
        object.__setattr__(self, "forward_set", frozenset(self.forward_set))
        if self.mass <= 0.0:
            raise ValueError("mass must be > 0")
        J = self.inertia
        if J.shape != (3, 3) or not np.allclose(J, J.T, atol=1e-9):
            raise ValueError("inertia tensor must be 3x3 symmetric")
        if np.any(np.linalg.eigvalsh(J) <= 0.0):
            raise ValueError("inertia tensor must be positive definite")
        if not 0.0 < self.dt_min < self.dt_max <= self.t_c:
            raise ValueError("pulse bounds must satisfy 0 < dt_min < dt_max <= t_c")
        if not self.forward_set <= set(range(1, self.n_thrusters + 1)):
            raise ValueError("forward_set must be a subset of thruster indices")

    @property
    def n_thrusters(self) -> int:
        return len(self.thrusters)

    @cached_property
    def inertia_inv(self) -> np.ndarray:
        return np.linalg.inv(self.inertia)

    @cached_property
    def positions(self) -> np.ndarray:
        return np.array([t.position for t in self.thrusters])

    @cached_property
    def thrust_vectors(self) -> np.ndarray:
        return np.array([t.thrust_vector for t in self.thrusters])

    @cached_property
    def torque_vectors(self) -> np.ndarray:
        """r_i x f_i per thruster, body frame."""
        return np.cross(self.positions, self.thrust_vectors)

    @cached_property
    def forward_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_thrusters, dtype=bool)
        for i in self.forward_set:
            mask[i - 1] = True
        return mask


def net_force_torque(model: VehicleModel, active) -> tuple[np.ndarray, np.ndarray]:
    """Sum thrust and torque over the active thrusters (body frame)."""
    active = np.asarray(active, dtype=bool)
    force = model.thrust_vectors[active].sum(axis=0) if active.any() else np.zeros(3)
    torque = model.torque_vectors[active].sum(axis=0) if active.any() else np.zeros(3)
    return force, torque


def build_apollo_csm(
    mass: float = APOLLO_MASS_KG,
    inertia=None,
    thrust: float = APOLLO_THRUST_N,
    dt_min: float = 0.1,
    dt_max: float = 0.5,
    t_c: float = 2.0,
    ring_radius: float = APOLLO_RING_RADIUS_M,
    quad_station: float = APOLLO_QUAD_STATION_M,
    quad_azimuth_offset_deg: float = QUAD_AZIMUTH_OFFSET_DEG,
    cant_deg: float = THRUSTER_CANT_DEG,
    fore_aft_offset: float = APOLLO_FORE_AFT_OFFSET_M,
    roll_pair_separation: float = APOLLO_ROLL_PAIR_SEPARATION_M,
    roll_axial_offset: float = ROLL_ENGINE_AXIAL_OFFSET_M,
    com_offset=APOLLO_COM_OFFSET_M,
) -> VehicleModel:
    """Generate the CSM service-module RCS layout parametrically.

    Quad q sits at azimuth ``offset + 90 q`` degrees from the +y axis
    (measured toward +z) on a ring of ``ring_radius`` around the hull axis,
    at axial station ``quad_station`` ahead of the CoM. The CoM itself sits
    ``com_offset`` away from the hull-frame origin, so thruster coordinates
    (CoM origin) are the ring-frame ones shifted by its negative. Local
    thruster index within each quad: 0 forward-facing (plume along +x,
    braking thrust), 1 aft-facing, 2/3 the tangential roll pair, which is
    additionally offset-mounted ``roll_axial_offset`` apart along x. Every
    plume is tilted ``cant_deg`` radially outward, away from the hull, so
    each thrust axis makes the same angle with the local tangent plane.
    Global index = 4 quad + local + 1, which puts the forward-facing engines
    at {1, 5, 9, 13}.
    """
    if inertia is None:
        inertia = APOLLO_INERTIA
    com_offset = np.asarray(com_offset, dtype=float)
    cant = np.deg2rad(cant_deg)
    cc, cs = np.cos(cant), np.sin(cant)
    x_hat = np.array([1.0, 0.0, 0.0])

    def local_frame(pos):
        # Hull radial/tangential at the engine's own azimuth, so the cant is
        # measured against the local tangent plane of the (cylindrical) skin.
        radial = np.array([0.0, pos[1], pos[2]])
        radial /= np.linalg.norm(radial)
        return radial, np.cross(x_hat, radial)

    thrusters = []
    for quad in range(4):
        az = np.deg2rad(quad_azimuth_offset_deg + 90.0 * quad)
        radial = np.array([0.0, np.cos(az), np.sin(az)])
        tangent = np.array([0.0, -np.sin(az), np.cos(az)])
        center = quad_station * x_hat + ring_radius * radial
        locations = [
            center + fore_aft_offset * x_hat,
            center - fore_aft_offset * x_hat,
            center + 0.5 * roll_pair_separation * tangent + 0.5 * roll_axial_offset * x_hat,
            center - 0.5 * roll_pair_separation * tangent - 0.5 * roll_axial_offset * x_hat,
        ]
        # Thrust opposes the plume; plumes point fore/aft/tangentially, each
        # tilted outward by the cant angle.
        for local, pos in enumerate(locations):
            n_hat, t_hat = local_frame(pos)
            direction = [
                -cc * x_hat - cs * n_hat,
                cc * x_hat - cs * n_hat,
                -cc * t_hat - cs * n_hat,
                cc * t_hat - cs * n_hat,
            ][local]
            thrusters.append(
                Thruster(
                    position=pos - com_offset,
                    direction=direction,
                    magnitude=thrust,
                    index=4 * quad + local + 1,
                )
            )
    return VehicleModel(
        mass=mass,
        inertia=inertia,
        thrusters=tuple(thrusters),
        dt_min=dt_min,
        dt_max=dt_max,
        t_c=t_c,
        forward_set=frozenset({1, 5, 9, 13}),
    )
