"""Nonlinear 6-DoF rigid-body dynamics under pulsed thrust.

State layout (13-vector): position p (inertial, m), velocity v (inertial,
m/s), attitude quaternion q (body -> inertial, scalar first), body angular
rate w (rad/s). Every thruster pulse starts at the opening of its control
interval and holds a constant thrust for its pulse width, so the thrust
signal is piecewise constant with known falling edges: integration splits
at those edges and an ordinary non-stiff integrator handles each segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import quaternions as quat
from .ode import IntegrationError, integrate
from .vehicle import VehicleModel

# Slices of the 13-dim state vector.
P = slice(0, 3)
V = slice(3, 6)
Q = slice(6, 10)
W = slice(10, 13)

EDGE_COINCIDENCE_TOL = 1e-12  # s, falling edges closer than this merge
PLOT_SAMPLES_PER_INTERVAL = 50


@dataclass(frozen=True)
class ChaserState:
    """Chaser rigid-body state at one instant."""

    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("p", "v", "q", "w"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not quat.is_unit(self.q):
            raise ValueError("attitude quaternion is not unit norm within 1e-9")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, self.q, self.w])

    @staticmethod
    def from_vector(x: np.ndarray) -> "ChaserState":
        x = np.asarray(x, dtype=float)
        return ChaserState(x[P], x[V], x[Q], x[W])


@dataclass(frozen=True)
class ImpulseSchedule:
    """Pulse widths dt[k, i] (s) for N control intervals and M thrusters."""

    widths: np.ndarray
    t_c: float

    def __post_init__(self):
        w = np.asarray(self.widths, dtype=float)
        if w.ndim != 2:
            raise ValueError("widths must be an N x M matrix")
        if np.any(w < 0.0) or np.any(w > self.t_c):
            raise ValueError("pulse widths must lie in [0, t_c]")
        object.__setattr__(self, "widths", w)

    @property
    def n_intervals(self) -> int:
        return self.widths.shape[0]

    @property
    def n_thrusters(self) -> int:
        return self.widths.shape[1]

    def is_mib_feasible(self, dt_min: float, dt_max: float, tol: float = 1e-9) -> bool:
        """Every width is (numerically) zero or inside [dt_min, dt_max]."""
        w = self.widths
        zero = w <= tol
        banded = (w >= dt_min - tol) & (w <= dt_max + tol)
        return bool(np.all(zero | banded))

    def total_on_time(self) -> float:
        return float(self.widths.sum())


def derivative(x: np.ndarray, active, model: VehicleModel) -> np.ndarray:
    """Time derivative of the 13-dim state for a fixed thruster on/off set."""
    active = np.asarray(active, dtype=bool)
    force = model.thrust_vectors[active].sum(axis=0) if active.any() else np.zeros(3)
    torque = model.torque_vectors[active].sum(axis=0) if active.any() else np.zeros(3)
    return _derivative_ft(x, force, torque, model)


def _derivative_ft(
    x: np.ndarray, force_body: np.ndarray, torque_body: np.ndarray, model: VehicleModel
) -> np.ndarray:
    q = x[Q]
    w = x[W]
    out = np.empty(13)
    out[P] = x[V]
    out[V] = quat.rotate_homogeneous(q, force_body) / model.mass
    out[Q] = 0.5 * quat.mul(q, quat.pure(w))
    out[W] = model.inertia_inv @ (torque_body - np.cross(w, model.inertia @ w))
    return out


def segment_times(pulse_row: np.ndarray, t_c: float) -> np.ndarray:
    """Segment boundaries [0, edges..., t_c] with coincident edges merged."""
    edges = np.unique(pulse_row[(pulse_row > EDGE_COINCIDENCE_TOL)])
    edges = edges[edges < t_c - EDGE_COINCIDENCE_TOL]
    merged = []
    for e in edges:
        if not merged or e - merged[-1] > EDGE_COINCIDENCE_TOL:
            merged.append(e)
    return np.concatenate([[0.0], merged, [t_c]])


def active_set(pulse_row: np.ndarray, seg_end: float) -> np.ndarray:
    """Thrusters firing throughout a segment ending at ``seg_end``."""
    return pulse_row >= seg_end - EDGE_COINCIDENCE_TOL


def propagate_interval(
    x_start,
    pulse_row: np.ndarray,
    model: VehicleModel,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    sample_times: Sequence[float] | None = None,
):
    """Integrate one control interval, splitting at pulse falling edges.

    Parameters
    ----------
    x_start : ChaserState or 13-vector
        State at the opening of the interval.
    pulse_row : array (M,)
        Pulse widths for this interval, each in [0, t_c].
    sample_times : optional increasing times in [0, t_c]
        When given, dense samples at these times are returned as well.

    Returns
    -------
    ChaserState (and an (len(sample_times), 13) array when sampling).
    The quaternion is renormalized at each segment boundary.
    """
    pulse_row = np.asarray(pulse_row, dtype=float)
    if np.any(pulse_row < 0.0) or np.any(pulse_row > model.t_c):
        raise ValueError("pulse widths must lie in [0, t_c]")
    x = x_start.as_vector() if isinstance(x_start, ChaserState) else np.array(x_start, dtype=float)
    want_dense = sample_times is not None
    samples = np.empty((len(sample_times), 13)) if want_dense else None
    bounds = segment_times(pulse_row, model.t_c)
    for a, b in zip(bounds[:-1], bounds[1:]):
        force, torque = _segment_force_torque(pulse_row, b, model)
        f = lambda t, y: _derivative_ft(y, force, torque, model)
        try:
            res = integrate(f, a, b, x, rtol=rtol, atol=atol, dense=want_dense)
        except IntegrationError as exc:
            raise IntegrationError(
                f"integration failed in segment [{a}, {b}] at t={exc.t_reached}",
                exc.t_reached,
            ) from exc
        if want_dense:
            inside = [i for i, t in enumerate(sample_times) if a <= t <= b]
            if inside:
                samples[inside] = res.sample([sample_times[i] for i in inside])
        x = res.y
        x[Q] /= np.linalg.norm(x[Q])
    state = ChaserState.from_vector(x)
    return (state, samples) if want_dense else state


def _segment_force_torque(pulse_row, seg_end, model):
    mask = active_set(pulse_row, seg_end)
    if mask.any():
        return model.thrust_vectors[mask].sum(axis=0), model.torque_vectors[mask].sum(axis=0)
    return np.zeros(3), np.zeros(3)


@dataclass
class ResetPropagation:
    """Per-interval reinitialized propagation of a discrete trajectory."""

    endpoints: np.ndarray  # (N, 13), endpoint of interval k started from node k
    times: np.ndarray  # dense sample times, absolute
    samples: np.ndarray  # (n_samples, 13) dense states, reinitialized per interval


def propagate_with_reset(
    reference_states: np.ndarray,
    schedule: ImpulseSchedule,
    model: VehicleModel,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    samples_per_interval: int = 0,
) -> ResetPropagation:
    """Propagate each control interval from its own reference node.

    Interval k integrates from ``reference_states[k]`` (not from the previous
    endpoint), which makes the result discontinuous at interval boundaries
    whenever the reference nodes are not dynamically consistent. Intervals
    are independent, so execution order cannot change the result.
    """
    states = np.asarray(reference_states, dtype=float)
    n = schedule.n_intervals
    if states.shape != (n + 1, 13):
        raise ValueError("need N+1 reference states of dimension 13")
    endpoints = np.empty((n, 13))
    all_t: list[float] = []
    all_x: list[np.ndarray] = []
    local = (
        np.linspace(0.0, model.t_c, samples_per_interval) if samples_per_interval else None
    )
    for k in range(n):
        if local is None:
            end = propagate_interval(states[k], schedule.widths[k], model, rtol, atol)
            endpoints[k] = end.as_vector()
        else:
            end, dense = propagate_interval(
                states[k], schedule.widths[k], model, rtol, atol, sample_times=local
            )
            endpoints[k] = end.as_vector()
            all_t.extend(k * model.t_c + local)
            all_x.extend(dense)
    return ResetPropagation(
        endpoints,
        np.array(all_t),
        np.array(all_x) if all_x else np.empty((0, 13)),
    )


def propagate_schedule(
    x_start,
    schedule: ImpulseSchedule,
    model: VehicleModel,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    samples_per_interval: int = 0,
    intervals: slice | None = None,
):
    """Chain control intervals without reinitialization (single shooting).

    Returns (final ChaserState, times, samples); the sample arrays are empty
    unless ``samples_per_interval`` is positive.
    """
    rows = schedule.widths if intervals is None else schedule.widths[intervals]
    x = x_start.as_vector() if isinstance(x_start, ChaserState) else np.array(x_start, dtype=float)
    k0 = 0 if intervals is None else (intervals.start or 0)
    local = (
        np.linspace(0.0, model.t_c, samples_per_interval) if samples_per_interval else None
    )
    all_t: list[float] = []
    all_x: list[np.ndarray] = []
    state = ChaserState.from_vector(x)
    for k, row in enumerate(rows):
        if local is None:
            state = propagate_interval(state, row, model, rtol, atol)
        else:
            state, dense = propagate_interval(
                state, row, model, rtol, atol, sample_times=local
            )
            all_t.extend((k0 + k) * model.t_c + local)
            all_x.extend(dense)
    return state, np.array(all_t), np.array(all_x) if all_x else np.empty((0, 13))


@dataclass(frozen=True)
class PropagationError:
    """Terminal mismatch between optimizer nodes and nonlinear propagation."""

    p_e: float  # m, infinity norm
    v_e: float  # m/s
    theta_e: float  # deg, attitude error angle
    omega_e: float  # deg/s

    def within(self, p_max: float, v_max: float, theta_max: float, omega_max: float) -> bool:
        return (
            self.p_e < p_max
            and self.v_e < v_max
            and self.theta_e < theta_max
            and self.omega_e < omega_max
        )


def propagation_error(
    optimizer_states: np.ndarray,
    schedule: ImpulseSchedule,
    model: VehicleModel,
    span: tuple[int, int],
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> PropagationError:
    """Propagate from node k1 through [k1 t_c, k2 t_c] and compare at node k2.

    The integration is continuous across intervals (no reinitialization);
    the attitude error is the rotation angle of the error quaternion between
    the optimizer node and the propagated attitude, in degrees.
    """
    k1, k2 = span
    if not 0 <= k1 < k2 <= schedule.n_intervals:
        raise ValueError(f"invalid span {span}")
    states = np.asarray(optimizer_states, dtype=float)
    final, _, _ = propagate_schedule(
        states[k1], schedule, model, rtol, atol, intervals=slice(k1, k2)
    )
    target = states[k2]
    prop = final.as_vector()
    p_e = float(np.max(np.abs(target[P] - prop[P])))
    v_e = float(np.max(np.abs(target[V] - prop[V])))
    omega_e = float(np.rad2deg(np.max(np.abs(target[W] - prop[W]))))
    cos_half = float(np.clip(quat.mul(quat.conj(target[Q]), prop[Q])[0], -1.0, 1.0))
    theta_e = float(np.rad2deg(2.0 * np.arccos(cos_half)))
    return PropagationError(p_e, v_e, theta_e, omega_e)
