"""Linearization along a reference and exact discrete update matrices.

The continuous dynamics are affine in the thrust signal and nonlinear only
in the state, so one variational sweep per control interval yields the
discrete update

    x_{k+1} = A_k x_k + B_k u_k + r_k

where A_k is the state transition matrix of the linearized dynamics over
the interval, column i of B_k is the switching-time sensitivity of the
endpoint to pulse width i (Leibniz rule: the thrust jump at the falling
edge, mapped through the transition matrix from the edge to the interval
end), and r_k is fixed by exactness: substituting the reference state and
pulse row must reproduce the reinitialized nonlinear propagation endpoint.

A single forward pass co-integrates the reference state, Phi(t, 0), and
Phi(t, 0)^-1 (as its own ODE, no matrix inversions), so Phi(t_c, tau) at
each falling edge is available without storing a dense transition history.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import quaternions as quat
from .dynamics import (
    EDGE_COINCIDENCE_TOL,
    P,
    Q,
    V,
    W,
    ChaserState,
    ImpulseSchedule,
    _derivative_ft,
    active_set,
    segment_times,
)
from .ode import IntegrationError, integrate
from .vehicle import VehicleModel

_E_EMBED = np.vstack([np.zeros((1, 3)), np.eye(3)])  # 3-vector -> pure quaternion


def rate_jacobian_wrt_rate(w: np.ndarray, model: VehicleModel) -> np.ndarray:
    """d/dw of -J^-1 [w x (J w)]."""
    return -model.inertia_inv @ (quat.skew(w) @ model.inertia - quat.skew(model.inertia @ w))


def quat_jacobian_wrt_quat(w: np.ndarray) -> np.ndarray:
    """d/dq of 0.5 q (x) (0, w): right multiplication by the pure rate."""
    return 0.5 * quat.right_product_matrix(quat.pure(w))


def quat_jacobian_wrt_rate(q: np.ndarray) -> np.ndarray:
    """d/dw of 0.5 q (x) (0, w): left multiplication embedded on 3-vectors."""
    return 0.5 * quat.left_product_matrix(q) @ _E_EMBED


def accel_jacobian_wrt_quat(
    q: np.ndarray, force_body: np.ndarray, mass: float
) -> np.ndarray:
    """d/dq of (1/m) q (x) (0, F) (x) q* for the summed body-frame thrust F."""
    w = q[0]
    v = q[1:]
    F = force_body
    col_w = 2.0 * (w * F + np.cross(v, F))
    cols_v = 2.0 * (
        (v @ F) * np.eye(3) + np.outer(v, F) - np.outer(F, v) - w * quat.skew(F)
    )
    return np.column_stack([col_w, cols_v]) / mass


@dataclass(frozen=True)
class ContinuousJacobians:
    """Affine model of the dynamics, exact at the reference by construction."""

    A_ww: np.ndarray  # 3x3
    A_qq: np.ndarray  # 4x4
    A_qw: np.ndarray  # 4x3
    A_vq: np.ndarray  # 3x4
    r_v: np.ndarray  # 3
    r_q: np.ndarray  # 4
    r_w: np.ndarray  # 3


def jacobians_at(
    ref_state, ref_active_forces: np.ndarray, model: VehicleModel
) -> ContinuousJacobians:
    """Closed-form Jacobians and affine residuals at a reference point.

    ``ref_active_forces`` holds one body-frame thrust vector per thruster
    (zero rows for silent thrusters); only their sum enters the model.
    """
    x = ref_state.as_vector() if isinstance(ref_state, ChaserState) else np.asarray(ref_state)
    q = x[Q]
    w = x[W]
    F = np.asarray(ref_active_forces, dtype=float).reshape(-1, 3).sum(axis=0)
    A_ww = rate_jacobian_wrt_rate(w, model)
    A_qq = quat_jacobian_wrt_quat(w)
    A_qw = quat_jacobian_wrt_rate(q)
    A_vq = accel_jacobian_wrt_quat(q, F, model.mass)
    f_w = -model.inertia_inv @ np.cross(w, model.inertia @ w)
    f_q = 0.5 * quat.mul(q, quat.pure(w))
    return ContinuousJacobians(
        A_ww=A_ww,
        A_qq=A_qq,
        A_qw=A_qw,
        A_vq=A_vq,
        r_v=-A_vq @ q,
        r_q=f_q - A_qq @ q - A_qw @ w,
        r_w=f_w - A_ww @ w,
    )


def full_state_jacobian(x: np.ndarray, force_body: np.ndarray, model: VehicleModel) -> np.ndarray:
    """13x13 Jacobian of the state derivative along a reference point."""
    A = np.zeros((13, 13))
    A[P, V] = np.eye(3)
    A[V, Q] = accel_jacobian_wrt_quat(x[Q], force_body, model.mass)
    A[Q, Q] = quat_jacobian_wrt_quat(x[W])
    A[Q, W] = quat_jacobian_wrt_rate(x[Q])
    A[W, W] = rate_jacobian_wrt_rate(x[W], model)
    return A


@dataclass
class StmResult:
    """State transition matrix over [t0, t1] with a mid-interval evaluator."""

    t0: float
    t1: float
    phi_end: np.ndarray
    _a_of_t: Callable[[float], np.ndarray]
    _rtol: float
    _atol: float

    def phi_at(self, tau: float) -> np.ndarray:
        """Phi(tau, t0), recomputed on demand at integration accuracy."""
        if not self.t0 <= tau <= self.t1:
            raise ValueError("tau outside the integration window")
        n = self.phi_end.shape[0]
        y0 = np.eye(n).ravel()
        f = lambda t, y: (self._a_of_t(t) @ y.reshape(n, n)).ravel()
        return integrate(f, self.t0, tau, y0, self._rtol, self._atol).y.reshape(n, n)

    def phi_from(self, tau: float) -> np.ndarray:
        """Phi(t1, tau) = Phi(t1, t0) Phi(tau, t0)^-1."""
        return self.phi_end @ np.linalg.inv(self.phi_at(tau))


def integrate_stm(
    a_of_t: Callable[[float], np.ndarray],
    t0: float,
    t1: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> StmResult:
    """Solve dPhi/dt = A(t) Phi, Phi(t0) = I over [t0, t1]."""
    n = np.asarray(a_of_t(t0)).shape[0]
    y0 = np.eye(n).ravel()
    f = lambda t, y: (np.asarray(a_of_t(t)) @ y.reshape(n, n)).ravel()
    res = integrate(f, t0, t1, y0, rtol, atol)
    return StmResult(t0, t1, res.y.reshape(n, n), a_of_t, rtol, atol)


@dataclass(frozen=True)
class IntervalUpdate:
    """Exact discrete update over one control interval."""

    A: np.ndarray  # 13x13
    B: np.ndarray  # 13xM
    r: np.ndarray  # 13
    x_end: np.ndarray  # reinitialized nonlinear endpoint used for exactness
    one_sided: tuple[int, ...] = ()  # thrusters whose edge sits at t_c


def discretize_interval(
    ref_state,
    ref_pulse_row: np.ndarray,
    model: VehicleModel,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> IntervalUpdate:
    """Variational sweep over one interval about the reference pulse row.

    Thrusters with a zero reference width get their sensitivity evaluated at
    the interval opening (right derivative), so a silent thruster remains
    controllable in the subproblem. A reference width at t_c leaves only the
    left derivative; such columns are flagged.
    """
    row = np.asarray(ref_pulse_row, dtype=float)
    if np.any(row < 0.0) or np.any(row > model.t_c):
        raise ValueError("reference pulse widths must lie in [0, t_c]")
    x0 = ref_state.as_vector() if isinstance(ref_state, ChaserState) else np.array(ref_state, dtype=float)
    m_thr = model.n_thrusters
    bounds = segment_times(row, model.t_c)
    n_aug = 13 + 169 + 169
    y = np.empty(n_aug)
    y[:13] = x0
    y[13:182] = np.eye(13).ravel()
    y[182:] = np.eye(13).ravel()
    records: dict[float, tuple[np.ndarray, np.ndarray]] = {
        0.0: (np.eye(13), x0[Q].copy())
    }
    for a, b in zip(bounds[:-1], bounds[1:]):
        mask = active_set(row, b)
        force = model.thrust_vectors[mask].sum(axis=0) if mask.any() else np.zeros(3)
        torque = model.torque_vectors[mask].sum(axis=0) if mask.any() else np.zeros(3)

        def rhs(t, yv, force=force, torque=torque):
            x = yv[:13]
            psi = yv[13:182].reshape(13, 13)
            lam = yv[182:].reshape(13, 13)
            A = full_state_jacobian(x, force, model)
            out = np.empty(n_aug)
            out[:13] = _derivative_ft(x, force, torque, model)
            out[13:182] = (A @ psi).ravel()
            out[182:] = -(lam @ A).ravel()
            return out

        try:
            res = integrate(rhs, a, b, y, rtol=rtol, atol=atol)
        except IntegrationError as exc:
            raise IntegrationError(
                f"variational sweep failed in segment [{a}, {b}] at t={exc.t_reached}",
                exc.t_reached,
            ) from exc
        y = res.y
        records[b] = (y[182:].reshape(13, 13).copy(), y[Q].copy())
    x_end = y[:13].copy()
    psi_end = y[13:182].reshape(13, 13).copy()
    B = np.zeros((13, m_thr))
    one_sided = []
    for i in range(m_thr):
        w_i = row[i]
        if w_i <= EDGE_COINCIDENCE_TOL:
            tau = 0.0
        elif w_i >= model.t_c - EDGE_COINCIDENCE_TOL:
            tau = model.t_c
            one_sided.append(i)
        else:
            tau = bounds[np.argmin(np.abs(bounds - w_i))]
        lam_tau, q_tau = records[tau]
        jump = np.zeros(13)
        jump[V] = quat.rotate_homogeneous(q_tau, model.thrust_vectors[i]) / model.mass
        jump[W] = model.inertia_inv @ model.torque_vectors[i]
        B[:, i] = psi_end @ (lam_tau @ jump)
    r = x_end - psi_end @ x0 - B @ row
    return IntervalUpdate(psi_end, B, r, x_end, tuple(one_sided))


class DiscretizationError(RuntimeError):
    """Aggregated per-interval failures, with the failing interval indices."""

    def __init__(self, failures: dict[int, Exception]):
        self.failures = failures
        detail = "; ".join(f"interval {k}: {e}" for k, e in failures.items())
        super().__init__(f"discretization failed for {len(failures)} interval(s): {detail}")


@dataclass
class DiscreteLTV:
    """Per-interval update matrices of the linearized discrete dynamics."""

    A: np.ndarray  # (N, 13, 13)
    B: np.ndarray  # (N, 13, M)
    r: np.ndarray  # (N, 13)
    x_end: np.ndarray  # (N, 13) reinitialized nonlinear endpoints
    one_sided: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def n_intervals(self) -> int:
        return self.A.shape[0]

    def predict(self, k: int, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.A[k] @ x + self.B[k] @ u + self.r[k]

    # Named blocks of the update, for inspection and tests.
    def block(self, k: int, rows: slice, cols: slice) -> np.ndarray:
        return self.A[k][rows, cols]

    def A_pv(self, k):
        return self.block(k, P, V)

    def A_pq(self, k):
        return self.block(k, P, Q)

    def A_pw(self, k):
        return self.block(k, P, W)

    def A_vq(self, k):
        return self.block(k, V, Q)

    def A_vw(self, k):
        return self.block(k, V, W)

    def A_qq(self, k):
        return self.block(k, Q, Q)

    def A_qw(self, k):
        return self.block(k, Q, W)

    def A_ww(self, k):
        return self.block(k, W, W)

    def B_p(self, k):
        return self.B[k][P]

    def B_v(self, k):
        return self.B[k][V]

    def B_q(self, k):
        return self.B[k][Q]

    def B_w(self, k):
        return self.B[k][W]


def discretize_trajectory(
    ref_states: np.ndarray,
    ref_schedule: ImpulseSchedule,
    model: VehicleModel,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> DiscreteLTV:
    """Map the interval sweep over all N intervals of a reference trajectory.

    Intervals are independent and the result does not depend on evaluation
    order; failures are collected and reported together with their indices.
    """
    states = np.asarray(ref_states, dtype=float)
    n = ref_schedule.n_intervals
    if states.shape != (n + 1, 13):
        raise ValueError("need N+1 reference states of dimension 13")
    m_thr = model.n_thrusters
    out = DiscreteLTV(
        A=np.empty((n, 13, 13)),
        B=np.empty((n, 13, m_thr)),
        r=np.empty((n, 13)),
        x_end=np.empty((n, 13)),
    )
    failures: dict[int, Exception] = {}
    for k in range(n):
        try:
            upd = discretize_interval(states[k], ref_schedule.widths[k], model, rtol, atol)
        except (IntegrationError, ValueError) as exc:
            failures[k] = exc
            continue
        out.A[k] = upd.A
        out.B[k] = upd.B
        out.r[k] = upd.r
        out.x_end[k] = upd.x_end
        out.one_sided.append(upd.one_sided)
    if failures:
        raise DiscretizationError(failures)
    return out


def dump_dltv(dltv: DiscreteLTV, path) -> None:
    """Write all update matrices to an .npz file for external cross-checks."""
    np.savez(
        path,
        A=dltv.A,
        B=dltv.B,
        r=dltv.r,
        x_end=dltv.x_end,
    )
