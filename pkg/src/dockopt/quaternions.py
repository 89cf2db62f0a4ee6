"""Hamilton quaternion algebra, scalar-first storage (w, x, y, z).

Conventions:
  - q encodes a frame change body -> inertial: u_I = q (x) (0,u_B) (x) q*.
  - Composition is right-handed Hamilton: (a (x) b) rotates first by b, then a.
  - No implicit sign canonicalization; dynamics integrate raw coordinates.
    Call ``canonicalize`` explicitly where the math is sign-invariant.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

UNIT_NORM_TOL = 1e-9
GIMBAL_LOCK_TOL = 1e-6  # rad from +-pi/2 pitch
DEGENERATE_AXIS_TOL = 1e-12


def unit_quaternion(q) -> np.ndarray:
    """Build a unit quaternion from 4 scalar-first components, normalizing."""
    q = np.asarray(q, dtype=float).reshape(4)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValueError("quaternion norm too small to normalize")
    return q / n


def is_unit(q, tol: float = UNIT_NORM_TOL) -> bool:
    return abs(np.linalg.norm(q) - 1.0) <= tol


def normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q)


def canonicalize(q: np.ndarray) -> np.ndarray:
    """Flip sign so the scalar part is nonnegative (sign-invariant uses only)."""
    return -q if q[0] < 0.0 else q


def conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def pure(u) -> np.ndarray:
    """Embed a 3-vector as a pure quaternion (0, u)."""
    return np.concatenate(([0.0], np.asarray(u, dtype=float)))


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a (x) b (raw, no renormalization)."""
    aw, av = a[0], a[1:]
    bw, bv = b[0], b[1:]
    return np.concatenate(
        ([aw * bw - av @ bv], aw * bv + bw * av + np.cross(av, bv))
    )


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of unit quaternions, renormalized to absorb rounding."""
    return normalize(mul(a, b))


def left_product_matrix(q: np.ndarray) -> np.ndarray:
    """L(q) with q (x) r = L(q) r."""
    w, x, y, z = q
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )


def right_product_matrix(q: np.ndarray) -> np.ndarray:
    """Right product matrix [q](x) with r (x) q = [q](x) r."""
    w, x, y, z = q
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, z, -y],
            [y, -z, w, x],
            [z, y, -x, w],
        ]
    )


def rotation_matrix(q: np.ndarray) -> np.ndarray:
    """Direction cosine matrix C(q) with C(q) u_B = coordinates after the frame change."""
    w = q[0]
    v = q[1:]
    return (w * w - v @ v) * np.eye(3) + 2.0 * np.outer(v, v) + 2.0 * w * skew(v)


def skew(u) -> np.ndarray:
    x, y, z = u
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotate(q: np.ndarray, u) -> np.ndarray:
    """Apply the frame change q encodes to a 3-vector: q (x) (0,u) (x) q*."""
    u = np.asarray(u, dtype=float)
    w = q[0]
    v = q[1:]
    t = 2.0 * np.cross(v, u)
    return u + w * t + np.cross(v, t)


def rotate_homogeneous(q: np.ndarray, u) -> np.ndarray:
    """Vector part of q (x) (0,u) (x) q* without assuming unit norm.

    Agrees with ``rotate`` on the unit sphere but is quadratic-homogeneous
    in q, which is the form the dynamics and their quaternion Jacobian use.
    """
    u = np.asarray(u, dtype=float)
    w = q[0]
    v = q[1:]
    return (w * w - v @ v) * u + 2.0 * (v @ u) * v + 2.0 * w * np.cross(v, u)


def error_quat(q: np.ndarray, q_f: np.ndarray) -> np.ndarray:
    """Error quaternion dq = q* (x) q_f between current and target attitudes."""
    return quat_mul(conj(q), q_f)


def from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    h = 0.5 * angle
    return np.concatenate(([np.cos(h)], np.sin(h) * axis))


class RelativeRotation(NamedTuple):
    angle: float
    axis: np.ndarray
    degenerate: bool


def relative_rotation(q0: np.ndarray, qf: np.ndarray) -> RelativeRotation:
    """Axis-angle of q0* (x) qf; deterministic e_x axis when ill-defined."""
    dq = mul(conj(q0), qf)
    s = np.linalg.norm(dq[1:])
    angle = 2.0 * np.arctan2(s, dq[0])
    if s < DEGENERATE_AXIS_TOL:
        degenerate = dq[0] < 0.0
        if degenerate:
            warnings.warn(
                "antipodal quaternion pair: interpolation axis ill-defined, "
                "using e_x",
                stacklevel=2,
            )
        return RelativeRotation(angle, np.array([1.0, 0.0, 0.0]), degenerate)
    return RelativeRotation(angle, dq[1:] / s, False)


def slerp(q0: np.ndarray, qf: np.ndarray, fraction: float) -> np.ndarray:
    """Spherical linear interpolation q0 (x) (cos(f*theta/2), u sin(f*theta/2))."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"slerp fraction {fraction} outside [0, 1]")
    rel = relative_rotation(q0, qf)
    h = 0.5 * fraction * rel.angle
    step = np.concatenate(([np.cos(h)], np.sin(h) * rel.axis))
    return quat_mul(q0, step)


class TaitBryan(NamedTuple):
    roll: float
    pitch: float
    yaw: float
    gimbal_lock: bool = False


def to_tait_bryan(q: np.ndarray) -> TaitBryan:
    """Intrinsic Z-Y-X (yaw-pitch-roll) angles in radians.

    Near pitch = +-pi/2 the roll/yaw split is undefined; the result is flagged
    and yaw is conventionally zero (diagnostic output only).
    """
    w, x, y, z = q
    sp = 2.0 * (w * y - x * z)
    sp = min(1.0, max(-1.0, sp))
    pitch = np.arcsin(sp)
    if np.pi / 2 - abs(pitch) < GIMBAL_LOCK_TOL:
        # C22 = 1-2(x^2+z^2), C12 = 2(xy - wz); sign of pitch picks the branch
        roll = np.arctan2(
            np.sign(sp) * 2.0 * (x * y - w * z), 1.0 - 2.0 * (x * x + z * z)
        )
        return TaitBryan(roll, pitch, 0.0, True)
    roll = np.arctan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    yaw = np.arctan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return TaitBryan(roll, pitch, yaw, False)


def from_tait_bryan(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Inverse of ``to_tait_bryan``: q = qz(yaw) (x) qy(pitch) (x) qx(roll)."""
    qz = from_axis_angle([0.0, 0.0, 1.0], yaw)
    qy = from_axis_angle([0.0, 1.0, 0.0], pitch)
    qx = from_axis_angle([1.0, 0.0, 0.0], roll)
    return quat_mul(quat_mul(qz, qy), qx)


def derivative(q: np.ndarray, omega) -> np.ndarray:
    """Kinematic rate 0.5 q (x) (0, omega) for body rate omega."""
    return 0.5 * mul(q, pure(omega))
