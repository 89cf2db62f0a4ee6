"""Affine non-dimensionalization of states, inputs, and virtual controls.

Offsets are the mean of each state block along the initial guess; diagonal
scales are the largest per-axis deviation from that mean, so the scaled
guess lies in [-1, 1] componentwise. Axes with no deviation along the guess
(transverse position axes of a straight-line maneuver, every velocity axis
of a constant-rate guess) fall back to the largest deviation in their
block, then to the block's offset magnitude, and finally to an absolute
floor, keeping every scale strictly positive.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import P, Q, V, W
from .vehicle import VehicleModel

SCALE_FLOOR = 1e-6
_BLOCKS = (P, V, Q, W)


@dataclass(frozen=True)
class ScalingTransform:
    """Diagonal affine maps between physical and solver units."""

    x_scale: np.ndarray  # (13,) diagonal of S_x, quaternion block = 1
    x_offset: np.ndarray  # (13,) s_x, quaternion block = 0
    u_scale: np.ndarray  # (M,)
    u_offset: np.ndarray  # (M,)
    vc_scale: np.ndarray  # (13,)
    cost_scale: float

    def scale_state(self, x: np.ndarray) -> np.ndarray:
        return (x - self.x_offset) / self.x_scale

    def unscale_state(self, x_hat: np.ndarray) -> np.ndarray:
        return self.x_scale * x_hat + self.x_offset

    def scale_input(self, u: np.ndarray) -> np.ndarray:
        return (u - self.u_offset) / self.u_scale

    def unscale_input(self, u_hat: np.ndarray) -> np.ndarray:
        return self.u_scale * u_hat + self.u_offset

    def scale_vc(self, vc: np.ndarray) -> np.ndarray:
        return vc / self.vc_scale

    def unscale_vc(self, vc_hat: np.ndarray) -> np.ndarray:
        return self.vc_scale * vc_hat


def _positive_scales(dev: np.ndarray, fallback_pool: np.ndarray, label: str) -> np.ndarray:
    """Per-axis scales with block-level fallbacks for degenerate axes."""
    block_max = dev.max() if dev.size else 0.0
    pool_max = np.abs(fallback_pool).max() if fallback_pool.size else 0.0
    out = np.empty_like(dev)
    degenerate = []
    for i, d in enumerate(dev):
        if d > SCALE_FLOOR:
            out[i] = d
        else:
            degenerate.append(i)
            if block_max > SCALE_FLOOR:
                out[i] = block_max
            elif pool_max > SCALE_FLOOR:
                out[i] = pool_max
            else:
                out[i] = SCALE_FLOOR
    if degenerate:
        warnings.warn(
            f"degenerate guess on {label} axes {degenerate}: scale fallback applied",
            stacklevel=3,
        )
    return out


def fit_scaling(
    initial_guess_states: np.ndarray, model: VehicleModel, n_intervals: int
) -> ScalingTransform:
    """Fit the transform from the iteration-0 guess; frozen afterwards."""
    states = np.asarray(initial_guess_states, dtype=float)
    if states.ndim != 2 or states.shape[1] != 13:
        raise ValueError("guess must be (N+1) x 13")
    x_offset = np.zeros(13)
    x_scale = np.ones(13)
    for block, label in zip((P, V, W), ("position", "velocity", "angular-rate")):
        values = states[:, block]
        mean = values.mean(axis=0)
        dev = np.abs(values - mean).max(axis=0)
        x_offset[block] = mean
        x_scale[block] = _positive_scales(dev, mean, label)
    # Virtual control scale: largest guess magnitude per axis, no centering.
    vc_scale = np.ones(13)
    for block, label in zip(_BLOCKS, ("position", "velocity", "quaternion", "angular-rate")):
        mags = np.abs(states[:, block]).max(axis=0)
        vc_scale[block] = _positive_scales(mags, mags, f"virtual-control {label}")
    m_thr = model.n_thrusters
    half = 0.5 * model.dt_max
    cost_scale = n_intervals * m_thr * model.dt_min / 4.0
    return ScalingTransform(
        x_scale=x_scale,
        x_offset=x_offset,
        u_scale=np.full(m_thr, half),
        u_offset=np.full(m_thr, half),
        vc_scale=vc_scale,
        cost_scale=cost_scale,
    )
