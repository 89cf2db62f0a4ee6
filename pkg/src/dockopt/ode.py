"""Adaptive Dormand-Prince 5(4) integrator with local extrapolation.

Explicit embedded Runge-Kutta pair: error is estimated from the 4th-order
solution while steps advance with the 5th-order one (local extrapolation).
FSAL is exploited, so an accepted step costs six fresh derivative
evaluations. This is deliberately minimal: non-stiff right-hand sides only,
forward integration, no event detection (callers split at known thrust
edges themselves).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# Dormand & Prince (1980) RK5(4)7M tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_ORDER_EXP = -1.0 / 5.0


class IntegrationError(RuntimeError):
    """Step size underflow; carries the time reached when integration stalled."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(message)
        self.t_reached = t_reached


@dataclass
class DenseSegment:
    t0: float
    t1: float
    y0: np.ndarray
    y1: np.ndarray
    f0: np.ndarray
    f1: np.ndarray

    def eval(self, t: float) -> np.ndarray:
        # Cubic Hermite on the accepted step; adequate for plotting output.
        h = self.t1 - self.t0
        s = (t - self.t0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * self.y0 + h10 * h * self.f0 + h01 * self.y1 + h11 * h * self.f1


@dataclass
class OdeResult:
    t: float
    y: np.ndarray
    nfev: int
    steps: int
    dense: list[DenseSegment] = field(default_factory=list)

    def sample(self, times: Sequence[float]) -> np.ndarray:
        """Evaluate the dense interpolant at increasing times inside the span."""
        if not self.dense:
            raise ValueError("integration was run without dense output")
        out = np.empty((len(times), self.y.size))
        seg_idx = 0
        for i, t in enumerate(times):
            while seg_idx + 1 < len(self.dense) and t > self.dense[seg_idx].t1:
                seg_idx += 1
            out[i] = self.dense[seg_idx].eval(t)
        return out


def _initial_step(f, t0, y0, f0, t1, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t1 - t0)
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t1 - t0)


def integrate(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    t1: float,
    y0: np.ndarray,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    dense: bool = False,
) -> OdeResult:
    """Integrate y' = f(t, y) from t0 to t1 >= t0 with adaptive stepping.

    Raises ``IntegrationError`` on step-size underflow.
    """
    y = np.array(y0, dtype=float)
    if t1 < t0:
        raise ValueError("backward integration not supported")
    if t1 == t0:
        return OdeResult(t0, y, 0, 0)
    t = t0
    k = np.empty((7, y.size))
    k[0] = f(t, y)
    nfev = 1
    h = _initial_step(f, t0, y, k[0], t1, rtol, atol)
    nfev += 1
    h_floor = 16.0 * np.finfo(float).eps * (t1 - t0)
    steps = 0
    segments: list[DenseSegment] = []
    while t < t1:
        last = h >= t1 - t
        if last:
            h = t1 - t
        if h < h_floor:
            raise IntegrationError(
                f"step size underflow at t={t!r} (h={h!r})", t_reached=t
            )
        for s in range(5):
            k[s + 1] = f(t + _C[s + 1] * h, y + h * (_A[s] @ k[: s + 1]))
        y_new = y + h * (_A[5] @ k[:6])
        k[6] = f(t + h, y_new)
        nfev += 6
        err_vec = h * (_E @ k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean((err_vec / scale) ** 2))
        if err <= 1.0:
            t_next = t1 if last else t + h  # land on the endpoint exactly
            if dense:
                segments.append(
                    DenseSegment(t, t_next, y.copy(), y_new.copy(), k[0].copy(), k[6].copy())
                )
            t = t_next
            y = y_new
            k[0] = k[6]  # FSAL
            steps += 1
            factor = _MAX_FACTOR if err == 0.0 else min(
                _MAX_FACTOR, _SAFETY * err**_ORDER_EXP
            )
            h *= factor
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err**_ORDER_EXP)
    return OdeResult(t, y, nfev, steps, segments)
