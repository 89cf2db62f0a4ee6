"""Successive convexification loop with feasibility audit and solution reset.

Each iteration linearizes and discretizes about the reference, solves the
convex subproblem, then audits the result by propagating the optimized
pulses through the nonlinear dynamics over the full horizon. An iterate is
feasible when that propagation error is inside the configured tolerances.
Convergence additionally requires the pulse-width band condition (every
width zero or inside [dt_min, dt_max]) and a stabilized fuel cost.

When feasibility degrades (typically after the minimum-pulse trigger locks
a needed thruster to zero and virtual control takes over), the loop resets
to the best earlier iterate and permanently lower-bounds every pulse that
was caught in the sub-minimum band, which provably breaks the lock for
those pulses.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import quaternions as quat
from .conic import ConicSolver, default_solver
from .dynamics import ImpulseSchedule, PropagationError, propagation_error
from .linearize import discretize_trajectory
from .problem import RendezvousProblem
from .scaling import ScalingTransform, fit_scaling
from .subproblem import SubproblemError, build_lrgp, solve_lrgp

log = logging.getLogger(__name__)

WIDTH_ZERO_TOL = 1e-9  # s, widths at or below this count as "off"


@dataclass(frozen=True)
class ScvxConfig:
    """Weights, tolerances, and limits of the iteration loop."""

    w_tr: float = 1e3
    w_vc: float = 1e7
    j_max: int = 30
    dj_tol: float = 0.0  # relative fuel-cost change tolerance
    dj_abs: float = 1e-6  # s, absolute slack on the fuel-cost change
    p_e_max: float = 1e-2  # m
    v_e_max: float = 1e-3  # m/s
    theta_e_max: float = 0.5  # deg
    omega_e_max: float = 1e-2  # deg/s
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        for name in ("w_tr", "w_vc", "p_e_max", "v_e_max", "theta_e_max", "omega_e_max", "rtol", "atol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.j_max < 1:
            raise ValueError("j_max must be at least 1")
        if self.dj_tol < 0.0 or self.dj_abs < 0.0:
            raise ValueError("cost tolerances must be nonnegative")


@dataclass
class ScvxIterate:
    """Everything recorded about one iteration."""

    index: int
    states: np.ndarray
    schedule: ImpulseSchedule
    virtual_controls: np.ndarray
    trust_radii: np.ndarray
    cost: float  # total thruster on-time, s
    cost_fuel_hat: float
    cost_tr_hat: float
    cost_vc_hat: float
    objective: float
    prop_err: PropagationError
    feasible: bool
    mib_satisfied: bool
    reset_applied: bool = False
    reduced_accuracy: bool = False
    solve_time: float = 0.0
    discretize_time: float = 0.0

    def log_record(self) -> dict:
        return {
            "j": self.index,
            "J": self.cost,
            "J_fuel_hat": self.cost_fuel_hat,
            "J_tr_hat": self.cost_tr_hat,
            "J_vc_hat": self.cost_vc_hat,
            "p_e": self.prop_err.p_e,
            "v_e": self.prop_err.v_e,
            "theta_e": self.prop_err.theta_e,
            "omega_e": self.prop_err.omega_e,
            "feasible": self.feasible,
            "mib_satisfied": self.mib_satisfied,
            "reset_applied": self.reset_applied,
        }


@dataclass
class ScvxResult:
    best: ScvxIterate | None
    history: list[ScvxIterate]
    converged: bool
    status: str
    scaling: ScalingTransform
    lower_bounds: frozenset[tuple[int, int]]
    solver_time_total: float
    discretize_time_total: float

    @property
    def iterations(self) -> int:
        return len(self.history)


class ScvxAbort(RuntimeError):
    """Solver failure mid-loop; carries the recorded history."""

    def __init__(self, message: str, history: list[ScvxIterate]):
        super().__init__(message)
        self.history = history


def discrete_cost(schedule: ImpulseSchedule) -> float:
    """Cumulative thruster on-time in seconds, the fuel-use proxy."""
    return schedule.total_on_time()


def initial_guess(problem: RendezvousProblem) -> tuple[np.ndarray, ImpulseSchedule]:
    """Straight-line, constant-rate guess with all pulses at the minimum.

    Positions interpolate linearly to land exactly on the target position at
    the last node, attitude follows the spherical interpolation toward the
    terminal quaternion with the matching constant body rate, and node 0 is
    the exact initial boundary state. Starting every pulse at dt_min keeps
    the minimum-pulse trigger from locking at the outset.
    """
    n = problem.n_intervals
    model = problem.vehicle
    x0 = problem.initial
    xf = problem.final
    alpha = np.linspace(0.0, 1.0, n + 1)
    states = np.empty((n + 1, 13))
    states[:, 0:3] = np.outer(1.0 - alpha, x0.p) + np.outer(alpha, xf.p)
    states[:, 3:6] = (xf.p - x0.p) / problem.t_f
    rel = quat.relative_rotation(x0.q, xf.q)
    for k in range(n + 1):
        states[k, 6:10] = quat.slerp(x0.q, xf.q, alpha[k])
    states[:, 10:13] = rel.angle / problem.t_f * rel.axis
    states[0] = x0.as_vector()
    widths = np.full((n, model.n_thrusters), model.dt_min)
    return states, ImpulseSchedule(widths, model.t_c)


def find_reset_anchor(history: list[ScvxIterate]) -> int | None:
    """Latest earlier iterate to restart from after a feasibility loss.

    First pass insists on the pulse-width band condition as well; the second
    pass settles for propagation accuracy alone. ``None`` means continue
    from the current iterate.
    """
    for require_mib in (True, False):
        best = None
        for it in history:
            if it.feasible and (it.mib_satisfied or not require_mib):
                best = it.index if best is None else max(best, it.index)
        if best is not None:
            return best
    return None


def reset(
    history: list[ScvxIterate],
    j_star: int,
    j: int,
    dt_min: float,
) -> tuple[np.ndarray, np.ndarray, set[tuple[int, int]]]:
    """Restore iterate j* as reference and lower-bound locked pulses.

    Every (k, i) whose width fell strictly inside (0, dt_min) at any iterate
    l in [j*, j) is permanently constrained to stay at or above dt_min, and
    the restored reference width is raised accordingly. Including j* itself
    covers the case where the anchor is the violator (otherwise an anchor
    found by the second pass reproduces the same lock forever).
    """
    by_index = {it.index: it for it in history}
    anchor = by_index[j_star]
    ref_states = anchor.states.copy()
    ref_widths = anchor.schedule.widths.copy()
    new_bounds: set[tuple[int, int]] = set()
    for l in range(j_star, j):
        it = by_index.get(l)
        if it is None:
            continue
        w = it.schedule.widths
        bad = (w > WIDTH_ZERO_TOL) & (w < dt_min - WIDTH_ZERO_TOL)
        for k, i in zip(*np.nonzero(bad)):
            new_bounds.add((int(k), int(i)))
    for k, i in new_bounds:
        ref_widths[k, i] = max(ref_widths[k, i], dt_min)
    return ref_states, ref_widths, new_bounds


def run(
    problem: RendezvousProblem,
    config: ScvxConfig | None = None,
    solver: ConicSolver | None = None,
) -> ScvxResult:
    """Run the full loop and return the best iterate plus the history."""
    config = config or ScvxConfig()
    solver = solver or default_solver()
    model = problem.vehicle
    n = problem.n_intervals
    guess_states, guess_schedule = initial_guess(problem)
    scaling = fit_scaling(guess_states, model, n)
    ref_states = guess_states
    ref_widths = guess_schedule.widths
    cost_prev = discrete_cost(guess_schedule)
    lower_bounds: set[tuple[int, int]] = set()
    history: list[ScvxIterate] = []
    converged = False
    status = "max_iterations"
    solver_total = 0.0
    discretize_total = 0.0
    for j in range(1, config.j_max + 1):
        t0 = time.perf_counter()
        dltv = discretize_trajectory(
            ref_states, ImpulseSchedule(ref_widths, model.t_c), model, config.rtol, config.atol
        )
        t_disc = time.perf_counter() - t0
        lrgp = build_lrgp(
            ref_states,
            ImpulseSchedule(ref_widths, model.t_c),
            dltv,
            scaling,
            problem,
            frozenset(lower_bounds),
            config.w_tr,
            config.w_vc,
        )
        try:
            sol = solve_lrgp(lrgp, solver)
        except SubproblemError as exc:
            raise ScvxAbort(f"iteration {j}: {exc}", history) from exc
        perr = propagation_error(
            sol.states, sol.schedule, model, (0, n), config.rtol, config.atol
        )
        feasible = perr.within(
            config.p_e_max, config.v_e_max, config.theta_e_max, config.omega_e_max
        )
        mib = sol.schedule.is_mib_feasible(model.dt_min, model.dt_max, WIDTH_ZERO_TOL)
        cost = discrete_cost(sol.schedule)
        it = ScvxIterate(
            index=j,
            states=sol.states,
            schedule=sol.schedule,
            virtual_controls=sol.virtual_controls,
            trust_radii=sol.trust_radii,
            cost=cost,
            cost_fuel_hat=sol.cost_fuel_hat,
            cost_tr_hat=sol.cost_tr_hat,
            cost_vc_hat=sol.cost_vc_hat,
            objective=sol.objective,
            prop_err=perr,
            feasible=feasible,
            mib_satisfied=mib,
            reduced_accuracy=sol.reduced_accuracy,
            solve_time=sol.solve_time,
            discretize_time=t_disc,
        )
        history.append(it)
        solver_total += sol.solve_time
        discretize_total += t_disc
        log.info(
            "j=%d J=%.4f s tr=%.3e vc=%.3e p_e=%.2e v_e=%.2e th_e=%.2e w_e=%.2e%s%s",
            j, cost, sol.cost_tr_hat / config.w_tr, sol.cost_vc_hat / config.w_vc,
            perr.p_e, perr.v_e, perr.theta_e, perr.omega_e,
            "" if feasible else " infeasible",
            "" if mib else " band-violating",
        )
        if feasible:
            if mib and abs(cost - cost_prev) <= config.dj_tol * abs(cost_prev) + config.dj_abs:
                converged = True
                status = "converged"
                cost_prev = cost
                break
            ref_states, ref_widths = sol.states, sol.schedule.widths
        else:
            j_star = find_reset_anchor(history[:-1])
            if j_star is not None:
                ref_states, ref_widths, new_bounds = reset(history, j_star, j, model.dt_min)
                lower_bounds |= new_bounds
                it.reset_applied = True
                log.info("reset to iterate %d, %d new lower bound(s)", j_star, len(new_bounds))
            else:
                ref_states, ref_widths = sol.states, sol.schedule.widths
        cost_prev = cost
    best = _select_best(history, converged)
    if best is None:
        status = "infeasible"
    return ScvxResult(
        best=best,
        history=history,
        converged=converged,
        status=status,
        scaling=scaling,
        lower_bounds=frozenset(lower_bounds),
        solver_time_total=solver_total,
        discretize_time_total=discretize_total,
    )


def _select_best(history: list[ScvxIterate], converged: bool) -> ScvxIterate | None:
    if converged:
        return history[-1]
    candidates = [it for it in history if it.feasible and it.mib_satisfied]
    if not candidates:
        candidates = [it for it in history if it.feasible]
    if not candidates:
        return None
    return min(candidates, key=lambda it: it.cost)
