"""Convex local subproblem: linearized dynamics with virtual control, pulse
bounds, state-triggered constraints, approach cone, trust region, boundary
conditions, and the composite cost, lowered to a canonical conic program.

State-triggered constraints follow the equivalence

    g(z) < 0  =>  c(z) <= 0      iff      -min(g(z), 0) c(z) <= 0

convexified by evaluating the trigger g on the previous iterate only. Three
families appear here: a minimum-pulse trigger that silences any thruster
whose reference width sits below the realizable minimum, an attitude-error
bound triggered one node ahead of entering the approach radius (phase lead,
so the propagated attitude also clears the bound), and silencing of the
forward-facing thrusters inside the approach radius.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import quaternions as quat
from .conic import NEAR_OPTIMAL, NONNEG, OPTIMAL, SOC, ConicProgram, ConicSolver, SolverResult
from .dynamics import ImpulseSchedule, Q
from .linearize import DiscreteLTV
from .problem import RendezvousProblem
from .scaling import ScalingTransform

TRIGGER_EQUALITY = "silence_input"
TRIGGER_INEQUALITY = "attitude_bound"

WIDTH_SNAP_TOL = 1e-7  # s, solver residue below this reads as thruster off


def stc_exact_check(g_value: float, c_value: float) -> bool:
    """Continuous-variable form of the triggered constraint."""
    return -min(g_value, 0.0) * c_value <= 0.0


@dataclass(frozen=True)
class StcSpec:
    """One successive approximation of a triggered constraint.

    The trigger is evaluated on reference quantities only; ``active`` means
    the trigger fired and the constraint enters the subproblem.
    """

    kind: str
    trigger_value: float
    active: bool
    affected: tuple = ()
    row: np.ndarray | None = None  # inequality row (attitude bound)
    bound: float = 0.0


def min_pulse_stc(ref_width: float, dt_min: float, k: int, i: int) -> StcSpec:
    """Silence thruster i at node k when its reference width is sub-minimum."""
    g = ref_width - dt_min
    return StcSpec(
        kind=TRIGGER_EQUALITY,
        trigger_value=g,
        active=g < 0.0,
        affected=((k, i),),
    )


def impingement_attitude_stc(
    ref_next_position: np.ndarray,
    p_f: np.ndarray,
    r_a: float,
    dtheta_max: float,
    q_f: np.ndarray,
    k: int,
) -> StcSpec:
    """Bound the node-k attitude error once the next node enters the radius.

    The inequality is linear in the node quaternion: the scalar part of the
    error quaternion q_k* (x) q_f equals q_f' q_k.
    """
    g = float(np.linalg.norm(ref_next_position - p_f)) - r_a
    return StcSpec(
        kind=TRIGGER_INEQUALITY,
        trigger_value=g,
        active=g < 0.0,
        affected=(k,),
        row=np.asarray(q_f, dtype=float).copy(),
        bound=float(np.cos(0.5 * dtheta_max)),
    )


def impingement_silence_stc(
    ref_position: np.ndarray,
    p_f: np.ndarray,
    r_a: float,
    forward_set,
    k: int,
) -> list[StcSpec]:
    """Silence every forward-facing thruster while inside the radius."""
    g = float(np.linalg.norm(ref_position - p_f)) - r_a
    return [
        StcSpec(
            kind=TRIGGER_EQUALITY,
            trigger_value=g,
            active=g < 0.0,
            affected=((k, i - 1),),  # 0-based thruster column
        )
        for i in sorted(forward_set)
    ]


class ConstraintConflictError(ValueError):
    """A pulse is simultaneously forced silent and lower-bounded."""


def core_variable_count(n: int, m: int) -> int:
    """States, inputs, virtual controls, and trust radii (no epigraph aux)."""
    return 13 * (n + 1) + m * n + 13 * n + (n - 1)


@dataclass
class LrgpProgram:
    """Canonical conic program plus the context needed to read a solution."""

    program: ConicProgram
    scaling: ScalingTransform
    n_intervals: int
    n_thrusters: int
    t_c: float
    w_tr: float
    w_vc: float
    silenced: tuple[tuple[int, int], ...]
    attitude_nodes: tuple[int, ...]
    specs: list[StcSpec] = field(default_factory=list)


def build_lrgp(
    ref_states: np.ndarray,
    ref_schedule: ImpulseSchedule,
    dltv: DiscreteLTV,
    scaling: ScalingTransform,
    problem: RendezvousProblem,
    extra_lower_bounds: frozenset[tuple[int, int]] = frozenset(),
    w_tr: float = 1e3,
    w_vc: float = 1e7,
) -> LrgpProgram:
    """Assemble the subproblem about a reference trajectory.

    ``extra_lower_bounds`` holds (k, i) pairs (0-based) whose pulse width is
    permanently kept at or above the minimum by the solution-reset logic.
    """
    model = problem.vehicle
    n = dltv.n_intervals
    m = model.n_thrusters
    states = np.asarray(ref_states, dtype=float)
    widths = ref_schedule.widths
    p_f = problem.final.p
    q_f = problem.final.q

    nx, nu, nvc, neta = 13 * (n + 1), m * n, 13 * n, n - 1
    sl_x = slice(0, nx)
    sl_u = slice(nx, nx + nu)
    sl_vc = slice(sl_u.stop, sl_u.stop + nvc)
    sl_eta = slice(sl_vc.stop, sl_vc.stop + neta)
    sl_mu = slice(sl_eta.stop, sl_eta.stop + nvc)
    n_vars = sl_mu.stop

    def xi(k):  # first index of scaled state k
        return 13 * k

    def ui(k, i):
        return sl_u.start + m * k + i

    def vci(k):
        return sl_vc.start + 13 * k

    def etai(k):  # defined for k = 1..n-1
        return sl_eta.start + (k - 1)

    def mui(k):
        return sl_mu.start + 13 * k

    # --- state-triggered constraints, all triggers on the reference only ---
    specs: list[StcSpec] = []
    silenced: set[tuple[int, int]] = set()
    for k in range(n):
        for i in range(m):
            spec = min_pulse_stc(widths[k, i], model.dt_min, k, i)
            specs.append(spec)
            if spec.active:
                silenced.add((k, i))
        for spec in impingement_silence_stc(
            states[k, :3], p_f, problem.r_a, model.forward_set, k
        ):
            specs.append(spec)
            if spec.active:
                silenced.add(spec.affected[0])
    attitude_rows: list[tuple[int, np.ndarray, float]] = []
    for k in range(1, n):
        spec = impingement_attitude_stc(
            states[k + 1, :3], p_f, problem.r_a, problem.dtheta_max, q_f, k
        )
        specs.append(spec)
        if spec.active:
            attitude_rows.append((k, spec.row, spec.bound))

    conflicts = sorted(silenced & set(extra_lower_bounds))
    if conflicts:
        raise ConstraintConflictError(
            f"pulse(s) {conflicts} are both forced silent and lower-bounded"
        )

    x_scale, x_offset = scaling.x_scale, scaling.x_offset
    u_scale, u_offset = scaling.u_scale, scaling.u_offset
    vc_scale = scaling.vc_scale

    # --- cost ---
    c = np.zeros(n_vars)
    c[sl_u] = np.tile(u_scale, n) / scaling.cost_scale
    c[sl_eta] = w_tr
    c[sl_mu] = w_vc
    c0 = n * float(u_offset.sum()) / scaling.cost_scale

    # --- equalities: dynamics, boundaries, silenced pulses ---
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    b_eq: list[float] = []
    row0 = 0

    def add_entries(r0, idx0, mat):
        mat = np.atleast_2d(mat)
        rr, cc = np.nonzero(mat)
        rows.extend(r0 + rr)
        cols.extend(idx0 + cc)
        vals.extend(mat[rr, cc])

    for k in range(n):
        A_k, B_k, r_k = dltv.A[k], dltv.B[k], dltv.r[k]
        add_entries(row0, xi(k + 1), np.diag(x_scale))
        add_entries(row0, xi(k), -A_k * x_scale[None, :])
        add_entries(row0, ui(k, 0), -B_k * u_scale[None, :])
        add_entries(row0, vci(k), -np.diag(vc_scale))
        b_eq.extend(r_k + A_k @ x_offset + B_k @ u_offset - x_offset)
        row0 += 13
    for node, state in ((0, problem.initial), (n, problem.final)):
        add_entries(row0, xi(node), np.eye(13))
        b_eq.extend(scaling.scale_state(state.as_vector()))
        row0 += 13
    for k, i in sorted(silenced):
        rows.append(row0)
        cols.append(ui(k, i))
        vals.append(1.0)
        b_eq.append(-u_offset[i] / u_scale[i])  # physical width zero
        row0 += 1
    a_eq = sp.coo_matrix((vals, (rows, cols)), shape=(row0, n_vars)).tocsc()
    b_eq = np.asarray(b_eq)

    # --- inequalities: nonnegative block first, then SOC blocks ---
    g_rows: list[int] = []
    g_cols: list[int] = []
    g_vals: list[float] = []
    h: list[float] = []
    grow = 0

    def add_g(entries, rhs):
        nonlocal grow
        for col, val in entries:
            g_rows.append(grow)
            g_cols.append(col)
            g_vals.append(val)
        h.append(rhs)
        grow += 1

    # pulse box 0 <= dt <= dt_max, i.e. -1 <= u_hat <= 1; silenced pulses are
    # already pinned by equality, so their box rows would only add degeneracy
    for k in range(n):
        for i in range(m):
            if (k, i) in silenced:
                continue
            add_g([(ui(k, i), 1.0)], 1.0)
            add_g([(ui(k, i), -1.0)], 1.0)
    # permanent lower bounds from solution resets
    for k, i in sorted(extra_lower_bounds):
        lb_hat = (model.dt_min - u_offset[i]) / u_scale[i]
        add_g([(ui(k, i), -1.0)], -lb_hat)
    # virtual-control magnitude epigraph
    for k in range(n):
        for j in range(13):
            add_g([(vci(k) + j, 1.0), (mui(k) + j, -1.0)], 0.0)
            add_g([(vci(k) + j, -1.0), (mui(k) + j, -1.0)], 0.0)
    # trust radii are nonnegative
    for k in range(1, n):
        add_g([(etai(k), -1.0)], 0.0)
    # triggered attitude bound: q_f' q_k >= cos(dtheta_max / 2)
    for k, row, bound in attitude_rows:
        add_g([(xi(k) + Q.start + j, -row[j]) for j in range(4)], -bound)
    cones: list[tuple[str, int]] = [(NONNEG, grow)]

    # approach cone at interior nodes: cos(gamma) |p_k - p_d| <= e_d' (p_k - p_d)
    cosg = float(np.cos(problem.gamma))
    s_p = x_scale[:3]
    base = x_offset[:3] - problem.p_d
    for k in range(1, n):
        add_g([(xi(k) + j, -problem.e_d[j] * s_p[j]) for j in range(3)], float(problem.e_d @ base))
        for axis in range(3):
            add_g([(xi(k) + axis, -cosg * s_p[axis])], cosg * base[axis])
        cones.append((SOC, 4))

    # quadratic trust region |x_hat_k - c_k|^2 <= eta_k as a standard cone:
    # |(2 (x_hat - c), eta - 1)| <= eta + 1
    for k in range(1, n):
        center = scaling.scale_state(states[k])
        add_g([(etai(k), -1.0)], 1.0)
        for j in range(13):
            add_g([(xi(k) + j, -2.0)], -2.0 * center[j])
        add_g([(etai(k), -1.0)], -1.0)
        cones.append((SOC, 15))

    g = sp.coo_matrix((g_vals, (g_rows, g_cols)), shape=(grow, n_vars)).tocsc()
    program = ConicProgram(
        c=c,
        c0=c0,
        a_eq=a_eq,
        b_eq=b_eq,
        g=g,
        h=np.asarray(h),
        cones=cones,
        variables={"x": sl_x, "u": sl_u, "vc": sl_vc, "eta": sl_eta, "mu": sl_mu},
    )
    program.validate()
    return LrgpProgram(
        program=program,
        scaling=scaling,
        n_intervals=n,
        n_thrusters=m,
        t_c=model.t_c,
        w_tr=w_tr,
        w_vc=w_vc,
        silenced=tuple(sorted(silenced)),
        attitude_nodes=tuple(k for k, _, _ in attitude_rows),
        specs=specs,
    )


class SubproblemError(RuntimeError):
    """Solver did not return a usable primal point."""

    def __init__(self, result: SolverResult):
        self.result = result
        super().__init__(f"conic solve failed: {result.status} ({result.raw_status})")


@dataclass
class SubproblemSolution:
    states: np.ndarray  # (N+1, 13), physical units, quaternions renormalized
    schedule: ImpulseSchedule
    virtual_controls: np.ndarray  # (N, 13), physical units
    trust_radii: np.ndarray  # (N-1,), scaled
    cost_fuel_hat: float
    cost_tr_hat: float
    cost_vc_hat: float
    objective: float
    status: str
    reduced_accuracy: bool
    solve_time: float
    quat_denormalization: float  # largest |1 - norm| seen before renormalizing
    fuel_seconds: float  # total on-time, physical


def solve_lrgp(lrgp: LrgpProgram, solver: ConicSolver) -> SubproblemSolution:
    """Solve the subproblem and unscale the solution.

    Infeasible / unbounded / failed statuses raise ``SubproblemError``;
    reduced-accuracy solutions are accepted and flagged.
    """
    t0 = time.perf_counter()
    result = solver.solve(lrgp.program)
    wall = time.perf_counter() - t0
    if result.status not in (OPTIMAL, NEAR_OPTIMAL):
        raise SubproblemError(result)
    z = result.x
    layout = lrgp.program.variables
    n, m = lrgp.n_intervals, lrgp.n_thrusters
    scaling = lrgp.scaling
    x_hat = z[layout["x"]].reshape(n + 1, 13)
    u_hat = z[layout["u"]].reshape(n, m)
    vc_hat = z[layout["vc"]].reshape(n, 13)
    eta = z[layout["eta"]].copy()
    states = scaling.unscale_state(x_hat)
    qnorms = np.linalg.norm(states[:, Q], axis=1)
    states[:, Q] /= qnorms[:, None]
    widths = scaling.unscale_input(u_hat)
    fuel_seconds = float(widths.sum())
    # Solver feasibility slack leaves silenced widths at ~1e-8 and box-bound
    # widths a hair outside; snap residue to exactly off and clip to the box.
    dt_max = scaling.u_scale + scaling.u_offset
    widths = np.clip(widths, 0.0, dt_max[None, :])
    widths[widths < WIDTH_SNAP_TOL] = 0.0
    vc = scaling.unscale_vc(vc_hat)
    cost_fuel_hat = fuel_seconds / scaling.cost_scale
    cost_tr_hat = lrgp.w_tr * float(eta.sum())
    cost_vc_hat = lrgp.w_vc * float(np.abs(vc_hat).sum())
    return SubproblemSolution(
        states=states,
        schedule=ImpulseSchedule(widths, lrgp.t_c),
        virtual_controls=vc,
        trust_radii=eta,
        cost_fuel_hat=cost_fuel_hat,
        cost_tr_hat=cost_tr_hat,
        cost_vc_hat=cost_vc_hat,
        objective=float(result.objective),
        status=result.status,
        reduced_accuracy=result.status == NEAR_OPTIMAL,
        solve_time=result.solve_time if result.solve_time else wall,
        quat_denormalization=float(np.max(np.abs(qnorms - 1.0))),
        fuel_seconds=fuel_seconds,
    )
