import numpy as np
import pytest

from dockopt import quaternions as quat
from dockopt.conic import NONNEG, SOC, default_solver
from dockopt.driver import initial_guess
from dockopt.dynamics import ChaserState, ImpulseSchedule
from dockopt.linearize import discretize_trajectory
from dockopt.problem import RendezvousProblem, apollo_problem
from dockopt.scaling import fit_scaling
from dockopt.subproblem import (
    ConstraintConflictError,
    build_lrgp,
    core_variable_count,
    impingement_attitude_stc,
    impingement_silence_stc,
    min_pulse_stc,
    solve_lrgp,
    stc_exact_check,
)


@pytest.fixture(scope="module")
def solver():
    return default_solver()


def null_maneuver(apollo, n=4):
    """Rest-to-rest with identical boundary states; zero thrust is optimal."""
    state = ChaserState(
        p=np.zeros(3), v=np.zeros(3), q=np.array([1.0, 0, 0, 0]), w=np.zeros(3)
    )
    return RendezvousProblem(
        t_f=n * apollo.t_c,
        initial=state,
        final=state,
        lm=state,
        p_d=np.array([5.0, 0.0, 0.0]),
        e_d=np.array([-1.0, 0.0, 0.0]),
        r_a=4.0,
        dtheta_max=np.deg2rad(2.0),
        gamma=np.deg2rad(30.0),
        vehicle=apollo,
    )


def build_for(problem, ref_states=None, ref_widths=None, extra=frozenset()):
    guess_states, guess_sched = initial_guess(problem)
    states = guess_states if ref_states is None else ref_states
    widths = guess_sched.widths if ref_widths is None else ref_widths
    sched = ImpulseSchedule(widths, problem.vehicle.t_c)
    dltv = discretize_trajectory(states, sched, problem.vehicle, rtol=1e-9, atol=1e-11)
    scaling = fit_scaling(guess_states, problem.vehicle, problem.n_intervals)
    return build_lrgp(states, sched, dltv, scaling, problem, extra)


class TestTriggerEquivalence:
    def test_satisfied_when_triggered(self):
        assert stc_exact_check(-1.0, -0.5)

    def test_violated_when_triggered(self):
        assert not stc_exact_check(-1.0, 0.5)

    def test_matches_implication_on_random_samples(self, rng):
        for _ in range(500):
            g, c = rng.uniform(-2.0, 2.0, 2)
            implication = (c <= 0.0) if g < 0.0 else True
            assert stc_exact_check(g, c) == implication


class TestMinPulseTrigger:
    def test_sub_minimum_silences(self):
        spec = min_pulse_stc(0.05, 0.1, k=3, i=7)
        assert spec.active and spec.affected == ((3, 7),)

    def test_above_minimum_unconstrained(self):
        assert not min_pulse_stc(0.2, 0.1, 0, 0).active

    def test_exactly_at_minimum_unconstrained(self):
        assert not min_pulse_stc(0.1, 0.1, 0, 0).active


class TestAttitudeTrigger:
    def test_far_outside_inactive(self):
        spec = impingement_attitude_stc(
            np.array([10.0, 0, 0]), np.zeros(3), 4.0, np.deg2rad(2.0), quat.IDENTITY, 1
        )
        assert not spec.active

    def test_inside_active_with_cos_one_degree(self):
        spec = impingement_attitude_stc(
            np.array([2.0, 0, 0]), np.zeros(3), 4.0, np.deg2rad(2.0), quat.IDENTITY, 1
        )
        assert spec.active
        assert spec.bound == pytest.approx(np.cos(np.deg2rad(1.0)))

    def test_target_attitude_satisfies_with_margin(self):
        q_f = quat.from_axis_angle([0, 0, 1], 0.8)
        spec = impingement_attitude_stc(
            np.zeros(3), np.zeros(3), 4.0, np.deg2rad(2.0), q_f, 1
        )
        assert float(spec.row @ q_f) - spec.bound == pytest.approx(
            1.0 - np.cos(np.deg2rad(1.0))
        )

    def test_row_is_product_matrix_form(self, rng):
        # e1' [q_f](x) q* as a linear function of q has coefficient vector q_f
        q_f = rng.normal(size=4)
        q_f /= np.linalg.norm(q_f)
        spec = impingement_attitude_stc(
            np.zeros(3), np.zeros(3), 4.0, np.deg2rad(2.0), q_f, 1
        )
        e1 = np.array([1.0, 0, 0, 0])
        D = np.diag([1.0, -1.0, -1.0, -1.0])
        np.testing.assert_allclose(
            spec.row, e1 @ quat.right_product_matrix(q_f) @ D, atol=1e-14
        )


class TestSilenceTrigger:
    def test_inside_silences_forward_set(self):
        specs = impingement_silence_stc(
            np.array([1.0, 0, 0]), np.zeros(3), 4.0, {1, 5, 9, 13}, k=2
        )
        assert all(s.active for s in specs)
        assert sorted(s.affected[0] for s in specs) == [(2, 0), (2, 4), (2, 8), (2, 12)]

    def test_outside_inactive(self):
        specs = impingement_silence_stc(
            np.array([9.0, 0, 0]), np.zeros(3), 4.0, {1, 5}, k=0
        )
        assert not any(s.active for s in specs)

    def test_exactly_at_radius_inactive(self):
        specs = impingement_silence_stc(
            np.array([4.0, 0, 0]), np.zeros(3), 4.0, {1}, k=0
        )
        assert not any(s.active for s in specs)


class TestBuild:
    def test_variable_layout_count(self):
        assert core_variable_count(75, 16) == 13 * 76 + 16 * 75 + 13 * 75 + 74

    def test_program_dimensions(self, apollo):
        problem = null_maneuver(apollo, n=4)
        lrgp = build_for(problem)
        n, m = 4, 16
        assert lrgp.program.n_vars == core_variable_count(n, m) + 13 * n
        # equalities: dynamics + two boundary blocks + silenced pulses
        expected_eq = 13 * n + 26 + len(lrgp.silenced)
        assert lrgp.program.b_eq.size == expected_eq
        socs = [dim for kind, dim in lrgp.program.cones if kind == SOC]
        assert socs == [4] * (n - 1) + [15] * (n - 1)

    def test_min_pulse_reference_guess_has_no_silences(self, apollo):
        # all-minimum reference widths leave every trigger at zero
        problem = apollo_problem(t_f=20.0, vehicle=apollo)
        lrgp = build_for(problem)
        assert not any(
            s.kind == "silence_input" and s.active and s.trigger_value < 0
            for s in lrgp.specs
            if s.trigger_value == 0.0
        )
        guess_inside = np.linalg.norm(
            initial_guess(problem)[0][:, :3] - problem.final.p, axis=1
        ) < problem.r_a
        if not guess_inside.any():
            assert not lrgp.silenced

    def test_conflict_detection(self, apollo):
        problem = null_maneuver(apollo, n=4)
        # node 0 of the null maneuver sits inside r_a, so forward thrusters
        # are silenced there; lower-bounding one of them must be rejected
        with pytest.raises(ConstraintConflictError, match=r"\(0, 0\)"):
            build_for(problem, extra=frozenset({(0, 0)}))


class TestSolve:
    def test_null_maneuver_zero_cost(self, apollo, solver):
        problem = null_maneuver(apollo, n=4)
        lrgp = build_for(problem)
        sol = solve_lrgp(lrgp, solver)
        assert sol.status in ("optimal", "near_optimal")
        assert sol.cost_fuel_hat < 1e-5
        assert np.abs(sol.virtual_controls).max() < 1e-5
        # boundary rows pin both ends
        np.testing.assert_allclose(sol.states[0], problem.initial.as_vector(), atol=1e-7)
        np.testing.assert_allclose(sol.states[-1], problem.final.as_vector(), atol=1e-7)
        # pulse box
        assert np.all(sol.schedule.widths >= 0.0)
        assert np.all(sol.schedule.widths <= apollo.dt_max + 1e-12)

    def test_cost_consistency(self, apollo, solver):
        problem = null_maneuver(apollo, n=4)
        lrgp = build_for(problem)
        sol = solve_lrgp(lrgp, solver)
        recomputed = sol.cost_fuel_hat + sol.cost_tr_hat + sol.cost_vc_hat
        assert sol.objective == pytest.approx(recomputed, abs=1e-5)

    def test_silenced_pulses_exactly_zero(self, apollo, solver):
        problem = null_maneuver(apollo, n=4)
        guess_states, guess_sched = initial_guess(problem)
        widths = guess_sched.widths.copy()
        widths[1, 2] = 0.05  # sub-minimum reference: must be silenced
        lrgp = build_for(problem, ref_widths=widths)
        assert (1, 2) in lrgp.silenced
        sol = solve_lrgp(lrgp, solver)
        assert abs(sol.schedule.widths[1, 2]) < 1e-9

    def test_forced_silence_everywhere_uses_virtual_control(self, apollo, solver):
        problem = null_maneuver(apollo, n=2)
        guess_states, guess_sched = initial_guess(problem)
        moved = problem.final.as_vector().copy()
        moved[0] += 1.0
        shifted = RendezvousProblem(
            t_f=problem.t_f,
            initial=problem.initial,
            final=ChaserState.from_vector(np.concatenate([moved[:6], [1, 0, 0, 0], moved[10:]])),
            lm=problem.lm,
            p_d=problem.p_d,
            e_d=problem.e_d,
            r_a=problem.r_a,
            dtheta_max=problem.dtheta_max,
            gamma=problem.gamma,
            vehicle=apollo,
        )
        widths = np.full_like(guess_sched.widths, 0.01)  # silences every pulse
        lrgp = build_for(shifted, ref_widths=widths)
        assert len(lrgp.silenced) == 32
        sol = solve_lrgp(lrgp, solver)
        assert sol.cost_vc_hat > 1.0  # dynamics impossible without slack

    def test_attitude_rows_enforced(self, apollo, solver):
        # whole trajectory inside r_a: every interior node carries the bound
        problem = null_maneuver(apollo, n=4)
        lrgp = build_for(problem)
        assert lrgp.attitude_nodes == (1, 2, 3)
        sol = solve_lrgp(lrgp, solver)
        q_f = problem.final.q
        for k in range(1, 4):
            assert float(sol.states[k, 6:10] @ q_f) >= np.cos(np.deg2rad(1.0)) - 1e-9

    def test_trust_region_bounds_deviation(self, apollo, solver):
        problem = null_maneuver(apollo, n=4)
        lrgp = build_for(problem)
        sol = solve_lrgp(lrgp, solver)
        for k in range(1, 4):
            dev = lrgp.scaling.scale_state(sol.states[k]) - lrgp.scaling.scale_state(
                initial_guess(problem)[0][k]
            )
            assert dev @ dev <= sol.trust_radii[k - 1] + 1e-7

    def test_approach_cone_active_in_solution(self, apollo, solver):
        problem = null_maneuver(apollo, n=4)
        lrgp = build_for(problem)
        sol = solve_lrgp(lrgp, solver)
        cosg = np.cos(problem.gamma)
        for k in range(1, 4):
            w = sol.states[k, 0:3] - problem.p_d
            assert cosg * np.linalg.norm(w) <= w @ problem.e_d + 1e-7
