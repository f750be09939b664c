import math

import numpy as np
import pytest

from telewalk.gait import (
    DcmTrajectory,
    Footstep,
    FootstepPlan,
    PlanError,
    PlannerParams,
    closing_plan,
    dcm_ds_coeffs,
    dcm_ss,
    dcm_velocity,
    plan_dcm,
    plan_footsteps,
    swing_trajectory,
)
from telewalk.retarget import ComCommand

LEFT0 = np.array([0.0, 0.08, 0.0])
RIGHT0 = np.array([0.0, -0.08, 0.0])


def make_plan(n_steps=4, advance=0.12, params=None, start=0.0):
    params = params or PlannerParams(horizon_steps=n_steps)
    return plan_footsteps(ComCommand(advance / params.step_duration, 0.0),
                          LEFT0, RIGHT0, params, start_time=start)


class TestPlanFootsteps:
    def test_below_deadband_stands(self):
        plan = plan_footsteps(ComCommand(0.0, 0.0), LEFT0, RIGHT0, PlannerParams())
        assert plan.is_standing()
        plan = plan_footsteps(ComCommand(0.03, 0.0), LEFT0, RIGHT0, PlannerParams())
        assert plan.is_standing()

    def test_straight_walk_matches_hand_integrated_unicycle(self):
        # Oracle: unicycle advancing 0.2 m per 1.0 s step along +x, feet offset
        # +-0.08 laterally, alternating starting with the right foot.
        params = PlannerParams(step_duration=1.0, step_width=0.16,
                               max_step_length=0.25, horizon_steps=4)
        plan = plan_footsteps(ComCommand(0.2, 0.0), LEFT0, RIGHT0, params)
        assert [s.foot for s in plan.footsteps] == ["right", "left", "right", "left"]
        for i, step in enumerate(plan.footsteps):
            x = 0.2 * (i + 1)
            y = -0.08 if step.foot == "right" else 0.08
            assert np.allclose(step.pose2d, [x, y, 0.0], atol=1e-12)
            assert step.impact_time == pytest.approx(i + 1.0, abs=1e-12)

    def test_advance_clamped_to_max_step_length(self):
        params = PlannerParams(max_step_length=0.18)
        plan = plan_footsteps(ComCommand(0.5, 0.0), LEFT0, RIGHT0, params)
        assert plan.footsteps[0].pose2d[0] == pytest.approx(0.18, abs=1e-12)

    def test_pure_turn_rotates_in_place(self):
        # Oracle: heading increments clamp at max_turn; feet stay on the +-w/2
        # circle around the pivot.
        params = PlannerParams(max_turn=0.3, horizon_steps=4)
        plan = plan_footsteps(ComCommand(0.0, 0.9), LEFT0, RIGHT0, params)
        w = params.step_width / 2.0
        for i, step in enumerate(plan.footsteps):
            heading = 0.3 * (i + 1)
            assert step.pose2d[2] == pytest.approx(heading, abs=1e-12)
            side = w if step.foot == "left" else -w
            expected = np.array([-math.sin(heading), math.cos(heading)]) * side
            assert np.allclose(step.pose2d[:2], expected, atol=1e-12)

    def test_degenerate_stance_rejected(self):
        with pytest.raises(PlanError, match="degenerate"):
            plan_footsteps(ComCommand(0.2, 0.0), LEFT0, LEFT0, PlannerParams())

    def test_emitted_plans_respect_bounds(self):
        rng = np.random.default_rng(40)
        for _ in range(50):
            cmd = ComCommand(rng.uniform(-0.6, 0.6), rng.uniform(-0.8, 0.8))
            plan = plan_footsteps(cmd, LEFT0, RIGHT0, PlannerParams(horizon_steps=6))
            plan.validate()  # raises on any bound violation

    def test_closing_plan_squares_feet(self):
        params = PlannerParams()
        left = np.array([0.5, 0.1, 0.2])
        right = np.array([0.62, -0.05, 0.2])
        plan = closing_plan(left, right, "left", params, start_time=3.0)
        step = plan.footsteps[0]
        assert step.foot == "left"
        assert step.pose2d[2] == pytest.approx(0.2)
        rel = step.pose2d[:2] - right[:2]
        lateral = np.array([-math.sin(0.2), math.cos(0.2)]) * params.step_width
        assert np.allclose(rel, lateral, atol=1e-12)


class TestSwingTrajectory:
    def setup_method(self):
        self.traj = swing_trajectory(np.array([0.0, 0.08, 0.0]),
                                     np.array([0.18, 0.09, 0.25]),
                                     step_duration=1.0, ds_duration=0.2,
                                     apex_height=0.03, cycle_start=2.0)

    def test_swing_start_boundary(self):
        pose = self.traj.pose(2.2)
        assert np.allclose(pose.translation, [0.0, 0.08, 0.0], atol=1e-15)
        assert np.allclose(self.traj.twist(2.2), np.zeros(6), atol=1e-15)

    def test_swing_end_boundary(self):
        pose = self.traj.pose(3.0)
        assert np.allclose(pose.translation, [0.18, 0.09, 0.0], atol=1e-15)
        assert np.allclose(self.traj.twist(3.0), np.zeros(6), atol=1e-15)

    def test_apex_at_swing_midpoint(self):
        t_mid = 2.2 + 0.4
        assert self.traj.pose(t_mid).translation[2] == pytest.approx(0.03, abs=1e-15)

    def test_stationary_during_double_support(self):
        for t in (2.0, 2.1, 2.199):
            assert np.allclose(self.traj.pose(t).translation, [0.0, 0.08, 0.0],
                               atol=1e-15)
            assert np.allclose(self.traj.twist(t), np.zeros(6), atol=1e-15)

    def test_twist_matches_finite_difference_of_pose(self):
        h = 1e-7
        for t in (2.35, 2.6, 2.85):
            p_plus = self.traj.pose(t + h).translation
            p_minus = self.traj.pose(t - h).translation
            v_fd = (p_plus - p_minus) / (2 * h)
            assert np.allclose(self.traj.twist(t)[:3], v_fd, atol=1e-6)


class TestDcmPrimitives:
    def test_ss_initial_value(self):
        xi0 = np.array([0.01, -0.02])
        assert np.allclose(dcm_ss(np.zeros(2), xi0, 3.0, 0.0), xi0, atol=0)

    def test_ss_equilibrium(self):
        r = np.array([0.3, 0.1])
        for t in (0.0, 0.4, 1.0):
            assert np.allclose(dcm_ss(r, r, 3.0, t, t_max=1.0), r, atol=0)

    def test_ss_scalar_exponential(self):
        # Oracle: 0.01 * e^{3 * 0.5} along x.
        out = dcm_ss(np.zeros(2), np.array([0.01, 0.0]), 3.0, 0.5)
        assert out[0] == pytest.approx(0.01 * math.exp(1.5), abs=1e-15)
        assert out[0] == pytest.approx(0.0448169, abs=1e-7)
        assert out[1] == 0.0

    def test_ss_domain_check(self):
        with pytest.raises(ValueError, match="domain"):
            dcm_ss(np.zeros(2), np.zeros(2), 3.0, 1.2, t_max=1.0)

    def test_velocity_zero_at_anchor(self):
        r = np.array([0.2, 0.0])
        assert np.allclose(dcm_velocity(r, r, 3.0), np.zeros(2), atol=0)

    def test_velocity_scalar(self):
        out = dcm_velocity(np.array([0.02, 0.0]), np.zeros(2), 3.0)
        assert np.allclose(out, [0.06, 0.0], atol=1e-15)

    def test_velocity_consistent_with_ss_by_finite_differences(self):
        r = np.array([0.05, -0.03])
        xi0 = np.array([0.08, 0.01])
        omega, h = 3.7, 1e-6
        for t in (0.1, 0.3, 0.6):
            fd = (dcm_ss(r, xi0, omega, t + h) - dcm_ss(r, xi0, omega, t - h)) / (2 * h)
            v = dcm_velocity(dcm_ss(r, xi0, omega, t), r, omega)
            assert np.abs(fd - v).max() < 1e-8


class TestDsCoefficients:
    def test_constant_cubic(self):
        c = np.array([0.4, -0.1])
        a0, a1, a2, a3 = dcm_ds_coeffs(c, np.zeros(2), c, np.zeros(2), 0.2)
        assert np.allclose(a0, c, atol=0)
        for a in (a1, a2, a3):
            assert np.allclose(a, np.zeros(2), atol=1e-12)

    def test_hermite_case(self):
        # Oracle: solve the 4x4 boundary system for p0=0, p1=0.1, v0=v1=0, T=0.2.
        a0, a1, a2, a3 = dcm_ds_coeffs(np.zeros(2), np.zeros(2),
                                       np.array([0.1, 0.0]), np.zeros(2), 0.2)
        assert np.allclose(a0, [0.0, 0.0], atol=0)
        assert np.allclose(a1, [0.0, 0.0], atol=0)
        assert np.allclose(a2, [7.5, 0.0], atol=1e-12)
        assert np.allclose(a3, [-25.0, 0.0], atol=1e-12)

    def test_boundary_residuals_random(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            p0, v0, p1, v1 = (rng.uniform(-1, 1, 2) for _ in range(4))
            T = rng.uniform(0.05, 0.8)
            a0, a1, a2, a3 = dcm_ds_coeffs(p0, v0, p1, v1, T)

            def val(t):
                return a0 + a1 * t + a2 * t**2 + a3 * t**3

            def vel(t):
                return a1 + 2 * a2 * t + 3 * a3 * t**2

            # Oracle: verify against the boundary linear system directly.
            M = np.array([[1, 0, 0, 0],
                          [0, 1, 0, 0],
                          [1, T, T**2, T**3],
                          [0, 1, 2 * T, 3 * T**2]], dtype=float)
            rhs = np.stack([p0, v0, p1, v1])
            sol = np.linalg.solve(M, rhs)
            assert np.abs(np.stack([a0, a1, a2, a3]) - sol).max() < 1e-10
            assert np.abs(val(0) - p0).max() < 1e-12
            assert np.abs(vel(0) - v0).max() < 1e-12
            assert np.abs(val(T) - p1).max() < 1e-11
            assert np.abs(vel(T) - v1).max() < 1e-10


class TestPlanDcm:
    def test_standing_holds_midpoint(self):
        plan = FootstepPlan([], LEFT0, RIGHT0)
        mid = plan.final_stance_midpoint()
        traj = plan_dcm(plan, 4.3, mid)
        assert len(traj.pieces) == 1
        for t in (0.0, 1.0, 50.0):
            xi, xidot = traj.eval(t)
            assert np.allclose(xi, mid, atol=0)
            assert np.allclose(xidot, np.zeros(2), atol=0)
        assert np.allclose(traj.zmp_ref(1.0), mid, atol=0)

    def test_two_step_plan_boundaries_match(self):
        plan = make_plan(n_steps=2)
        traj = plan_dcm(plan, 4.3, plan.final_stance_midpoint())
        for a, b in zip(traj.pieces, traj.pieces[1:]):
            xa, va = a.eval(a.t1)
            xb, vb = b.eval(b.t0)
            assert np.abs(xa - xb).max() < 1e-9
            assert np.abs(va - vb).max() < 1e-9

    def test_backward_recursion_vs_independent_recursion(self):
        # Oracle: second implementation of the inverted exponential recursion.
        plan = make_plan(n_steps=4)
        omega = 4.3
        final = plan.final_stance_midpoint()
        traj = plan_dcm(plan, omega, final)

        corners = [None] * 5
        corners[4] = final
        for i in range(3, -1, -1):
            r = plan.support_pose(i)[:2]
            T = plan.footsteps[i].step_duration
            corners[i] = r + math.exp(-omega * T) * (corners[i + 1] - r)
        for got, want in zip(traj.corners, corners):
            assert np.abs(got - want).max() < 1e-12

    def test_last_step_exponential_lands_on_final_zmp(self):
        plan = make_plan(n_steps=4)
        omega = 4.3
        final = plan.final_stance_midpoint()
        traj = plan_dcm(plan, omega, final)
        last_ss = [p for p in traj.pieces if p.phase == "SS"][-1]
        # Extend the exponential to the nominal corner, half a transfer past
        # impact: it must land exactly on the terminal hold point.
        t_corner = (last_ss.t1 + plan.footsteps[-1].ds_duration / 2.0) - last_ss.t0
        xi = dcm_ss(last_ss.r_zmp, last_ss.xi0, omega, t_corner)
        assert np.abs(xi - final).max() < 1e-12

    def test_final_piece_ends_at_rest_on_final_zmp(self):
        plan = make_plan(n_steps=3)
        final = plan.final_stance_midpoint()
        traj = plan_dcm(plan, 4.3, final)
        settle = traj.pieces[-2]
        xi, xidot = settle.eval(settle.t1)
        assert np.abs(xi - final).max() < 1e-12
        assert np.abs(xidot).max() < 1e-12

    def test_initial_conditions_respected(self):
        plan = make_plan(n_steps=2, start=5.0)
        xi0 = np.array([0.02, -0.01])
        v0 = np.array([0.05, 0.0])
        traj = plan_dcm(plan, 4.3, plan.final_stance_midpoint(),
                        initial_dcm=xi0, initial_dcm_velocity=v0)
        xi, xidot = traj.eval(5.0)
        assert np.allclose(xi, xi0, atol=1e-15)
        assert np.allclose(xidot, v0, atol=1e-15)

    def test_c1_and_ode_residual_randomized_plans(self):
        # Acceptance-grade property scan on a module-test budget.
        for seed in range(20):
            rng = np.random.default_rng(seed)
            params = PlannerParams(
                step_duration=rng.uniform(0.6, 1.4),
                ds_duration=rng.uniform(0.1, 0.3),
                horizon_steps=int(rng.integers(4, 9)),
            )
            cmd = ComCommand(rng.uniform(0.06, 0.15), rng.uniform(-0.3, 0.3))
            plan = plan_footsteps(cmd, LEFT0, RIGHT0, params)
            omega = rng.uniform(3.0, 5.0)
            traj = plan_dcm(plan, omega, plan.final_stance_midpoint())
            traj.check_continuity(1e-9)
            # Every SS piece obeys the first-order dynamics by finite differences.
            h = 1e-6
            for piece in traj.pieces:
                if piece.phase != "SS":
                    continue
                for frac in (0.25, 0.5, 0.75):
                    t = piece.t0 + frac * (piece.t1 - piece.t0)
                    fd = (piece.eval(t + h)[0] - piece.eval(t - h)[0]) / (2 * h)
                    xi, _ = piece.eval(t)
                    ode = omega * (xi - piece.r_zmp)
                    assert np.abs(fd - ode).max() < 1e-8

    def test_inconsistent_timing_rejected(self):
        steps = [
            Footstep("right", [0.1, -0.08, 0.0], 1.0, 1.0, 0.2),
            Footstep("left", [0.2, 0.08, 0.0], 2.5, 1.0, 0.2),  # 0.5 s gap
        ]
        plan = FootstepPlan(steps, LEFT0, RIGHT0)
        with pytest.raises(PlanError, match="tile"):
            plan_dcm(plan, 4.3, plan.final_stance_midpoint())
