import math

import numpy as np
import pytest

from telewalk.dcm_control import (
    GainBoundError,
    GainSet,
    IntegralState,
    LipmState,
    com_reference_step,
    dcm_controller,
    dcm_from_state,
    is_positive_definite,
    lipm_step,
    omega_from_com_height,
    zmp_com_controller,
)

OMEGA = omega_from_com_height(0.53)


def valid_gains(kp=2.0, ki=0.05, kzmp=1.0, kcom=6.0, omega=OMEGA):
    return GainSet.diagonal(kp, ki, kzmp, kcom, omega)


class TestGainValidation:
    def test_defaults_accepted(self):
        valid_gains()

    def test_kp_at_identity_rejected(self):
        with pytest.raises(GainBoundError, match="kp_dcm"):
            valid_gains(kp=1.0)

    def test_ki_zero_rejected(self):
        with pytest.raises(GainBoundError, match="ki_dcm"):
            valid_gains(ki=0.0)

    def test_kcom_below_omega_rejected(self):
        with pytest.raises(GainBoundError, match="k_com"):
            valid_gains(kcom=OMEGA * 0.9)

    def test_kzmp_above_omega_rejected(self):
        with pytest.raises(GainBoundError, match="k_zmp"):
            valid_gains(kzmp=OMEGA * 1.5)

    def test_accepted_iff_eigenvalue_conditions_hold(self):
        # Property: random symmetric candidates pass construction exactly when
        # the four eigenvalue bounds hold.
        rng = np.random.default_rng(50)
        accepted = rejected = 0
        for _ in range(200):
            def sym(scale, shift):
                A = rng.uniform(-scale, scale, (2, 2))
                return (A + A.T) / 2.0 + shift * np.eye(2)

            kp = sym(0.6, rng.uniform(0.8, 2.5))
            ki = sym(0.05, rng.uniform(-0.02, 0.2))
            kz = sym(0.8, rng.uniform(0.5, 4.5))
            kc = sym(0.8, rng.uniform(3.5, 8.0))
            should_pass = (
                is_positive_definite(kp - np.eye(2))
                and is_positive_definite(ki)
                and is_positive_definite(kc - OMEGA * np.eye(2))
                and is_positive_definite(kz)
                and is_positive_definite(OMEGA * np.eye(2) - kz)
            )
            try:
                GainSet(kp, ki, kz, kc, OMEGA)
                ok = True
                accepted += 1
            except GainBoundError:
                ok = False
                rejected += 1
            assert ok == should_pass
        assert accepted > 10 and rejected > 10


class TestDcmController:
    def test_zero_error_feedthrough(self):
        g = valid_gains()
        xi_ref = np.array([0.1, 0.05])
        xidot_ref = np.array([0.2, -0.1])
        out = dcm_controller(xi_ref, xi_ref, xidot_ref, IntegralState.zero(), g)
        assert np.allclose(out, xi_ref - xidot_ref / g.omega, atol=1e-15)

    def test_proportional_term(self):
        g = valid_gains(kp=2.0)
        xi_ref = np.array([0.3, -0.2])
        out = dcm_controller(xi_ref + [0.01, 0.0], xi_ref, np.zeros(2),
                             IntegralState.zero(), g)
        assert np.allclose(out, xi_ref + [0.02, 0.0], atol=1e-15)

    def test_integral_term(self):
        g = valid_gains(ki=0.5)
        integral = IntegralState(np.array([0.02, -0.01]))
        xi_ref = np.zeros(2)
        out = dcm_controller(xi_ref, xi_ref, np.zeros(2), integral, g)
        assert np.allclose(out, 0.5 * integral.value, atol=1e-15)

    def test_closed_loop_decay_rate_matches_analytic_oracle(self):
        # Oracle: substituting the control into the first-order dynamics with a
        # negligible integral gain gives error decay at rate omega*(kp - 1).
        kp, dt = 1.8, 0.01
        g = valid_gains(kp=kp, ki=1e-6)
        state = LipmState(np.array([0.05, 0.0]), np.zeros(2))
        xi_ref = np.zeros(2)
        integral = IntegralState.zero()
        errs = []
        for _ in range(100):
            xi = dcm_from_state(state, g.omega)
            errs.append(np.linalg.norm(xi - xi_ref))
            zmp = dcm_controller(xi, xi_ref, np.zeros(2), integral, g)
            integral = integral.advanced(xi - xi_ref, dt)
            state = lipm_step(state, zmp, g.omega, dt)
        errs = np.array(errs)
        t = np.arange(100) * dt
        rate = -np.polyfit(t, np.log(errs), 1)[0]
        expected = g.omega * (kp - 1.0)
        assert abs(rate - expected) / expected < 0.05

    def test_error_norm_non_increasing_20_random_valid_draws(self):
        # Integral action adds a slow mode whose rebound scales with ki; the
        # draws keep ki small so non-increase holds to the stated quantization.
        rng = np.random.default_rng(51)
        dt = 0.01
        for _ in range(20):
            def rand_pd(lo, hi):
                Q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
                return Q @ np.diag(rng.uniform(lo, hi, 2)) @ Q.T

            g = GainSet(np.eye(2) + rand_pd(1.0, 2.5), rand_pd(1e-4, 2e-3),
                        rand_pd(0.3, 3.0), OMEGA * np.eye(2) + rand_pd(0.5, 3.0),
                        OMEGA)
            state = LipmState(rng.uniform(-0.05, 0.05, 2), np.zeros(2))
            xi_ref = np.zeros(2)
            integral = IntegralState.zero()
            prev, err = None, None
            for k in range(200):
                xi = dcm_from_state(state, g.omega)
                err = np.linalg.norm(xi - xi_ref)
                if k >= 1:
                    # Non-increasing down to the integral-mode floor, three
                    # orders below the initial error.
                    assert err <= max(prev, 5e-5)
                prev = err
                zmp = dcm_controller(xi, xi_ref, np.zeros(2), integral, g)
                integral = integral.advanced(xi - xi_ref, dt)
                state = lipm_step(state, zmp, g.omega, dt)
            assert err < 1e-4


class TestZmpComController:
    def test_all_matched_passes_feedforward(self):
        g = valid_gains()
        xdot_ref = np.array([0.15, -0.02])
        zmp = np.array([0.3, 0.1])
        x = np.array([0.28, 0.12])
        out = zmp_com_controller(xdot_ref, zmp, zmp, x, x, g)
        assert np.allclose(out, xdot_ref, atol=0)

    def test_zmp_error_sign_as_specified(self):
        g = valid_gains(kzmp=1.0)
        out = zmp_com_controller(np.zeros(2), np.array([0.01, 0.0]), np.zeros(2),
                                 np.zeros(2), np.zeros(2), g)
        assert np.allclose(out, [-0.01, 0.0], atol=1e-15)

    def test_random_inputs_vs_independent_expression(self):
        rng = np.random.default_rng(52)
        g = GainSet(np.eye(2) * 2.1, np.eye(2) * 0.1,
                    np.array([[0.9, 0.1], [0.1, 1.2]]),
                    np.array([[6.0, -0.2], [-0.2, 5.5]]), OMEGA)
        for _ in range(50):
            xdot_ref, zr, zm, xr, xm = (rng.uniform(-1, 1, 2) for _ in range(5))
            out = zmp_com_controller(xdot_ref, zr, zm, xr, xm, g)
            oracle = xdot_ref - g.k_zmp.dot(zr - zm) + g.k_com.dot(xr - xm)
            assert np.abs(out - oracle).max() < 1e-15


class TestLipmPlant:
    def test_equilibrium_is_fixed_point(self):
        r = np.array([0.2, -0.1])
        s = lipm_step(LipmState(r, np.zeros(2)), r, 3.0, 0.1)
        assert np.array_equal(s.x, r)
        assert np.array_equal(s.xdot, np.zeros(2))

    def test_closed_form_cosh_sinh(self):
        # Oracle: x - r = 0.01*cosh(0.3), xdot = 0.01*3*sinh(0.3).
        s = lipm_step(LipmState([0.01, 0.0], [0.0, 0.0]), np.zeros(2), 3.0, 0.1)
        assert s.x[0] == pytest.approx(0.01 * math.cosh(0.3), abs=1e-17)
        assert s.xdot[0] == pytest.approx(0.03 * math.sinh(0.3), abs=1e-17)
        assert s.x[0] == pytest.approx(0.0104534, abs=1e-7)
        assert s.xdot[0] == pytest.approx(0.0091356, abs=1e-7)
        assert s.x[1] == 0.0 and s.xdot[1] == 0.0

    def test_dcm_of_plant_follows_exponential_identity(self):
        # The plant flow and the capture-point exponential agree exactly.
        rng = np.random.default_rng(53)
        for _ in range(50):
            omega = rng.uniform(2.0, 6.0)
            state = LipmState(rng.uniform(-0.2, 0.2, 2), rng.uniform(-0.4, 0.4, 2))
            r = rng.uniform(-0.2, 0.2, 2)
            dt = rng.uniform(0.005, 0.2)
            xi0 = dcm_from_state(state, omega)
            xi1 = dcm_from_state(lipm_step(state, r, omega, dt), omega)
            expected = r + math.exp(omega * dt) * (xi0 - r)
            assert np.abs(xi1 - expected).max() < 1e-12

    def test_step_composition(self):
        rng = np.random.default_rng(54)
        for _ in range(50):
            omega = rng.uniform(2.0, 6.0)
            state = LipmState(rng.uniform(-0.2, 0.2, 2), rng.uniform(-0.4, 0.4, 2))
            r = rng.uniform(-0.2, 0.2, 2)
            dt1, dt2 = rng.uniform(0.005, 0.15, 2)
            a = lipm_step(lipm_step(state, r, omega, dt1), r, omega, dt2)
            b = lipm_step(state, r, omega, dt1 + dt2)
            assert np.abs(a.x - b.x).max() < 1e-12
            assert np.abs(a.xdot - b.xdot).max() < 1e-12

    def test_dcm_dynamics_by_finite_differences(self):
        omega, h = 4.0, 1e-6
        state = LipmState([0.05, -0.02], [0.1, 0.04])
        r = np.array([0.01, 0.01])
        plus = dcm_from_state(lipm_step(state, r, omega, h), omega)
        xi = dcm_from_state(state, omega)
        fd = (plus - xi) / h
        assert np.abs(fd - omega * (xi - r)).max() < 1e-4  # forward diff, O(h)
        mid = lipm_step(state, r, omega, h)
        plus2 = dcm_from_state(lipm_step(mid, r, omega, h), omega)
        central = (plus2 - xi) / (2 * h)
        assert np.abs(central - omega * (dcm_from_state(mid, omega) - r)).max() < 1e-8


class TestHelpers:
    def test_dcm_from_state_trivial(self):
        assert np.allclose(dcm_from_state(LipmState([0.1, 0.0], [0.0, 0.0]), 3.0),
                           [0.1, 0.0], atol=0)
        assert np.allclose(dcm_from_state(LipmState([0.1, 0.0], [0.03, 0.0]), 3.0),
                           [0.11, 0.0], atol=1e-15)

    def test_omega_from_height(self):
        assert omega_from_com_height(0.53) == pytest.approx(math.sqrt(9.81 / 0.53))
        assert omega_from_com_height(0.53) == pytest.approx(4.30, abs=0.01)

    def test_integral_clamps(self):
        s = IntegralState.zero(bound=0.05)
        for _ in range(100):
            s = s.advanced(np.array([1.0, -1.0]), 0.01)
        assert np.allclose(s.value, [0.05, -0.05], atol=0)

    def test_com_reference_converges_to_dcm_ref(self):
        x = np.array([0.0, 0.0])
        xi_ref = np.array([0.1, -0.05])
        for _ in range(2000):
            x = com_reference_step(x, xi_ref, OMEGA, 0.01)
        assert np.abs(x - xi_ref).max() < 1e-9

    def test_com_reference_fixed_point(self):
        xi_ref = np.array([0.1, -0.05])
        out = com_reference_step(xi_ref.copy(), xi_ref, OMEGA, 0.01)
        assert np.array_equal(out, xi_ref)
