import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexlv.numerics import (
    E1, E2, E3,
    Polynomial, RationalTF, SingularityError, Table1D, Table2D,
    euler_kinematics, euler_to_matrix, interp, matrix_to_euler,
    rk4_step, rot_axis, tf_from_state_space,
)

angles_st = st.floats(-np.pi, np.pi)
unit_axes = st.sampled_from([E1, E2, E3, np.array([1.0, 1.0, 1.0]) / np.sqrt(3)])


class TestRotAxis:
    def test_zero_angle_identity(self):
        np.testing.assert_allclose(rot_axis(E1, 0.0), np.eye(3), atol=1e-15)

    def test_quarter_turn_about_z(self):
        np.testing.assert_allclose(rot_axis(E3, np.pi / 2) @ E1, E2, atol=1e-15)

    def test_small_angle_series(self):
        th = 0.1
        r = rot_axis(E2, th)
        approx = np.eye(3) + th * np.array([[0, 0, 1], [0, 0, 0], [-1, 0, 0]])
        assert np.max(np.abs(r - approx)) <= 1e-2

    def test_non_unit_axis_rejected(self):
        with pytest.raises(ValueError):
            rot_axis(np.array([1.0, 1.0, 0.0]), 0.3)

    @given(axis=unit_axes, angle=angles_st)
    @settings(max_examples=50)
    def test_inverse_composition(self, axis, angle):
        r = rot_axis(axis, angle) @ rot_axis(axis, -angle)
        assert np.max(np.abs(r - np.eye(3))) < 1e-12

    @given(axis=unit_axes, angle=angles_st)
    @settings(max_examples=50)
    def test_orthonormal(self, axis, angle):
        r = rot_axis(axis, angle)
        assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-12
        assert abs(np.linalg.det(r) - 1.0) < 1e-12

    def test_zero_angle_triple_composition(self):
        r = rot_axis(E1, 0.0) @ rot_axis(E3, 0.0) @ rot_axis(E2, 0.0)
        np.testing.assert_allclose(r, np.eye(3), atol=1e-15)


class TestEulerKinematics:
    def test_aligned_frames(self):
        rates = np.array([0.11, -0.2, 0.05])
        out = euler_kinematics(np.zeros(3), rates)
        np.testing.assert_allclose(out, rates, atol=1e-15)

    def test_planar_pitch(self):
        out = euler_kinematics(np.array([0.0, 0.7, 0.0]), np.array([0.0, 0.3, 0.0]))
        assert out[1] == pytest.approx(0.3, abs=1e-15)
        # vertical attitude is regular in this ordering
        out = euler_kinematics(np.array([0.0, np.pi / 2, 0.0]), np.array([0.0, 0.3, 0.0]))
        assert out[1] == pytest.approx(0.3, abs=1e-15)

    def test_singularity_guard(self):
        with pytest.raises(SingularityError):
            euler_kinematics(np.array([0.0, 0.5, np.pi / 2 - 1e-5]), np.ones(3))

    @given(phi=st.floats(-1.0, 1.0), theta=st.floats(-1.4, 1.4), psi=st.floats(-1.0, 1.0),
           p=st.floats(-1.0, 1.0), q=st.floats(-1.0, 1.0), r=st.floats(-1.0, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_finite_difference_consistency(self, phi, theta, psi, p, q, r):
        angles = np.array([phi, theta, psi])
        rates = np.array([p, q, r])
        adot = euler_kinematics(angles, rates)
        eps = 1e-7
        r0 = euler_to_matrix(angles)
        r1 = euler_to_matrix(angles + eps * adot)
        rdot_fd = (r1 - r0) / eps
        # attitude kinematics: R_bi_dot = R_bi [omega]_x
        omega_skew = np.array([
            [0.0, -r, q],
            [r, 0.0, -p],
            [-q, p, 0.0],
        ])
        rdot = r0 @ omega_skew
        assert np.max(np.abs(rdot - rdot_fd)) < 1e-6

    @given(phi=st.floats(-1.0, 1.0), theta=st.floats(-3.0, 3.0), psi=st.floats(-1.4, 1.4))
    @settings(max_examples=40)
    def test_matrix_euler_roundtrip(self, phi, theta, psi):
        angles = np.array([phi, theta, psi])
        back = matrix_to_euler(euler_to_matrix(angles))
        np.testing.assert_allclose(back, angles, atol=1e-9)


class TestRK4:
    def test_constant_state(self):
        y = rk4_step(lambda t, x: np.zeros(2), 0.0, np.array([3.0, -1.0]), 0.1)
        np.testing.assert_array_equal(y, [3.0, -1.0])

    def test_exponential(self):
        y = np.array([1.0])
        for k in range(100):
            y = rk4_step(lambda t, x: x, k * 0.01, y, 0.01)
        assert y[0] == pytest.approx(np.e, rel=1e-8)

    def test_oscillator_amplitude(self):
        w = 26.974
        def f(t, x):
            return np.array([x[1], -w * w * x[0]])
        y = np.array([1.0, 0.0])
        dt = 1e-3
        for k in range(1000):
            y = rk4_step(f, k * dt, y, dt)
        energy = y[1] ** 2 + (w * y[0]) ** 2
        assert np.sqrt(energy) / w == pytest.approx(1.0, abs=1e-5)

    def test_order(self):
        def err(dt):
            y = rk4_step(lambda t, x: x, 0.0, np.array([1.0]), dt)
            return abs(y[0] - np.exp(dt))
        assert err(0.1) / err(0.05) >= 8.0 * 0.9

    def test_nonfinite_derivative_flagged(self):
        with pytest.raises(FloatingPointError) as exc:
            rk4_step(lambda t, x: np.array([np.nan, 1.0]), 0.0, np.zeros(2), 0.1)
        assert "0" in str(exc.value)

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            rk4_step(lambda t, x: x, 0.0, np.array([1.0]), 0.0)


class TestTables:
    def test_breakpoints_exact(self):
        t = Table1D([0.0, 1.0, 2.0], [5.0, 7.0, -1.0])
        assert interp(t, 1.0) == 7.0
        assert interp(t, 0.0) == 5.0

    def test_midpoint_mean(self):
        t = Table1D([0.0, 1.0], [4.0, 8.0])
        assert interp(t, 0.5) == pytest.approx(6.0)

    def test_clamping(self):
        t = Table1D([0.0, 1.0], [4.0, 8.0])
        assert interp(t, -5.0) == 4.0
        assert interp(t, 9.0) == 8.0

    def test_mass_table_interpolation(self):
        # 60% fuel from the 50%/75% rows of the inertial-data table
        t = Table1D([0.5, 0.75], [441841.74, 511784.213])
        assert interp(t, 0.6) == pytest.approx(469818.729, abs=1e-3)

    def test_strictly_increasing_required(self):
        with pytest.raises(ValueError):
            Table1D([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])

    def test_bilinear_corners_and_center(self):
        t = Table2D([0.0, 1.0], [0.0, 2.0], [[1.0, 3.0], [5.0, 7.0]])
        assert t(0.0, 0.0) == 1.0
        assert t(1.0, 2.0) == 7.0
        assert t(0.5, 1.0) == pytest.approx(4.0)

    @given(q=st.floats(0.0, 3.0))
    @settings(max_examples=40)
    def test_monotone_bounded(self, q):
        t = Table1D([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 4.0, 9.0])
        lo = int(np.floor(np.clip(q, 0, 2)))
        val = interp(t, q)
        assert t.values[lo] - 1e-12 <= val <= t.values[min(lo + 1, 3)] + 1e-12


class TestPolynomialTF:
    def test_poly_mul_eval(self):
        p = Polynomial([1.0, 2.0]) * Polynomial([1.0, -2.0])
        np.testing.assert_allclose(p.coeffs, [1.0, 0.0, -4.0])
        assert p(3.0) == pytest.approx(5.0)

    def test_leading_zero_trim(self):
        assert Polynomial([0.0, 0.0, 2.0, 1.0]).degree == 1

    def test_tf_dc_and_poles(self):
        tf = RationalTF([2.0, 4.0], [1.0, 3.0, 2.0])
        assert tf.dc_gain() == pytest.approx(2.0)
        np.testing.assert_allclose(sorted(tf.poles()), [-2.0, -1.0])

    def test_tf_series(self):
        a = RationalTF([1.0], [1.0, 1.0])
        b = RationalTF([2.0], [1.0, 2.0])
        ab = a * b
        assert ab(0.5) == pytest.approx(a(0.5) * b(0.5))

    def test_cancel(self):
        tf = RationalTF(np.polymul([1.0, 1.0], [1.0, 5.0]), np.polymul([1.0, 1.0], [1.0, 9.0]))
        red = tf.cancel()
        assert red.num.degree == 1 and red.den.degree == 1
        assert red(2.0) == pytest.approx(tf(2.0))

    def test_state_space_tf_matches_direct(self):
        a = np.array([[-1.0, 2.0], [0.0, -3.0]])
        b = np.array([1.0, 1.0])
        c = np.array([1.0, 0.0])
        tf = tf_from_state_space(a, b, c)
        s = 0.7j
        direct = c @ np.linalg.solve(s * np.eye(2) - a, b)
        assert tf(s) == pytest.approx(direct, rel=1e-12)
