import numpy as np
import pytest

from flexlv import flex
from flexlv.flex import (
    ModalDataset, beam_modal_dataset, bent_engine_forces, bent_engine_moments,
    default_modal_dataset, divergence_detected, flex_derivatives,
    load_modal_dataset, save_modal_dataset, sensed_outputs,
)
from flexlv.numerics import euler_to_matrix, rk4_step
from flexlv.vehicle import default_layout, engine_forces, engine_moments, mass_properties


@pytest.fixture(scope="module")
def data():
    return default_modal_dataset()


layout = default_layout()
mass = mass_properties(0.6)


class TestDataset:
    def test_frequencies_match_design_values(self, data):
        w1 = 2 * np.pi * 4.293
        w2 = 2 * np.pi * 11.559
        np.testing.assert_allclose(data.freqs, [w1, w1, w2, w2], rtol=1e-12)
        assert 727.0 <= data.omega2[0] <= 728.0
        assert 5270.0 <= data.omega2[2] <= 5280.0

    def test_denominator_factor_consistency(self, data):
        # 2 zeta Omega and Omega^2 against the quoted quadratic factors
        assert data.two_zeta_omega[0] == pytest.approx(0.7826, rel=5e-3)
        assert data.omega2[0] == pytest.approx(727.6, rel=5e-3)
        assert data.two_zeta_omega[2] == pytest.approx(2.14, rel=5e-3)
        assert data.omega2[2] == pytest.approx(5275.0, rel=5e-3)

    def test_mode_pairs_share_frequency(self, data):
        assert data.freqs[0] == data.freqs[1]
        assert data.freqs[2] == data.freqs[3]

    def test_plane_partition(self, data):
        # y-plane modes have no z rows and vice versa
        assert data.phi_y_t[1] == 0.0 and data.phi_y_t[3] == 0.0
        assert data.phi_z_t[0] == 0.0 and data.phi_z_t[2] == 0.0
        np.testing.assert_allclose(np.abs(data.phi_y_t[[0, 2]]), np.abs(data.phi_z_t[[1, 3]]))

    def test_sensor_near_first_mode_node(self):
        # displacement at the sensor station is far below the nozzle value
        d = beam_modal_dataset(participation=(1.0, 1.0))
        x = np.array([15.0])
        w, _ = flex._beam_shape(x, flex._BETA_L[0] / 70.0, 70.0)
        assert abs(w[0]) < 0.1 * abs(d.phi_y_t[0]) * np.sqrt(441841.74)

    def test_validation(self):
        with pytest.raises(ValueError):
            ModalDataset(freqs=[1.0, -1.0, 2.0, 2.0], dampings=[0.1] * 4,
                         phi_y_t=np.zeros(4), phi_z_t=np.zeros(4),
                         sigma_y_t=np.zeros(4), sigma_z_t=np.zeros(4),
                         sigma_y_g=np.zeros(4), sigma_z_g=np.zeros(4))

    def test_file_roundtrip(self, data, tmp_path):
        path = tmp_path / "modal.yaml"
        save_modal_dataset(data, path)
        back = load_modal_dataset(path)
        for name in ("freqs", "dampings", "phi_y_t", "phi_z_t",
                     "sigma_y_t", "sigma_z_t", "sigma_y_g", "sigma_z_g"):
            np.testing.assert_allclose(getattr(back, name), getattr(data, name), rtol=1e-12)


class TestFlexDerivatives:
    def test_axial_thrust_no_excitation(self, data):
        forces = engine_forces(layout, np.zeros((9, 2)), 905e3)
        _, xi_ddot = flex_derivatives(np.zeros(4), np.zeros(4), forces, data)
        np.testing.assert_allclose(xi_ddot, np.zeros(4), atol=1e-9)

    def test_free_decay_envelope(self, data):
        # free oscillation of mode 1: frequency and damping envelope
        w1, z1 = data.freqs[0], data.dampings[0]
        state = np.array([1.0, 0.0])

        def f(t, x):
            return np.array([x[1], -w1 * w1 * x[0] - 2 * z1 * w1 * x[1]])

        dt = 1e-3
        xs = [1.0]
        for k in range(4000):
            state = rk4_step(f, k * dt, state, dt)
            xs.append(state[0])
        xs = np.array(xs)
        t = np.arange(xs.size) * dt
        # zero crossings give the damped period
        crossings = np.where(np.diff(np.sign(xs)) != 0)[0]
        period = 2 * np.mean(np.diff(t[crossings]))
        assert 2 * np.pi / period == pytest.approx(w1 * np.sqrt(1 - z1**2), rel=1e-3)
        # envelope at t=2 s
        idx = 2000
        envelope = np.exp(-z1 * w1 * t[idx])
        assert np.max(np.abs(xs[idx - 120:idx + 120])) == pytest.approx(envelope, rel=0.05)

    def test_static_gain(self, data):
        # constant generalized force -> xi settles at force / Omega^2
        eta = np.radians(1.0)
        cmd = np.column_stack([np.zeros(9), np.full(9, eta)])
        forces = engine_forces(layout, cmd, 905e3)
        total = forces.sum(axis=0)
        expected = (data.phi_t() @ total) / data.omega2
        _, xi_ddot = flex_derivatives(expected, np.zeros(4), forces, data)
        np.testing.assert_allclose(xi_ddot, np.zeros(4), atol=1e-6)

    def test_energy_decay(self, data):
        # unforced modal energy is non-increasing
        rng = np.random.default_rng(5)
        xi = rng.normal(size=4)
        xid = rng.normal(size=4)

        def f(t, x):
            d_xi, d_xid = flex_derivatives(x[:4], x[4:], np.zeros((9, 3)), data)
            return np.concatenate([d_xi, d_xid])

        state = np.concatenate([xi, xid])
        energy_prev = np.inf
        for k in range(2000):
            state = rk4_step(f, k * 1e-3, state, 1e-3)
            if k % 100 == 0:
                e = 0.5 * state[4:] @ state[4:] + 0.5 * state[:4] @ (data.omega2 * state[:4])
                assert e <= energy_prev + 1e-12
                energy_prev = e


class TestBentForces:
    def test_zero_xi_identity(self, data):
        cmd = np.radians(np.random.default_rng(1).uniform(-3, 3, (9, 2)))
        rigid = engine_forces(layout, cmd, 905e3)
        bent = bent_engine_forces(layout, cmd, 905e3, np.zeros(4), data)
        np.testing.assert_array_equal(bent, rigid)

    def test_pure_pitch_plane_rotation(self, data):
        # choose xi so the z-plane rotation is eps, y-plane zero
        eps = np.radians(1.5)
        xi = np.zeros(4)
        xi[1] = eps / data.sigma_z_t[1]
        bent = bent_engine_forces(layout, np.zeros((9, 2)), 905e3, xi, data)
        np.testing.assert_allclose(
            bent[0], [905e3 * np.cos(eps), 0.0, -905e3 * np.sin(eps)], rtol=1e-12)

    def test_small_angle_linearity(self, data):
        t = 905e3
        for eps_deg in (0.5, 2.0):
            eps = np.radians(eps_deg)
            xi = np.zeros(4)
            xi[1] = eps / data.sigma_z_t[1]
            bent = bent_engine_forces(layout, np.zeros((9, 2)), t, xi, data)
            assert bent[0, 2] == pytest.approx(-t * eps, rel=1e-2)


class TestBentMoments:
    def test_zero_xi_matches_rigid(self, data):
        cmd = np.radians(np.random.default_rng(2).uniform(-3, 3, (9, 2)))
        f_r, tau_r = engine_moments(layout, cmd, 905e3, mass)
        f_b, tau_b = bent_engine_moments(layout, cmd, 905e3, np.zeros(4), data, mass)
        np.testing.assert_allclose(f_b, f_r, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(tau_b, tau_r, rtol=1e-12, atol=1e-12)

    def test_bent_thrust_line_produces_moment(self, data):
        xi = np.array([0.0, 0.4, 0.0, 0.0])
        f_b, tau_b = bent_engine_moments(layout, np.zeros((9, 2)), 905e3, xi, data, mass)
        assert abs(f_b[2]) > 0.0
        assert abs(tau_b[1]) > 0.0

    def test_displacement_arm_term_isolated(self, data):
        # difference between full moment and slope-only moment equals
        # (nozzle displacement) x (total force)
        xi = np.array([0.1, 0.3, -0.2, 0.15])
        cmd = np.radians(np.random.default_rng(3).uniform(-2, 2, (9, 2)))
        t = 905e3
        f_full, tau_full = bent_engine_moments(layout, cmd, t, xi, data, mass)
        no_disp = ModalDataset(
            freqs=data.freqs, dampings=data.dampings,
            phi_y_t=np.zeros(4), phi_z_t=np.zeros(4),
            sigma_y_t=data.sigma_y_t, sigma_z_t=data.sigma_z_t,
            sigma_y_g=data.sigma_y_g, sigma_z_g=data.sigma_z_g)
        f_slope, tau_slope = bent_engine_moments(layout, cmd, t, xi, no_disp, mass)
        disp = np.array([0.0, data.phi_y_t @ xi, data.phi_z_t @ xi])
        np.testing.assert_allclose(tau_full - tau_slope, np.cross(disp, f_full), rtol=1e-9)
        np.testing.assert_allclose(f_full, f_slope, rtol=1e-12)


class TestSensedOutputs:
    def test_zero_xi_exact(self, data):
        angles = np.array([0.05, 1.2, -0.03])
        omega = np.array([0.01, -0.02, 0.005])
        r_bi = euler_to_matrix(angles)
        euler_m, omega_m = sensed_outputs(r_bi, omega, np.zeros(4), np.zeros(4), data)
        np.testing.assert_allclose(euler_m, angles, atol=1e-12)
        np.testing.assert_array_equal(omega_m, omega)

    def test_rate_pickup_exact(self, data):
        xid = np.array([1.0, 0.0, 0.0, 0.0])
        _, omega_m = sensed_outputs(np.eye(3), np.zeros(3), np.zeros(4), xid, data)
        np.testing.assert_allclose(
            omega_m, [0.0, data.sigma_z_g[0], data.sigma_y_g[0]], atol=1e-15)

    def test_roll_unaffected(self, data):
        rng = np.random.default_rng(11)
        xi = rng.normal(scale=5.0, size=4)
        xid = rng.normal(scale=5.0, size=4)
        angles = np.array([0.04, 0.9, 0.02])
        omega = np.array([0.3, 0.0, 0.0])
        euler_m, omega_m = sensed_outputs(euler_to_matrix(angles), omega, xi, xid, data)
        assert omega_m[0] == omega[0]
        assert euler_m[0] == pytest.approx(angles[0], abs=5e-4)

    def test_small_angle_warning(self, data):
        xi = np.full(4, 0.3 / np.max(np.abs(data.sigma_z_g[[1, 3]])))
        with pytest.warns(RuntimeWarning):
            sensed_outputs(np.eye(3), np.zeros(3), xi, np.zeros(4), data)

    def test_plane_symmetry(self, data):
        # equal-magnitude y- and z-plane modal rates give equal-magnitude
        # yaw and pitch pickups
        xid_y = np.array([1.0, 0.0, 0.0, 0.0])
        xid_z = np.array([0.0, 1.0, 0.0, 0.0])
        _, om_y = sensed_outputs(np.eye(3), np.zeros(3), np.zeros(4), xid_y, data)
        _, om_z = sensed_outputs(np.eye(3), np.zeros(3), np.zeros(4), xid_z, data)
        assert abs(om_y[2]) == pytest.approx(abs(om_z[1]), rel=1e-12)


class TestDivergence:
    def test_quiet_state(self, data):
        assert not divergence_detected(np.zeros(4), np.zeros(3), data)

    def test_rate_pickup_bound(self, data):
        xid = np.zeros(4)
        xid[1] = 1.1 / abs(data.sigma_z_g[1])
        assert divergence_detected(xid, np.zeros(3), data)

    def test_attitude_bound(self, data):
        assert divergence_detected(np.zeros(4), np.array([0.0, np.radians(21.0), 0.0]), data)
