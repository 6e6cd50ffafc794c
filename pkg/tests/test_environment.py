import numpy as np
import pytest

from flexlv.environment import (
    KNOT, AtmosphereState, WindSpec, atmosphere, wind_in_launch_frame, wind_velocity,
)


class TestAtmosphere:
    def test_sea_level_pressure_exact(self):
        assert atmosphere(0.0).pressure == 101.325

    def test_tropopause(self):
        assert atmosphere(11000.0).pressure == pytest.approx(22.632, rel=5e-3)

    def test_high_altitude_decay(self):
        assert atmosphere(80e3).pressure < 0.02
        assert atmosphere(120e3).pressure < atmosphere(100e3).pressure

    def test_negative_altitude_clamps(self):
        assert atmosphere(-100.0) == atmosphere(0.0)

    def test_above_cap_rejected(self):
        with pytest.raises(ValueError):
            atmosphere(151e3)

    def test_monotone_profile(self):
        alts = np.arange(0.0, 80001.0, 1000.0)
        states = [atmosphere(h) for h in alts]
        p = np.array([s.pressure for s in states])
        rho = np.array([s.density for s in states])
        assert np.all(np.diff(p) < 0.0)
        assert np.all(np.diff(rho) < 0.0)
        assert all(s.temperature > 0 and s.speed_of_sound > 0 for s in states)

    def test_sea_level_state(self):
        s = atmosphere(0.0)
        assert s.density == pytest.approx(1.225, rel=1e-3)
        assert s.speed_of_sound == pytest.approx(340.3, rel=1e-3)


class TestWind:
    def test_zero(self):
        np.testing.assert_array_equal(wind_velocity(WindSpec()), np.zeros(3))

    def test_ten_knots_north(self):
        w = wind_velocity(WindSpec(north=5.144, east=0.0))
        assert w[0] == pytest.approx(10.0 * KNOT, rel=1e-3)
        assert w[1] == 0.0

    def test_diagonal_magnitude(self):
        w = wind_velocity(WindSpec(north=5.144, east=5.144))
        assert np.linalg.norm(w) == pytest.approx(7.275, abs=1e-3)

    def test_launch_frame_rotation(self):
        # x axis along azimuth 135 deg: a NE wind becomes pure crosswind
        w = wind_in_launch_frame(WindSpec(north=5.144, east=5.144), np.radians(135.0))
        assert w[0] == pytest.approx(0.0, abs=1e-12)
        assert w[1] == pytest.approx(-7.275, abs=1e-3)

    def test_launch_frame_identity_azimuth(self):
        spec = WindSpec(north=3.0, east=-1.0)
        np.testing.assert_allclose(wind_in_launch_frame(spec, 0.0), wind_velocity(spec))
