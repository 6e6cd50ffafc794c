"""Atmosphere, gravity, and wind models.

Layered US-Standard-1976-style analytic atmosphere (no lookup files);
above the last tabulated base the pressure/density decay is continued
exponentially with the local scale height. Gravity is uniform and the
earth is treated as flat and non-rotating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAVITY = 9.80665          # m/s^2
GAS_CONSTANT_AIR = 287.052874   # J/(kg K)
GAMMA_AIR = 1.4
KNOT = 0.514444            # m/s
MAX_ALTITUDE = 150e3       # m, model validity cap

# layer base geopotential altitude [m], base temperature [K], lapse [K/m]
_BASE_H = np.array([0.0, 11000.0, 20000.0, 32000.0, 47000.0, 51000.0, 71000.0, 84852.0])
_LAPSE = np.array([-0.0065, 0.0, 0.001, 0.0028, 0.0, -0.0028, -0.002, 0.0])
_BASE_T = np.empty(8)
_BASE_P = np.empty(8)
_BASE_T[0] = 288.15
_BASE_P[0] = 101325.0
for _i in range(1, 8):
    _dh = _BASE_H[_i] - _BASE_H[_i - 1]
    _lr = _LAPSE[_i - 1]
    _BASE_T[_i] = _BASE_T[_i - 1] + _lr * _dh
    if _lr == 0.0:
        _BASE_P[_i] = _BASE_P[_i - 1] * np.exp(-GRAVITY * _dh / (GAS_CONSTANT_AIR * _BASE_T[_i - 1]))
    else:
        _BASE_P[_i] = _BASE_P[_i - 1] * (_BASE_T[_i] / _BASE_T[_i - 1]) ** (-GRAVITY / (GAS_CONSTANT_AIR * _lr))


@dataclass(frozen=True)
class AtmosphereState:
    pressure: float        # kPa
    density: float         # kg/m^3
    speed_of_sound: float  # m/s
    temperature: float     # K


@dataclass(frozen=True)
class WindSpec:
    """Constant wind given by north/east components in m/s."""
    north: float = 0.0
    east: float = 0.0


def atmosphere(altitude: float) -> AtmosphereState:
    """Ambient air state at geometric altitude [m]. Negative altitudes clamp
    to sea level; above the top layer base the decay continues exponentially."""
    if altitude > MAX_ALTITUDE:
        raise ValueError(f"altitude {altitude} m above model cap {MAX_ALTITUDE} m")
    h = max(float(altitude), 0.0)

    if h >= _BASE_H[-1]:
        t = _BASE_T[-1]
        scale = GAS_CONSTANT_AIR * t / GRAVITY
        p = _BASE_P[-1] * np.exp(-(h - _BASE_H[-1]) / scale)
    else:
        i = int(np.searchsorted(_BASE_H, h, side="right") - 1)
        dh = h - _BASE_H[i]
        lr = _LAPSE[i]
        if lr == 0.0:
            t = _BASE_T[i]
            p = _BASE_P[i] * np.exp(-GRAVITY * dh / (GAS_CONSTANT_AIR * t))
        else:
            t = _BASE_T[i] + lr * dh
            p = _BASE_P[i] * (t / _BASE_T[i]) ** (-GRAVITY / (GAS_CONSTANT_AIR * lr))

    rho = p / (GAS_CONSTANT_AIR * t)
    a = np.sqrt(GAMMA_AIR * GAS_CONSTANT_AIR * t)
    return AtmosphereState(pressure=p / 1000.0, density=rho, speed_of_sound=a, temperature=t)


def wind_velocity(spec: WindSpec) -> np.ndarray:
    """Constant wind vector in north-east-down axes [m/s]."""
    return np.array([spec.north, spec.east, 0.0])


def wind_in_launch_frame(spec: WindSpec, azimuth_rad: float) -> np.ndarray:
    """Wind vector expressed in the launch frame whose +x axis points along
    the launch azimuth (measured clockwise from north), +z down."""
    ca, sa = np.cos(azimuth_rad), np.sin(azimuth_rad)
    return np.array([
        spec.north * ca + spec.east * sa,
        -spec.north * sa + spec.east * ca,
        0.0,
    ])
