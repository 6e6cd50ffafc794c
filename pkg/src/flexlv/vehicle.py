"""Vehicle model: mass properties vs. fuel fraction, 9-engine gimballed
propulsion, aerodynamic tables, and rigid-body derivative assembly.

Units: thrust law is in kN with pressure in kPa; everything else works in
SI (forces in N, moments in N m, angles in rad).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _core
from .numerics import Table2D

Array = np.ndarray

VEHICLE_LENGTH = 70.0       # m, nozzle station from nose
SENSOR_STATION = 15.0       # m from nose
RING_RADIUS = 1.33          # m, outer engine ring
BURN_DURATION = 165.0       # s, 100% -> 0% fuel
GIMBAL_LIMIT = np.radians(5.0)
THRUST_VACUUM_KN = 914.11
THRUST_SLOPE_KN_PER_KPA = 0.68
REF_DIAMETER = 3.7          # m
REF_AREA = np.pi * REF_DIAMETER**2 / 4.0

# estimated inertial data at 100/75/50/25/0 % fuel
MASS_TABLE = {
    "fuel_fraction": np.array([0.0, 0.25, 0.50, 0.75, 1.0]),
    "mass_kg": np.array([301956.795, 371899.268, 441841.74, 511784.213, 581726.686]),
    "cg_m": np.array([31.093342, 36.340671, 38.542382, 38.939239, 38.19231]),
    "jxx": np.array([1.083e6, 1.191e6, 1.299e6, 1.408e6, 1.516e6]),
    "jyy": np.array([1.94e8, 2.388e8, 2.506e8, 2.516e8, 2.545e8]),
}


@dataclass(frozen=True)
class MassProperties:
    m: float            # kg
    m_dot: float        # kg/s
    x_cg: float         # m from nose
    inertia: Array      # 3x3, kg m^2, diag(jxx, jyy, jyy)
    inertia_dot: Array  # 3x3, kg m^2/s


@dataclass(frozen=True)
class EngineLayout:
    """Nine engines: index 0 on the vehicle axis, 1..8 on a ring at 45 deg
    spacing. Each engine's gimbal axes are clocked to its ring angle."""
    ring_radius: float = RING_RADIUS
    length: float = VEHICLE_LENGTH
    gimbal_limit: float = GIMBAL_LIMIT
    ring_angles: Array = field(default_factory=lambda: np.concatenate(
        ([0.0], np.arange(8) * np.pi / 4.0)))

    @property
    def count(self) -> int:
        return self.ring_angles.size

    def ring_radii(self) -> Array:
        r = np.full(self.count, self.ring_radius)
        r[0] = 0.0
        return r


def default_layout() -> EngineLayout:
    return EngineLayout()


def mass_properties(fuel_fraction: float, burn_duration: float = BURN_DURATION,
                    table: dict | None = None) -> MassProperties:
    """Interpolate the embedded inertial-data table at a fuel fraction in
    [0, 1] (clamped). Time rates assume the fuel fraction sweeps 1 -> 0 over
    `burn_duration` seconds."""
    tab = table if table is not None else MASS_TABLE
    m, mdot, xcg, jxx, jyy, jxxdot, jyydot = _core.mass_state(
        float(fuel_fraction),
        tab["fuel_fraction"], tab["mass_kg"], tab["cg_m"], tab["jxx"], tab["jyy"],
        float(burn_duration))
    return MassProperties(
        m=m, m_dot=mdot, x_cg=xcg,
        inertia=np.diag([jxx, jyy, jyy]),
        inertia_dot=np.diag([jxxdot, jyydot, jyydot]),
    )


def engine_thrust(pressure_kpa: float) -> float:
    """Per-engine thrust in kN at ambient pressure in kPa (same for all nine)."""
    if pressure_kpa < 0.0:
        raise ValueError("pressure must be non-negative")
    return THRUST_VACUUM_KN - THRUST_SLOPE_KN_PER_KPA * pressure_kpa


def saturate_gimbals(cmd: Array, limit: float = GIMBAL_LIMIT) -> Array:
    """Clamp a (9, 2) gimbal command [rad] to the hard deflection limit."""
    return np.clip(np.asarray(cmd, dtype=np.float64), -limit, limit)


def engine_force(layout: EngineLayout, i: int, mu: float, eta: float, thrust_n: float) -> Array:
    """Body-frame force [N] of engine `i` at gimbal deflections (mu, eta) [rad]."""
    if not 0 <= i < layout.count:
        raise IndexError(f"engine index {i} out of range")
    cmd = np.zeros((layout.count, 2))
    cmd[i] = (mu, eta)
    return engine_forces(layout, cmd, thrust_n)[i]


def engine_forces(layout: EngineLayout, cmd: Array, thrust_n: float) -> Array:
    """Per-engine body-frame forces [N], shape (9, 3), rigid vehicle."""
    cmd = np.asarray(cmd, dtype=np.float64)
    lam = layout.ring_angles
    cl, sl = np.cos(lam), np.sin(lam)
    cm, sm = np.cos(cmd[:, 0]), np.sin(cmd[:, 0])
    ce, se = np.cos(cmd[:, 1]), np.sin(cmd[:, 1])
    fx = thrust_n * cm * ce
    fy0 = thrust_n * sm * ce
    fz0 = -thrust_n * se
    return np.column_stack([fx, cl * fy0 - sl * fz0, sl * fy0 + cl * fz0])


def engine_moments(layout: EngineLayout, cmd: Array, thrust_n: float,
                   mass: MassProperties) -> tuple[Array, Array]:
    """Total thrust force and moment [N, N m] about the CG, rigid vehicle."""
    zeros4 = np.zeros(4)
    force, moment, _ = _core.engine_totals(
        np.asarray(cmd, dtype=np.float64), float(thrust_n),
        layout.ring_angles, layout.ring_radii(),
        -(layout.length - mass.x_cg),
        zeros4, zeros4, zeros4, zeros4, zeros4, False)
    return force, moment


@dataclass
class AeroTables:
    """Aerodynamic dataset: longitudinal coefficients on an (alpha >= 0, Mach)
    grid plus constant dynamic derivatives. Parity (C_L, C_m odd in alpha,
    C_D even) and the directional mirror are enforced by the evaluator."""
    alpha_grid: Array   # rad, alpha >= 0, strictly increasing
    mach_grid: Array
    cl: Array           # (n_alpha, n_mach)
    cd: Array
    cm: Array
    c_mq: float = -1.0  # per rad, pitch damping
    c_nr: float = -1.0
    c_lp: float = -0.1
    ref_area: float = REF_AREA
    ref_length: float = REF_DIAMETER

    def __post_init__(self):
        self.alpha_grid = np.asarray(self.alpha_grid, dtype=np.float64)
        self.mach_grid = np.asarray(self.mach_grid, dtype=np.float64)
        for name in ("cl", "cd", "cm"):
            tab = np.asarray(getattr(self, name), dtype=np.float64)
            if tab.shape != (self.alpha_grid.size, self.mach_grid.size):
                raise ValueError(f"{name} table shape {tab.shape} does not match grids")
            setattr(self, name, tab)
        if self.alpha_grid[0] != 0.0:
            raise ValueError("alpha grid must start at 0 (negative side is mirrored)")
        if np.any(self.cd < 0.0):
            raise ValueError("drag coefficients must be positive")
        # odd coefficients vanish on the symmetry axis
        self.cl[0, :] = 0.0
        self.cm[0, :] = 0.0

    def cl_table(self) -> Table2D:
        return Table2D(self.alpha_grid, self.mach_grid, self.cl)


def default_aero_tables() -> AeroTables:
    """Synthetic slender-body dataset on the 0..8 deg x Mach 0.5..10 grid.

    These are generic axisymmetric-booster coefficients (normal-force slope
    about 2/rad, mildly unstable pitching moment about the CG, transonic drag
    rise), NOT wind-tunnel or CFD data for any specific vehicle. Supply a
    measured dataset via the `aero_file` config key for serious work.
    """
    alpha = np.radians([0.0, 2.0, 4.0, 6.0, 8.0])
    mach = np.array([0.5, 1.5, 4.0, 7.0, 10.0])
    cl_slope = np.array([2.0, 2.8, 2.2, 2.0, 1.9])        # per rad vs Mach
    cm_slope = np.array([2.5, 3.5, 2.8, 2.4, 2.2])        # per rad, destabilizing
    cd0 = np.array([0.35, 0.55, 0.42, 0.36, 0.33])
    a_col = alpha[:, None]
    return AeroTables(
        alpha_grid=alpha,
        mach_grid=mach,
        cl=cl_slope[None, :] * a_col,
        cd=cd0[None, :] + 1.2 * a_col**2,
        cm=cm_slope[None, :] * a_col,
    )


def aero_forces(tables: AeroTables, airspeed_body: Array, rates: Array,
                density: float, speed_of_sound: float) -> tuple[Array, Array]:
    """Aerodynamic force and moment [N, N m] in body axes.

    `airspeed_body` is the body-frame velocity relative to the air (inertial
    velocity minus wind). Below 0.1 m/s airspeed both outputs are zero.
    """
    u, v, w = np.asarray(airspeed_body, dtype=np.float64)
    p, q, r = np.asarray(rates, dtype=np.float64)
    return _core.aero_totals(
        u, v, w, p, q, r, float(density), float(speed_of_sound),
        tables.alpha_grid, tables.mach_grid, tables.cl, tables.cd, tables.cm,
        tables.c_mq, tables.c_nr, tables.c_lp, tables.ref_area, tables.ref_length)


def rigid_derivatives(velocity_body: Array, rates: Array, attitude_bi: Array,
                      mass: MassProperties, f_aero: Array, m_aero: Array,
                      f_thrust: Array, m_thrust: Array,
                      gravity: float = 9.80665) -> tuple[Array, Array]:
    """Rigid 6-DOF accelerations (v_dot, omega_dot) from assembled forces.

    v_dot     = g R_ib e3 + (F_aero + F_T)/m - omega x V
    omega_dot = J^-1 (M_aero + tau - J_dot omega - omega x J omega)
    """
    v = np.asarray(velocity_body, dtype=np.float64)
    om = np.asarray(rates, dtype=np.float64)
    j = mass.inertia
    if abs(np.linalg.det(j)) < 1e-12:
        raise ValueError("singular inertia matrix")
    g_body = gravity * np.asarray(attitude_bi)[2, :]
    v_dot = g_body + (np.asarray(f_aero) + np.asarray(f_thrust)) / mass.m - np.cross(om, v)
    torque = (np.asarray(m_aero) + np.asarray(m_thrust)
              - mass.inertia_dot @ om - np.cross(om, j @ om))
    om_dot = np.linalg.solve(j, torque)
    return v_dot, om_dot
