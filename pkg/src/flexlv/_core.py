"""Hot-loop kernels for the nonlinear simulation.

Everything here is written in numba-friendly style (plain functions over
ndarrays and scalars) and jitted when numba is available; the same functions
run un-jitted as a pure-numpy fallback. Public modules wrap these kernels
with friendlier signatures, so there is a single implementation of the
dynamics shared by the simulator, the module-level APIs, and the tests.

State vector layout (20 entries):
    0:3   position in the launch frame [m] (x downrange, y right, z down)
    3:6   body velocity u, v, w [m/s]
    6:9   Euler angles roll, pitch, yaw [rad] (pitch-yaw-roll intrinsic)
    9:12  body rates p, q, r [rad/s]
    12:16 modal coordinates xi
    16:20 modal rates xi_dot

Scalar parameter vector indices (PRM_*) are defined below; forces are in
newtons inside the kernels, thrust law coefficients are in kN/kPa.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


PRM_GRAVITY = 0
PRM_REF_AREA = 1
PRM_REF_LEN = 2
PRM_CMQ = 3
PRM_CNR = 4
PRM_CLP = 5
PRM_LENGTH = 6
PRM_BURN_T = 7
PRM_FLEX = 8          # 0 = rigid, 1 = flexible, 2 = modes frozen at zero
PRM_T_VAC = 9         # kN
PRM_T_SLOPE = 10      # kN per kPa
PRM_WIND_X = 11
PRM_WIND_Y = 12
PRM_WIND_Z = 13
N_PRM = 14

STATE_SIZE = 20
YAW_GUARD = np.pi / 2.0 - 1e-3

# atmosphere layer tables (see environment.py; duplicated here as plain
# arrays so the kernel has no python-object dependencies)
_ATM_H = np.array([0.0, 11000.0, 20000.0, 32000.0, 47000.0, 51000.0, 71000.0, 84852.0])
_ATM_LAPSE = np.array([-0.0065, 0.0, 0.001, 0.0028, 0.0, -0.0028, -0.002, 0.0])
_ATM_T = np.array([288.15, 216.65, 216.65, 228.65, 270.65, 270.65, 214.65, 186.946])
_ATM_P = np.array([
    101325.0,
    22632.040095007792,
    5474.877660660026,
    868.0158377493657,
    110.90577336731237,
    66.93853537303973,
    3.9564204330885802,
    0.37338289869794962,
])
_R_AIR = 287.052874
_G0 = 9.80665
_GAMMA = 1.4


@njit(cache=True)
def atmo_state(altitude):
    """(pressure [kPa], density [kg/m^3], speed of sound [m/s]) at altitude [m]."""
    h = altitude
    if h < 0.0:
        h = 0.0
    if h >= _ATM_H[7]:
        t = _ATM_T[7]
        p = _ATM_P[7] * np.exp(-_G0 * (h - _ATM_H[7]) / (_R_AIR * t))
    else:
        i = 0
        for k in range(7):
            if h >= _ATM_H[k]:
                i = k
        dh = h - _ATM_H[i]
        lr = _ATM_LAPSE[i]
        if lr == 0.0:
            t = _ATM_T[i]
            p = _ATM_P[i] * np.exp(-_G0 * dh / (_R_AIR * t))
        else:
            t = _ATM_T[i] + lr * dh
            p = _ATM_P[i] * (t / _ATM_T[i]) ** (-_G0 / (_R_AIR * lr))
    rho = p / (_R_AIR * t)
    a = np.sqrt(_GAMMA * _R_AIR * t)
    return p / 1000.0, rho, a


@njit(cache=True)
def interp_clamped(grid, vals, q):
    n = grid.shape[0]
    if q <= grid[0]:
        return vals[0]
    if q >= grid[n - 1]:
        return vals[n - 1]
    i = 0
    for k in range(n - 1):
        if q >= grid[k]:
            i = k
    t = (q - grid[i]) / (grid[i + 1] - grid[i])
    return vals[i] + t * (vals[i + 1] - vals[i])


@njit(cache=True)
def interp_slope(grid, vals, q):
    """Slope of the clamped piecewise-linear interpolant (0 outside the grid)."""
    n = grid.shape[0]
    if q <= grid[0] or q >= grid[n - 1]:
        return 0.0
    i = 0
    for k in range(n - 1):
        if q >= grid[k]:
            i = k
    return (vals[i + 1] - vals[i]) / (grid[i + 1] - grid[i])


@njit(cache=True)
def bilinear_clamped(xg, yg, table, qx, qy):
    nx = xg.shape[0]
    ny = yg.shape[0]
    if qx < xg[0]:
        qx = xg[0]
    if qx > xg[nx - 1]:
        qx = xg[nx - 1]
    if qy < yg[0]:
        qy = yg[0]
    if qy > yg[ny - 1]:
        qy = yg[ny - 1]
    i = 0
    for k in range(nx - 1):
        if qx >= xg[k]:
            i = k
    j = 0
    for k in range(ny - 1):
        if qy >= yg[k]:
            j = k
    tx = (qx - xg[i]) / (xg[i + 1] - xg[i])
    ty = (qy - yg[j]) / (yg[j + 1] - yg[j])
    return (
        table[i, j] * (1.0 - tx) * (1.0 - ty)
        + table[i + 1, j] * tx * (1.0 - ty)
        + table[i, j + 1] * (1.0 - tx) * ty
        + table[i + 1, j + 1] * tx * ty
    )


@njit(cache=True)
def mass_state(fuel_fraction, ff_grid, m_grid, xcg_grid, jxx_grid, jyy_grid, burn_duration):
    """Mass properties and their time rates at a fuel fraction.

    Rates follow from the chain rule through the piecewise-linear tables with
    d(fuel fraction)/dt = -1/burn_duration.
    """
    f = fuel_fraction
    if f < 0.0:
        f = 0.0
    if f > 1.0:
        f = 1.0
    m = interp_clamped(ff_grid, m_grid, f)
    xcg = interp_clamped(ff_grid, xcg_grid, f)
    jxx = interp_clamped(ff_grid, jxx_grid, f)
    jyy = interp_clamped(ff_grid, jyy_grid, f)
    fdot = -1.0 / burn_duration
    mdot = interp_slope(ff_grid, m_grid, f) * fdot
    jxxdot = interp_slope(ff_grid, jxx_grid, f) * fdot
    jyydot = interp_slope(ff_grid, jyy_grid, f) * fdot
    return m, mdot, xcg, jxx, jyy, jxxdot, jyydot


@njit(cache=True)
def attitude_matrix(roll, pitch, yaw):
    """Body-to-inertial matrix for intrinsic pitch-yaw-roll angles."""
    cth, sth = np.cos(pitch), np.sin(pitch)
    cps, sps = np.cos(yaw), np.sin(yaw)
    cph, sph = np.cos(roll), np.sin(roll)
    r = np.empty((3, 3))
    r[0, 0] = cth * cps
    r[0, 1] = -cth * sps * cph + sth * sph
    r[0, 2] = cth * sps * sph + sth * cph
    r[1, 0] = sps
    r[1, 1] = cps * cph
    r[1, 2] = -cps * sph
    r[2, 0] = -sth * cps
    r[2, 1] = sth * sps * cph + cth * sph
    r[2, 2] = -sth * sps * sph + cth * cph
    return r


@njit(cache=True)
def engine_totals(mu_eta, thrust_n, lam, ring_r, arm_x, xi,
                  phi_yt, phi_zt, sig_yt, sig_zt, flex_on):
    """Total engine force, moment, per-mode generalized force.

    Each engine force is F_i = R_x(lam_i) R_z(mu_i) R_y(eta_i) T e1, optionally
    pre-rotated by the bending rotation at the nozzle station
    R_z(sig_yt . xi) R_y(sig_zt . xi). Moment arms are
    (arm_x, -r sin lam, r cos lam) augmented by the nozzle modal displacement
    (0, phi_yt . xi, phi_zt . xi) when flexibility is enabled.

    Returns (force [N] (3,), moment [N m] (3,), modal_force (n_f,)).
    """
    n_f = xi.shape[0]
    force = np.zeros(3)
    moment = np.zeros(3)
    modal = np.zeros(n_f)

    bend_y = 0.0  # rotation about body z from y-plane slopes
    bend_z = 0.0  # rotation about body y from z-plane slopes
    disp_y = 0.0
    disp_z = 0.0
    if flex_on:
        for j in range(n_f):
            bend_y += sig_yt[j] * xi[j]
            bend_z += sig_zt[j] * xi[j]
            disp_y += phi_yt[j] * xi[j]
            disp_z += phi_zt[j] * xi[j]
    cby, sby = np.cos(bend_y), np.sin(bend_y)
    cbz, sbz = np.cos(bend_z), np.sin(bend_z)

    for i in range(mu_eta.shape[0]):
        cl, sl = np.cos(lam[i]), np.sin(lam[i])
        cm, sm = np.cos(mu_eta[i, 0]), np.sin(mu_eta[i, 0])
        ce, se = np.cos(mu_eta[i, 1]), np.sin(mu_eta[i, 1])
        # R_z(mu) R_y(eta) (T,0,0)
        fx = thrust_n * cm * ce
        fy = thrust_n * sm * ce
        fz = -thrust_n * se
        # ring clocking R_x(lam)
        fy, fz = cl * fy - sl * fz, sl * fy + cl * fz
        if flex_on:
            # bending pre-rotation R_z(bend_y) R_y(bend_z)
            fx, fz = cbz * fx + sbz * fz, -sbz * fx + cbz * fz
            fx, fy = cby * fx - sby * fy, sby * fx + cby * fy
        force[0] += fx
        force[1] += fy
        force[2] += fz
        ax = arm_x
        ay = -ring_r[i] * sl + disp_y
        az = ring_r[i] * cl + disp_z
        moment[0] += ay * fz - az * fy
        moment[1] += az * fx - ax * fz
        moment[2] += ax * fy - ay * fx

    for j in range(n_f):
        modal[j] = phi_yt[j] * force[1] + phi_zt[j] * force[2]
    return force, moment, modal


@njit(cache=True)
def aero_totals(u, v, w, p, q, r, rho, sound_speed,
                alpha_grid, mach_grid, cl_tab, cd_tab, cm_tab,
                cmq, cnr, clp, ref_area, ref_len):
    """Aerodynamic force and moment in body axes [N, N m].

    Longitudinal coefficients are tabulated for alpha >= 0 and mirrored
    (C_L, C_m odd; C_D even); directional loads reuse the longitudinal tables
    with the sideslip angle by axisymmetry. Rate damping uses the dynamic
    derivatives scaled by ref_len / (2 V).
    """
    force = np.zeros(3)
    moment = np.zeros(3)
    vmag = np.sqrt(u * u + v * v + w * w)
    if vmag < 0.1:
        return force, moment
    alpha = np.arctan2(w, u)
    beta = np.arcsin(min(max(v / vmag, -1.0), 1.0))
    alpha_total = np.arctan2(np.sqrt(v * v + w * w), u)
    mach = vmag / sound_speed
    qbar = 0.5 * rho * vmag * vmag
    qs = qbar * ref_area

    a_abs = np.abs(alpha)
    sgn_a = 1.0 if alpha >= 0.0 else -1.0
    cl = sgn_a * bilinear_clamped(alpha_grid, mach_grid, cl_tab, a_abs, mach)
    cm = sgn_a * bilinear_clamped(alpha_grid, mach_grid, cm_tab, a_abs, mach)

    b_abs = np.abs(beta)
    sgn_b = 1.0 if beta >= 0.0 else -1.0
    cy = sgn_b * bilinear_clamped(alpha_grid, mach_grid, cl_tab, b_abs, mach)
    cn = sgn_b * bilinear_clamped(alpha_grid, mach_grid, cm_tab, b_abs, mach)

    # drag acts exactly opposite the relative wind, evaluated at the total
    # incidence angle; lift mirrors between the pitch and yaw planes
    drag = qs * bilinear_clamped(alpha_grid, mach_grid, cd_tab, np.abs(alpha_total), mach)
    force[0] = -drag * u / vmag
    force[1] = -drag * v / vmag
    force[2] = -drag * w / vmag
    lift_p = qs * cl
    force[0] += lift_p * np.sin(alpha)
    force[2] -= lift_p * np.cos(alpha)
    lift_y = qs * cy
    force[0] += lift_y * np.sin(beta)
    force[1] -= lift_y * np.cos(beta)

    rate_scale = ref_len / (2.0 * vmag)
    moment[0] = qs * ref_len * (clp * p * rate_scale)
    moment[1] = qs * ref_len * (cm + cmq * q * rate_scale)
    moment[2] = qs * ref_len * (-cn + cnr * r * rate_scale)
    return force, moment


@njit(cache=True)
def state_derivative(t, y, mu_eta, prm,
                     ff_grid, m_grid, xcg_grid, jxx_grid, jyy_grid,
                     alpha_grid, mach_grid, cl_tab, cd_tab, cm_tab,
                     lam, ring_r,
                     omega2, two_zeta_omega, phi_yt, phi_zt, sig_yt, sig_zt):
    """Time derivative of the 20-element state under fixed gimbal commands."""
    ydot = np.zeros(STATE_SIZE)

    roll, pitch, yaw = y[6], y[7], y[8]
    if np.abs(yaw) > YAW_GUARD:
        for i in range(6, 12):
            ydot[i] = np.nan
        return ydot

    fuel = 1.0 - t / prm[PRM_BURN_T]
    m, _, xcg, jxx, jyy, jxxdot, jyydot = mass_state(
        fuel, ff_grid, m_grid, xcg_grid, jxx_grid, jyy_grid, prm[PRM_BURN_T])

    altitude = -y[2]
    p_kpa, rho, sound = atmo_state(altitude)
    thrust_n = (prm[PRM_T_VAC] - prm[PRM_T_SLOPE] * p_kpa) * 1000.0

    r_bi = attitude_matrix(roll, pitch, yaw)

    u, v, w = y[3], y[4], y[5]
    p, q, r = y[9], y[10], y[11]

    # wind enters only the aerodynamic velocity
    wx, wy, wz = prm[PRM_WIND_X], prm[PRM_WIND_Y], prm[PRM_WIND_Z]
    ua = u - (r_bi[0, 0] * wx + r_bi[1, 0] * wy + r_bi[2, 0] * wz)
    va = v - (r_bi[0, 1] * wx + r_bi[1, 1] * wy + r_bi[2, 1] * wz)
    wa = w - (r_bi[0, 2] * wx + r_bi[1, 2] * wy + r_bi[2, 2] * wz)

    f_aero, m_aero = aero_totals(
        ua, va, wa, p, q, r, rho, sound,
        alpha_grid, mach_grid, cl_tab, cd_tab, cm_tab,
        prm[PRM_CMQ], prm[PRM_CNR], prm[PRM_CLP],
        prm[PRM_REF_AREA], prm[PRM_REF_LEN])

    flex_mode = prm[PRM_FLEX]
    flex_on = flex_mode == 1.0
    xi = y[12:16]
    xidot = y[16:20]
    arm_x = -(prm[PRM_LENGTH] - xcg)
    f_eng, m_eng, modal_force = engine_totals(
        mu_eta, thrust_n, lam, ring_r, arm_x, xi,
        phi_yt, phi_zt, sig_yt, sig_zt, flex_on)

    g = prm[PRM_GRAVITY]
    # gravity along +z of the launch frame, transformed to body axes
    gx = g * r_bi[2, 0]
    gy = g * r_bi[2, 1]
    gz = g * r_bi[2, 2]

    ydot[3] = gx + (f_aero[0] + f_eng[0]) / m - (q * w - r * v)
    ydot[4] = gy + (f_aero[1] + f_eng[1]) / m - (r * u - p * w)
    ydot[5] = gz + (f_aero[2] + f_eng[2]) / m - (p * v - q * u)

    # J diag(jxx, jyy, jyy); J_dot omega + omega x J omega moved to the rhs.
    # The x gyroscopic term vanishes for the axisymmetric inertia.
    tq0 = m_aero[0] + m_eng[0] - jxxdot * p
    tq1 = m_aero[1] + m_eng[1] - jyydot * q - r * p * (jxx - jyy)
    tq2 = m_aero[2] + m_eng[2] - jyydot * r - p * q * (jyy - jxx)
    ydot[9] = tq0 / jxx
    ydot[10] = tq1 / jyy
    ydot[11] = tq2 / jyy

    # Euler kinematics (pitch-yaw-roll)
    cps = np.cos(yaw)
    sph, cph = np.sin(roll), np.cos(roll)
    theta_dot = (q * cph - r * sph) / cps
    psi_dot = q * sph + r * cph
    phi_dot = p - theta_dot * np.sin(yaw)
    ydot[6] = phi_dot
    ydot[7] = theta_dot
    ydot[8] = psi_dot

    # position kinematics
    ydot[0] = r_bi[0, 0] * u + r_bi[0, 1] * v + r_bi[0, 2] * w
    ydot[1] = r_bi[1, 0] * u + r_bi[1, 1] * v + r_bi[1, 2] * w
    ydot[2] = r_bi[2, 0] * u + r_bi[2, 1] * v + r_bi[2, 2] * w

    if flex_on:
        for j in range(4):
            ydot[12 + j] = xidot[j]
            ydot[16 + j] = -omega2[j] * xi[j] - two_zeta_omega[j] * xidot[j] + modal_force[j]
    return ydot


@njit(cache=True)
def rk4_burst(y, t0, dt, nsteps, mu_eta, prm,
              ff_grid, m_grid, xcg_grid, jxx_grid, jyy_grid,
              alpha_grid, mach_grid, cl_tab, cd_tab, cm_tab,
              lam, ring_r,
              omega2, two_zeta_omega, phi_yt, phi_zt, sig_yt, sig_zt):
    """Integrate `nsteps` RK4 steps under zero-order-hold gimbal commands.

    Returns (state, ok). ok is False as soon as any state component goes
    non-finite; the state returned is then the last finite one.
    """
    cur = y.copy()
    for n in range(nsteps):
        t = t0 + n * dt
        k1 = state_derivative(t, cur, mu_eta, prm, ff_grid, m_grid, xcg_grid, jxx_grid, jyy_grid,
                              alpha_grid, mach_grid, cl_tab, cd_tab, cm_tab, lam, ring_r,
                              omega2, two_zeta_omega, phi_yt, phi_zt, sig_yt, sig_zt)
        k2 = state_derivative(t + 0.5 * dt, cur + 0.5 * dt * k1, mu_eta, prm, ff_grid, m_grid, xcg_grid,
                              jxx_grid, jyy_grid, alpha_grid, mach_grid, cl_tab, cd_tab, cm_tab, lam,
                              ring_r, omega2, two_zeta_omega, phi_yt, phi_zt, sig_yt, sig_zt)
        k3 = state_derivative(t + 0.5 * dt, cur + 0.5 * dt * k2, mu_eta, prm, ff_grid, m_grid, xcg_grid,
                              jxx_grid, jyy_grid, alpha_grid, mach_grid, cl_tab, cd_tab, cm_tab, lam,
                              ring_r, omega2, two_zeta_omega, phi_yt, phi_zt, sig_yt, sig_zt)
        k4 = state_derivative(t + dt, cur + dt * k3, mu_eta, prm, ff_grid, m_grid, xcg_grid, jxx_grid,
                              jyy_grid, alpha_grid, mach_grid, cl_tab, cd_tab, cm_tab, lam, ring_r,
                              omega2, two_zeta_omega, phi_yt, phi_zt, sig_yt, sig_zt)
        nxt = cur + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ok = True
        for i in range(STATE_SIZE):
            if not np.isfinite(nxt[i]):
                ok = False
                break
        if not ok:
            return cur, False
        cur = nxt
    return cur, True
