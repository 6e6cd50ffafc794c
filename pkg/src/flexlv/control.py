"""Attitude control stack: structural filters (double notch and elliptic
low-pass), their discrete execution form, pseudo-inverse gimbal allocation,
and the PI + rate attitude controller.

Channel commands are in DEGREES of equivalent uniform gimbal deflection;
the allocator converts them to the 18 gimbal angles in radians. Attitude
errors and rates enter the controller in radians. With that convention the
pitch/yaw control effectiveness of the nine-engine cluster is about
-0.017 rad s^-2 per degree, which is the plant gain the stock controller
gains were tuned against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .flex import ModalDataset
from .numerics import Polynomial, RationalTF
from .vehicle import EngineLayout, MassProperties

Array = np.ndarray

RATE_GAIN = -114.5916
ATTITUDE_GAIN = -214.2862
INTEGRAL_WEIGHT = 0.1
NOTCH_ZERO_DAMPING = 0.00501
NOTCH_POLE_DAMPING = 0.70
LOOP_RATE_HZ = 100.0


# -- structural filter synthesis ----

def design_notch(modal: ModalDataset, zero_damping: float = NOTCH_ZERO_DAMPING,
                 pole_damping: float = NOTCH_POLE_DAMPING) -> RationalTF:
    """Cascaded double notch: one biquad per distinct modal frequency with
    lightly damped zeros and heavily damped poles at the same frequency.

    The depth at each center is zero_damping/pole_damping (about -43 dB with
    the defaults) and the DC gain is exactly one.
    """
    if zero_damping >= pole_damping:
        raise ValueError("notch requires zero damping below pole damping")
    freqs = np.unique(np.round(modal.freqs, 9))
    if freqs.size < 2:
        raise ValueError("need two distinct modal frequencies for the double notch")
    tf = RationalTF([1.0], [1.0])
    for w in freqs:
        num = Polynomial([1.0, 2.0 * zero_damping * w, w * w])
        den = Polynomial([1.0, 2.0 * pole_damping * w, w * w])
        tf = tf * RationalTF(num, den)
    return tf


def design_elliptic(order: int = 3, passband_edge: float = 10.0,
                    ripple_db: float = 1.0, stopband_db: float = 40.0) -> RationalTF:
    """Analog elliptic low-pass prototype scaled to the passband edge [rad/s]."""
    if ripple_db >= stopband_db:
        raise ValueError("passband ripple must be below stopband attenuation")
    try:
        b, a = signal.ellip(order, ripple_db, stopband_db, passband_edge,
                            btype="low", analog=True, output="ba")
    except Exception as exc:
        raise ValueError(f"elliptic design infeasible: {exc}") from exc
    return RationalTF(b, a)


# -- discrete execution form ----

class DiscreteFilter:
    """Cascade of biquad sections (direct form II transposed)."""

    def __init__(self, sections: Array, dt: float):
        self.sections = np.asarray(sections, dtype=np.float64).reshape(-1, 5)
        self.dt = float(dt)
        self.state = np.zeros((self.sections.shape[0], 2))

    def reset(self) -> None:
        self.state[:] = 0.0

    def initialize(self, x0: float) -> None:
        """Set the internal state to steady state for a constant input `x0`,
        so the filter starts transient-free (output = DC gain times x0)."""
        x = float(x0)
        for i in range(self.sections.shape[0]):
            b0, b1, b2, a1, a2 = self.sections[i]
            y = (b0 + b1 + b2) / (1.0 + a1 + a2) * x
            self.state[i, 1] = b2 * x - a2 * y
            self.state[i, 0] = (b1 + b2) * x - (a1 + a2) * y
            x = y

    def step(self, x: float) -> float:
        for i in range(self.sections.shape[0]):
            b0, b1, b2, a1, a2 = self.sections[i]
            y = b0 * x + self.state[i, 0]
            self.state[i, 0] = b1 * x - a1 * y + self.state[i, 1]
            self.state[i, 1] = b2 * x - a2 * y
            x = y
        return x

    def response(self, omega: float) -> complex:
        """Frequency response at `omega` rad/s."""
        z = np.exp(1j * omega * self.dt)
        h = 1.0 + 0.0j
        for b0, b1, b2, a1, a2 in self.sections:
            h *= (b0 + b1 / z + b2 / z**2) / (1.0 + a1 / z + a2 / z**2)
        return h

    def dc_gain(self) -> float:
        return float(np.real(self.response(0.0)))


def _conjugate_pairs(roots: Array, tol: float = 1e-9) -> tuple[list, list]:
    """Split roots into complex-conjugate pairs (one representative each,
    positive imaginary part) and reals."""
    pairs, reals = [], []
    upper = sorted(roots[np.imag(roots) > tol], key=lambda r: abs(r))
    lower = list(roots[np.imag(roots) < -tol])
    for r in upper:
        match = min(range(len(lower)), key=lambda i: abs(lower[i] - np.conj(r)))
        lower.pop(match)
        pairs.append(r)
    if lower:
        raise ValueError("complex roots do not form conjugate pairs")
    reals.extend(np.real(roots[np.abs(np.imag(roots)) <= tol]))
    return pairs, sorted(reals, key=abs)


def _section_polys(zeros: list, poles: list) -> list[tuple[Array, Array]]:
    """Group zeros/poles of a proper TF into (num, den) polynomial sections of
    order <= 2, pairing by proximity in natural frequency."""
    zp, zr = _conjugate_pairs(np.asarray(zeros, dtype=complex))
    pp, pr = _conjugate_pairs(np.asarray(poles, dtype=complex))

    sections = []
    z_quads = [np.real(np.poly([z, np.conj(z)])) for z in zp]
    while len(zr) >= 2:
        z_quads.append(np.real(np.poly([zr.pop(0), zr.pop(0)])))
    if zr:
        z_quads.append(np.real(np.poly([zr.pop(0)])))

    p_quads = [(abs(p), np.real(np.poly([p, np.conj(p)]))) for p in pp]
    while len(pr) >= 2:
        a, b = pr.pop(0), pr.pop(0)
        p_quads.append((max(abs(a), abs(b)), np.real(np.poly([a, b]))))
    if pr:
        a = pr.pop(0)
        p_quads.append((abs(a), np.real(np.poly([a]))))
    p_quads.sort(key=lambda t: t[0])

    # attach each zero section to the pole section nearest in frequency
    z_list = sorted(z_quads, key=lambda c: abs(np.roots(c)[0]) if len(c) > 1 else 0.0)
    for _, den in p_quads:
        if z_list:
            num = z_list.pop(0)
        else:
            num = np.array([1.0])
        sections.append((num, den))
    if z_list:
        raise ValueError("transfer function is improper: leftover zeros")
    return sections


def _bilinear_section(num: Array, den: Array, k_map: float) -> Array:
    """Bilinear transform of one continuous section, returning
    (b0, b1, b2, a1, a2) with a0 normalized to one."""
    b = np.zeros(3)
    a = np.zeros(3)
    b[3 - num.size:] = num
    a[3 - den.size:] = den
    b2c, b1c, b0c = b
    a2c, a1c, a0c = a
    bz = np.array([
        b2c * k_map**2 + b1c * k_map + b0c,
        -2.0 * b2c * k_map**2 + 2.0 * b0c,
        b2c * k_map**2 - b1c * k_map + b0c,
    ])
    az = np.array([
        a2c * k_map**2 + a1c * k_map + a0c,
        -2.0 * a2c * k_map**2 + 2.0 * a0c,
        a2c * k_map**2 - a1c * k_map + a0c,
    ])
    if az[0] == 0.0:
        raise ValueError("degenerate section under bilinear transform")
    bz /= az[0]
    az /= az[0]
    return np.array([bz[0], bz[1], bz[2], az[1], az[2]])


def _prewarp_gain(freq: float, dt: float) -> float:
    w = freq * dt / 2.0
    if not 0.0 < w < np.pi / 2.0:
        raise ValueError("prewarp frequency outside (0, Nyquist)")
    return freq / np.tan(w)


def discretize(tf: RationalTF, dt: float,
               prewarp: float | str | None = None) -> DiscreteFilter:
    """Bilinear-transform a proper continuous TF into a biquad cascade.

    `prewarp` is a frequency [rad/s] at which the mapping is made exact, or
    "sections" to prewarp each biquad at its own denominator natural
    frequency (the right choice for cascaded notches, whose stopbands are
    narrow); None applies the standard 2/dt mapping. DC gain is preserved
    exactly in every case.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not tf.is_proper:
        raise ValueError("can only discretize proper transfer functions")
    per_section = prewarp == "sections"
    if per_section or prewarp is None:
        k_map = 2.0 / dt
    else:
        k_map = _prewarp_gain(float(prewarp), dt)

    if tf.den.degree == 0:
        gain = tf.num.coeffs[-1] / tf.den.coeffs[-1]
        return DiscreteFilter(np.array([[gain, 0.0, 0.0, 0.0, 0.0]]), dt)

    gain = tf.num.coeffs[0] / tf.den.coeffs[0]
    sections = _section_polys(list(tf.zeros()), list(tf.poles()))
    rows = []
    for i, (num, den) in enumerate(sections):
        k_sec = k_map
        if per_section and den.size == 3 and den[2] / den[0] > 0.0:
            k_sec = _prewarp_gain(np.sqrt(den[2] / den[0]), dt)
        sec_gain = gain if i == 0 else 1.0
        rows.append(_bilinear_section(sec_gain * num, den, k_sec))
    filt = DiscreteFilter(np.array(rows), dt)

    for b0, b1, b2, a1, a2 in filt.sections:
        poles = np.roots([1.0, a1, a2])
        if np.any(np.abs(poles) >= 1.0 + 1e-12):
            raise ValueError("discretization produced unstable poles; reduce dt")
    return filt


# -- control allocation ----

@dataclass(frozen=True)
class AllocatorConfig:
    """Normalized effectiveness matrix G (3 x 18), its minimum-norm right
    inverse, and the moment scaling Lambda = diag(8r, -9(L-xcg), -9(L-xcg))."""
    lam: Array       # 3x3
    g: Array         # 3x18, columns ordered (mu0, eta0, mu1, eta1, ...)
    g_pinv: Array    # 18x3
    gimbal_limit: float


def build_allocator(layout: EngineLayout, mass: MassProperties) -> AllocatorConfig:
    """Differentiate the engine moment sum analytically at zero deflection and
    normalize by thrust and Lambda; the pseudo-inverse distributes channel
    commands minimum-norm over the 18 gimbal angles."""
    arm_len = layout.length - mass.x_cg
    lam_mat = np.diag([8.0 * layout.ring_radius, -9.0 * arm_len, -9.0 * arm_len])
    lam_inv = np.diag(1.0 / np.diag(lam_mat))

    radii = layout.ring_radii()
    cols = []
    e2 = np.array([0.0, 1.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0])
    for i, ang in enumerate(layout.ring_angles):
        ca, sa = np.cos(ang), np.sin(ang)
        r_clock = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
        arm = np.array([-arm_len, -radii[i] * sa, radii[i] * ca])
        # dF/dmu = R_x(lam) dR_z(0)/dmu e1 T = T R_x(lam) e2; dF/deta = -T R_x(lam) e3
        dtau_dmu = np.cross(arm, r_clock @ e2)
        dtau_deta = np.cross(arm, -(r_clock @ e3))
        cols.append(lam_inv @ dtau_dmu)
        cols.append(lam_inv @ dtau_deta)
    g = np.column_stack(cols)

    ggt = g @ g.T
    if np.linalg.matrix_rank(ggt) < 3:
        raise ValueError("rank-deficient effectiveness matrix; check engine layout")
    g_pinv = g.T @ np.linalg.inv(ggt)
    return AllocatorConfig(lam=lam_mat, g=g, g_pinv=g_pinv, gimbal_limit=layout.gimbal_limit)


def allocate(alloc: AllocatorConfig, cmd_deg: Array) -> tuple[Array, bool]:
    """Map channel commands (roll, pitch, yaw) [deg] to gimbal deflections.

    Returns the (9, 2) deflection array in radians after hard saturation, and
    whether any engine saturated.
    """
    delta = (alloc.g_pinv @ np.asarray(cmd_deg, dtype=np.float64)) * (np.pi / 180.0)
    delta = delta.reshape(-1, 2)
    saturated = bool(np.any(np.abs(delta) > alloc.gimbal_limit))
    return np.clip(delta, -alloc.gimbal_limit, alloc.gimbal_limit), saturated


# -- attitude controller ----

def design_roll_pd(l_delta_a: float, l_p: float = 0.0, bandwidth: float = 1.0,
                   damping: float = 0.7) -> tuple[float, float]:
    """PD gains for the roll model pdot = L_p p + L_dA dA placing the closed
    loop at the requested bandwidth/damping."""
    if l_delta_a == 0.0:
        raise ValueError("zero roll control effectiveness")
    kp = bandwidth**2 / l_delta_a
    kd = (2.0 * damping * bandwidth + l_p) / l_delta_a
    return kp, kd


@dataclass
class ControllerGains:
    rate_gain: float = RATE_GAIN            # deg per rad/s
    attitude_gain: float = ATTITUDE_GAIN    # deg per rad
    integral_weight: float = INTEGRAL_WEIGHT
    roll_kp: float = 9.6580                 # deg per rad, 1 rad/s bandwidth at lift-off
    roll_kd: float = 13.5212                # deg per rad/s


def pi_rate_tf(gains: ControllerGains) -> RationalTF:
    """Combined compensator K_PI(s) + K_P s acting on the attitude signal
    (the rate path is the exact derivative of the measured attitude).
    Improper on its own; every loop composition with the strictly proper
    plant is proper."""
    kp = gains.rate_gain
    kpi = gains.attitude_gain
    iw = gains.integral_weight
    return RationalTF([kp, kpi, kpi * iw], [1.0, 0.0])


@dataclass
class _Channel:
    attitude_filter: DiscreteFilter | None
    rate_filter: DiscreteFilter | None
    command_filter: DiscreteFilter | None
    integral: float = 0.0


class AttitudeController:
    """Discrete three-channel attitude controller.

    Pitch/yaw: u = K_att (e + w_i int(e)) - K_rate q_f, with the structural
    filter on the measured attitude and rate paths (feedback placement,
    default) or on the channel command (forward placement). Roll: PD without
    structural filtering. Integration freezes while any gimbal is saturated.
    """

    def __init__(self, gains: ControllerGains, dt: float,
                 filter_tf: RationalTF | None = None,
                 placement: str = "feedback",
                 prewarp: float | None = None):
        if placement not in ("feedback", "forward"):
            raise ValueError("placement must be 'feedback' or 'forward'")
        self.gains = gains
        self.dt = float(dt)
        self.placement = placement
        self._last_cmd = np.zeros(3)
        self._initialized = False

        def make():
            if filter_tf is None:
                return None
            return discretize(filter_tf, self.dt, prewarp=prewarp)

        self.channels = {}
        for name in ("pitch", "yaw"):
            if placement == "feedback":
                self.channels[name] = _Channel(make(), make(), None)
            else:
                self.channels[name] = _Channel(None, None, make())

    def reset(self) -> None:
        for ch in self.channels.values():
            ch.integral = 0.0
            for f in (ch.attitude_filter, ch.rate_filter, ch.command_filter):
                if f is not None:
                    f.reset()
        self._last_cmd[:] = 0.0
        self._initialized = False

    def _initialize_filters(self, euler_m: Array, omega_m: Array) -> None:
        """Steady-state filter initialization at the first measurement, so the
        loop does not see an artificial step of the full attitude angle."""
        for name, idx in (("pitch", 1), ("yaw", 2)):
            ch = self.channels[name]
            if ch.attitude_filter is not None:
                ch.attitude_filter.initialize(euler_m[idx])
            if ch.rate_filter is not None:
                ch.rate_filter.initialize(omega_m[idx])
        self._initialized = True

    def _axis_step(self, name: str, ref: float, meas: float, rate: float,
                   saturated: bool) -> float:
        ch = self.channels[name]
        g = self.gains
        if ch.attitude_filter is not None:
            meas = ch.attitude_filter.step(meas)
        if ch.rate_filter is not None:
            rate = ch.rate_filter.step(rate)
        err = ref - meas
        if not saturated:
            ch.integral += err * self.dt
        u = g.attitude_gain * (err + g.integral_weight * ch.integral) - g.rate_gain * rate
        if ch.command_filter is not None:
            u = ch.command_filter.step(u)
        return u

    def step(self, ref: Array, euler_m: Array, omega_m: Array,
             saturated: bool = False) -> Array:
        """One control update. `ref`/`euler_m` are (roll, pitch, yaw) [rad],
        `omega_m` body rates [rad/s]; returns channel commands [deg].

        Non-finite measurements trip the fault hold: the previous command is
        repeated and no internal state advances.
        """
        ref = np.asarray(ref, dtype=np.float64)
        euler_m = np.asarray(euler_m, dtype=np.float64)
        omega_m = np.asarray(omega_m, dtype=np.float64)
        if not (np.all(np.isfinite(euler_m)) and np.all(np.isfinite(omega_m))):
            return self._last_cmd.copy()
        if not self._initialized:
            self._initialize_filters(euler_m, omega_m)

        g = self.gains
        roll_cmd = g.roll_kp * (ref[0] - euler_m[0]) - g.roll_kd * omega_m[0]
        pitch_cmd = self._axis_step("pitch", ref[1], euler_m[1], omega_m[1], saturated)
        yaw_cmd = self._axis_step("yaw", ref[2], euler_m[2], omega_m[2], saturated)
        self._last_cmd = np.array([roll_cmd, pitch_cmd, yaw_cmd])
        return self._last_cmd.copy()
