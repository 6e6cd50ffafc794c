"""Linearized models, transfer-function assembly, frequency response,
stability margins, and linear step responses.

The longitudinal short-period model with flexible coupling is

    alpha_dot = (Z_a/V) alpha + q + (Z_d/V) dE + sum_r (Z_d sigma_T_r / V) xi_r
    q_dot     = M_a alpha + M_d dE + sum_r (M_d sigma_T_r + m Z_d phi_T_r / J_yy) xi_r
    theta_dot = q
    xi_ddot_r = -w_r^2 xi_r - 2 z_r w_r xi_dot_r + m Z_d sigma_T_r dE

with dE in degrees of equivalent gimbal command. Note the modal forcing row
uses the slope sample sigma_T (the classical design form this gain set was
tuned against); the nonlinear simulator applies the displacement-row forcing
instead. See README "Units and conventions" for the audit of this block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flex import ModalDataset
from .numerics import RationalTF, rk4_step, tf_from_state_space
from .control import ControllerGains, pi_rate_tf
from .vehicle import AeroTables, MassProperties, aero_forces

Array = np.ndarray

DEG = np.pi / 180.0


@dataclass(frozen=True)
class FlightCondition:
    """Short-period coefficient set at one trajectory point (dE in degrees)."""
    v: float                 # airspeed, m/s
    z_alpha_over_v: float    # 1/s
    m_alpha: float           # 1/s^2
    z_delta_over_v: float    # 1/s per deg
    m_delta: float           # 1/s^2 per deg
    mass: float              # kg
    j_yy: float              # kg m^2
    label: str = "condition"


# Canonical control design point: the rigid coefficients are fixed by
# coefficient-matching the stock plant -0.017725(s+0.02853)/(s(s-0.4067)(s+0.4557));
# mass/inertia/airspeed are representative max-q values (60% fuel).
CANONICAL_CONDITION = FlightCondition(
    v=460.0,
    z_alpha_over_v=-0.049,
    m_alpha=0.18533,
    z_delta_over_v=-0.017725 * (0.02853 - 0.049) / 0.18533,
    m_delta=-0.017725,
    mass=469818.7292,
    j_yy=2.510e8,
    label="design-point",
)


@dataclass
class LinearModel:
    a: Array
    b: Array
    c: Array
    d: Array
    state_names: list[str]
    input_names: list[str]
    output_names: list[str]

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def output_row(self, name: str) -> Array:
        return self.c[self.output_names.index(name)]

    def eigenvalues(self) -> Array:
        return np.linalg.eigvals(self.a)


def linearize(condition: FlightCondition, modal: ModalDataset | None = None,
              rigid: bool = False) -> LinearModel:
    """Assemble the pitch-plane linear model at a flight condition.

    `rigid=True` (or `modal=None`) drops the modal states, leaving the 3x3
    short-period model. Outputs: true attitude `theta`, measured attitude
    `theta_m`, measured rate `q_m`.
    """
    if condition.v <= 1.0:
        raise ValueError("linearization requires nonzero airspeed")
    za_v = condition.z_alpha_over_v
    ma = condition.m_alpha
    zd_v = condition.z_delta_over_v
    md = condition.m_delta

    if rigid or modal is None:
        a = np.array([
            [za_v, 1.0, 0.0],
            [ma, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ])
        b = np.array([[zd_v], [md], [0.0]])
        c = np.array([
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0],
            [0.0, 1.0, 0.0],
        ])
        d = np.zeros((3, 1))
        return LinearModel(a, b, c, d, ["alpha", "q", "theta"], ["dE"],
                           ["theta", "theta_m", "q_m"])

    n_f = modal.n_modes
    n = 3 + 2 * n_f
    sigma_t = modal.sigma_z_t      # pitch-plane rotation slopes at the nozzle
    phi_t = modal.phi_z_t
    sigma_g = modal.sigma_z_g
    z_delta = zd_v * condition.v   # Z_d, m/s^2 per deg

    a = np.zeros((n, n))
    b = np.zeros((n, 1))
    a[0, 0] = za_v
    a[0, 1] = 1.0
    a[1, 0] = ma
    a[2, 1] = 1.0
    b[0, 0] = zd_v
    b[1, 0] = md
    for r in range(n_f):
        xi_r = 3 + r
        xid_r = 3 + n_f + r
        a[0, xi_r] = z_delta * sigma_t[r] / condition.v
        a[1, xi_r] = md * sigma_t[r] + condition.mass * z_delta * phi_t[r] / condition.j_yy
        a[xi_r, xid_r] = 1.0
        a[xid_r, xi_r] = -modal.omega2[r]
        a[xid_r, xid_r] = -modal.two_zeta_omega[r]
        b[xid_r, 0] = condition.mass * zd_v * condition.v * sigma_t[r]

    c = np.zeros((3, n))
    c[0, 2] = 1.0
    c[1, 2] = 1.0
    c[2, 1] = 1.0
    for r in range(n_f):
        # measured attitude picks up the sensor-frame tilt, measured rate its rate
        c[1, 3 + r] = -sigma_g[r]
        c[2, 3 + n_f + r] = sigma_g[r]
    d = np.zeros((3, 1))
    names = (["alpha", "q", "theta"]
             + [f"xi{r + 1}" for r in range(n_f)]
             + [f"xi{r + 1}_dot" for r in range(n_f)])
    return LinearModel(a, b, c, d, names, ["dE"], ["theta", "theta_m", "q_m"])


def condition_from_flight(v_air: float, mach: float, density: float,
                          tables: AeroTables, mass: MassProperties,
                          thrust_n: float, vehicle_length: float,
                          alpha_trim: float = 0.0, sound_speed: float | None = None,
                          label: str = "condition") -> FlightCondition:
    """Extract short-period coefficients from the vehicle data at a trajectory
    point by central-differencing the aerodynamic model around trim."""
    if v_air <= 1.0:
        raise ValueError("linearization requires nonzero airspeed")
    a_snd = sound_speed if sound_speed is not None else v_air / max(mach, 1e-6)
    d_alpha = 1e-4
    j_yy = mass.inertia[1, 1]

    def loads(alpha):
        vel = np.array([v_air * np.cos(alpha), 0.0, v_air * np.sin(alpha)])
        return aero_forces(tables, vel, np.zeros(3), density, a_snd)

    f_plus, m_plus = loads(alpha_trim + d_alpha)
    f_minus, m_minus = loads(alpha_trim - d_alpha)
    z_alpha = (f_plus[2] - f_minus[2]) / (2.0 * d_alpha) / mass.m
    m_alpha = (m_plus[1] - m_minus[1]) / (2.0 * d_alpha) / j_yy

    arm = vehicle_length - mass.x_cg
    m_delta = -9.0 * arm * thrust_n * DEG / j_yy
    z_delta = -9.0 * thrust_n * DEG / mass.m
    return FlightCondition(
        v=v_air, z_alpha_over_v=z_alpha / v_air, m_alpha=m_alpha,
        z_delta_over_v=z_delta / v_air, m_delta=m_delta,
        mass=mass.m, j_yy=j_yy, label=label)


def tf_from_model(model: LinearModel, output: str = "theta",
                  cancel_tol: float = 1e-8) -> RationalTF:
    """SISO transfer function from the single input to a named output, with
    near-coincident pole/zero pairs cancelled for reporting."""
    c = model.output_row(output)
    d = float(model.d[model.output_names.index(output), 0])
    tf = tf_from_state_space(model.a, model.b[:, 0], c, d)
    return tf.cancel(cancel_tol).normalized()


@dataclass
class FrequencyResponse:
    omega: Array
    h: Array

    def magnitude_db(self) -> Array:
        return 20.0 * np.log10(np.abs(self.h))

    def phase_deg(self) -> Array:
        return np.degrees(np.unwrap(np.angle(self.h)))


def freq_response(sys, omega: Array, output: str = "theta") -> FrequencyResponse:
    """Evaluate a RationalTF or LinearModel on a frequency grid [rad/s]."""
    omega = np.asarray(omega, dtype=np.float64)
    if np.any(np.diff(omega) <= 0.0):
        raise ValueError("frequency grid must be strictly increasing")
    s = 1j * omega
    if isinstance(sys, RationalTF):
        den = sys.den(s)
        h = np.where(den == 0.0, np.inf, sys.num(s) / np.where(den == 0.0, 1.0, den))
    else:
        c = sys.output_row(output)
        d = float(sys.d[sys.output_names.index(output), 0])
        n = sys.order
        h = np.empty(omega.size, dtype=complex)
        eye = np.eye(n)
        for k in range(omega.size):
            h[k] = c @ np.linalg.solve(s[k] * eye - sys.a, sys.b[:, 0]) + d
    return FrequencyResponse(omega, h)


@dataclass
class StabilityMargins:
    gain_margins: list = field(default_factory=list)    # (freq rad/s, dB)
    phase_margins: list = field(default_factory=list)   # (freq rad/s, deg)
    gm_db: float = np.inf
    gm_freq: float = np.nan
    pm_deg: float = np.inf
    pm_freq: float = np.nan
    no_gain_crossover: bool = False
    no_phase_crossover: bool = False


def _bisect(fun, lo: float, hi: float, tol: float = 1e-4) -> float:
    flo = fun(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < tol:
            return mid
        fm = fun(mid)
        if (flo < 0.0) == (fm < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def margins(loop: RationalTF, w_min: float = 1e-2, w_max: float = 1e3,
            points_per_decade: int = 2000) -> StabilityMargins:
    """Gain and phase margins of an open-loop TF located by dense sweep plus
    bisection (refined to 1e-4 rad/s).

    All unity-gain and 180-degree crossings are listed; the worst case (the
    smallest absolute margin) is reported in the scalar fields.
    """
    n_pts = int(points_per_decade * np.log10(w_max / w_min)) + 1
    grid = np.logspace(np.log10(w_min), np.log10(w_max), n_pts)
    h = loop(1j * grid)

    def resp(w):
        return loop(1j * w)

    out = StabilityMargins()

    # phase crossings: imag(L) = 0 with real(L) < 0
    im = np.imag(h)
    re = np.real(h)
    sign_change = np.where(np.diff(np.sign(im)) != 0)[0]
    for i in sign_change:
        if re[i] < 0.0 or re[i + 1] < 0.0:
            w = _bisect(lambda x: np.imag(resp(x)), grid[i], grid[i + 1])
            l_val = resp(w)
            if np.real(l_val) < 0.0:
                gm = -20.0 * np.log10(abs(l_val))
                out.gain_margins.append((w, gm))

    # gain crossings: |L| = 1
    mag = np.abs(h)
    crossing = np.where(np.diff(np.sign(mag - 1.0)) != 0)[0]
    for i in crossing:
        w = _bisect(lambda x: abs(resp(x)) - 1.0, grid[i], grid[i + 1])
        ph = np.degrees(np.angle(resp(w)))
        pm = ph + 180.0 if ph <= 0.0 else ph - 180.0
        out.phase_margins.append((w, pm))

    if out.gain_margins:
        out.gm_freq, out.gm_db = min(out.gain_margins, key=lambda t: abs(t[1]))
    else:
        out.no_phase_crossover = True
    if out.phase_margins:
        out.pm_freq, out.pm_deg = min(out.phase_margins, key=lambda t: abs(t[1]))
    else:
        out.no_gain_crossover = True
    return out


def loop_tf(plant_theta: RationalTF, gains: ControllerGains,
            filter_tf: RationalTF | None = None) -> RationalTF:
    """Open-loop TF around the attitude signal: L = F(s) (K_PI(s) + K_P s) P(s)."""
    comp = pi_rate_tf(gains)
    l_tf = comp * plant_theta
    if filter_tf is not None:
        l_tf = l_tf * filter_tf
    if not l_tf.is_proper:
        raise ValueError("open loop is improper; plant relative degree too low")
    return l_tf.normalized()


def _tf_to_ss(tf: RationalTF) -> tuple[Array, Array, Array, float]:
    """Controllable canonical realization of a proper TF."""
    if not tf.is_proper:
        raise ValueError("state-space realization needs a proper TF")
    lead, den = tf.den.monic()
    num = tf.num * (1.0 / lead)
    n = den.degree
    if n == 0:
        return np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), float(num.coeffs[-1])
    d = 0.0
    num_c = np.zeros(n + 1)
    num_c[n + 1 - num.coeffs.size:] = num.coeffs
    if num.degree == n:
        d = num_c[0]
        num_c = num_c - d * den.coeffs
    a = np.zeros((n, n))
    a[0, :] = -den.coeffs[1:]
    a[1:, :-1] = np.eye(n - 1)
    b = np.zeros((n, 1))
    b[0, 0] = 1.0
    c = num_c[1:].reshape(1, -1)
    return a, b, c, float(d)


def closed_loop(plant: LinearModel, gains: ControllerGains,
                filter_tf: RationalTF | None = None,
                placement: str = "feedback") -> LinearModel:
    """Closed attitude loop from reference to true attitude.

    Feedback placement filters the measured attitude and rate signals;
    forward placement filters the channel command. The loop structure matches
    the discrete controller: dE = K_att (e + w_i int(e)) - K_rate q_f,
    e = ref - theta_f.
    """
    if placement not in ("feedback", "forward"):
        raise ValueError("placement must be 'feedback' or 'forward'")
    a_p, b_p = plant.a, plant.b[:, 0]
    c_th = plant.output_row("theta_m")
    c_q = plant.output_row("q_m")
    n_p = plant.order
    k_att = gains.attitude_gain
    k_rate = gains.rate_gain
    iw = gains.integral_weight

    if filter_tf is None:
        placement = "feedback"
        a_f = np.zeros((0, 0))
        b_f = np.zeros((0, 1))
        c_f = np.zeros((1, 0))
        d_f = 1.0
    else:
        a_f, b_f, c_f, d_f = _tf_to_ss(filter_tf)
    n_f = a_f.shape[0]

    if placement == "feedback":
        # states: [x_p, x_fth, x_fq, x_i]
        n = n_p + 2 * n_f + 1
        a = np.zeros((n, n))
        b = np.zeros(n)
        s_fth = slice(n_p, n_p + n_f)
        s_fq = slice(n_p + n_f, n_p + 2 * n_f)
        i_int = n - 1

        theta_f = np.zeros(n)       # filtered attitude as a row over the big state
        theta_f[s_fth] = c_f[0]
        theta_f[:n_p] += d_f * c_th
        q_f = np.zeros(n)
        q_f[s_fq] = c_f[0]
        q_f[:n_p] += d_f * c_q

        # dE = k_att (ref - theta_f + iw x_i) - k_rate q_f
        de_row = -k_att * theta_f - k_rate * q_f
        de_row[i_int] += k_att * iw
        de_ref = k_att

        a[:n_p, :] += np.outer(b_p, de_row)
        a[:n_p, :n_p] += a_p
        if n_f:
            a[s_fth, s_fth] = a_f
            a[s_fth, :n_p] += np.outer(b_f[:, 0], c_th)
            a[s_fq, s_fq] = a_f
            a[s_fq, :n_p] += np.outer(b_f[:, 0], c_q)
        a[i_int, :] = -theta_f
        b[:n_p] = b_p * de_ref
        b[i_int] = 1.0
    else:
        # states: [x_p, x_filt, x_i]; filter input u = k_att(e + iw x_i) - k_rate q_m
        n = n_p + n_f + 1
        a = np.zeros((n, n))
        b = np.zeros(n)
        s_f = slice(n_p, n_p + n_f)
        i_int = n - 1

        u_row = np.zeros(n)
        u_row[:n_p] = -k_att * c_th - k_rate * c_q
        u_row[i_int] = k_att * iw
        u_ref = k_att

        de_row = np.zeros(n)
        de_row[s_f] = c_f[0]
        de_row += d_f * u_row

        a[:n_p, :] += np.outer(b_p, de_row)
        a[:n_p, :n_p] += a_p
        if n_f:
            a[s_f, s_f] = a_f
            a[s_f, :] += np.outer(b_f[:, 0], u_row)
        a[i_int, :n_p] = -c_th
        b[:n_p] = b_p * d_f * u_ref
        if n_f:
            b[s_f] = b_f[:, 0] * u_ref
        b[i_int] = 1.0

    c_out = np.zeros((1, n))
    c_out[0, :n_p] = plant.output_row("theta")
    names = plant.state_names + [f"aux{i}" for i in range(n - n_p - 1)] + ["int_e"]
    return LinearModel(a, b.reshape(-1, 1), c_out, np.zeros((1, 1)),
                       names, ["ref"], ["theta"])


@dataclass
class StepResult:
    t: Array
    y: Array
    diverged: bool = False
    t_escape: float = np.nan


def step_response(model: LinearModel, duration: float, dt: float = 1e-3,
                  output: str | None = None, escape: float = 1e6) -> StepResult:
    """Unit-step response simulated with the fixed-step RK4 integrator.

    An unstable loop is flagged rather than raised: integration stops when
    the output magnitude exceeds `escape` and the escape time is recorded.
    """
    out_name = output if output is not None else model.output_names[0]
    c = model.output_row(out_name)
    d = float(model.d[model.output_names.index(out_name), 0])
    a_m, b_v = model.a, model.b[:, 0]

    def deriv(_t, x):
        return a_m @ x + b_v

    n_steps = int(round(duration / dt))
    t = np.arange(n_steps + 1) * dt
    y = np.empty(n_steps + 1)
    x = np.zeros(model.order)
    y[0] = d
    for k in range(n_steps):
        try:
            x = rk4_step(deriv, t[k], x, dt)
        except FloatingPointError:
            return StepResult(t[:k + 1], y[:k + 1], True, t[k])
        y[k + 1] = c @ x + d
        if abs(y[k + 1]) > escape:
            return StepResult(t[:k + 2], y[:k + 2], True, t[k + 1])
    return StepResult(t, y)


def step_metrics(result: StepResult, final_value: float = 1.0) -> dict:
    """Rise time (10-90%) and fractional overshoot of a step response."""
    y = result.y
    t = result.t
    i10 = np.argmax(y >= 0.1 * final_value)
    i90 = np.argmax(y >= 0.9 * final_value)
    if y[i90] < 0.9 * final_value or y[i10] < 0.1 * final_value:
        raise ValueError("response never reaches 90% of the final value")
    overshoot = (np.max(y) - final_value) / final_value
    return {"rise_time": t[i90] - t[i10], "overshoot": max(overshoot, 0.0)}
