"""Closed-loop nonlinear simulation runner, reference trajectory,
configuration and telemetry I/O, and the Monte-Carlo robustness campaign.

Frames: the launch (inertial) frame has +x horizontal along the launch
azimuth, +z down, origin at the pad. The published north/east wind is
rotated into this frame; the yaw reference is zero because the frame itself
carries the azimuth.
"""

from __future__ import annotations

import csv
import io
import multiprocessing
from dataclasses import dataclass, field, asdict, replace

import numpy as np
import yaml

from . import _core, control, flex, vehicle
from .environment import KNOT, WindSpec, wind_in_launch_frame
from .numerics import euler_to_matrix

Array = np.ndarray

PITCH_INITIAL_DEG = 89.9
PITCH_VERTICAL_DEG = 90.0
PITCH_FINAL_DEG = 40.0
VERTICAL_PHASE_S = 10.0
FLIGHT_DURATION_S = 165.0


def generate_reference(t: float, yaw_offset: float = 0.0) -> Array:
    """Commanded (roll, pitch, yaw) [rad] at time t [s].

    Pitch holds 90 deg through the vertical phase, then ramps linearly to
    40 deg at burnout; roll is zero; yaw is the configured constant heading
    offset (zero before the pitch-over starts). Out-of-range times clamp.
    """
    t = float(np.clip(t, 0.0, FLIGHT_DURATION_S))
    if t <= VERTICAL_PHASE_S:
        pitch = PITCH_VERTICAL_DEG
        yaw = 0.0
    else:
        frac = (t - VERTICAL_PHASE_S) / (FLIGHT_DURATION_S - VERTICAL_PHASE_S)
        pitch = PITCH_VERTICAL_DEG + frac * (PITCH_FINAL_DEG - PITCH_VERTICAL_DEG)
        yaw = yaw_offset
    return np.array([0.0, np.radians(pitch), yaw])


@dataclass
class SimConfig:
    # vehicle / datasets
    aero_file: str | None = None
    modal_file: str | None = None
    ring_radius: float = vehicle.RING_RADIUS
    vehicle_length: float = vehicle.VEHICLE_LENGTH
    gimbal_limit_deg: float = 5.0
    burn_duration_s: float = vehicle.BURN_DURATION
    # environment
    wind_north_kt: float = 10.0
    wind_east_kt: float = 10.0
    launch_azimuth_deg: float = 135.0
    # controller
    filter_type: str = "notch"            # notch | elliptic | none
    filter_placement: str = "feedback"    # feedback | forward
    loop_rate_hz: float = 100.0
    rate_gain: float = control.RATE_GAIN
    attitude_gain: float = control.ATTITUDE_GAIN
    integral_weight: float = control.INTEGRAL_WEIGHT
    roll_kp: float = 9.6580
    roll_kd: float = 13.5212
    notch_zero_damping: float = control.NOTCH_ZERO_DAMPING
    notch_pole_damping: float = control.NOTCH_POLE_DAMPING
    elliptic_order: int = 3
    elliptic_passband_rad_s: float = 10.0
    elliptic_ripple_db: float = 1.0
    elliptic_stopband_db: float = 40.0
    # simulation
    dt_s: float = 1e-3
    duration_s: float = FLIGHT_DURATION_S
    pitch_init_deg: float = PITCH_INITIAL_DEG
    yaw_reference_deg: float = 0.0
    flex_enabled: bool = True
    flex_frozen: bool = False
    seed: int = 2025
    # Monte-Carlo campaign
    mc_scales: tuple = (0.01, 0.03, 0.10, 0.20, 0.34, 0.40)
    mc_runs_per_scale: int = 50
    mc_workers: int = 8
    mc_corner_mode: bool = False

    def validate(self) -> None:
        if self.filter_type not in ("notch", "elliptic", "none"):
            raise ValueError(f"unknown filter type {self.filter_type!r}")
        period = 1.0 / self.loop_rate_hz
        sub = period / self.dt_s
        if abs(sub - round(sub)) > 1e-9:
            raise ValueError("dt must divide the control loop period")

    def substeps(self) -> int:
        return int(round(1.0 / (self.loop_rate_hz * self.dt_s)))


_CONFIG_SECTIONS = {
    "vehicle": ["aero_file", "modal_file", "ring_radius", "vehicle_length",
                "gimbal_limit_deg", "burn_duration_s"],
    "environment": ["wind_north_kt", "wind_east_kt", "launch_azimuth_deg"],
    "controller": ["filter_type", "filter_placement", "loop_rate_hz", "rate_gain",
                   "attitude_gain", "integral_weight", "roll_kp", "roll_kd",
                   "notch_zero_damping", "notch_pole_damping", "elliptic_order",
                   "elliptic_passband_rad_s", "elliptic_ripple_db", "elliptic_stopband_db"],
    "sim": ["dt_s", "duration_s", "pitch_init_deg", "yaw_reference_deg",
            "flex_enabled", "flex_frozen", "seed"],
    "mc": ["mc_scales", "mc_runs_per_scale", "mc_workers", "mc_corner_mode"],
}


def save_config(config: SimConfig, path) -> None:
    flat = asdict(config)
    doc = {sec: {k: (list(flat[k]) if isinstance(flat[k], tuple) else flat[k])
                 for k in keys}
           for sec, keys in _CONFIG_SECTIONS.items()}
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_config(path) -> SimConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    kwargs = {}
    for sec, keys in _CONFIG_SECTIONS.items():
        block = doc.get(sec, {}) or {}
        for k, v in block.items():
            if k not in keys:
                raise ValueError(f"unknown config key {sec}.{k}")
            kwargs[k] = tuple(v) if k == "mc_scales" else v
    cfg = SimConfig(**kwargs)
    cfg.validate()
    return cfg


TELEMETRY_CHANNELS = (
    ["time_s",
     "x_m", "y_m", "z_m", "u_mps", "v_mps", "w_mps",
     "roll_rad", "pitch_rad", "yaw_rad", "p_radps", "q_radps", "r_radps"]
    + [f"xi{j}" for j in range(1, 5)]
    + [f"xi{j}_dot" for j in range(1, 5)]
    + ["roll_meas_rad", "pitch_meas_rad", "yaw_meas_rad",
       "p_meas_radps", "q_meas_radps", "r_meas_radps",
       "roll_ref_rad", "pitch_ref_rad", "yaw_ref_rad",
       "cmd_roll_deg", "cmd_pitch_deg", "cmd_yaw_deg"]
    + [f"mu{i}_rad" for i in range(9)]
    + [f"eta{i}_rad" for i in range(9)]
    + ["mach", "altitude_m", "qbar_pa", "mass_kg", "thrust_kn", "fuel_fraction"]
)


@dataclass
class Telemetry:
    columns: list[str]
    data: Array                  # (n_samples, n_columns)
    stable: bool = True
    fault: bool = False
    instability_time: float = np.nan
    max_attitude_error: float = 0.0
    max_modal_amplitude: float = 0.0

    def channel(self, name: str) -> Array:
        return self.data[:, self.columns.index(name)]

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]


def export_telemetry(tel: Telemetry, path) -> None:
    """Write telemetry as CSV with a header row; floats keep full precision."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(tel.columns)
            for row in tel.data:
                writer.writerow([format(v, ".17g") for v in row])
    except OSError as exc:
        raise OSError(f"telemetry export to {path} failed: {exc}") from exc


def load_telemetry(path) -> Telemetry:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows) if rows else np.empty((0, len(columns)))
    return Telemetry(columns=columns, data=data)


def _load_datasets(config: SimConfig, modal_override: flex.ModalDataset | None = None):
    aero = vehicle.default_aero_tables()
    if config.aero_file:
        aero = load_aero_tables(config.aero_file)
    if modal_override is not None:
        modal = modal_override
    elif config.modal_file:
        modal = flex.load_modal_dataset(config.modal_file)
    else:
        modal = flex.default_modal_dataset()
    return aero, modal


def save_aero_tables(tables: vehicle.AeroTables, path) -> None:
    doc = {
        "note": "synthetic slender-body dataset; replace with measured data",
        "alpha_deg": np.degrees(tables.alpha_grid).tolist(),
        "mach": tables.mach_grid.tolist(),
        "cl": tables.cl.tolist(),
        "cd": tables.cd.tolist(),
        "cm": tables.cm.tolist(),
        "c_mq": tables.c_mq, "c_nr": tables.c_nr, "c_lp": tables.c_lp,
        "ref_area_m2": tables.ref_area, "ref_length_m": tables.ref_length,
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_aero_tables(path) -> vehicle.AeroTables:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return vehicle.AeroTables(
        alpha_grid=np.radians(doc["alpha_deg"]),
        mach_grid=np.array(doc["mach"], dtype=np.float64),
        cl=np.array(doc["cl"], dtype=np.float64),
        cd=np.array(doc["cd"], dtype=np.float64),
        cm=np.array(doc["cm"], dtype=np.float64),
        c_mq=doc.get("c_mq", -1.0), c_nr=doc.get("c_nr", -1.0),
        c_lp=doc.get("c_lp", -0.1),
        ref_area=doc.get("ref_area_m2", vehicle.REF_AREA),
        ref_length=doc.get("ref_length_m", vehicle.REF_DIAMETER),
    )


def _filter_tf(config: SimConfig, modal: flex.ModalDataset):
    if config.filter_type == "notch":
        tf = control.design_notch(modal, config.notch_zero_damping, config.notch_pole_damping)
        return tf, "sections"
    if config.filter_type == "elliptic":
        tf = control.design_elliptic(config.elliptic_order, config.elliptic_passband_rad_s,
                                     config.elliptic_ripple_db, config.elliptic_stopband_db)
        return tf, None
    return None, None


def _pack_core_args(config: SimConfig, aero: vehicle.AeroTables,
                    modal: flex.ModalDataset, layout: vehicle.EngineLayout,
                    flex_mode: float) -> tuple:
    wind = wind_in_launch_frame(
        WindSpec(config.wind_north_kt * KNOT, config.wind_east_kt * KNOT),
        np.radians(config.launch_azimuth_deg))
    prm = np.zeros(_core.N_PRM)
    prm[_core.PRM_GRAVITY] = 9.80665
    prm[_core.PRM_REF_AREA] = aero.ref_area
    prm[_core.PRM_REF_LEN] = aero.ref_length
    prm[_core.PRM_CMQ] = aero.c_mq
    prm[_core.PRM_CNR] = aero.c_nr
    prm[_core.PRM_CLP] = aero.c_lp
    prm[_core.PRM_LENGTH] = config.vehicle_length
    prm[_core.PRM_BURN_T] = config.burn_duration_s
    prm[_core.PRM_FLEX] = flex_mode
    prm[_core.PRM_T_VAC] = vehicle.THRUST_VACUUM_KN
    prm[_core.PRM_T_SLOPE] = vehicle.THRUST_SLOPE_KN_PER_KPA
    prm[_core.PRM_WIND_X] = wind[0]
    prm[_core.PRM_WIND_Y] = wind[1]
    prm[_core.PRM_WIND_Z] = wind[2]
    tab = vehicle.MASS_TABLE
    return (prm,
            tab["fuel_fraction"], tab["mass_kg"], tab["cg_m"], tab["jxx"], tab["jyy"],
            aero.alpha_grid, aero.mach_grid, aero.cl, aero.cd, aero.cm,
            layout.ring_angles, layout.ring_radii(),
            modal.omega2, modal.two_zeta_omega,
            modal.phi_y_t, modal.phi_z_t, modal.sigma_y_t, modal.sigma_z_t)


def run_closed_loop(config: SimConfig,
                    modal_override: flex.ModalDataset | None = None) -> Telemetry:
    """Run the closed-loop ascent simulation and return full telemetry.

    The run terminates early with `stable=False` when the divergence detector
    fires (excessive modal rate pickup at the sensor or attitude error beyond
    20 deg) and with `fault=True` on non-finite states; telemetry holds
    everything up to the last valid sample.
    """
    config.validate()
    aero, modal = _load_datasets(config, modal_override)
    layout = vehicle.EngineLayout(
        ring_radius=config.ring_radius, length=config.vehicle_length,
        gimbal_limit=np.radians(config.gimbal_limit_deg))
    mass0 = vehicle.mass_properties(1.0, config.burn_duration_s)
    allocator = control.build_allocator(layout, mass0)

    filter_tf, prewarp = _filter_tf(config, modal)
    loop_dt = 1.0 / config.loop_rate_hz
    gains = control.ControllerGains(
        rate_gain=config.rate_gain, attitude_gain=config.attitude_gain,
        integral_weight=config.integral_weight,
        roll_kp=config.roll_kp, roll_kd=config.roll_kd)
    controller = control.AttitudeController(
        gains, loop_dt, filter_tf, placement=config.filter_placement, prewarp=prewarp)

    if config.flex_frozen:
        flex_mode = 2.0
    elif config.flex_enabled:
        flex_mode = 1.0
    else:
        flex_mode = 0.0
    core_args = _pack_core_args(config, aero, modal, layout, flex_mode)

    y = np.zeros(_core.STATE_SIZE)
    y[3] = 1.0
    y[7] = np.radians(config.pitch_init_deg)

    n_ticks = int(round(config.duration_s * config.loop_rate_hz))
    substeps = config.substeps()
    yaw_off = np.radians(config.yaw_reference_deg)

    rows = np.empty((n_ticks + 1, len(TELEMETRY_CHANNELS)))
    n_rows = 0
    stable, fault = True, False
    t_instab = np.nan
    max_err = 0.0
    max_xi = 0.0
    gimbal = np.zeros((layout.count, 2))
    cmd = np.zeros(3)
    saturated = False

    for k in range(n_ticks + 1):
        t = k * loop_dt
        ref = generate_reference(t, yaw_off)
        euler = y[6:9]
        omega = y[9:12]
        xi = y[12:16]
        xi_dot = y[16:20]

        r_bi = euler_to_matrix(euler)
        if config.flex_enabled and not config.flex_frozen:
            euler_m, omega_m = flex.sensed_outputs(r_bi, omega, xi, xi_dot, modal)
        else:
            euler_m, omega_m = euler.copy(), omega.copy()

        err = ref - euler_m
        max_err = max(max_err, float(np.max(np.abs(err[1:]))))
        max_xi = max(max_xi, float(np.max(np.abs(xi))))

        if flex.divergence_detected(xi_dot, err, modal):
            stable = False
            t_instab = t
            rows[n_rows] = _telemetry_row(t, y, euler_m, omega_m, ref, cmd, gimbal, config)
            n_rows += 1
            break

        cmd = controller.step(ref, euler_m, omega_m, saturated)
        gimbal, saturated = control.allocate(allocator, cmd)

        rows[n_rows] = _telemetry_row(t, y, euler_m, omega_m, ref, cmd, gimbal, config)
        n_rows += 1
        if k == n_ticks:
            break

        y, ok = _core.rk4_burst(y, t, config.dt_s, substeps, gimbal, *core_args)
        if not ok:
            fault = True
            stable = False
            t_instab = t
            break

    return Telemetry(columns=list(TELEMETRY_CHANNELS), data=rows[:n_rows].copy(),
                     stable=stable, fault=fault, instability_time=t_instab,
                     max_attitude_error=max_err, max_modal_amplitude=max_xi)


def _telemetry_row(t, y, euler_m, omega_m, ref, cmd, gimbal, config) -> Array:
    altitude = -y[2]
    p_kpa, rho, sound = _core.atmo_state(altitude)
    vmag = float(np.linalg.norm(y[3:6]))
    fuel = float(np.clip(1.0 - t / config.burn_duration_s, 0.0, 1.0))
    mass = vehicle.mass_properties(fuel, config.burn_duration_s).m
    thrust = vehicle.engine_thrust(p_kpa)
    return np.concatenate([
        [t], y[0:3], y[3:6], y[6:9], y[9:12], y[12:16], y[16:20],
        euler_m, omega_m, ref, cmd,
        gimbal[:, 0], gimbal[:, 1],
        [vmag / sound, altitude, 0.5 * rho * vmag**2, mass, thrust, fuel],
    ])


# -- Monte-Carlo robustness campaign ----

PERTURB_ROWS = ("phi_y_t", "phi_z_t", "sigma_y_t", "sigma_z_t", "sigma_y_g", "sigma_z_g")


def perturb_modal(data: flex.ModalDataset, scale: float,
                  rng: np.random.Generator, corner: bool = False) -> flex.ModalDataset:
    """Randomly dispersed copy of a modal dataset.

    Every modal frequency and every shape/slope row is multiplied by an
    independent factor: uniform in [1-scale, 1+scale], or (corner mode) set
    to one of the interval endpoints with random sign. Draw order is fixed
    (4 frequency factors, then the 6 rows in PERTURB_ROWS order), so a seeded
    generator reproduces the dataset exactly.
    """
    if not 0.0 <= scale <= 0.5:
        raise ValueError("perturbation scale must lie in [0, 0.5]")
    if corner:
        freq_factors = 1.0 + scale * rng.choice([-1.0, 1.0], size=data.n_modes)
        row_draw = 1.0 + scale * rng.choice([-1.0, 1.0], size=len(PERTURB_ROWS))
    else:
        freq_factors = rng.uniform(1.0 - scale, 1.0 + scale, size=data.n_modes)
        row_draw = rng.uniform(1.0 - scale, 1.0 + scale, size=len(PERTURB_ROWS))
    rows = dict(zip(PERTURB_ROWS, row_draw))
    return data.scaled(freq_factors, rows)


@dataclass
class McRun:
    scale: float
    run_index: int
    filter_type: str
    stable: bool
    fault: bool
    max_attitude_error: float
    max_modal_amplitude: float
    instability_time: float


@dataclass
class McResult:
    scales: list[float]
    runs_per_scale: int
    corner_mode: bool
    runs: list[McRun] = field(default_factory=list)
    boundaries: dict = field(default_factory=dict)

    def stable_fraction(self, filter_type: str, scale: float) -> float:
        sel = [r for r in self.runs if r.filter_type == filter_type and r.scale == scale]
        if not sel:
            return np.nan
        return sum(r.stable for r in sel) / len(sel)


def _mc_task(args):
    config_dict, scale, run_idx, filters = args
    config = SimConfig(**config_dict)
    base = _load_datasets(config)[1]
    seq = np.random.SeedSequence([config.seed, int(round(scale * 100000)), run_idx])
    rng = np.random.default_rng(seq)
    dataset = perturb_modal(base, scale, rng, corner=config.mc_corner_mode)
    out = []
    for ftype in filters:
        tel = run_closed_loop(replace(config, filter_type=ftype), modal_override=dataset)
        out.append(McRun(scale=scale, run_index=run_idx, filter_type=ftype,
                         stable=tel.stable, fault=tel.fault,
                         max_attitude_error=tel.max_attitude_error,
                         max_modal_amplitude=tel.max_modal_amplitude,
                         instability_time=tel.instability_time))
    return out


def mc_campaign(config: SimConfig, scales=None, runs_per_scale: int | None = None,
                workers: int | None = None,
                filters=("notch", "elliptic")) -> McResult:
    """Paired Monte-Carlo robustness campaign.

    Each (scale, run index) pair draws one perturbed modal dataset consumed by
    every filter variant, so the comparison is paired. The stability boundary
    per filter is the largest scale at which every run stayed stable.
    """
    scales = list(scales if scales is not None else config.mc_scales)
    n_runs = runs_per_scale if runs_per_scale is not None else config.mc_runs_per_scale
    n_workers = workers if workers is not None else config.mc_workers

    config_dict = asdict(config)
    tasks = [(config_dict, s, k, tuple(filters))
             for s in scales for k in range(n_runs)]

    result = McResult(scales=scales, runs_per_scale=n_runs,
                      corner_mode=config.mc_corner_mode)
    if n_workers > 1:
        # warm the jit cache before forking so workers reuse it
        _warm_kernels(config)
        with multiprocessing.Pool(n_workers) as pool:
            for chunk in pool.imap(_mc_task, tasks, chunksize=1):
                result.runs.extend(chunk)
    else:
        for task in tasks:
            result.runs.extend(_mc_task(task))
    result.runs.sort(key=lambda r: (r.scale, r.run_index, r.filter_type))

    for ftype in filters:
        boundary = 0.0
        for s in sorted(scales):
            if result.stable_fraction(ftype, s) == 1.0:
                boundary = s
            else:
                break
        result.boundaries[ftype] = boundary
    return result


def _warm_kernels(config: SimConfig) -> None:
    warm = replace(config, duration_s=2.0 / config.loop_rate_hz)
    run_closed_loop(warm)


def campaign_summary(result: McResult) -> str:
    """Deterministic plain-text campaign summary (byte-identical across
    repeated runs with the same seed)."""
    buf = io.StringIO()
    buf.write("monte-carlo modal dispersion campaign\n")
    buf.write(f"mode: {'corner' if result.corner_mode else 'independent-uniform'}\n")
    buf.write(f"runs per scale: {result.runs_per_scale}\n")
    filters = sorted({r.filter_type for r in result.runs})
    buf.write("scale".ljust(10))
    for f in filters:
        buf.write(f"{f + ' stable':>18}")
    buf.write("\n")
    for s in result.scales:
        buf.write(f"{s:<10.4f}")
        for f in filters:
            sel = [r for r in result.runs if r.filter_type == f and r.scale == s]
            n_stable = sum(r.stable for r in sel)
            buf.write(f"{n_stable:>9d}/{len(sel):<8d}")
        buf.write("\n")
    for f in filters:
        buf.write(f"stability boundary [{f}]: {result.boundaries.get(f, 0.0):.4f}\n")
    if "notch" in result.boundaries and "elliptic" in result.boundaries:
        b_n = result.boundaries["notch"]
        b_e = result.boundaries["elliptic"]
        ratio = b_e / b_n if b_n > 0 else np.inf
        buf.write(f"boundary ratio elliptic/notch: {ratio:.2f}\n")
    return buf.getvalue()
