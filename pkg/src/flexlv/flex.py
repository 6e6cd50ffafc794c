"""Modal flexible dynamics: dataset, bending-modified engine loads, and
bending-corrupted sensor outputs.

Mode ordering: [1st bending y, 1st bending z, 2nd bending y, 2nd bending z].
Modal coordinates are mass-normalized, so shape rows phi carry kg^-1/2 and
xi carries kg^1/2 m.

Slope rows sigma are stored as local SECTION ROTATION angles per unit xi:
for a y-plane mode the section rotates about +z by +dphi/dx, for a z-plane
mode about +y by -dphi/dx. With that convention the thrust-line rotation
R_z(sigma_y_t . xi) R_y(sigma_z_t . xi) and the rate pickup
omega_m = omega + sigma_G^T xi_dot are both physical, and the y/z planes
behave identically under a 90 degree rotation of the excitation.

Note on the measured attitude: the small-angle sensor-frame matrix is applied
exactly as conventionally printed for this model family, which makes the
attitude pickup enter with the opposite sign to the rate pickup (the rate
path dominates the flexible feedback by more than a decade at the modal
frequencies, so the loop behavior is set by the consistent rate term). See
README "Sensor model" for the audit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import yaml

from . import _core
from .numerics import matrix_to_euler
from .vehicle import EngineLayout, MassProperties, engine_forces

Array = np.ndarray

N_MODES = 4
FIRST_BENDING_HZ = 4.293
SECOND_BENDING_HZ = 11.559
FIRST_BENDING_DAMPING = 0.0145
SECOND_BENDING_DAMPING = 0.0147

# divergence detector bounds used by the closed-loop harness
RATE_PICKUP_BOUND = 1.0          # rad/s on |sigma_G^T xi_dot|
ATTITUDE_ERROR_BOUND = np.radians(20.0)

SMALL_ANGLE_WARN = 0.2           # rad, small-angle validity of the sensor model


@dataclass(frozen=True)
class ModalDataset:
    """Per-mode frequency/damping and station-sampled shape and slope rows."""
    freqs: Array       # rad/s
    dampings: Array
    phi_y_t: Array     # displacement shape at nozzle, y-plane modes
    phi_z_t: Array
    sigma_y_t: Array   # rotation slope at nozzle
    sigma_z_t: Array
    sigma_y_g: Array   # rotation slope at sensor
    sigma_z_g: Array

    def __post_init__(self):
        for name in ("freqs", "dampings", "phi_y_t", "phi_z_t",
                     "sigma_y_t", "sigma_z_t", "sigma_y_g", "sigma_z_g"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, arr)
            if arr.shape != (self.n_modes,):
                raise ValueError(f"{name} must have one entry per mode")
        if np.any(self.freqs <= 0.0):
            raise ValueError("modal frequencies must be positive")
        if np.any((self.dampings <= 0.0) | (self.dampings >= 1.0)):
            raise ValueError("damping ratios must lie in (0, 1)")

    @property
    def n_modes(self) -> int:
        return np.asarray(self.freqs).size

    @property
    def omega2(self) -> Array:
        return self.freqs**2

    @property
    def two_zeta_omega(self) -> Array:
        return 2.0 * self.dampings * self.freqs

    def phi_t(self) -> Array:
        """Nozzle shape matrix [0 | phi_y | phi_z], (n_f, 3)."""
        return np.column_stack([np.zeros(self.n_modes), self.phi_y_t, self.phi_z_t])

    def sigma_g(self) -> Array:
        """Sensor slope matrix [0 | sigma_z | sigma_y], (n_f, 3); the middle
        column feeds the pitch channel, the last the yaw channel."""
        return np.column_stack([np.zeros(self.n_modes), self.sigma_z_g, self.sigma_y_g])

    def scaled(self, freq_factors: Array, row_factors: dict[str, float] | None = None) -> "ModalDataset":
        """Return a copy with per-mode frequency factors and per-row shape
        factors applied (used for dispersion studies)."""
        rows = row_factors or {}
        kwargs = {"freqs": self.freqs * np.asarray(freq_factors, dtype=np.float64)}
        for name in ("phi_y_t", "phi_z_t", "sigma_y_t", "sigma_z_t", "sigma_y_g", "sigma_z_g"):
            if name in rows:
                kwargs[name] = getattr(self, name) * rows[name]
        return replace(self, **kwargs)


# free-free uniform beam eigenvalue parameters (first two elastic modes)
_BETA_L = (4.730040744862704, 7.853204624095838)


def _beam_shape(x: Array, beta: float, length: float) -> tuple[Array, Array]:
    """Mode shape W and spatial slope W' of a free-free uniform beam,
    normalized so that integral of W^2 over the span equals the span."""
    bl = beta * length
    sig = (np.cosh(bl) - np.cos(bl)) / (np.sinh(bl) - np.sin(bl))
    bx = beta * x
    w = np.cosh(bx) + np.cos(bx) - sig * (np.sinh(bx) + np.sin(bx))
    wp = beta * (np.sinh(bx) - np.sin(bx) - sig * (np.cosh(bx) + np.cos(bx)))
    return w, wp


def beam_modal_dataset(length: float = 70.0, nozzle_station: float = 70.0,
                       sensor_station: float = 15.0, ref_mass: float = 441841.74,
                       freqs_hz: tuple = (FIRST_BENDING_HZ, FIRST_BENDING_HZ,
                                          SECOND_BENDING_HZ, SECOND_BENDING_HZ),
                       dampings: tuple = (FIRST_BENDING_DAMPING, FIRST_BENDING_DAMPING,
                                          SECOND_BENDING_DAMPING, SECOND_BENDING_DAMPING),
                       participation: tuple = (0.7, 3.5)) -> ModalDataset:
    """Analytic default dataset: free-free uniform-beam shapes sampled at
    the nozzle and sensor stations, mass-normalized against `ref_mass`.

    This is a synthetic stand-in for measured modal data: the frequencies
    and dampings are the design values, while the shape/slope magnitudes come
    from the uniform-beam idealization multiplied by per-bending-pair
    `participation` factors. A uniform beam badly misrepresents how a real
    booster's concentrated tank/engine masses weight the two bending pairs,
    so the factors are calibrated at the control level: the second pair
    couples strongly enough that the unfiltered loop diverges through the
    divergence bounds (its sensor/nozzle sign pattern is the destabilizing
    one), while the first pair stays weak enough that a low-pass style filter
    retains authority when dispersed modal frequencies drift down toward the
    controller band. Swap in a measured dataset file for any
    structural-fidelity use.
    """
    stations = np.array([nozzle_station, sensor_station])
    vals = {}
    for k, bl in enumerate(_BETA_L):
        norm = participation[k] / np.sqrt(ref_mass)
        w, wp = _beam_shape(stations, bl / length, length)
        vals[k] = (w * norm, wp * norm)
    (phi1, slope1), (phi2, slope2) = vals[0], vals[1]

    # y-modes carry +slope (rotation about z), z-modes -slope (rotation about y)
    return ModalDataset(
        freqs=2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64),
        dampings=np.asarray(dampings, dtype=np.float64),
        phi_y_t=np.array([phi1[0], 0.0, phi2[0], 0.0]),
        phi_z_t=np.array([0.0, phi1[0], 0.0, phi2[0]]),
        sigma_y_t=np.array([slope1[0], 0.0, slope2[0], 0.0]),
        sigma_z_t=np.array([0.0, -slope1[0], 0.0, -slope2[0]]),
        sigma_y_g=np.array([slope1[1], 0.0, slope2[1], 0.0]),
        sigma_z_g=np.array([0.0, -slope1[1], 0.0, -slope2[1]]),
    )


def default_modal_dataset() -> ModalDataset:
    return beam_modal_dataset()


def save_modal_dataset(data: ModalDataset, path) -> None:
    doc = {
        "units": {
            "frequency": "Hz",
            "shapes": "kg^-1/2 (mass normalized displacement)",
            "slopes": "kg^-1/2 m^-1 (section rotation per unit modal coordinate)",
        },
        "modes": [
            {
                "frequency_hz": float(data.freqs[j] / (2.0 * np.pi)),
                "damping": float(data.dampings[j]),
                "phi_y_t": float(data.phi_y_t[j]),
                "phi_z_t": float(data.phi_z_t[j]),
                "sigma_y_t": float(data.sigma_y_t[j]),
                "sigma_z_t": float(data.sigma_z_t[j]),
                "sigma_y_g": float(data.sigma_y_g[j]),
                "sigma_z_g": float(data.sigma_z_g[j]),
            }
            for j in range(data.n_modes)
        ],
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_modal_dataset(path) -> ModalDataset:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    modes = doc["modes"]
    get = lambda key: np.array([m[key] for m in modes], dtype=np.float64)
    return ModalDataset(
        freqs=2.0 * np.pi * get("frequency_hz"),
        dampings=get("damping"),
        phi_y_t=get("phi_y_t"), phi_z_t=get("phi_z_t"),
        sigma_y_t=get("sigma_y_t"), sigma_z_t=get("sigma_z_t"),
        sigma_y_g=get("sigma_y_g"), sigma_z_g=get("sigma_z_g"),
    )


def flex_derivatives(xi: Array, xi_dot: Array, engine_forces_n: Array,
                     data: ModalDataset) -> tuple[Array, Array]:
    """Modal accelerations: xi_ddot = -Omega^2 xi - 2 zeta Omega xi_dot + phi_T . sum(F_i).

    `engine_forces_n` is the (n_engines, 3) array of engine forces in newtons
    (the bent forces when flexibility feedback is active)."""
    total = np.sum(np.asarray(engine_forces_n, dtype=np.float64), axis=0)
    modal_force = data.phi_t() @ total
    xi_ddot = -data.omega2 * xi - data.two_zeta_omega * xi_dot + modal_force
    return np.asarray(xi_dot, dtype=np.float64), xi_ddot


def bending_rotation(xi: Array, data: ModalDataset) -> Array:
    """Rotation applied to every engine force by the structure bending at the
    nozzle station: R_z(sigma_y_t . xi) R_y(sigma_z_t . xi)."""
    ay = float(data.sigma_y_t @ xi)   # about z
    az = float(data.sigma_z_t @ xi)   # about y
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cz, 0.0, sz], [0.0, 1.0, 0.0], [-sz, 0.0, cz]])
    return rz @ ry


def bent_engine_forces(layout: EngineLayout, cmd: Array, thrust_n: float,
                       xi: Array, data: ModalDataset) -> Array:
    """Per-engine forces [N] with the bending pre-rotation applied, (9, 3)."""
    rigid = engine_forces(layout, cmd, thrust_n)
    return rigid @ bending_rotation(np.asarray(xi, dtype=np.float64), data).T


def bent_engine_moments(layout: EngineLayout, cmd: Array, thrust_n: float,
                        xi: Array, data: ModalDataset,
                        mass: MassProperties) -> tuple[Array, Array]:
    """Total engine force and moment with bending: forces pre-rotated by the
    nozzle slopes and moment arms augmented by the nozzle modal displacement."""
    xi = np.asarray(xi, dtype=np.float64)
    force, moment, _ = _core.engine_totals(
        np.asarray(cmd, dtype=np.float64), float(thrust_n),
        layout.ring_angles, layout.ring_radii(),
        -(layout.length - mass.x_cg),
        xi, data.phi_y_t, data.phi_z_t, data.sigma_y_t, data.sigma_z_t, True)
    return force, moment


def sensor_frame_matrix(xi: Array, data: ModalDataset) -> Array:
    """Small-angle matrix relating the rigid body frame to the local flexible
    frame at the sensor station."""
    sy = float(data.sigma_y_g @ xi)
    sz = float(data.sigma_z_g @ xi)
    if max(abs(sy), abs(sz)) > SMALL_ANGLE_WARN:
        warnings.warn("bending rotation at sensor exceeds small-angle validity",
                      RuntimeWarning, stacklevel=2)
    return np.array([
        [1.0, -sy, sz],
        [sy, 1.0, 0.0],
        [-sz, 0.0, 1.0],
    ])


def sensed_outputs(attitude_bi: Array, omega: Array, xi: Array, xi_dot: Array,
                   data: ModalDataset) -> tuple[Array, Array]:
    """Measured Euler angles and body rates including bending pickup.

    Rates: omega_m = omega + sigma_G^T xi_dot (roll row of sigma_G is zero, so
    the roll channel is unaffected by bending). Attitude: Euler angles
    extracted from the composed sensor-frame attitude matrix.
    """
    m = sensor_frame_matrix(np.asarray(xi, dtype=np.float64), data)
    r_i_to_bf = m @ np.asarray(attitude_bi).T
    euler_m = matrix_to_euler(r_i_to_bf.T)
    omega_m = np.asarray(omega, dtype=np.float64) + data.sigma_g().T @ np.asarray(xi_dot, dtype=np.float64)
    return euler_m, omega_m


def rate_pickup(xi_dot: Array, data: ModalDataset) -> Array:
    """Bending contribution to the measured body rates, sigma_G^T xi_dot."""
    return data.sigma_g().T @ np.asarray(xi_dot, dtype=np.float64)


def divergence_detected(xi_dot: Array, attitude_error: Array, data: ModalDataset) -> bool:
    """Instability verdict for closed-loop runs: excessive modal rate pickup
    at the sensor or gross attitude error."""
    pickup = rate_pickup(xi_dot, data)
    if np.max(np.abs(pickup)) > RATE_PICKUP_BOUND:
        return True
    return bool(np.max(np.abs(attitude_error)) > ATTITUDE_ERROR_BOUND)
