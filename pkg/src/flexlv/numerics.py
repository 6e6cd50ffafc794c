"""Shared numerical primitives: rotations, Euler kinematics, polynomials,
rational transfer functions, lookup tables, and a fixed-step RK4 integrator.

Attitude convention used throughout the package: intrinsic pitch-yaw-roll
(y-z-x) Euler angles, i.e. the body-to-inertial attitude matrix is

    R_bi = R_y(pitch) @ R_z(yaw) @ R_x(roll)

With this ordering the kinematics are singular at yaw = +-90 deg, which a
launch trajectory never approaches, and a pitch attitude of exactly 90 deg
(vertical ascent) is perfectly regular.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

Array = np.ndarray

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

# Yaw is the middle (singular) rotation of the y-z-x sequence.
YAW_SINGULARITY_MARGIN = 1e-3


class SingularityError(ValueError):
    """Attitude kinematics evaluated too close to the Euler singularity."""


def rot_axis(axis: Array, angle: float) -> Array:
    """Active rotation matrix for `angle` radians about the unit vector `axis`.

    Rodrigues form: R = I cos(a) + sin(a) [e]_x + (1 - cos(a)) e e^T.
    """
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if abs(n - 1.0) > 1e-9:
        raise ValueError(f"rotation axis must be unit length, got |axis| = {n}")
    c, s = np.cos(angle), np.sin(angle)
    return c * np.eye(3) + s * skew(axis) + (1.0 - c) * np.outer(axis, axis)


def skew(v: Array) -> Array:
    """Skew-symmetric matrix S(v) with S(v) @ w = v x w."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def euler_to_matrix(angles: Array) -> Array:
    """Body-to-inertial attitude matrix from (roll, pitch, yaw) radians."""
    phi, theta, psi = angles
    return rot_axis(E2, theta) @ rot_axis(E3, psi) @ rot_axis(E1, phi)


def matrix_to_euler(r_bi: Array) -> Array:
    """Extract (roll, pitch, yaw) from a body-to-inertial attitude matrix."""
    psi = np.arcsin(np.clip(r_bi[1, 0], -1.0, 1.0))
    theta = np.arctan2(-r_bi[2, 0], r_bi[0, 0])
    phi = np.arctan2(-r_bi[1, 2], r_bi[1, 1])
    return np.array([phi, theta, psi])


def euler_kinematics(angles: Array, rates: Array) -> Array:
    """Euler angle rates (roll_dot, pitch_dot, yaw_dot) from body rates (p, q, r).

    Inverse of the pitch-yaw-roll rate map

        p = roll_dot  + pitch_dot sin(yaw)
        q = yaw_dot  sin(roll) + pitch_dot cos(roll) cos(yaw)
        r = yaw_dot  cos(roll) - pitch_dot sin(roll) cos(yaw)

    Raises SingularityError when |yaw| approaches 90 deg, where the map
    loses rank.
    """
    phi, _, psi = angles
    p, q, r = rates
    cpsi = np.cos(psi)
    if abs(psi) > np.pi / 2.0 - YAW_SINGULARITY_MARGIN:
        raise SingularityError(f"Euler kinematics singular near |yaw| = 90 deg (yaw = {psi} rad)")
    sphi, cphi = np.sin(phi), np.cos(phi)
    theta_dot = (q * cphi - r * sphi) / cpsi
    psi_dot = q * sphi + r * cphi
    phi_dot = p - theta_dot * np.sin(psi)
    return np.array([phi_dot, theta_dot, psi_dot])


def rk4_step(f, t: float, y: Array, dt: float) -> Array:
    """One classical 4th-order Runge-Kutta step of y' = f(t, y)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    y = np.asarray(y, dtype=np.float64)
    k1 = np.asarray(f(t, y))
    k2 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k1))
    k3 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k2))
    k4 = np.asarray(f(t + dt, y + dt * k3))
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.isfinite(out)))
        raise FloatingPointError(f"non-finite state component {bad} after RK4 step at t = {t}")
    return out


class Table1D:
    """Piecewise-linear lookup on a strictly increasing grid, clamped outside."""

    def __init__(self, x: Array, values: Array):
        self.x = np.asarray(x, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        if self.x.ndim != 1 or self.x.size < 2:
            raise ValueError("breakpoint grid must be 1-D with at least two points")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if self.values.shape != self.x.shape:
            raise ValueError("value array must match breakpoint grid")

    def __call__(self, q: float) -> float:
        return float(np.interp(q, self.x, self.values))


class Table2D:
    """Bilinear lookup on a strictly increasing rectangular grid, clamped outside."""

    def __init__(self, x: Array, y: Array, values: Array):
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        for g in (self.x, self.y):
            if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
                raise ValueError("grids must be 1-D, length >= 2, strictly increasing")
        if self.values.shape != (self.x.size, self.y.size):
            raise ValueError("value array shape must be (len(x), len(y))")

    def __call__(self, qx: float, qy: float) -> float:
        qx = float(np.clip(qx, self.x[0], self.x[-1]))
        qy = float(np.clip(qy, self.y[0], self.y[-1]))
        i = int(np.clip(np.searchsorted(self.x, qx) - 1, 0, self.x.size - 2))
        j = int(np.clip(np.searchsorted(self.y, qy) - 1, 0, self.y.size - 2))
        tx = (qx - self.x[i]) / (self.x[i + 1] - self.x[i])
        ty = (qy - self.y[j]) / (self.y[j + 1] - self.y[j])
        v = self.values
        return float(
            v[i, j] * (1 - tx) * (1 - ty)
            + v[i + 1, j] * tx * (1 - ty)
            + v[i, j + 1] * (1 - tx) * ty
            + v[i + 1, j + 1] * tx * ty
        )


def interp(table, *query) -> float:
    """Evaluate a Table1D or Table2D at a query point."""
    return table(*query)


class Polynomial:
    """Real polynomial stored as descending-power coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=np.float64))
        self.coeffs = self._trim(c)

    @staticmethod
    def _trim(c: Array) -> Array:
        nz = np.nonzero(c)[0]
        if nz.size == 0:
            return np.zeros(1)
        return c[nz[0]:].copy()

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, s):
        return np.polyval(self.coeffs, s)

    def __mul__(self, other):
        if np.isscalar(other):
            return Polynomial(self.coeffs * other)
        return Polynomial(np.polymul(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __add__(self, other):
        if np.isscalar(other):
            other = Polynomial([other])
        return Polynomial(np.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other):
        if np.isscalar(other):
            other = Polynomial([other])
        return Polynomial(np.polysub(self.coeffs, other.coeffs))

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def roots(self) -> Array:
        if self.degree < 1:
            return np.array([])
        return np.roots(self.coeffs)

    def monic(self) -> tuple[float, "Polynomial"]:
        """Return (leading coefficient, monic polynomial)."""
        lead = self.coeffs[0]
        return float(lead), Polynomial(self.coeffs / lead)

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"


def poly_from_roots(roots, gain: float = 1.0) -> Polynomial:
    return Polynomial(gain * np.real_if_close(np.poly(np.asarray(roots)), tol=1e6).astype(float))


class RationalTF:
    """Ratio of real polynomials in the Laplace variable s."""

    def __init__(self, num, den):
        self.num = num if isinstance(num, Polynomial) else Polynomial(num)
        self.den = den if isinstance(den, Polynomial) else Polynomial(den)
        if np.all(self.den.coeffs == 0.0):
            raise ZeroDivisionError("zero denominator polynomial")

    @property
    def is_proper(self) -> bool:
        return self.num.degree <= self.den.degree

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def dc_gain(self) -> float:
        return float(self.num.coeffs[-1] / self.den.coeffs[-1])

    def poles(self) -> Array:
        return self.den.roots()

    def zeros(self) -> Array:
        return self.num.roots()

    def __mul__(self, other):
        if np.isscalar(other):
            return RationalTF(self.num * other, self.den)
        return RationalTF(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __add__(self, other):
        if np.isscalar(other):
            other = RationalTF([other], [1.0])
        return RationalTF(self.num * other.den + other.num * self.den, self.den * other.den)

    def normalized(self) -> "RationalTF":
        """Scale so the denominator is monic."""
        lead, den = self.den.monic()
        return RationalTF(self.num * (1.0 / lead), den)

    def cancel(self, tol: float = 1e-8) -> "RationalTF":
        """Remove common pole/zero pairs within relative tolerance `tol`."""
        zs = list(self.zeros())
        ps = list(self.poles())
        kept_z = []
        for z in zs:
            hit = None
            for idx, p in enumerate(ps):
                scale = max(abs(z), abs(p), 1.0)
                if abs(z - p) <= tol * scale:
                    hit = idx
                    break
            if hit is None:
                kept_z.append(z)
            else:
                ps.pop(hit)
        k_num = self.num.coeffs[0]
        k_den = self.den.coeffs[0]
        return RationalTF(poly_from_roots(kept_z, k_num), poly_from_roots(ps, k_den))

    def __repr__(self):
        return f"RationalTF(num={self.num.coeffs.tolist()}, den={self.den.coeffs.tolist()})"


def tf_from_state_space(a: Array, b: Array, c: Array, d: float = 0.0) -> RationalTF:
    """SISO transfer function C (sI - A)^-1 B + D by the Leverrier-Faddeev
    recursion carried out in exact rational arithmetic.

    Floats are dyadic rationals, so converting entries to Fraction and running
    the recursion exactly avoids the ill-conditioning of high-order
    characteristic polynomials; the result is rounded to float once at the end.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    af = [[Fraction(float(a[i, j])) for j in range(n)] for i in range(n)]
    bf = [Fraction(float(x)) for x in np.asarray(b, dtype=np.float64).ravel()]
    cf = [Fraction(float(x)) for x in np.asarray(c, dtype=np.float64).ravel()]

    ident = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]

    def mat_mul(x, y):
        return [[sum(x[i][k] * y[k][j] for k in range(n)) for j in range(n)] for i in range(n)]

    def mat_add_diag(x, s):
        out = [row[:] for row in x]
        for i in range(n):
            out[i][i] += s
        return out

    def trace(x):
        return sum(x[i][i] for i in range(n))

    # den(s) = s^n + p1 s^(n-1) + ... ; N_k are the adjugate coefficient matrices:
    # adj(sI - A) = N_0 s^(n-1) + N_1 s^(n-2) + ... + N_{n-1}
    den = [Fraction(1)]
    nk = ident
    num = []
    for k in range(1, n + 1):
        num.append(sum(cf[i] * sum(nk[i][j] * bf[j] for j in range(n)) for i in range(n)))
        m = mat_mul(af, nk)
        pk = -trace(m) / k
        den.append(pk)
        nk = mat_add_diag(m, pk)

    num_f = np.array([float(x) for x in num])
    den_f = np.array([float(x) for x in den])
    if d != 0.0:
        num_full = np.polyadd(num_f, float(d) * den_f)
    else:
        num_full = num_f
    return RationalTF(num_full, den_f)
