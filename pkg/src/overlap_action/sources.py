"""Closed-form fields and Coulomb-gauge potentials.

Covers the particle itself (a point charge or a thin charged shell, at rest or
in uniform motion) and the applied-field sources: an infinite ideal solenoid,
a toroidal magnet, a charged conducting shell with a time-dependent potential
and a superconducting shield around the toroid.

Positions are arrays with a trailing axis of length 3; every field function
accepts a single point or an ``(N, 3)`` stack.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.special import ellipe, ellipk

from .emcore import (
    DomainError,
    EMFieldSample,
    PhysicalConstants,
    SCALED_CONSTANTS,
    gamma_factor,
)
from .quad3d import _frame


def _arr(x):
    return np.asarray(x, dtype=float)


# --------------------------------------------------------------------------
# particle


@dataclass(frozen=True)
class ParticleModel:
    """Charge ``q``, shell radius ``a`` (0 for a point) and total mass ``m``.

    Only the electromagnetic share of the mass is computed; the remainder
    ``m' = m - m_e`` stands in for the non-electromagnetic binding energy and
    is never modelled further.
    """

    q: float
    a: float = 0.0
    m: float = 1.0
    constants: PhysicalConstants = field(default=SCALED_CONSTANTS, repr=False)

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("shell radius must be non-negative")
        if not self.m > 0:
            raise ValueError("mass must be positive")

    @property
    def em_mass_closed_form(self) -> float:
        k = self.constants
        if self.a == 0:
            return math.inf
        return self.q**2 / (8 * math.pi * k.eps0 * self.a * k.c**2)

    @property
    def binding_mass(self) -> float:
        return self.m - self.em_mass_closed_form


@dataclass(frozen=True)
class ParticleState:
    r0: np.ndarray
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "r0", _arr(self.r0))
        object.__setattr__(self, "v", _arr(self.v))

    def check(self, k: PhysicalConstants):
        gamma_factor(self.v, k)
        return self


def particle_fields_static(p: ParticleModel, state: ParticleState, x) -> EMFieldSample:
    k = p.constants
    d = _arr(x) - state.r0
    r = np.linalg.norm(d, axis=-1)
    if p.a == 0 and np.any(r == 0):
        raise DomainError("point-particle field evaluated at the particle position")
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = p.q / (4 * math.pi * k.eps0 * r**3)
    scale = np.where(r > p.a, scale, 0.0) if p.a > 0 else scale
    e = d * np.expand_dims(scale, -1)
    return EMFieldSample(e, np.zeros_like(e))


def particle_fields_uniform_velocity(p: ParticleModel, state: ParticleState, x, k=None) -> EMFieldSample:
    """Field of a charge in uniform motion, on the lab simultaneity slice
    through the current position. Inside the contracted shell both fields
    vanish."""
    k = k or p.constants
    g = gamma_factor(state.v, k)
    d = _arr(x) - state.r0
    speed = float(np.linalg.norm(state.v))
    if speed == 0.0:
        return particle_fields_static(p, state, x)
    n = state.v / speed
    par = d @ n
    r2 = np.sum(d * d, axis=-1)
    dd = (g * g - 1.0) * par * par + r2  # g^2 par^2 + perp^2
    if p.a == 0 and np.any(dd == 0):
        raise DomainError("point-particle field evaluated at the particle position")
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = p.q * g / (4 * math.pi * k.eps0 * dd**1.5)
    if p.a > 0:
        scale = np.where(dd > p.a * p.a, scale, 0.0)
    e = d * np.expand_dims(scale, -1)
    b = np.cross(state.v, e) / k.c**2
    return EMFieldSample(e, b)


def particle_fields(p: ParticleModel, state: ParticleState, x) -> EMFieldSample:
    return particle_fields_uniform_velocity(p, state, x, p.constants)


def contraction_shape(state: ParticleState, k: PhysicalConstants) -> np.ndarray | None:
    """Linear map from rest-frame offsets to lab offsets (length contraction
    along the velocity), or None at rest."""
    speed = float(np.linalg.norm(state.v))
    if speed == 0.0:
        return None
    g = gamma_factor(state.v, k)
    n = state.v / speed
    return np.eye(3) + (1.0 / g - 1.0) * np.outer(n, n)


# --------------------------------------------------------------------------
# applied sources


@dataclass(frozen=True)
class PotentialSample:
    phi: np.ndarray
    a: np.ndarray


def _cyl(x, origin, axis):
    fr = _frame(axis)
    d = (_arr(x) - origin) @ fr.T
    return fr, d


@dataclass(frozen=True)
class IdealSolenoid:
    axis_point: np.ndarray
    axis_dir: np.ndarray
    radius: float
    phi0: float

    def __post_init__(self):
        object.__setattr__(self, "axis_point", _arr(self.axis_point))
        object.__setattr__(self, "axis_dir", _arr(self.axis_dir) / np.linalg.norm(self.axis_dir))

    @property
    def b_inside(self) -> float:
        return self.phi0 / (math.pi * self.radius**2)

    def rho(self, x):
        d = _arr(x) - self.axis_point
        z = d @ self.axis_dir
        return np.linalg.norm(d - np.multiply.outer(z, self.axis_dir), axis=-1)


def solenoid_fields(s: IdealSolenoid, x) -> EMFieldSample:
    x = _arr(x)
    inside = s.rho(x) < s.radius
    b = np.multiply.outer(np.where(inside, s.b_inside, 0.0), s.axis_dir)
    return EMFieldSample(np.zeros_like(b), b)


def solenoid_potential(s: IdealSolenoid, x) -> PotentialSample:
    d = _arr(x) - s.axis_point
    perp = d - np.multiply.outer(d @ s.axis_dir, s.axis_dir)
    rho2 = np.sum(perp * perp, axis=-1)
    # A = (phi0 / 2 pi) * axis x perp / max(rho, R)^2
    denom = np.maximum(rho2, s.radius**2)
    a = np.cross(s.axis_dir, perp) * np.expand_dims(s.phi0 / (2 * math.pi * denom), -1)
    return PotentialSample(np.zeros(d.shape[:-1]), a)


@dataclass(frozen=True)
class Toroid:
    """Toroidal magnet with circular cross-section and an azimuthal
    ``B = C / rho`` profile inside the body, normalised so the flux through
    the minor cross-section is ``phi0``."""

    center: np.ndarray
    axis_dir: np.ndarray
    major_radius: float
    minor_radius: float
    phi0: float

    def __post_init__(self):
        object.__setattr__(self, "center", _arr(self.center))
        object.__setattr__(self, "axis_dir", _arr(self.axis_dir) / np.linalg.norm(self.axis_dir))
        if not 0 < self.minor_radius < self.major_radius:
            raise ValueError("toroid needs 0 < minor_radius < major_radius")

    @property
    def strength(self) -> float:
        # flux of C/rho over a disc of radius r centred at rho = R is
        # 2 pi C (R - sqrt(R^2 - r^2))
        big, small = self.major_radius, self.minor_radius
        return self.phi0 / (2 * math.pi * (big - math.sqrt(big * big - small * small)))

    @cached_property
    def frame(self):
        return _frame(self.axis_dir)

    def local(self, x):
        """(rho, z, phi_hat) in the toroid frame."""
        d = (_arr(x) - self.center) @ self.frame.T
        rho = np.hypot(d[..., 0], d[..., 1])
        return d, rho

    def inside(self, x):
        d, rho = self.local(x)
        return np.hypot(rho - self.major_radius, d[..., 2]) < self.minor_radius


def toroid_fields(t: Toroid, x) -> EMFieldSample:
    d, rho = t.local(x)
    inside = np.hypot(rho - t.major_radius, d[..., 2]) < t.minor_radius
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.where(inside, t.strength / rho**2, 0.0)  # C/rho times 1/rho for phi_hat
    local_b = np.stack([-d[..., 1] * mag, d[..., 0] * mag, np.zeros_like(mag)], axis=-1)
    b = local_b @ t.frame
    return EMFieldSample(np.zeros_like(b), b)


def _loop_field(rho, z, a):
    """Field of a circular current loop of radius ``a`` in the plane z=0,
    per unit ``mu0 I``; returns (B_rho, B_z)."""
    alpha2 = (a - rho) ** 2 + z * z
    beta2 = (a + rho) ** 2 + z * z
    beta = np.sqrt(beta2)
    m = 4 * a * rho / beta2
    kk = ellipk(m)
    ee = ellipe(m)
    bz = (kk + (a * a - rho * rho - z * z) / alpha2 * ee) / (2 * math.pi * beta)
    small = m < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        br_full = z / (2 * math.pi * rho * beta) * (-kk + (a * a + rho * rho + z * z) / alpha2 * ee)
    br_series = 0.75 * a * a * z * rho / (a * a + z * z) ** 2.5
    br = np.where(small, br_series, br_full)
    return br, bz


def toroid_potential(t: Toroid, x, n_radial: int = 32, n_angle: int = 64) -> PotentialSample:
    """Coulomb-gauge vector potential of the toroid.

    ``A`` is the "Biot-Savart field" of the magnetisation current ``B_m``: a
    superposition of circular loops through the cross-section, integrated with
    Gauss-Legendre in the minor radius and the periodic trapezoid rule in the
    poloidal angle. Accuracy degrades for points inside or very near the body.
    """
    d, rho = t.local(x)
    flat_d = d.reshape(-1, 3)
    flat_rho = rho.reshape(-1)
    gx, gw = np.polynomial.legendre.leggauss(n_radial)
    s = 0.5 * t.minor_radius * (gx + 1)
    ws = 0.5 * t.minor_radius * gw
    psi = 2 * math.pi * np.arange(n_angle) / n_angle
    wpsi = 2 * math.pi / n_angle
    ss, pp = np.meshgrid(s, psi, indexing="ij")
    rho_src = t.major_radius + ss * np.cos(pp)
    z_src = ss * np.sin(pp)
    # B_m = C/rho_src, area element s ds dpsi
    weight = (t.strength / rho_src) * ss * np.outer(ws, np.full(n_angle, wpsi))
    a_rho = np.empty(len(flat_rho))
    a_z = np.empty(len(flat_rho))
    for i in range(len(flat_rho)):
        br, bz = _loop_field(flat_rho[i], flat_d[i, 2] - z_src, rho_src)
        a_rho[i] = np.sum(weight * br)
        a_z[i] = np.sum(weight * bz)
    with np.errstate(divide="ignore", invalid="ignore"):
        cx = np.where(flat_rho > 0, flat_d[:, 0] / flat_rho, 0.0)
        cy = np.where(flat_rho > 0, flat_d[:, 1] / flat_rho, 0.0)
    local_a = np.stack([a_rho * cx, a_rho * cy, a_z], axis=-1)
    a = (local_a @ t.frame).reshape(d.shape)
    return PotentialSample(np.zeros(d.shape[:-1]), a)


def toroid_potential_checked(t: Toroid, x, n_radial: int = 32, n_angle: int = 64):
    """Potential plus an error estimate from halving both grids."""
    fine = toroid_potential(t, x, n_radial, n_angle)
    coarse = toroid_potential(t, x, n_radial // 2, n_angle // 2)
    return fine, np.linalg.norm(fine.a - coarse.a, axis=-1)


Waveform = Callable[[float], float]


@dataclass(frozen=True)
class PiecewiseLinear:
    """Time signal from ``(t, value)`` knots, zero outside the knot span.
    Repeated times encode jumps."""

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ts = [k[0] for k in self.knots]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("waveform knots must be time-ordered")

    def __call__(self, t: float) -> float:
        ks = self.knots
        if not ks or t < ks[0][0] or t > ks[-1][0]:
            return 0.0
        # right-continuous at jumps
        for (t0, v0), (t1, v1) in zip(ks, ks[1:]):
            if t0 <= t < t1:
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        return ks[-1][1]

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted({k[0] for k in self.knots}))

    @property
    def support(self) -> tuple[float, float] | None:
        nz = [i for i, (_, v) in enumerate(self.knots) if v != 0]
        if not nz:
            return None
        lo = self.knots[max(nz[0] - 1, 0)][0]
        hi = self.knots[min(nz[-1] + 1, len(self.knots) - 1)][0]
        return lo, hi

    def integral(self, t0: float, t1: float) -> float:
        total = 0.0
        for (a, va), (b, vb) in zip(self.knots, self.knots[1:]):
            lo, hi = max(a, t0), min(b, t1)
            if hi > lo and b > a:
                fa = va + (vb - va) * (lo - a) / (b - a)
                fb = va + (vb - va) * (hi - a) / (b - a)
                total += 0.5 * (fa + fb) * (hi - lo)
        return total

    @classmethod
    def constant(cls, value: float) -> "PiecewiseLinear":
        return cls(((-math.inf, value), (math.inf, value)))

    @classmethod
    def square(cls, t0: float, t1: float, value: float) -> "PiecewiseLinear":
        return cls(((t0, 0.0), (t0, value), (t1, value), (t1, 0.0)))


@dataclass(frozen=True)
class ChargedShell:
    center: np.ndarray
    radius: float
    potential: PiecewiseLinear

    def __post_init__(self):
        object.__setattr__(self, "center", _arr(self.center))


def _constant_value(w: PiecewiseLinear, t: float) -> float:
    if w.knots and math.isinf(w.knots[0][0]):
        return w.knots[0][1]
    return w(t)


def shell_potential(s: ChargedShell, t: float, x) -> PotentialSample:
    v = _constant_value(s.potential, t)
    r = np.linalg.norm(_arr(x) - s.center, axis=-1)
    phi = v * s.radius / np.maximum(r, s.radius)
    return PotentialSample(phi, np.zeros(np.shape(r) + (3,)))


def shell_fields(s: ChargedShell, t: float, x) -> EMFieldSample:
    v = _constant_value(s.potential, t)
    d = _arr(x) - s.center
    r = np.linalg.norm(d, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r > s.radius, v * s.radius / r**3, 0.0)
    e = d * np.expand_dims(scale, -1)
    return EMFieldSample(e, np.zeros_like(e))


@dataclass(frozen=True)
class ShieldedToroid:
    """Toroid whose body is lined by a superconductor: inside the body the
    shield cancels the particle's magnetic field exactly."""

    toroid: Toroid


def shield_response(st: ShieldedToroid, particle_sample: EMFieldSample, x) -> EMFieldSample:
    inside = st.toroid.inside(x)
    b = -np.asarray(particle_sample.b) * np.expand_dims(inside, -1)
    return EMFieldSample(np.zeros_like(b), b)


SourceModel = IdealSolenoid | Toroid | ChargedShell | ShieldedToroid


def source_fields(src, t: float, x) -> EMFieldSample:
    """Applied field of ``src`` alone (the shield needs the particle and is
    handled by the Lagrangian module)."""
    if isinstance(src, IdealSolenoid):
        return solenoid_fields(src, x)
    if isinstance(src, Toroid):
        return toroid_fields(src, x)
    if isinstance(src, ShieldedToroid):
        return toroid_fields(src.toroid, x)
    if isinstance(src, ChargedShell):
        return shell_fields(src, t, x)
    raise TypeError(f"unknown source {src!r}")


def source_potential(src, t: float, x) -> PotentialSample:
    if isinstance(src, IdealSolenoid):
        return solenoid_potential(src, x)
    if isinstance(src, Toroid):
        return toroid_potential(src, x)
    if isinstance(src, ShieldedToroid):
        return toroid_potential(src.toroid, x)
    if isinstance(src, ChargedShell):
        return shell_potential(src, t, x)
    raise TypeError(f"unknown source {src!r}")
