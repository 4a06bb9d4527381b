"""Constants, unit systems, 3-vector helpers and field-tensor algebra.

Vectors are plain numpy arrays whose last axis has length 3, so every
function here broadcasts over stacks of points. The field tensor uses the
(+,-,-,-) metric with ``F[0, i] = E_i / c`` and ``F[i, j] = -eps_ijk B_k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.constants as sc

Vec3 = np.ndarray

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])


class DomainError(ValueError):
    """Raised when an operation is evaluated outside its physical domain."""


@dataclass(frozen=True)
class PhysicalConstants:
    eps0: float
    mu0: float
    c: float
    hbar: float

    def __post_init__(self):
        if abs(self.c * np.sqrt(self.mu0 * self.eps0) - 1.0) > 1e-12:
            raise ValueError("inconsistent constants: c != 1/sqrt(mu0*eps0)")


SI_CONSTANTS = PhysicalConstants(
    eps0=sc.epsilon_0, mu0=sc.mu_0, c=sc.c, hbar=sc.hbar
)
SCALED_CONSTANTS = PhysicalConstants(eps0=1.0, mu0=1.0, c=1.0, hbar=1.0)


class UnitTag(str, Enum):
    SI = "SI"
    SCALED = "Scaled"


@dataclass(frozen=True)
class UnitSystem:
    tag: UnitTag
    constants: PhysicalConstants = field(repr=False)

    @classmethod
    def from_tag(cls, tag: str | UnitTag) -> "UnitSystem":
        tag = UnitTag(_normalise_tag(tag))
        k = SI_CONSTANTS if tag is UnitTag.SI else SCALED_CONSTANTS
        return cls(tag, k)


def _normalise_tag(tag):
    if isinstance(tag, UnitTag):
        return tag.value
    low = str(tag).lower()
    if low == "si":
        return "SI"
    if low == "scaled":
        return "Scaled"
    raise ValueError(f"unknown unit system {tag!r}")


SCALED = UnitSystem(UnitTag.SCALED, SCALED_CONSTANTS)
SI = UnitSystem(UnitTag.SI, SI_CONSTANTS)


def vec(x, y=None, z=None) -> Vec3:
    if y is None:
        return np.asarray(x, dtype=float)
    return np.array([x, y, z], dtype=float)


def dot(a, b):
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def norm(a):
    return np.sqrt(dot(a, a))


def cross(a, b):
    return np.cross(a, b)


def unit(a) -> Vec3:
    a = np.asarray(a, dtype=float)
    n = norm(a)
    if np.any(n == 0):
        raise DomainError("cannot normalise a zero vector")
    return a / np.expand_dims(n, -1)


def gamma_factor(v, k: PhysicalConstants) -> float:
    beta2 = float(dot(v, v)) / k.c**2
    if beta2 >= 1.0:
        raise DomainError(f"speed {np.sqrt(beta2)}c is not below c")
    return 1.0 / np.sqrt(1.0 - beta2)


@dataclass(frozen=True)
class EMFieldSample:
    """Electric and magnetic field at one point, or a stack of points."""

    e: np.ndarray
    b: np.ndarray

    def __add__(self, other: "EMFieldSample") -> "EMFieldSample":
        return EMFieldSample(self.e + other.e, self.b + other.b)

    def __neg__(self) -> "EMFieldSample":
        return EMFieldSample(-self.e, -self.b)

    def scaled(self, factor) -> "EMFieldSample":
        factor = np.expand_dims(np.asarray(factor, dtype=float), -1)
        return EMFieldSample(self.e * factor, self.b * factor)

    @classmethod
    def zeros(cls, shape=()) -> "EMFieldSample":
        return cls(np.zeros(tuple(shape) + (3,)), np.zeros(tuple(shape) + (3,)))


def fields_to_tensor(s: EMFieldSample, k: PhysicalConstants) -> np.ndarray:
    """Contravariant tensor F^{ab} (shape ``(..., 4, 4)``) from E and B."""
    e = np.asarray(s.e, dtype=float) / k.c
    b = np.asarray(s.b, dtype=float)
    f = np.zeros(e.shape[:-1] + (4, 4))
    f[..., 0, 1:] = e
    f[..., 1:, 0] = -e
    f[..., 1, 2] = -b[..., 2]
    f[..., 2, 1] = b[..., 2]
    f[..., 2, 3] = -b[..., 0]
    f[..., 3, 2] = b[..., 0]
    f[..., 3, 1] = -b[..., 1]
    f[..., 1, 3] = b[..., 1]
    return f


def tensor_to_fields(f: np.ndarray, k: PhysicalConstants) -> EMFieldSample:
    e = f[..., 0, 1:] * k.c
    b = np.stack([f[..., 3, 2], f[..., 1, 3], f[..., 2, 1]], axis=-1)
    return EMFieldSample(e, b)


def lower(f: np.ndarray) -> np.ndarray:
    """F_{ab} = g_{ac} F^{cd} g_{db}."""
    return METRIC @ f @ METRIC


def tensor_contraction(a: np.ndarray, b: np.ndarray, k: PhysicalConstants):
    """Full contraction F_a{ab} F_b^{ab}.

    For a single field this is ``2 (B^2 - E^2 / c^2)``; ``(1 / 2 mu0)`` times
    the mixed contraction is ``-eps0 E_a.E_b + B_a.B_b / mu0``.
    """
    return np.einsum("...ij,...ij->...", lower(a), b)


def lorentz_boost_fields(s: EMFieldSample, v, k: PhysicalConstants) -> EMFieldSample:
    """Fields seen in a frame moving with velocity ``v`` relative to the original.

    Parallel components are unchanged; perpendicular ones transform as
    ``E' = g (E + v x B)`` and ``B' = g (B - v x E / c^2)``.
    """
    v = np.asarray(v, dtype=float)
    g = gamma_factor(v, k)
    e = np.asarray(s.e, dtype=float)
    b = np.asarray(s.b, dtype=float)
    speed = float(norm(v))
    if speed == 0.0:
        return EMFieldSample(e.copy(), b.copy())
    n = v / speed
    e_par = np.expand_dims(dot(e, n), -1) * n
    b_par = np.expand_dims(dot(b, n), -1) * n
    e_new = e_par + g * (e - e_par + np.cross(v, b))
    b_new = b_par + g * (b - b_par - np.cross(v, e) / k.c**2)
    return EMFieldSample(e_new, b_new)
