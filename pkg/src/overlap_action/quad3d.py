"""Adaptive cubature over 3D regions, including unbounded ones.

Every region is described by one or more *patches*: a box in parameter space
plus a smooth map to Cartesian points with its Jacobian (spherical,
cylindrical or toroidal coordinates, with ``u = 1/r`` or ``w = 1/z`` for
infinite directions). Each box cell is integrated with a tensor-product
Gauss-Kronrod rule; the embedded Gauss rule supplies the error estimate and
per-axis indicators choose the bisection direction.

Points where the integrand is singular or discontinuous across a sphere
(a charged shell) are declared as refinement centers. A smooth bump ``w``
around each center splits the integrand as ``f w + f (1 - w)``: the first
part is integrated in spherical coordinates about the center with radial
breaks on the declared shell radii, the second over the region itself,
where it is smooth.

Integrands take an ``(N, 3)`` array of points and return ``(N,)`` values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Integrand = Callable[[np.ndarray], np.ndarray]


class QuadratureError(RuntimeError):
    """Integrand evaluation failed (non-finite value at a node)."""


class NonConvergence(QuadratureError):
    """A required integral missed its tolerance; ``quantity`` names it."""

    def __init__(self, quantity: str, result=None):
        self.quantity = quantity
        self.result = result
        detail = "" if result is None else f" (value {result.value!r}, error {result.error_estimate!r})"
        super().__init__(f"integral {quantity} did not converge{detail}")


def require_converged(result, quantity: str):
    if not result.converged:
        raise NonConvergence(quantity, result)
    return result


class ConfigurationError(ValueError):
    pass


# Gauss-Kronrod pairs on [-1, 1]. Gauss nodes are the odd-indexed Kronrod nodes.
_K15_X = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_K15_W = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_G7_W = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_K7_X = np.array([
    0.9604912687080202834235071, 0.7745966692414833770358531,
    0.4342437493468025580020715, 0.0,
])
_K7_W = np.array([
    0.1046562260264672651938239, 0.2684880898683334407285692,
    0.4013974147759622229050518, 0.4509165386584741423451382,
])
_G3_W = np.array([5.0 / 9.0, 8.0 / 9.0])


def _mirror(half_x, half_w):
    x = np.concatenate([-half_x, half_x[-2::-1]])
    w = np.concatenate([half_w, half_w[-2::-1]])
    return x, w


@dataclass(frozen=True)
class _Rule1D:
    x: np.ndarray
    wk: np.ndarray
    wg: np.ndarray  # zero on Kronrod-only nodes


def _make_rule(order: int) -> _Rule1D:
    if order == 7:
        x, wk = _mirror(_K15_X, _K15_W)
        g = np.zeros(15)
        g[1::2] = np.concatenate([_G7_W, _G7_W[-2::-1]])
    elif order == 3:
        x, wk = _mirror(_K7_X, _K7_W)
        g = np.zeros(7)
        g[1::2] = np.concatenate([_G3_W, _G3_W[-2::-1]])
    else:
        raise ConfigurationError(f"base_rule_order must be 3 or 7, got {order}")
    return _Rule1D(x, wk, g)


def gauss_kronrod(order: int = 7):
    """Nodes, Kronrod weights and embedded Gauss weights on [-1, 1]."""
    r = _make_rule(order)
    return r.x.copy(), r.wk.copy(), r.wg.copy()


# --------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class RefinementCenter:
    """A point where the integrand may be singular.

    ``breaks`` are radii (in body coordinates) of spheres across which the
    integrand jumps. ``shape`` is an optional 3x3 linear map from body
    coordinates to space, used for Lorentz-contracted shells.
    """

    point: np.ndarray
    breaks: tuple[float, ...] = ()
    shape: np.ndarray | None = None

    @classmethod
    def coerce(cls, c) -> "RefinementCenter":
        if isinstance(c, RefinementCenter):
            return c
        return cls(np.asarray(c, dtype=float))


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 0.0
    max_subdivisions: int = 20000
    refinement_centers: tuple = ()
    base_rule_order: int = 7
    patch_radius: float | None = None
    batch_size: int = 48

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ConfigurationError("rel_tol must be positive")
        if self.abs_tol < 0:
            raise ConfigurationError("abs_tol must be non-negative")
        if self.max_subdivisions < 1:
            raise ConfigurationError("max_subdivisions must be >= 1")
        _make_rule(self.base_rule_order)

    def with_centers(self, centers: Sequence) -> "QuadratureConfig":
        return _replace(self, refinement_centers=tuple(centers))

    def with_tolerances(self, rel_tol=None, abs_tol=None) -> "QuadratureConfig":
        return _replace(
            self,
            rel_tol=self.rel_tol if rel_tol is None else rel_tol,
            abs_tol=self.abs_tol if abs_tol is None else abs_tol,
        )


def _replace(obj, **kw):
    from dataclasses import replace

    return replace(obj, **kw)


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_estimate: float
    evaluations: int
    converged: bool
    tail_bound: float = 0.0

    def __add__(self, other: "IntegralResult") -> "IntegralResult":
        return IntegralResult(
            self.value + other.value,
            self.error_estimate + other.error_estimate,
            self.evaluations + other.evaluations,
            self.converged and other.converged,
            self.tail_bound + other.tail_bound,
        )

    def scaled(self, factor: float) -> "IntegralResult":
        return IntegralResult(
            self.value * factor,
            self.error_estimate * abs(factor),
            self.evaluations,
            self.converged,
            self.tail_bound * abs(factor),
        )

    @classmethod
    def zero(cls) -> "IntegralResult":
        return cls(0.0, 0.0, 0, True)


# --------------------------------------------------------------------------
# coordinate patches


@dataclass(frozen=True)
class _Patch:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    mapping: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    splits: tuple[int, int, int] = (1, 1, 1)
    # radial breakpoints in the first parameter
    cuts0: tuple[float, ...] = ()


def _frame(axis) -> np.ndarray:
    """Orthonormal rows (e1, e2, e3) with e3 along ``axis``."""
    e3 = np.asarray(axis, dtype=float)
    e3 = e3 / np.linalg.norm(e3)
    trial = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - np.dot(trial, e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return np.stack([e1, e2, e3])


def _spherical_map(center, frame, radial: str, shape=None):
    center = np.asarray(center, dtype=float)
    lin = frame.T if shape is None else np.asarray(shape, dtype=float) @ frame.T
    det = abs(np.linalg.det(lin))

    def mapping(p):
        s = p[:, 0]
        if radial == "r":
            r = s
            jr = r * r
        else:  # u = 1/r
            r = 1.0 / s
            jr = r**4
        mu = p[:, 1]
        phi = p[:, 2]
        st = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
        local = np.stack([r * st * np.cos(phi), r * st * np.sin(phi), r * mu], axis=-1)
        return center + local @ lin.T, jr * det

    return mapping


def _cylinder_map(origin, frame, zmode: str):
    origin = np.asarray(origin, dtype=float)

    def mapping(p):
        rho, phi, s = p[:, 0], p[:, 1], p[:, 2]
        if zmode == "z":
            z = s
            jz = np.ones_like(s)
        elif zmode == "+w":
            z = 1.0 / s
            jz = z * z
        else:
            z = -1.0 / s
            jz = z * z
        local = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
        return origin + local @ frame, rho * jz

    return mapping


def _torus_map(center, frame, major):
    center = np.asarray(center, dtype=float)

    def mapping(p):
        s, psi, phi = p[:, 0], p[:, 1], p[:, 2]
        rr = major + s * np.cos(psi)
        local = np.stack([rr * np.cos(phi), rr * np.sin(phi), s * np.sin(psi)], axis=-1)
        return center + local @ frame, s * rr

    return mapping


# --------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float
    polar_axis: tuple = (0.0, 0.0, 1.0)

    def patches(self):
        m = _spherical_map(self.center, _frame(self.polar_axis), "r")
        return [_Patch((0.0, -1.0, 0.0), (self.radius, 1.0, 2 * math.pi), m, (1, 2, 4))]

    def contains(self, x):
        return np.linalg.norm(np.asarray(x) - self.center, axis=-1) < self.radius

    def boundary_distance(self, c):
        return self.radius - float(np.linalg.norm(c - self.center))

    @property
    def scale(self):
        return self.radius

    truncation = None


@dataclass(frozen=True)
class SphericalShell:
    center: np.ndarray
    r_inner: float
    r_outer: float
    polar_axis: tuple = (0.0, 0.0, 1.0)

    def patches(self):
        m = _spherical_map(self.center, _frame(self.polar_axis), "r")
        return [_Patch((self.r_inner, -1.0, 0.0), (self.r_outer, 1.0, 2 * math.pi), m, (1, 2, 4))]

    def contains(self, x):
        d = np.linalg.norm(np.asarray(x) - self.center, axis=-1)
        return (d > self.r_inner) & (d < self.r_outer)

    def boundary_distance(self, c):
        d = float(np.linalg.norm(c - self.center))
        return min(d - self.r_inner, self.r_outer - d)

    @property
    def scale(self):
        return self.r_outer - self.r_inner

    truncation = None


@dataclass(frozen=True)
class CylinderInterior:
    """Solid cylinder; ``z_min``/``z_max`` are measured along ``axis_dir``
    from ``axis_point`` and may be infinite."""

    axis_point: np.ndarray
    axis_dir: np.ndarray
    radius: float
    z_min: float = -math.inf
    z_max: float = math.inf
    z_core: float | None = None

    def patches(self):
        fr = _frame(self.axis_dir)
        zc = self.z_core if self.z_core is not None else 4.0 * self.radius
        out = []
        lo = self.z_min if math.isfinite(self.z_min) else -zc
        hi = self.z_max if math.isfinite(self.z_max) else zc
        if not lo < hi:
            raise ConfigurationError("empty cylinder z-range")
        box = lambda a, b, m, n: _Patch((0.0, 0.0, a), (self.radius, 2 * math.pi, b), m, (1, 4, n))
        out.append(box(lo, hi, _cylinder_map(self.axis_point, fr, "z"), 2))
        if not math.isfinite(self.z_max):
            out.append(box(0.0, 1.0 / hi, _cylinder_map(self.axis_point, fr, "+w"), 1))
        if not math.isfinite(self.z_min):
            out.append(box(0.0, -1.0 / lo, _cylinder_map(self.axis_point, fr, "-w"), 1))
        return out

    def _local(self, x):
        d = np.asarray(x, dtype=float) - self.axis_point
        n = np.asarray(self.axis_dir, dtype=float)
        n = n / np.linalg.norm(n)
        z = d @ n
        rho = np.linalg.norm(d - np.multiply.outer(z, n), axis=-1)
        return rho, z

    def contains(self, x):
        rho, z = self._local(x)
        return (rho < self.radius) & (z > self.z_min) & (z < self.z_max)

    def boundary_distance(self, c):
        rho, z = self._local(c)
        return float(min(self.radius - rho, z - self.z_min, self.z_max - z))

    @property
    def scale(self):
        return self.radius

    truncation = None


@dataclass(frozen=True)
class TorusBody:
    center: np.ndarray
    axis_dir: np.ndarray
    major_radius: float
    minor_radius: float

    def patches(self):
        m = _torus_map(self.center, _frame(self.axis_dir), self.major_radius)
        return [_Patch((0.0, 0.0, 0.0), (self.minor_radius, 2 * math.pi, 2 * math.pi), m, (1, 4, 8))]

    def _tube_distance(self, x):
        fr = _frame(self.axis_dir)
        d = (np.asarray(x, dtype=float) - self.center) @ fr.T
        rho = np.hypot(d[..., 0], d[..., 1])
        return np.hypot(rho - self.major_radius, d[..., 2])

    def contains(self, x):
        return self._tube_distance(x) < self.minor_radius

    def boundary_distance(self, c):
        return self.minor_radius - float(self._tube_distance(c))

    @property
    def scale(self):
        return self.minor_radius

    truncation = None


@dataclass(frozen=True)
class AllSpace:
    """All of space. With a finite ``truncation_radius`` the exterior is
    dropped and bounded by :func:`tail_estimate`; with ``inf`` the radial
    coordinate is compactified and nothing is dropped."""

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    truncation_radius: float = math.inf
    tail_exponent: float = 4.0
    core_radius: float = 1.0
    polar_axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        _check_truncation(self.truncation_radius, self.tail_exponent, self.core_radius)

    def patches(self):
        fr = _frame(self.polar_axis)
        core = min(self.core_radius, self.truncation_radius)
        out = [_Patch((0.0, -1.0, 0.0), (core, 1.0, 2 * math.pi),
                      _spherical_map(self.center, fr, "r"), (1, 2, 4))]
        if self.truncation_radius > core:
            out.append(_Patch((1.0 / self.truncation_radius, -1.0, 0.0), (1.0 / core, 1.0, 2 * math.pi),
                              _spherical_map(self.center, fr, "u"), (2, 2, 4)))
        return out

    def contains(self, x):
        return np.linalg.norm(np.asarray(x) - self.center, axis=-1) < self.truncation_radius

    def boundary_distance(self, c):
        return self.truncation_radius - float(np.linalg.norm(c - self.center))

    @property
    def scale(self):
        return self.core_radius

    @property
    def truncation(self):
        return (self.center, self.truncation_radius, self.tail_exponent)


@dataclass(frozen=True)
class ExteriorOfBall:
    center: np.ndarray
    radius: float
    truncation_radius: float = math.inf
    tail_exponent: float = 4.0
    polar_axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        _check_truncation(self.truncation_radius, self.tail_exponent, self.radius)

    def patches(self):
        fr = _frame(self.polar_axis)
        return [_Patch((1.0 / self.truncation_radius, -1.0, 0.0), (1.0 / self.radius, 1.0, 2 * math.pi),
                       _spherical_map(self.center, fr, "u"), (2, 2, 4))]

    def contains(self, x):
        d = np.linalg.norm(np.asarray(x) - self.center, axis=-1)
        return (d > self.radius) & (d < self.truncation_radius)

    def boundary_distance(self, c):
        d = float(np.linalg.norm(c - self.center))
        return min(d - self.radius, self.truncation_radius - d)

    @property
    def scale(self):
        return self.radius

    @property
    def truncation(self):
        return (self.center, self.truncation_radius, self.tail_exponent)


def _check_truncation(r_max, p, inner):
    if not r_max > inner:
        raise ConfigurationError("truncation radius must exceed the inner radius")
    if math.isfinite(r_max) and not p > 3:
        raise ConfigurationError("tail_exponent must exceed 3")


Region = Ball | SphericalShell | CylinderInterior | TorusBody | AllSpace | ExteriorOfBall


# --------------------------------------------------------------------------
# tail bound


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    mu = 1.0 - 2.0 * i / n
    phi = math.pi * (1.0 + 5**0.5) * i
    st = np.sqrt(1.0 - mu * mu)
    return np.stack([st * np.cos(phi), st * np.sin(phi), mu], axis=-1)


def tail_estimate(f: Integrand, r_max: float, p: float, center=None, n_samples: int = 4096) -> float:
    """Bound on ``|int_{r > r_max} f d^3x|`` assuming ``|f| <= C r^-p``.

    ``C`` is taken from the largest ``|f| r^p`` seen on the truncation sphere.
    """
    if not p > 3:
        raise ConfigurationError(f"tail exponent must exceed 3, got {p}")
    if not math.isfinite(r_max):
        return 0.0
    center = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    pts = center + r_max * fibonacci_sphere(n_samples)
    vals = np.abs(np.asarray(f(pts), dtype=float))
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("non-finite integrand on the truncation sphere")
    c = float(vals.max()) * r_max**p
    return c * 4.0 * math.pi * r_max ** (3.0 - p) / (p - 3.0)


# --------------------------------------------------------------------------
# partition of unity around refinement centers


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class _Bump:
    center: np.ndarray
    inv_shape: np.ndarray | None
    inner: float
    outer: float

    def body_distance(self, x):
        d = x - self.center
        if self.inv_shape is not None:
            d = d @ self.inv_shape.T
        return np.linalg.norm(d, axis=-1)

    def weight(self, x):
        r = self.body_distance(x)
        return 1.0 - _smooth_step((r - self.inner) / (self.outer - self.inner))


def _build_bumps(region, cfg: QuadratureConfig):
    centers = [RefinementCenter.coerce(c) for c in cfg.refinement_centers]
    active = [c for c in centers if bool(region.contains(c.point))]
    bumps, patches = [], []
    for i, c in enumerate(active):
        limit = 0.9 * region.boundary_distance(c.point)
        for j, other in enumerate(active):
            if j != i:
                limit = min(limit, 0.45 * float(np.linalg.norm(other.point - c.point)))
        top = max(c.breaks) if c.breaks else 0.0
        if cfg.patch_radius is not None:
            want = cfg.patch_radius
        elif top > 0:
            want = 3.0 * top
        else:
            want = 0.5 * region.scale
        outer = min(want, limit)
        if top > 0 and outer <= 1.2 * top:
            raise ConfigurationError(
                f"refinement ball at {c.point} (radius {outer:.3g}) cannot contain "
                f"the declared break radius {top:.3g}; the shell is too close to the "
                "region boundary or to another center"
            )
        if not outer > 0:
            raise ConfigurationError(f"refinement center {c.point} lies on the region boundary")
        inner = 0.5 * (top + outer) if top > 0 else 0.5 * outer
        inv = None if c.shape is None else np.linalg.inv(c.shape)
        bumps.append(_Bump(c.point, inv, inner, outer))
        cuts = tuple(sorted(b for b in c.breaks if 0 < b < inner)) + (inner,)
        m = _spherical_map(c.point, np.eye(3), "r", c.shape)
        patches.append((_Patch((0.0, -1.0, 0.0), (outer, 1.0, 2 * math.pi), m, (1, 2, 4), cuts), len(bumps) - 1))
    return bumps, patches


# --------------------------------------------------------------------------
# the adaptive engine


class _Engine:
    def __init__(self, f: Integrand, rule: _Rule1D):
        self.f = f
        n = len(rule.x)
        self.n = n
        self.x = rule.x
        self.wk = rule.wk
        self.wg = rule.wg
        self.wk3 = np.einsum("i,j,k->ijk", rule.wk, rule.wk, rule.wk)
        self.wg3 = np.einsum("i,j,k->ijk", rule.wg, rule.wg, rule.wg)
        # Gauss weights in one axis, Kronrod in the others
        self.wd = [
            np.einsum("i,j,k->ijk", rule.wg, rule.wk, rule.wk),
            np.einsum("i,j,k->ijk", rule.wk, rule.wg, rule.wk),
            np.einsum("i,j,k->ijk", rule.wk, rule.wk, rule.wg),
        ]
        g = np.stack(np.meshgrid(rule.x, rule.x, rule.x, indexing="ij"), axis=-1)
        self.grid = g.reshape(-1, 3)
        self.evaluations = 0

    def evaluate(self, lo, hi, mappings, weight_fns):
        """Integrate a batch of cells. ``weight_fns[i]`` multiplies the
        integrand on cell ``i`` (partition-of-unity factor)."""
        m = len(lo)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        pts = mid[:, None, :] + half[:, None, :] * self.grid[None, :, :]
        vals = np.zeros((m, self.n**3))
        # group cells sharing a mapping and weight function into one call
        groups: dict[tuple[int, int], list[int]] = {}
        for i in range(m):
            groups.setdefault((id(mappings[i]), id(weight_fns[i])), []).append(i)
        for idx in groups.values():
            idx = np.asarray(idx)
            p = pts[idx].reshape(-1, 3)
            x, jac = mappings[idx[0]](p)
            wfac = weight_fns[idx[0]](x)
            live = (wfac != 0.0) & (jac != 0.0)
            out = np.zeros(len(p))
            if np.any(live):
                fx = np.asarray(self.f(x[live]), dtype=float)
                self.evaluations += int(live.sum())
                bad = ~np.isfinite(fx)
                if np.any(bad):
                    where = x[live][np.argmax(bad)]
                    raise QuadratureError(f"non-finite integrand at point {where.tolist()}")
                out[live] = fx * jac[live] * wfac[live]
            vals[idx] = out.reshape(len(idx), -1)
        vol = np.prod(half, axis=1)
        v = vals.reshape(m, self.n, self.n, self.n)
        qk = np.einsum("mijk,ijk->m", v, self.wk3) * vol
        qg = np.einsum("mijk,ijk->m", v, self.wg3) * vol
        qabs = np.einsum("mijk,ijk->m", np.abs(v), self.wk3) * vol
        per_axis = np.stack([np.abs(qk - np.einsum("mijk,ijk->m", v, wd) * vol) for wd in self.wd], axis=1)
        err = np.maximum(np.abs(qk - qg), 50 * np.finfo(float).eps * qabs)
        return qk, err, per_axis


def _one(x):
    return np.ones(len(x))


def integrate(f: Integrand, region, cfg: QuadratureConfig | None = None) -> IntegralResult:
    """Integrate ``f`` over ``region``; see the module docstring."""
    cfg = cfg or QuadratureConfig()
    rule = _make_rule(cfg.base_rule_order)
    eng = _Engine(f, rule)

    bumps, center_patches = _build_bumps(region, cfg)
    if bumps:
        def outer_weight(x):
            w = np.ones(len(x))
            for b in bumps:
                w -= b.weight(x)
            return np.clip(w, 0.0, 1.0)
    else:
        outer_weight = _one

    lo_list, hi_list, maps, wfns = [], [], [], []

    def add_patch(p: _Patch, wfn):
        edges0 = [p.lo[0], *[c for c in p.cuts0 if p.lo[0] < c < p.hi[0]], p.hi[0]]
        for a0, b0 in zip(edges0[:-1], edges0[1:]):
            e0 = np.linspace(a0, b0, p.splits[0] + 1)
            e1 = np.linspace(p.lo[1], p.hi[1], p.splits[1] + 1)
            e2 = np.linspace(p.lo[2], p.hi[2], p.splits[2] + 1)
            for i in range(p.splits[0]):
                for j in range(p.splits[1]):
                    for k in range(p.splits[2]):
                        lo_list.append((e0[i], e1[j], e2[k]))
                        hi_list.append((e0[i + 1], e1[j + 1], e2[k + 1]))
                        maps.append(p.mapping)
                        wfns.append(wfn)

    for p in region.patches():
        add_patch(p, outer_weight)
    for p, bi in center_patches:
        add_patch(p, bumps[bi].weight)

    lo = np.asarray(lo_list, dtype=float)
    hi = np.asarray(hi_list, dtype=float)
    val, err, axis_err = eng.evaluate(lo, hi, maps, wfns)
    ids = np.arange(len(lo))
    next_id = len(lo)

    tail = 0.0
    trunc = getattr(region, "truncation", None)
    if trunc is not None:
        c, r_max, pexp = trunc
        tail = tail_estimate(f, r_max, pexp, c)

    subdivisions = 0
    while True:
        order = np.lexsort((ids, -err))
        total = math.fsum(val[np.argsort(ids)])
        total_err = math.fsum(err[np.argsort(ids)])
        target = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if total_err + tail <= target or subdivisions >= cfg.max_subdivisions:
            break
        worst = err[order[0]]
        take = [i for i in order[: cfg.batch_size] if err[i] >= 0.25 * worst]
        take = take[: max(1, cfg.max_subdivisions - subdivisions)]
        subdivisions += len(take)
        take = np.asarray(take)
        dims = np.argmax(axis_err[take], axis=1)
        mids = 0.5 * (lo[take, dims] + hi[take, dims])
        lo_a, hi_a = lo[take].copy(), hi[take].copy()
        hi_a[np.arange(len(take)), dims] = mids
        lo_b, hi_b = lo[take].copy(), hi[take].copy()
        lo_b[np.arange(len(take)), dims] = mids
        new_lo = np.concatenate([lo_a, lo_b])
        new_hi = np.concatenate([hi_a, hi_b])
        new_maps = [maps[i] for i in take] * 2
        new_w = [wfns[i] for i in take] * 2
        nv, ne, na = eng.evaluate(new_lo, new_hi, new_maps, new_w)
        keep = np.ones(len(lo), dtype=bool)
        keep[take] = False
        kept = np.flatnonzero(keep)
        lo = np.concatenate([lo[kept], new_lo])
        hi = np.concatenate([hi[kept], new_hi])
        val = np.concatenate([val[kept], nv])
        err = np.concatenate([err[kept], ne])
        axis_err = np.concatenate([axis_err[kept], na])
        maps = [maps[i] for i in kept] + new_maps
        wfns = [wfns[i] for i in kept] + new_w
        ids = np.concatenate([ids[kept], np.arange(next_id, next_id + len(new_lo))])
        next_id += len(new_lo)

    converged = total_err + tail <= target
    return IntegralResult(total, total_err + tail, eng.evaluations, bool(converged), tail)
