"""Two-path interferometer actions and Aharonov-Bohm phase differences.

Each path is a polyline of timed waypoints; the particle moves uniformly on
each segment and its field is the uniform-velocity field at the current
velocity. The action along a path is the composite-Simpson time integral of
the interaction Lagrangian (either route). Phases follow the ``-S / hbar``
convention, so ``phase_difference = -(S_a - S_b) / hbar``.

The free-particle term is omitted: scenarios use equal durations and speed
profiles on both arms, so it cancels from the difference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .emcore import DomainError, PhysicalConstants
from .lagrangian import overlap_terms, standard_lagrangian
from .quad3d import ConfigurationError, IntegralResult, QuadratureConfig, require_converged
from .sources import (
    ChargedShell,
    IdealSolenoid,
    ParticleModel,
    ParticleState,
    ShieldedToroid,
    Toroid,
)


class Route(str, Enum):
    STANDARD = "standard"
    OVERLAP = "overlap"


@dataclass(frozen=True)
class Path:
    """Timed waypoints ``(t, r)``; ``t`` strictly increasing."""

    waypoints: tuple[tuple[float, np.ndarray], ...]

    def __post_init__(self):
        wps = tuple((float(t), np.asarray(r, dtype=float)) for t, r in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if len(wps) < 2:
            raise ConfigurationError("a path needs at least two waypoints")
        for k, ((t0, _), (t1, _)) in enumerate(zip(wps, wps[1:])):
            if not t1 > t0:
                raise ConfigurationError(f"waypoint times must increase (segment {k})")

    @classmethod
    def from_rows(cls, rows) -> "Path":
        return cls(tuple((row[0], row[1:4]) for row in rows))

    @property
    def start(self):
        return self.waypoints[0]

    @property
    def end(self):
        return self.waypoints[-1]

    @property
    def duration(self) -> float:
        return self.end[0] - self.start[0]

    def segments(self):
        """Yield ``(t0, t1, r0, velocity)`` per segment."""
        for (t0, r0), (t1, r1) in zip(self.waypoints, self.waypoints[1:]):
            yield t0, t1, r0, (r1 - r0) / (t1 - t0)

    def check_speeds(self, k: PhysicalConstants):
        for i, (_, _, _, v) in enumerate(self.segments()):
            if float(np.linalg.norm(v)) >= k.c:
                raise DomainError(f"superluminal segment {i}")

    def state(self, t: float) -> ParticleState:
        for t0, t1, r0, v in self.segments():
            if t0 <= t <= t1:
                return ParticleState(r0 + v * (t - t0), v)
        raise ValueError(f"time {t} outside the path")

    def reversed_segments_points(self, n: int = 64) -> np.ndarray:
        pts = []
        for t0, t1, r0, v in self.segments():
            s = np.linspace(0.0, t1 - t0, n, endpoint=False)
            pts.append(r0 + np.outer(s, v))
        pts.append(self.end[1][None, :])
        return np.concatenate(pts)


@dataclass(frozen=True)
class Scenario:
    particle: ParticleModel
    path_a: Path
    path_b: Path
    sources: tuple
    route: Route = Route.STANDARD
    time_step: float = 0.1
    quad_cfg: QuadratureConfig = field(default_factory=lambda: QuadratureConfig(rel_tol=1e-6))

    def __post_init__(self):
        k = self.particle.constants
        self.path_a.check_speeds(k)
        self.path_b.check_speeds(k)
        ta, ra = self.path_a.start
        tb, rb = self.path_b.start
        te_a, re_a = self.path_a.end
        te_b, re_b = self.path_b.end
        if ta != tb or te_a != te_b or not np.allclose(ra, rb) or not np.allclose(re_a, re_b):
            raise ConfigurationError("both paths must share their start and end events")
        if not self.time_step > 0:
            raise ConfigurationError("time_step must be positive")

    def with_route(self, route) -> "Scenario":
        return replace(self, route=Route(route))

    def swapped(self) -> "Scenario":
        return replace(self, path_a=self.path_b, path_b=self.path_a)


@dataclass(frozen=True)
class ActionResult:
    s_a: float
    s_b: float
    error_a: float
    error_b: float
    phase_difference: float
    route: Route = Route.STANDARD
    hbar: float = 1.0

    @property
    def phase_error(self) -> float:
        return (self.error_a + self.error_b) / self.hbar

    @classmethod
    def from_actions(cls, a: tuple[float, float], b: tuple[float, float], hbar: float, route) -> "ActionResult":
        return cls(a[0], b[0], a[1], b[1], -(a[0] - b[0]) / hbar, Route(route), hbar)


# --------------------------------------------------------------------------
# time integration

# ``lagrangian(t, state, piece)``: ``piece = (t0, t1)`` is the smooth time
# interval containing ``t``; jump waveforms are sampled from inside it.
Evaluator = Callable[[float, ParticleState, tuple[float, float]], tuple[float, float]]


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def _pieces(path: Path, breakpoints):
    for t0, t1, r0, v in path.segments():
        cuts = [t0, *sorted(b for b in set(breakpoints) if t0 < b < t1), t1]
        for a, b in zip(cuts[:-1], cuts[1:]):
            yield a, b, r0 + v * (a - t0), v


def _simpson_piece(lagrangian, a, b, ra, v, n_coarse):
    n = 2 * n_coarse
    ts = np.linspace(a, b, n + 1)
    vals = np.empty(n + 1)
    errs = np.empty(n + 1)
    for i, t in enumerate(ts):
        try:
            vals[i], errs[i] = lagrangian(float(t), ParticleState(ra + v * (t - a), v), (a, b))
        except Exception as exc:
            exc.args = (f"{exc} (at t={t!r})",)
            raise
    h = (b - a) / n
    wf = _simpson_weights(n, h)
    fine = math.fsum(wf * vals)
    coarse = math.fsum(_simpson_weights(n_coarse, 2 * h) * vals[::2])
    return fine, abs(fine - coarse), float(np.sum(wf * errs))


def accumulate_action(path: Path, lagrangian: Evaluator, dt: float,
                      breakpoints: Sequence[float] = (), abs_tol: float | None = None,
                      max_halvings: int = 10) -> tuple[float, float]:
    """Composite Simpson integral of ``L(t)`` along the path.

    Each segment (split further at ``breakpoints``) is integrated with step
    ``dt/2`` and with step ``dt``; the difference is the time-rule error and
    the finer sum is the value. Spatial quadrature errors reported by the
    evaluator are added with the Simpson weights. With ``abs_tol`` the step
    is halved per piece until its time-rule error is below its share of the
    tolerance.
    """
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    total, err = [], 0.0
    duration = path.duration
    for a, b, ra, v in _pieces(path, breakpoints):
        n_coarse = 2 * max(1, math.ceil((b - a) / (2 * dt)))
        val, t_err, q_err = _simpson_piece(lagrangian, a, b, ra, v, n_coarse)
        if abs_tol is not None:
            share = abs_tol * (b - a) / duration
            for _ in range(max_halvings):
                if t_err <= share:
                    break
                n_coarse *= 2
                val, t_err, q_err = _simpson_piece(lagrangian, a, b, ra, v, n_coarse)
        total.append(val)
        err += t_err + q_err
    return math.fsum(total), err


# --------------------------------------------------------------------------
# Lagrangian evaluators


def _piece_time(t: float, piece) -> float:
    """Sample jump waveforms from inside the piece at its end points."""
    if piece is None:
        return t
    a, b = piece
    eps = 1e-12 * max(1.0, abs(b - a))
    if t <= a:
        return a + eps
    if t >= b:
        return b - eps
    return t


def standard_evaluator(p: ParticleModel, sources) -> Evaluator:
    def lag(t, st, piece=None):
        return standard_lagrangian(p, st, sources, _piece_time(t, piece))

    return lag


def overlap_evaluator(p: ParticleModel, sources, cfg: QuadratureConfig, terms: Sequence[str] | None = None) -> Evaluator:
    """Overlap-route Lagrangian; ``terms`` restricts to named pieces of
    :func:`overlap_terms`."""

    def lag(t, st, piece=None):
        tt = _piece_time(t, piece)
        total = IntegralResult.zero()
        for src in sources:
            for name, res in overlap_terms(p, st, src, tt, cfg).items():
                if terms is None or name in terms:
                    require_converged(res, f"{name} overlap at t={t!r}")
                    total = total + res
        return total.value, total.error_estimate

    return lag


STANDARD_ROUTE_TOL = 1e-12


def source_breakpoints(sources) -> tuple[float, ...]:
    out = set()
    for s in sources:
        if isinstance(s, ChargedShell):
            out.update(t for t in s.potential.breakpoints if math.isfinite(t))
    return tuple(sorted(out))


def path_actions(sc: Scenario, evaluator: Evaluator | None = None,
                 abs_tol: float | None = None) -> ActionResult:
    """Actions of both arms; the standard route is cheap, so by default its
    time step is refined down to round-off level."""
    if abs_tol is None and sc.route is Route.STANDARD:
        abs_tol = STANDARD_ROUTE_TOL * sc.particle.constants.hbar
    if evaluator is None:
        if sc.route is Route.STANDARD:
            evaluator = standard_evaluator(sc.particle, sc.sources)
        else:
            evaluator = overlap_evaluator(sc.particle, sc.sources, sc.quad_cfg)
    bps = source_breakpoints(sc.sources)
    a = accumulate_action(sc.path_a, evaluator, sc.time_step, bps, abs_tol)
    b = accumulate_action(sc.path_b, evaluator, sc.time_step, bps, abs_tol)
    return ActionResult.from_actions(a, b, sc.particle.constants.hbar, sc.route)


# --------------------------------------------------------------------------
# geometry checks


def _segment_axis_distance(path: Path, point, axis) -> float:
    """Smallest distance from the path polyline to an infinite line."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    best = math.inf
    for (_, r0), (_, r1) in zip(path.waypoints, path.waypoints[1:]):
        a = r0 - point
        b = r1 - point
        a = a - (a @ axis) * axis
        b = b - (b @ axis) * axis
        d = b - a
        dd = float(d @ d)
        s = 0.0 if dd == 0 else min(1.0, max(0.0, -float(a @ d) / dd))
        best = min(best, float(np.linalg.norm(a + s * d)))
    return best


def winding_number(path_a: Path, path_b: Path, point, axis) -> int:
    """Winding of the loop ``a`` then reversed ``b`` around a line."""
    from .quad3d import _frame

    fr = _frame(axis)
    pts = np.concatenate([path_a.reversed_segments_points(), path_b.reversed_segments_points()[::-1]])
    rel = (pts - point) @ fr.T
    ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
    return int(round((ang[-1] - ang[0]) / (2 * math.pi)))


def _tube_distance(path: Path, tor: Toroid, n: int = 400) -> float:
    pts = path.reversed_segments_points(n)
    d, rho = tor.local(pts)
    return float(np.min(np.hypot(rho - tor.major_radius, d[:, 2])))


def closest_approach(path: Path, tor: Toroid) -> float:
    """Smallest distance from the path to the surface of the toroid body."""
    return _tube_distance(path, tor) - tor.minor_radius


def _tube_linking(path_a: Path, path_b: Path, tor: Toroid) -> int:
    """Linking of the closed loop with the torus core circle, via the
    winding of the loop around the core in the poloidal angle."""
    pts = np.concatenate([path_a.reversed_segments_points(), path_b.reversed_segments_points()[::-1]])
    d, rho = tor.local(pts)
    ang = np.unwrap(np.arctan2(d[:, 2], rho - tor.major_radius))
    return int(round((ang[-1] - ang[0]) / (2 * math.pi)))


# --------------------------------------------------------------------------
# the three schemes


def _only(sources, kind):
    found = [s for s in sources if isinstance(s, kind)]
    if not found:
        raise ConfigurationError(f"scenario has no {kind.__name__}")
    return found


def magnetic_ab_phase(sc: Scenario) -> ActionResult:
    """Phase difference around an ideal solenoid."""
    p = sc.particle
    for sol in _only(sc.sources, IdealSolenoid):
        for name, path in (("a", sc.path_a), ("b", sc.path_b)):
            if _segment_axis_distance(path, sol.axis_point, sol.axis_dir) <= sol.radius + p.a:
                raise ConfigurationError(f"path {name} enters the solenoid")
        if abs(winding_number(sc.path_a, sc.path_b, sol.axis_point, sol.axis_dir)) != 1:
            raise ConfigurationError("the two paths must enclose the solenoid axis exactly once")
    return path_actions(sc)


def _touches_shell(r0, r1, shell: ChargedShell, margin: float) -> bool:
    """Does the segment r0-r1 come within ``margin`` of the shell surface?"""
    d = r1 - r0
    dd = float(d @ d)
    s = 0.0 if dd == 0 else min(1.0, max(0.0, float((shell.center - r0) @ d) / dd))
    closest = float(np.linalg.norm(r0 + s * d - shell.center))
    far = max(np.linalg.norm(r0 - shell.center), np.linalg.norm(r1 - shell.center))
    return closest < shell.radius + margin and far > shell.radius - margin


def _check_pulses(sc: Scenario):
    """A shell may be charged only while no arm crosses its surface."""
    for shell in _only(sc.sources, ChargedShell):
        supp = shell.potential.support
        if supp is None:
            continue
        lo, hi = supp
        for name, path in (("a", sc.path_a), ("b", sc.path_b)):
            for i, (t0, t1, r0, v) in enumerate(path.segments()):
                if t1 <= lo or t0 >= hi:
                    continue
                if _touches_shell(r0, r0 + v * (t1 - t0), shell, sc.particle.a):
                    raise ConfigurationError(
                        f"shell potential is non-zero while path {name} crosses the shell (segment {i})"
                    )


def electric_ab_phase(sc: Scenario) -> ActionResult:
    """Phase difference from pulsed potentials on two conducting shells."""
    _check_pulses(sc)
    return path_actions(sc)


@dataclass(frozen=True)
class ShieldedResult:
    shielded: ActionResult
    unshielded: ActionResult
    shield_a: tuple[float, float]
    shield_b: tuple[float, float]

    @property
    def shield_phase_contribution(self) -> float:
        """Phase carried by the shield's ``-|B_p|^2`` term alone."""
        hbar = self.shielded.hbar
        return -(self.shield_a[0] - self.shield_b[0]) / hbar

    @property
    def shield_phase_error(self) -> float:
        return (self.shield_a[1] + self.shield_b[1]) / self.shielded.hbar


def shielded_toroid_phase(sc: Scenario) -> ShieldedResult:
    """Overlap-route phase with the superconducting shield, split into the
    magnet term and the shield's self-field term."""
    p = sc.particle
    shielded = _only(sc.sources, ShieldedToroid)
    for st in shielded:
        tor = st.toroid
        for name, path in (("a", sc.path_a), ("b", sc.path_b)):
            if _tube_distance(path, tor) <= tor.minor_radius + p.a:
                raise ConfigurationError(f"path {name} enters the toroid body")
        if abs(_tube_linking(sc.path_a, sc.path_b, tor)) != 1:
            raise ConfigurationError("the two paths must encircle the toroid tube exactly once")
    bps = source_breakpoints(sc.sources)
    hbar = p.constants.hbar

    def run(terms):
        ev = overlap_evaluator(p, sc.sources, sc.quad_cfg, terms)
        return (accumulate_action(sc.path_a, ev, sc.time_step, bps),
                accumulate_action(sc.path_b, ev, sc.time_step, bps))

    mag_a, mag_b = run(("magnetic", "electric"))
    sh_a, sh_b = run(("shield",))
    unshielded = ActionResult.from_actions(mag_a, mag_b, hbar, Route.OVERLAP)
    tot_a = (mag_a[0] + sh_a[0], mag_a[1] + sh_a[1])
    tot_b = (mag_b[0] + sh_b[0], mag_b[1] + sh_b[1])
    return ShieldedResult(ActionResult.from_actions(tot_a, tot_b, hbar, Route.OVERLAP), unshielded, sh_a, sh_b)


# --------------------------------------------------------------------------
# closed-form oracles


def enclosed_flux(sc: Scenario) -> float:
    """Signed flux through the loop ``a`` followed by reversed ``b``.

    The right-hand normal of that loop sets the sign, so the standard-route
    line integral of A around it equals this value.
    """
    total = 0.0
    for src in sc.sources:
        if isinstance(src, IdealSolenoid):
            total += winding_number(sc.path_a, sc.path_b, src.axis_point, src.axis_dir) * src.phi0
        elif isinstance(src, (Toroid, ShieldedToroid)):
            tor = src.toroid if isinstance(src, ShieldedToroid) else src
            # counter-clockwise in (rho, z) has normal rho x z = -phi
            total -= _tube_linking(sc.path_a, sc.path_b, tor) * tor.phi0
    return total


def magnetic_phase_oracle(sc: Scenario) -> float:
    p = sc.particle
    return -p.q * enclosed_flux(sc) / p.constants.hbar


def _resting_position(path: Path, lo: float, hi: float) -> np.ndarray:
    for t0, t1, r0, v in path.segments():
        if t1 <= lo or t0 >= hi:
            continue
        if np.any(v != 0):
            raise ConfigurationError("closed-form electric phase needs both arms at rest while shells are charged")
    return path.state(0.5 * (lo + hi)).r0


def electric_phase_oracle(sc: Scenario) -> float:
    """``(q/hbar) * integral of [Phi(r_a) - Phi(r_b)] dt`` with each arm at
    rest while the shells are charged; ``Phi`` is the superposed shell
    potential at the resting point."""
    p = sc.particle
    total = 0.0
    for shell in _only(sc.sources, ChargedShell):
        supp = shell.potential.support
        if supp is None:
            continue
        lo, hi = supp
        flux = shell.potential.integral(lo, hi)
        for sign, path in ((1.0, sc.path_a), (-1.0, sc.path_b)):
            r = float(np.linalg.norm(_resting_position(path, lo, hi) - shell.center))
            total += sign * flux * shell.radius / max(r, shell.radius)
    return p.q * total / p.constants.hbar
