"""Strict JSON scenario files.

A scenario file is a JSON object with a ``schema_version``; unknown keys
anywhere are rejected so that a misspelt unit or tolerance never silently
falls back to a default. ``docs/scenario_schema.md`` describes every field.

Parsed files are plain immutable records (tuples of floats) so that
``parse(serialize(s)) == s`` holds exactly; domain objects are built on
demand by the ``build_*`` methods, which also re-check the domain
invariants.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Any

import numpy as np

from .ab_engine import Path, Route, Scenario
from .emcore import DomainError, UnitSystem
from .quad3d import ConfigurationError, QuadratureConfig
from .sources import (
    ChargedShell,
    IdealSolenoid,
    ParticleModel,
    ParticleState,
    PiecewiseLinear,
    ShieldedToroid,
    Toroid,
)

SUPPORTED_VERSIONS = (1,)
ROUTES = ("standard", "overlap", "both")
CHECKS = (
    "equivalence",
    "boundary_term",
    "covariance",
    "em_mass",
    "free_field",
    "shell_overlap",
    "quadrature_oracles",
)


class ScenarioError(ValueError):
    """Invalid scenario file; the message names the offending field."""


_REQUIRED = object()


class _Reader:
    def __init__(self, obj, where: str):
        if not isinstance(obj, dict):
            raise ScenarioError(f"{where or 'scenario'}: expected an object")
        self.obj = obj
        self.where = where
        self.seen: set[str] = set()

    def path(self, key) -> str:
        return f"{self.where}.{key}" if self.where else str(key)

    def take(self, key, conv, default=_REQUIRED):
        self.seen.add(key)
        if key not in self.obj:
            if default is _REQUIRED:
                raise ScenarioError(f"{self.path(key)}: missing required field")
            return default
        try:
            return conv(self.obj[key], self.path(key))
        except ScenarioError:
            raise
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{self.path(key)}: {exc}") from exc

    def done(self):
        extra = sorted(set(self.obj) - self.seen)
        if extra:
            raise ScenarioError(f"{self.where or 'scenario'}: unknown field(s) {', '.join(extra)}")


def _number(x, where) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise ScenarioError(f"{where}: must be finite")
    return x


def _positive(x, where) -> float:
    x = _number(x, where)
    if not x > 0:
        raise ScenarioError(f"{where}: must be positive")
    return x


def _integer(x, where) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ScenarioError(f"{where}: expected an integer, got {x!r}")
    return x


def _string(x, where) -> str:
    if not isinstance(x, str):
        raise ScenarioError(f"{where}: expected a string")
    return x


def _vec3(x, where) -> tuple[float, float, float]:
    if not isinstance(x, list) or len(x) != 3:
        raise ScenarioError(f"{where}: expected a list of 3 numbers")
    return tuple(_number(c, f"{where}[{i}]") for i, c in enumerate(x))


def _list(x, where, item):
    if not isinstance(x, list):
        raise ScenarioError(f"{where}: expected a list")
    return tuple(item(v, f"{where}[{i}]") for i, v in enumerate(x))


def _choice(options):
    def conv(x, where):
        x = _string(x, where)
        if x not in options:
            raise ScenarioError(f"{where}: expected one of {', '.join(options)}, got {x!r}")
        return x

    return conv


# --------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class ParticleSpec:
    q: float
    a: float = 0.0
    m: float = 1.0

    @classmethod
    def read(cls, obj, where):
        r = _Reader(obj, where)
        out = cls(r.take("q", _number), r.take("a", _number, 0.0), r.take("m", _positive, 1.0))
        r.done()
        if out.a < 0:
            raise ScenarioError(f"{where}.a: must be non-negative")
        return out

    def dump(self) -> dict:
        return {"q": self.q, "a": self.a, "m": self.m}


@dataclass(frozen=True)
class StateSpec:
    r0: tuple[float, float, float]
    v: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @classmethod
    def read(cls, obj, where):
        r = _Reader(obj, where)
        out = cls(r.take("r0", _vec3), r.take("v", _vec3, (0.0, 0.0, 0.0)))
        r.done()
        return out

    def dump(self) -> dict:
        return {"r0": list(self.r0), "v": list(self.v)}


@dataclass(frozen=True)
class BodySpec:
    """A particle together with its state (bilinearity, mass)."""

    q: float
    a: float
    r0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    v: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @classmethod
    def read(cls, obj, where):
        r = _Reader(obj, where)
        out = cls(
            r.take("q", _number),
            r.take("a", _number),
            r.take("r0", _vec3, (0.0, 0.0, 0.0)),
            r.take("v", _vec3, (0.0, 0.0, 0.0)),
        )
        r.done()
        if out.a < 0:
            raise ScenarioError(f"{where}.a: must be non-negative")
        return out

    def dump(self) -> dict:
        return {"q": self.q, "a": self.a, "r0": list(self.r0), "v": list(self.v)}


@dataclass(frozen=True)
class SourceSpec:
    """One applied-field source; ``kind`` selects which fields apply."""

    kind: str
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    axis_dir: tuple[float, float, float] = (0.0, 0.0, 1.0)
    radius: float = 1.0
    minor_radius: float = 0.0
    phi0: float = 0.0
    potential: tuple[tuple[float, float], ...] | float = 0.0
    field_profile: str = "1/rho"

    KINDS = ("solenoid", "toroid", "shielded_toroid", "shell")
    # field inside the toroid body as a function of distance from the axis;
    # only the magnetostatic 1/rho profile is implemented
    PROFILES = ("1/rho",)

    @classmethod
    def read(cls, obj, where):
        r = _Reader(obj, where)
        kind = r.take("kind", _choice(cls.KINDS))
        if kind == "solenoid":
            out = cls(kind, r.take("axis_point", _vec3), r.take("axis_dir", _vec3),
                      r.take("radius", _positive), phi0=r.take("phi0", _number))
        elif kind in ("toroid", "shielded_toroid"):
            out = cls(kind, r.take("center", _vec3), r.take("axis_dir", _vec3),
                      r.take("major_radius", _positive), r.take("minor_radius", _positive),
                      r.take("phi0", _number), field_profile=r.take("field_profile", _choice(cls.PROFILES)))
            if out.minor_radius >= out.radius:
                raise ScenarioError(f"{where}: minor_radius must be below major_radius")
        else:
            out = cls(kind, r.take("center", _vec3), radius=r.take("radius", _positive),
                      potential=r.take("potential", _waveform))
        r.done()
        if kind != "shell" and np.linalg.norm(out.axis_dir) == 0:
            raise ScenarioError(f"{where}.axis_dir: must be non-zero")
        return out

    def dump(self) -> dict:
        if self.kind == "solenoid":
            return {"kind": self.kind, "axis_point": list(self.center), "axis_dir": list(self.axis_dir),
                    "radius": self.radius, "phi0": self.phi0}
        if self.kind in ("toroid", "shielded_toroid"):
            return {"kind": self.kind, "center": list(self.center), "axis_dir": list(self.axis_dir),
                    "major_radius": self.radius, "minor_radius": self.minor_radius, "phi0": self.phi0,
                    "field_profile": self.field_profile}
        pot = self.potential if isinstance(self.potential, float) else [list(k) for k in self.potential]
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius, "potential": pot}

    def build(self):
        if self.kind == "solenoid":
            return IdealSolenoid(np.array(self.center), np.array(self.axis_dir), self.radius, self.phi0)
        if self.kind in ("toroid", "shielded_toroid"):
            tor = Toroid(np.array(self.center), np.array(self.axis_dir), self.radius, self.minor_radius, self.phi0)
            return ShieldedToroid(tor) if self.kind == "shielded_toroid" else tor
        if isinstance(self.potential, float):
            wave = PiecewiseLinear.constant(self.potential)
        else:
            wave = PiecewiseLinear(self.potential)
        return ChargedShell(np.array(self.center), self.radius, wave)


def _waveform(x, where):
    """A constant (number) or time-ordered ``[[t, V], ...]`` knots."""
    if not isinstance(x, list):
        return _number(x, where)
    knots = []
    for i, k in enumerate(x):
        if not isinstance(k, list) or len(k) != 2:
            raise ScenarioError(f"{where}[{i}]: expected [t, V]")
        knots.append((_number(k[0], f"{where}[{i}][0]"), _number(k[1], f"{where}[{i}][1]")))
    if any(b[0] < a[0] for a, b in zip(knots, knots[1:])):
        raise ScenarioError(f"{where}: knot times must be non-decreasing")
    return tuple(knots)


def _waypoint(x, where):
    if not isinstance(x, list) or len(x) != 4:
        raise ScenarioError(f"{where}: expected [t, x, y, z]")
    return tuple(_number(c, f"{where}[{i}]") for i, c in enumerate(x))


@dataclass(frozen=True)
class ToleranceSpec:
    rel_tol: float = 1e-4
    abs_tol: float = 0.0
    max_subdivisions: int = 20000
    base_rule_order: int = 7

    @classmethod
    def read(cls, obj, where):
        r = _Reader(obj, where)
        out = cls(
            r.take("rel_tol", _positive, 1e-4),
            r.take("abs_tol", _number, 0.0),
            r.take("max_subdivisions", _integer, 20000),
            r.take("base_rule_order", _integer, 7),
        )
        r.done()
        try:
            out.config()
        except ConfigurationError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
        return out

    def dump(self) -> dict:
        return {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol,
                "max_subdivisions": self.max_subdivisions, "base_rule_order": self.base_rule_order}

    def config(self) -> QuadratureConfig:
        return QuadratureConfig(self.rel_tol, self.abs_tol, self.max_subdivisions,
                                base_rule_order=self.base_rule_order)


@dataclass(frozen=True)
class ScenarioFile:
    schema_version: int
    units: str = "Scaled"
    description: str = ""
    particle: ParticleSpec | None = None
    particles: tuple[BodySpec, ...] = ()
    sources: tuple[SourceSpec, ...] = ()
    states: tuple[StateSpec, ...] = ()
    path_a: tuple[tuple[float, ...], ...] = ()
    path_b: tuple[tuple[float, ...], ...] = ()
    route: str = "both"
    time_step: float = 1.0
    tolerances: ToleranceSpec = field(default_factory=ToleranceSpec)
    checks: tuple[str, ...] = ()
    rel_tols: tuple[float, ...] = ()

    # ---------------------------------------------------------------- io

    @classmethod
    def from_dict(cls, obj) -> "ScenarioFile":
        r = _Reader(obj, "")
        version = r.take("schema_version", _integer)
        if version not in SUPPORTED_VERSIONS:
            raise ScenarioError(f"schema_version: unsupported version {version} "
                                f"(supported: {', '.join(map(str, SUPPORTED_VERSIONS))})")
        units = r.take("units", _choice(("SI", "Scaled")), "Scaled")
        paths = r.take("paths", _paths, ((), ()))
        out = cls(
            schema_version=version,
            units=units,
            description=r.take("description", _string, ""),
            particle=r.take("particle", ParticleSpec.read, None),
            particles=r.take("particles", lambda x, w: _list(x, w, BodySpec.read), ()),
            sources=r.take("sources", lambda x, w: _list(x, w, SourceSpec.read), ()),
            states=r.take("states", lambda x, w: _list(x, w, StateSpec.read), ()),
            path_a=paths[0],
            path_b=paths[1],
            route=r.take("route", _choice(ROUTES), "both"),
            time_step=r.take("time_step", _positive, 1.0),
            tolerances=r.take("tolerances", ToleranceSpec.read, ToleranceSpec()),
            checks=r.take("checks", lambda x, w: _list(x, w, _choice(CHECKS)), ()),
            rel_tols=r.take("rel_tols", lambda x, w: _list(x, w, _positive), ()),
        )
        r.done()
        out.validate()
        return out

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"schema_version": self.schema_version, "units": self.units}
        if self.description:
            d["description"] = self.description
        if self.particle is not None:
            d["particle"] = self.particle.dump()
        if self.particles:
            d["particles"] = [b.dump() for b in self.particles]
        if self.sources:
            d["sources"] = [s.dump() for s in self.sources]
        if self.states:
            d["states"] = [s.dump() for s in self.states]
        if self.path_a:
            d["paths"] = {"a": [list(w) for w in self.path_a], "b": [list(w) for w in self.path_b]}
        d["route"] = self.route
        d["time_step"] = self.time_step
        d["tolerances"] = self.tolerances.dump()
        if self.checks:
            d["checks"] = list(self.checks)
        if self.rel_tols:
            d["rel_tols"] = list(self.rel_tols)
        return d

    # ---------------------------------------------------------- builders

    @property
    def unit_system(self) -> UnitSystem:
        return UnitSystem.from_tag(self.units)

    def build_particle(self) -> ParticleModel:
        if self.particle is None:
            raise ScenarioError("particle: missing required field")
        p = self.particle
        return ParticleModel(p.q, p.a, p.m, self.unit_system.constants)

    def build_sources(self) -> tuple:
        return tuple(s.build() for s in self.sources)

    def build_states(self) -> tuple[ParticleState, ...]:
        return tuple(ParticleState(np.array(s.r0), np.array(s.v)) for s in self.states)

    def build_bodies(self) -> tuple[tuple[ParticleModel, ParticleState], ...]:
        k = self.unit_system.constants
        return tuple((ParticleModel(b.q, b.a, 1.0, k), ParticleState(np.array(b.r0), np.array(b.v)))
                     for b in self.particles)

    def quad_config(self, rel_tol: float | None = None) -> QuadratureConfig:
        cfg = self.tolerances.config()
        return cfg if rel_tol is None else cfg.with_tolerances(rel_tol=rel_tol)

    def build_scenario(self, route: str = "standard", rel_tol: float | None = None) -> Scenario:
        if not self.path_a:
            raise ScenarioError("paths: missing required field")
        return Scenario(
            self.build_particle(),
            Path.from_rows([np.array(w) for w in self.path_a]),
            Path.from_rows([np.array(w) for w in self.path_b]),
            self.build_sources(),
            Route(route),
            self.time_step,
            self.quad_config(rel_tol),
        )

    def validate(self):
        """Re-check the invariants of every referenced domain type."""
        k = self.unit_system.constants
        try:
            if self.particle is not None:
                self.build_particle()
            self.build_sources()
            for i, st in enumerate(self.build_states()):
                try:
                    st.check(k)
                except DomainError as exc:
                    raise ScenarioError(f"states[{i}]: {exc}") from exc
            for i, (_, st) in enumerate(self.build_bodies()):
                try:
                    st.check(k)
                except DomainError as exc:
                    raise ScenarioError(f"particles[{i}]: {exc}") from exc
            if self.path_a:
                for name, rows in (("a", self.path_a), ("b", self.path_b)):
                    try:
                        Path.from_rows([np.array(w) for w in rows]).check_speeds(k)
                    except (DomainError, ConfigurationError) as exc:
                        raise ScenarioError(f"paths.{name}: {exc}") from exc
                if self.particle is not None:
                    self.build_scenario()
        except ScenarioError:
            raise
        except (ValueError, ConfigurationError) as exc:
            raise ScenarioError(str(exc)) from exc


def _paths(x, where):
    r = _Reader(x, where)
    a = r.take("a", lambda v, w: _list(v, w, _waypoint))
    b = r.take("b", lambda v, w: _list(v, w, _waypoint))
    r.done()
    return a, b


def _reject_constant(name):
    raise ScenarioError(f"non-finite number {name} is not valid JSON")


def loads(text: str) -> ScenarioFile:
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return ScenarioFile.from_dict(obj)


def parse_scenario(path) -> ScenarioFile:
    p = FilePath(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {p}: {exc.strerror}") from exc
    except UnicodeDecodeError as exc:
        raise ScenarioError(f"scenario {p} is not UTF-8") from exc
    return loads(text)


def dumps(sc: ScenarioFile) -> str:
    return json.dumps(sc.to_dict(), indent=2, allow_nan=False) + "\n"


def serialize(sc: ScenarioFile, path) -> None:
    FilePath(path).write_text(dumps(sc), encoding="utf-8")
