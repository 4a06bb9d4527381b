"""The acceptance battery: reference scenarios grouped by criterion.

Scenarios are defined here in code; ``scripts/write_scenarios.py`` dumps
them to ``scenarios/*.json`` and a test keeps the two in sync, so the CLI
can run any criterion either from the shipped file or from this table.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .experiments import COMMANDS, Row
from .scenario import (
    BodySpec,
    ParticleSpec,
    ScenarioFile,
    SourceSpec,
    StateSpec,
    ToleranceSpec,
)

TWO_PI = 2.0 * math.pi
# speed of the time-stepped interferometer arms: slow enough that O(beta^2)
# frozen-velocity effects sit below the overlap-route error, fast enough to
# keep the number of time steps small
NONRELATIVISTIC_BETA = 1e-3
# the two Lagrangians differ at relative order beta^2; the static-limit states
# of the equivalence check sit far below any quadrature tolerance
STATIC_LIMIT_BETA = 1e-5


def _v(beta, direction):
    d = np.asarray(direction, dtype=float)
    return tuple(float(c) for c in beta * d / np.linalg.norm(d))


def _polyline(points, speed):
    """Waypoints ``[t, x, y, z]`` traversing ``points`` at constant speed."""
    rows, t = [[0.0, *map(float, points[0])]], 0.0
    for a, b in zip(points, points[1:]):
        t += float(np.linalg.norm(np.subtract(b, a))) / speed
        rows.append([t, *map(float, b)])
    return tuple(tuple(r) for r in rows)


SOLENOID = SourceSpec("solenoid", (0.0, 0.0, 0.0), (0.0, 0.0, 1.0), 1.0, phi0=TWO_PI)
TOROID = SourceSpec("toroid", (0.0, 0.0, 0.0), (0.0, 0.0, 1.0), 3.0, 1.0, TWO_PI)


def shell_equivalence() -> ScenarioFile:
    shell = SourceSpec("shell", (0.0, 0.0, 0.0), radius=1.0, potential=0.7)
    states = (
        StateSpec((0.0, 0.0, 0.0)),
        StateSpec((0.3, 0.0, 0.0)),
        StateSpec((0.0, 0.4, 0.2), _v(0.3, (1, 0, 0))),
        StateSpec((-0.2, -0.3, 0.4), _v(0.6, (0, 1, 1))),
    )
    return ScenarioFile(1, "Scaled", "Charge inside a charged shell: both Lagrangians give -qV",
                        ParticleSpec(1.0, 0.05), sources=(shell,), states=states,
                        route="both", tolerances=ToleranceSpec(rel_tol=1e-4), checks=("equivalence",))


def solenoid_equivalence() -> ScenarioFile:
    b0 = STATIC_LIMIT_BETA
    states = (
        StateSpec((3.0, 0.0, 0.0), _v(b0, (0, 1, 0))),
        StateSpec((0.0, -5.0, 1.0), _v(b0, (1, 0.5, 0.3))),
        StateSpec((2.5, 2.5, 0.0), _v(0.3, (-1, 1, 0))),
        StateSpec((-4.0, 1.0, -2.0), _v(0.3, (1, 0, 0))),
        StateSpec((0.0, 3.0, 0.0), _v(0.6, (1, 0, 0))),
        StateSpec((-2.0, -3.0, 0.5), _v(0.6, (0.2, -1, 0.4))),
    )
    return ScenarioFile(1, "Scaled", "Moving charge near an ideal solenoid: q v.A against the B_p.B_0 overlap",
                        ParticleSpec(1.0, 0.1), sources=(SOLENOID,), states=states,
                        route="both", tolerances=ToleranceSpec(rel_tol=1e-4), checks=("equivalence",))


def toroid_equivalence() -> ScenarioFile:
    b0 = STATIC_LIMIT_BETA
    states = (
        StateSpec((0.0, 0.0, 0.5), _v(b0, (1, 0, 0))),
        StateSpec((5.0, 0.0, 0.0), _v(b0, (0, 0, 1))),
        StateSpec((3.0, 0.0, 2.5), _v(b0, (1, 0, 0))),
        StateSpec((0.0, 4.5, -1.5), _v(b0, (0.3, -1, 1))),
    )
    return ScenarioFile(1, "Scaled", "Moving charge near a toroidal magnet",
                        ParticleSpec(1.0, 0.1), sources=(TOROID,), states=states,
                        route="both", tolerances=ToleranceSpec(rel_tol=1e-4), checks=("equivalence",))


def boundary_static() -> ScenarioFile:
    states = (
        StateSpec((3.0, 0.0, 0.0)),
        StateSpec((0.0, -2.0, 1.0)),
        StateSpec((-4.0, 3.0, 0.0)),
        StateSpec((3.0, 0.0, 0.0), _v(0.3, (0, 1, 0))),
    )
    return ScenarioFile(1, "Scaled", "Coulomb-gauge boundary term eps0 int A.E_p next to a solenoid",
                        ParticleSpec(1.0, 0.1), sources=(SOLENOID,), states=states,
                        route="both", tolerances=ToleranceSpec(rel_tol=1e-5), checks=("boundary_term",))


def em_mass_scenario() -> ScenarioFile:
    bodies = tuple(BodySpec(1.0, a) for a in (0.5, 1.0, 2.0))
    return ScenarioFile(1, "Scaled", "Electromagnetic mass of a charged shell", particles=bodies,
                        tolerances=ToleranceSpec(rel_tol=1e-8), checks=("em_mass",))


def free_field_scenario() -> ScenarioFile:
    states = tuple(StateSpec((0.0, 0.0, 0.0), _v(b, (1, 0, 0))) for b in (0.3, 0.6))
    return ScenarioFile(1, "Scaled", "Free-field Lagrangian of a moving shell against its rest value",
                        ParticleSpec(1.0, 1.0), states=states, tolerances=ToleranceSpec(rel_tol=1e-6),
                        checks=("free_field",))


def bilinearity_two() -> ScenarioFile:
    bodies = (BodySpec(1.0, 0.5, (0.0, 0.0, 0.0)), BodySpec(1.0, 0.5, (4.0, 0.0, 0.0)))
    return ScenarioFile(1, "Scaled", "Total field Lagrangian of two shells split into self and pair terms",
                        particles=bodies, tolerances=ToleranceSpec(rel_tol=1e-6))


def bilinearity_three() -> ScenarioFile:
    bodies = (BodySpec(1.0, 0.5, (0.0, 0.0, 0.0)), BodySpec(-1.0, 0.5, (4.0, 0.0, 0.0)),
              BodySpec(2.0, 0.4, (1.0, 3.0, 0.5)))
    return ScenarioFile(1, "Scaled", "Bilinearity with three shells", particles=bodies,
                        tolerances=ToleranceSpec(rel_tol=1e-6))


def magnetic_flux_quantum() -> ScenarioFile:
    beta, L, h = NONRELATIVISTIC_BETA, 10.0, 5.0
    arm_a = _polyline([(-L, 0, 0), (-L, h, 0), (L, h, 0), (L, 0, 0)], beta)
    arm_b = _polyline([(-L, 0, 0), (-L, -h, 0), (L, -h, 0), (L, 0, 0)], beta)
    return ScenarioFile(1, "Scaled", "Flux-quantum solenoid (phi0 = 2 pi hbar / q): phase 2 pi",
                        ParticleSpec(1.0, 0.1), sources=(SOLENOID,), path_a=arm_a, path_b=arm_b,
                        route="both", time_step=1.0 / beta, tolerances=ToleranceSpec(rel_tol=1e-3))


def electric_square_pulse() -> ScenarioFile:
    """Both arms rest inside their shell while the shells are charged.

    Shell b carries a compensating pulse so that, with the superposed shell
    potentials, the arm in b sits at zero potential and the arm in a at
    exactly ``V``; the phase is then ``q V T / hbar``.
    """
    beta, L, h, T, V, R = 0.1, 10.0, 5.0, 4.0, 0.5, 1.0
    x = R / (2 * h)
    va, vb = V / (1 - x * x), -x * V / (1 - x * x)
    rest_a, rest_b = (0.0, h, 0.0), (0.0, -h, 0.0)
    t1 = math.hypot(L, h) / beta
    rows = {}
    for name, rest in (("a", rest_a), ("b", rest_b)):
        rows[name] = ((0.0, -L, 0.0, 0.0), (t1, *rest), (t1 + T + 2.0, *rest), (2 * t1 + T + 2.0, L, 0.0, 0.0))
    pulse = lambda v: ((t1 + 1.0, 0.0), (t1 + 1.0, v), (t1 + 1.0 + T, v), (t1 + 1.0 + T, 0.0))
    shells = (SourceSpec("shell", rest_a, radius=R, potential=pulse(va)),
              SourceSpec("shell", rest_b, radius=R, potential=pulse(vb)))
    return ScenarioFile(1, "Scaled", "Electric scheme: square pulse, arms at rest inside the shells",
                        ParticleSpec(1.0, 0.1), sources=shells, path_a=rows["a"], path_b=rows["b"],
                        route="both", time_step=10.0, tolerances=ToleranceSpec(rel_tol=1e-4))


def shielded_toroid() -> ScenarioFile:
    """Arms from the hole (x = 1) to outside (x = 5) over and under the tube
    at phi = 0; the arms are mirror images under z -> -z."""
    beta, h = NONRELATIVISTIC_BETA, 2.0
    arm_a = _polyline([(1, 0, 0), (1, 0, h), (5, 0, h), (5, 0, 0)], beta)
    arm_b = _polyline([(1, 0, 0), (1, 0, -h), (5, 0, -h), (5, 0, 0)], beta)
    src = SourceSpec("shielded_toroid", TOROID.center, TOROID.axis_dir, TOROID.radius, TOROID.minor_radius,
                     TOROID.phi0)
    return ScenarioFile(1, "Scaled", "Superconductor-shielded toroid, mirror-symmetric arms",
                        ParticleSpec(1.0, 0.1), sources=(src,), path_a=arm_a, path_b=arm_b,
                        route="overlap", time_step=0.4 / beta, tolerances=ToleranceSpec(rel_tol=1e-3))


def quadrature_oracle_scenario() -> ScenarioFile:
    return ScenarioFile(1, "Scaled", "Reference integrals with closed forms", checks=("quadrature_oracles",),
                        rel_tols=(1e-3, 1e-5))


def covariance_scenario() -> ScenarioFile:
    states = tuple(StateSpec((0.5, -1.0, 2.0), _v(b, d)) for b, d in
                   ((0.3, (1, 0, 0)), (0.6, (1, 2, -1)), (0.9, (0, 0.3, 1))))
    return ScenarioFile(1, "Scaled", "Boost covariance of the field tensor and of the moving-charge field",
                        ParticleSpec(1.0, 0.1), states=states, checks=("covariance",))


def shell_convergence() -> ScenarioFile:
    shell = SourceSpec("shell", (0.0, 0.0, 0.0), radius=1.0, potential=0.7)
    return ScenarioFile(1, "Scaled", "Shell-overlap integral under tightening tolerance",
                        ParticleSpec(1.0, 0.05), sources=(shell,), states=(StateSpec((0.3, 0.1, 0.0)),),
                        tolerances=ToleranceSpec(rel_tol=1e-3), checks=("shell_overlap",))


@dataclass(frozen=True)
class Run:
    command: str
    file: str
    build: object


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    runs: tuple[Run, ...]
    max_seconds: float = 120.0


CRITERIA: tuple[Criterion, ...] = (
    Criterion(1, "Lagrangian equivalence: overlap route = potential route", (
        Run("lagrangian-compare", "c01_shell_equivalence.json", shell_equivalence),
        Run("lagrangian-compare", "c01_solenoid_equivalence.json", solenoid_equivalence),
        Run("lagrangian-compare", "c01_toroid_equivalence.json", toroid_equivalence),
    ), max_seconds=600.0),
    Criterion(2, "Coulomb-gauge boundary term vanishes for a static charge", (
        Run("lagrangian-compare", "c02_boundary_term.json", boundary_static),
    )),
    Criterion(3, "Electromagnetic mass q^2/(8 pi a)", (
        Run("mass", "c03_em_mass.json", em_mass_scenario),
    )),
    Criterion(4, "Free-field Lagrangian scales as sqrt(1 - beta^2)", (
        Run("mass", "c04_free_field.json", free_field_scenario),
    )),
    Criterion(5, "Bilinearity of the total field Lagrangian", (
        Run("bilinearity", "c05_bilinearity_two.json", bilinearity_two),
        Run("bilinearity", "c05_bilinearity_three.json", bilinearity_three),
    )),
    Criterion(6, "Magnetic AB phase q phi0 / hbar", (
        Run("ab-magnetic", "c06_magnetic_flux_quantum.json", magnetic_flux_quantum),
    ), max_seconds=900.0),
    Criterion(7, "Electric AB phase q V T / hbar", (
        Run("ab-electric", "c07_electric_square_pulse.json", electric_square_pulse),
    )),
    Criterion(8, "Shielded toroid phase as if unshielded", (
        Run("ab-shielded", "c08_shielded_toroid.json", shielded_toroid),
    )),
    Criterion(9, "Quadrature error estimates bound the true error", (
        Run("convergence", "c09_quadrature_oracles.json", quadrature_oracle_scenario),
    )),
    Criterion(10, "Boost covariance", (
        Run("lagrangian-compare", "c10_covariance.json", covariance_scenario),
    )),
)

EXTRA_SCENARIOS = {"shell_convergence.json": shell_convergence}


def all_scenarios() -> dict[str, ScenarioFile]:
    out = {run.file: run.build() for c in CRITERIA for run in c.runs}
    out.update({name: fn() for name, fn in EXTRA_SCENARIOS.items()})
    return out


@dataclass
class CriterionResult:
    criterion: Criterion
    rows: list[tuple[str, Row]]
    seconds: float

    @property
    def within_budget(self) -> bool:
        return self.seconds <= self.criterion.max_seconds

    @property
    def passed(self) -> bool:
        return self.within_budget and all(r.status != "fail" for _, r in self.rows)

    def summary(self) -> str:
        c = self.criterion
        budget = "" if self.within_budget else f", over the {c.max_seconds:.0f} s budget"
        fails = f", {len(self.failures)} failing rows" if self.failures else ""
        return (f"criterion {c.number:2d} {'PASS' if self.passed else 'FAIL'}  "
                f"({self.seconds:.1f} s{budget}{fails}) {c.title}")

    @property
    def failures(self) -> list[tuple[str, Row]]:
        return [(f, r) for f, r in self.rows if r.status == "fail"]


def run_criterion(c: Criterion) -> CriterionResult:
    t0 = time.perf_counter()
    rows = []
    for run in c.runs:
        sf = run.build()
        rows += [(run.file, r) for r in COMMANDS[run.command](sf, sf.route)]
    return CriterionResult(c, rows, time.perf_counter() - t0)


def criterion(number: int) -> Criterion:
    return next(c for c in CRITERIA if c.number == number)
