"""Command implementations: scenario file in, report rows out.

Every row carries the computed value, its error estimate and, when one is
available, an independent oracle. A row passes when
``|value - oracle| <= 2 * error``; rows that carry an explicit
``tolerance`` (criteria stated as a fixed relative accuracy) pass when
``|value - oracle| <= tolerance`` instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ab_engine as ab
from .emcore import EMFieldSample, fields_to_tensor, lorentz_boost_fields, tensor_contraction
from .lagrangian import (
    bilinearity_check,
    boundary_term_rate,
    em_mass,
    free_field_lagrangian,
    l_int_overlap,
    overlap_lagrangian,
    solenoid_a_field,
    solenoid_boundary_term,
    standard_lagrangian,
)
from .quad3d import AllSpace, Ball, QuadratureConfig, RefinementCenter, integrate, require_converged
from .scenario import ScenarioError, ScenarioFile
from .sources import (
    ChargedShell,
    IdealSolenoid,
    ParticleModel,
    ParticleState,
    ShieldedToroid,
    particle_fields_static,
    particle_fields_uniform_velocity,
    shell_potential,
    solenoid_potential,
    source_potential,
)

NA = "n/a"


@dataclass(frozen=True)
class Row:
    quantity: str
    route: str
    value: float
    error: float
    oracle: float | None = None
    provenance: str = ""
    tolerance: float | None = None

    @property
    def deviation(self) -> float | None:
        return None if self.oracle is None else abs(self.value - self.oracle)

    @property
    def status(self) -> str:
        if self.oracle is None:
            return "info"
        limit = 2.0 * self.error if self.tolerance is None else self.tolerance
        return "pass" if self.deviation <= limit else "fail"


def _routes(route: str) -> tuple[str, ...]:
    return ("standard", "overlap") if route == "both" else (route,)


def _cfg(sf: ScenarioFile, rel_tol: float | None) -> QuadratureConfig:
    return sf.quad_config(rel_tol)


def _speed(st: ParticleState) -> float:
    return float(np.linalg.norm(st.v))


# --------------------------------------------------------------------------
# lagrangian-compare


def run_lagrangian_compare(sf: ScenarioFile, route: str, rel_tol: float | None = None) -> list[Row]:
    checks = sf.checks or ("equivalence",)
    rows: list[Row] = []
    if "equivalence" in checks or "boundary_term" in checks:
        rows += _equivalence_rows(sf, route, rel_tol, "equivalence" in checks, "boundary_term" in checks)
    if "covariance" in checks:
        rows += _covariance_rows(sf)
    return rows


def _equivalence_rows(sf, route, rel_tol, equivalence, boundary) -> list[Row]:
    p = sf.build_particle()
    sources = sf.build_sources()
    cfg = _cfg(sf, rel_tol)
    rows = []
    for i, st in enumerate(sf.build_states()):
        std, std_err = standard_lagrangian(p, st, sources, 0.0)
        need_overlap = (equivalence and "overlap" in _routes(route)) or (boundary and _speed(st) > 0)
        ov = None
        if need_overlap:
            floor = cfg.with_tolerances(abs_tol=max(cfg.abs_tol, cfg.rel_tol * interaction_scale(p, st, sources)))
            ov = require_converged(overlap_lagrangian(p, st, sources, 0.0, floor), f"l_int_overlap[{i}]")
        if equivalence and "standard" in _routes(route):
            rows.append(Row(f"l_int_standard[{i}]", "standard", std, std_err, None,
                            "-q Phi(r0) + q v.A(r0)"))
        if equivalence and "overlap" in _routes(route):
            rows.append(Row(f"l_int_overlap[{i}]", "overlap", ov.value, ov.error_estimate + std_err, std,
                            "equals the potential-route value at the same state"))
        if boundary:
            rows += _boundary_rows(i, p, st, sources, cfg, ov, std, std_err)
    return rows


def interaction_scale(p: ParticleModel, st: ParticleState, sources, t: float = 0.0) -> float:
    """``|q| (|Phi| + |v| |A|)`` at the particle: the size of the potential-route
    terms before any cancellation, used as the absolute tolerance scale when
    the Lagrangian itself vanishes by symmetry."""
    total = 0.0
    for src in sources:
        pot = source_potential(src, t, st.r0)
        total += abs(p.q) * (abs(float(np.asarray(pot.phi))) + _speed(st) * float(np.linalg.norm(pot.a)))
    return total


def boundary_abs_tol(p: ParticleModel, st: ParticleState, sol: IdealSolenoid) -> float:
    """Absolute tolerance ``1e-8 * scale``; the scale is ``eps0 |A(r0)| |E_p|``
    integrated over the ball reaching the solenoid axis, i.e. ``|q A(r0)| rho``."""
    a0 = float(np.linalg.norm(solenoid_potential(sol, st.r0[None, :]).a[0]))
    rho = float(sol.rho(st.r0[None, :])[0])
    return 1e-8 * abs(p.q) * a0 * rho


def _boundary_rows(i, p, st, sources, cfg, ov, std, std_err) -> list[Row]:
    rows = []
    for j, sol in enumerate(s for s in sources if isinstance(s, IdealSolenoid)):
        tol = boundary_abs_tol(p, st, sol)
        res = require_converged(
            solenoid_boundary_term(p, st, sol, cfg.with_tolerances(abs_tol=tol),
                                   scale=max(1.0, float(sol.rho(st.r0[None, :])[0]))),
            f"boundary_term[{i},{j}]",
        )
        if _speed(st) == 0:
            rows.append(Row(f"boundary_term[{i},{j}]", NA, res.value, res.error_estimate, 0.0,
                            "vanishes for a static charge in Coulomb gauge"))
        else:
            rows.append(Row(f"boundary_term[{i},{j}]", NA, res.value, res.error_estimate, None,
                            "recorded only; not asserted for a moving charge"))
    if _speed(st) > 0 and len(sources) == 1 and isinstance(sources[0], IdealSolenoid):
        sol = sources[0]
        rate = require_converged(
            boundary_term_rate(p, st, solenoid_a_field(sol), cfg,
                               scale=max(1.0, float(sol.rho(st.r0[None, :])[0]))),
            f"boundary_term_rate[{i}]",
        )
        rows.append(Row(f"boundary_term_rate[{i}]", NA, rate.value,
                        rate.error_estimate + ov.error_estimate + std_err, ov.value - std,
                        "equals l_int_overlap - l_int_standard (total time derivative)"))
    return rows


def boosted_static_fields(p: ParticleModel, st: ParticleState, x) -> EMFieldSample:
    """Lab fields of a moving charge obtained by boosting its rest-frame
    Coulomb field, sampled at the rest-frame image of each lab point."""
    k = p.constants
    v = st.v
    speed = _speed(st)
    d = np.asarray(x, dtype=float) - st.r0
    if speed == 0:
        return particle_fields_static(p, ParticleState(np.zeros(3), np.zeros(3)), d)
    n = v / speed
    g = 1.0 / math.sqrt(1.0 - (speed / k.c) ** 2)
    par = d @ n
    rest = d + np.outer((g - 1.0) * par, n)
    rest_fields = particle_fields_static(p, ParticleState(np.zeros(3), np.zeros(3)), rest)
    return lorentz_boost_fields(rest_fields, -v, k)


def covariance_deviations(p: ParticleModel, st: ParticleState, n_points: int = 256, seed: int = 0):
    """``(contraction, fields)``: largest relative deviations of the tensor
    self-contraction under the boost, and of the uniform-velocity field from
    the boosted Coulomb field."""
    k = p.constants
    rng = np.random.default_rng(seed)
    speed = _speed(st)
    g = 1.0 / math.sqrt(1.0 - (speed / k.c) ** 2)
    # rest-frame offsets outside the shell, mapped to lab offsets
    dirs = rng.normal(size=(n_points, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    radii = max(2.0 * p.a, 0.5) * (1.0 + 9.0 * rng.random(n_points))
    rest = dirs * radii[:, None]
    if speed > 0:
        n = st.v / speed
        rest = rest + np.outer((1.0 / g - 1.0) * (rest @ n), n)
    x = st.r0 + rest
    direct = particle_fields_uniform_velocity(p, st, x, k)
    boosted = boosted_static_fields(p, st, x)

    def stack(s):
        return np.concatenate([s.e / k.c, s.b], axis=-1)

    fields_dev = float(np.max(np.linalg.norm(stack(direct) - stack(boosted), axis=1)
                              / np.linalg.norm(stack(boosted), axis=1)))
    # arbitrary fields: contraction before and after the boost
    e = rng.normal(size=(n_points, 3)) * k.c
    b = rng.normal(size=(n_points, 3))
    s0 = EMFieldSample(e, b)
    s1 = lorentz_boost_fields(s0, st.v, k)
    t0, t1 = fields_to_tensor(s0, k), fields_to_tensor(s1, k)
    inv0 = tensor_contraction(t0, t0, k)
    inv1 = tensor_contraction(t1, t1, k)
    norm = np.sum(e * e, axis=-1) / k.c**2 + np.sum(b * b, axis=-1)
    contraction_dev = float(np.max(np.abs(inv1 - inv0) / norm))
    return contraction_dev, fields_dev


def _covariance_rows(sf: ScenarioFile) -> list[Row]:
    p = sf.build_particle()
    rows = []
    for i, st in enumerate(sf.build_states()):
        c_dev, f_dev = covariance_deviations(p, st, seed=i)
        beta = _speed(st) / p.constants.c
        rows.append(Row(f"boost_invariant_contraction[{i}]", NA, c_dev, 0.0, 0.0,
                        f"F.F unchanged by the boost (beta={beta:.3g}); relative deviation", 1e-10))
        rows.append(Row(f"uniform_velocity_vs_boosted_static[{i}]", NA, f_dev, 0.0, 0.0,
                        f"moving-charge field equals boosted Coulomb field (beta={beta:.3g}); relative deviation",
                        1e-10))
    return rows


# --------------------------------------------------------------------------
# AB phases


def _phase_rows(sf, route, rel_tol, oracle_fn: Callable, runner: Callable, label: str) -> list[Row]:
    rows = []
    results = {}
    for r in _routes(route):
        sc = sf.build_scenario(r, rel_tol)
        res = runner(sc)
        results[r] = res
        oracle = oracle_fn(sc)
        # the potential route is a line integral of closed-form potentials
        tol = 1e-10 * max(abs(oracle), 1.0) if r == "standard" else None
        rows.append(Row("action_a", r, res.s_a, res.error_a))
        rows.append(Row("action_b", r, res.s_b, res.error_b))
        rows.append(Row("phase_difference", r, res.phase_difference, res.phase_error, oracle, label, tol))
    if len(results) == 2:
        s, o = results["standard"], results["overlap"]
        rows.append(Row("route_agreement", "both", o.phase_difference - s.phase_difference,
                        s.phase_error + o.phase_error, 0.0, "overlap minus standard phase"))
    return rows


def run_ab_magnetic(sf: ScenarioFile, route: str, rel_tol: float | None = None) -> list[Row]:
    return _phase_rows(sf, route, rel_tol, ab.magnetic_phase_oracle, ab.magnetic_ab_phase,
                       "-q (enclosed flux) / hbar")


def run_ab_electric(sf: ScenarioFile, route: str, rel_tol: float | None = None) -> list[Row]:
    return _phase_rows(sf, route, rel_tol, ab.electric_phase_oracle, ab.electric_ab_phase,
                       "(q/hbar) * integral of potential difference between arms")


def run_ab_shielded(sf: ScenarioFile, route: str, rel_tol: float | None = None) -> list[Row]:
    rows = []
    geo = sf.build_scenario("standard", rel_tol)
    for j, src in enumerate(s for s in geo.sources if isinstance(s, ShieldedToroid)):
        for name, path in (("a", geo.path_a), ("b", geo.path_b)):
            rows.append(Row(f"closest_approach[{name},{j}]", NA, ab.closest_approach(path, src.toroid), 0.0,
                            provenance="distance from the arm to the shielded body (polyline sampling)"))
    if "standard" in _routes(route):
        sc = sf.build_scenario("standard", rel_tol)
        res = ab.path_actions(sc)
        rows.append(Row("phase_difference", "standard", res.phase_difference, res.phase_error,
                        ab.magnetic_phase_oracle(sc), "-q (enclosed flux) / hbar"))
    if "overlap" in _routes(route):
        sc = sf.build_scenario("overlap", rel_tol)
        out = ab.shielded_toroid_phase(sc)
        sh, un = out.shielded, out.unshielded
        combined = sh.phase_error + un.phase_error
        rows += [
            Row("phase_unshielded", "overlap", un.phase_difference, un.phase_error,
                ab.magnetic_phase_oracle(sc), "-q (enclosed flux) / hbar"),
            Row("phase_shielded", "overlap", sh.phase_difference, combined, un.phase_difference,
                "unshielded overlap phase; within combined errors", combined),
            Row("shield_action_a", "overlap", out.shield_a[0], out.shield_a[1]),
            Row("shield_action_b", "overlap", out.shield_b[0], out.shield_b[1]),
            Row("shield_phase_contribution", "overlap", out.shield_phase_contribution,
                out.shield_phase_error, 0.0, "mirror-symmetric arms; within combined errors",
                out.shield_phase_error),
        ]
    return rows


# --------------------------------------------------------------------------
# mass and free-field Lagrangian


def run_mass(sf: ScenarioFile, route: str, rel_tol: float | None = None) -> list[Row]:
    checks = sf.checks or ("em_mass", "free_field")
    cfg = _cfg(sf, rel_tol)
    rows = []
    if "em_mass" in checks:
        models = []
        if sf.particle is not None:
            models.append(sf.build_particle())
        models += [m for m, _ in sf.build_bodies()]
        for i, m in enumerate(models):
            res = require_converged(em_mass(m, cfg), f"em_mass[{i}]")
            oracle = m.em_mass_closed_form
            rows.append(Row(f"em_mass[{i}:q={m.q:g},a={m.a:g}]", NA, res.value, res.error_estimate, oracle,
                            "q^2 / (8 pi eps0 a c^2); relative 1e-6", 1e-6 * abs(oracle)))
    if "free_field" in checks and sf.states:
        p = sf.build_particle()
        k = p.constants
        rest = require_converged(free_field_lagrangian(p, ParticleState(np.zeros(3), np.zeros(3)), cfg),
                                 "free_field_lagrangian[rest]")
        rest_oracle = -p.em_mass_closed_form * k.c**2
        rows.append(Row("free_field_lagrangian[rest]", NA, rest.value, rest.error_estimate, rest_oracle,
                        "minus the rest-frame field energy"))
        for i, st in enumerate(sf.build_states()):
            res = require_converged(free_field_lagrangian(p, st, cfg), f"free_field_lagrangian[{i}]")
            beta = _speed(st) / k.c
            ratio = res.value / rest.value
            ratio_err = abs(ratio) * (res.error_estimate / abs(res.value) + rest.error_estimate / abs(rest.value))
            oracle = math.sqrt(1.0 - beta * beta)
            rows.append(Row(f"free_field_ratio[beta={beta:g}]", NA, ratio, ratio_err, oracle,
                            "sqrt(1 - beta^2) from the contracted volume; relative 1e-3", 1e-3 * oracle))
    return rows


# --------------------------------------------------------------------------
# bilinearity


def run_bilinearity(sf: ScenarioFile, route: str, rel_tol: float | None = None) -> list[Row]:
    bodies = sf.build_bodies()
    if len(bodies) < 1:
        raise ScenarioError("particles: bilinearity needs at least one particle")
    cfg = _cfg(sf, rel_tol)
    rep = bilinearity_check(list(bodies), cfg)
    for name, res in [("total", rep.total), *[(f"self[{i}]", r) for i, r in enumerate(rep.self_terms)],
                      *[(f"cross[{i},{j}]", r) for (i, j), r in rep.cross_terms.items()]]:
        require_converged(res, f"bilinearity {name}")
    k = bodies[0][0].constants
    rows = [Row("total_field_lagrangian", NA, rep.total.value, rep.total.error_estimate)]
    for i, (res, (m, st)) in enumerate(zip(rep.self_terms, bodies)):
        beta = _speed(st) / k.c
        oracle = -m.em_mass_closed_form * k.c**2 * math.sqrt(1.0 - beta * beta)
        rows.append(Row(f"self_term[{i}]", NA, res.value, res.error_estimate, oracle,
                        "-m_e c^2 sqrt(1 - beta^2)"))
    for (i, j), res in rep.cross_terms.items():
        (mi, si), (mj, sj) = bodies[i], bodies[j]
        oracle, prov, tol = None, "", None
        if not np.any(si.v) and not np.any(sj.v):
            d = float(np.linalg.norm(si.r0 - sj.r0))
            oracle = -mi.q * mj.q / (4 * math.pi * k.eps0 * d)
            prov, tol = "-q_i q_j / (4 pi eps0 d); relative 1e-4", 1e-4 * abs(oracle)
        rows.append(Row(f"cross_term[{i},{j}]", NA, res.value, res.error_estimate, oracle, prov, tol))
    rows.append(Row("identity_discrepancy", NA, rep.discrepancy, rep.combined_error, 0.0,
                    "total minus (self terms + pair terms); within combined errors", rep.combined_error))
    return rows


# --------------------------------------------------------------------------
# convergence


def quadrature_oracles(cfg: QuadratureConfig) -> list[tuple[str, object, float]]:
    """The three reference integrals: ``(name, result, exact)``."""
    ball = integrate(lambda x: np.ones(len(x)), Ball(np.zeros(3), 1.0), cfg)
    gauss = integrate(lambda x: np.exp(-np.sum(x * x, axis=-1)), AllSpace(), cfg)
    centre = RefinementCenter(np.zeros(3))
    inv_sq = integrate(lambda x: 1.0 / np.sum(x * x, axis=-1), Ball(np.zeros(3), 1.0),
                       cfg.with_centers((centre,)))
    return [
        ("unit_ball_volume", ball, 4.0 * math.pi / 3.0),
        ("gaussian_all_space", gauss, math.pi**1.5),
        ("inverse_square_ball", inv_sq, 4.0 * math.pi),
    ]


def run_convergence(sf: ScenarioFile, route: str, rel_tol: float | None = None) -> list[Row]:
    checks = sf.checks or ("shell_overlap",)
    base = rel_tol if rel_tol is not None else sf.tolerances.rel_tol
    levels = sf.rel_tols or (base, base / 2, base / 4)
    rows = []
    if "quadrature_oracles" in checks:
        for tol in levels:
            for name, res, exact in quadrature_oracles(sf.quad_config(tol)):
                rows.append(Row(f"{name}[rel_tol={tol:g}]", NA, res.value, res.error_estimate, exact,
                                "closed form"))
    if "shell_overlap" in checks:
        p = sf.build_particle()
        shells = [s for s in sf.build_sources() if isinstance(s, ChargedShell)]
        if not shells or not sf.states:
            raise ScenarioError("convergence: shell_overlap needs a shell source and a state")
        shell, st = shells[0], sf.build_states()[0]
        oracle = -p.q * float(shell_potential(shell, 0.0, st.r0[None, :]).phi[0])
        devs = []
        for tol in levels:
            res = require_converged(l_int_overlap(p, st, shell, 0.0, sf.quad_config(tol)),
                                    f"shell_overlap[rel_tol={tol:g}]")
            devs.append(abs(res.value - oracle))
            rows.append(Row(f"shell_overlap[rel_tol={tol:g}]", "overlap", res.value, res.error_estimate, oracle,
                            "-q V for a charge inside the shell"))
        increases = sum(1 for a, b in zip(devs, devs[1:]) if b > a)
        rows.append(Row("shell_overlap_error_increases", NA, float(increases), 0.0, 0.0,
                        "|value - oracle| non-increasing as rel_tol shrinks", 0.0))
    return rows


COMMANDS: dict[str, Callable[..., list[Row]]] = {
    "lagrangian-compare": run_lagrangian_compare,
    "ab-magnetic": run_ab_magnetic,
    "ab-electric": run_ab_electric,
    "ab-shielded": run_ab_shielded,
    "mass": run_mass,
    "bilinearity": run_bilinearity,
    "convergence": run_convergence,
}
