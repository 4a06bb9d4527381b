import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as sc

from overlap_action.emcore import SI_CONSTANTS, DomainError
from overlap_action.experiments import boundary_abs_tol
from overlap_action.lagrangian import (
    bilinearity_check,
    boundary_term,
    boundary_term_rate,
    em_mass,
    free_field_lagrangian,
    l_int_overlap,
    l_int_standard,
    overlap_terms,
    smoothed_solenoid_a,
    solenoid_a_field,
    solenoid_boundary_term,
    standard_lagrangian,
)
from overlap_action.quad3d import ConfigurationError, QuadratureConfig
from overlap_action.sources import (
    ChargedShell,
    IdealSolenoid,
    ParticleModel,
    ParticleState,
    PiecewiseLinear,
    PotentialSample,
    Toroid,
    solenoid_potential,
)

SOL = IdealSolenoid(np.zeros(3), np.array([0, 0, 1.0]), 1.0, 2 * math.pi)


def state(r0, v=(0.0, 0.0, 0.0)):
    return ParticleState(np.array(r0, dtype=float), np.array(v, dtype=float))


# --------------------------------------------------------------------------
# potential route


def test_standard_lagrangian_examples():
    p = ParticleModel(2.0)
    pot = PotentialSample(np.array(0.5), np.array([0.0, 1.0, 0.0]))
    assert l_int_standard(p, state((0, 0, 0), (0.1, 0.2, 0.0)), pot) == pytest.approx(-1.0 + 0.4)
    # solenoid: A = phi0 / (2 pi rho) along phi-hat, here 1/3 along y
    val, err = standard_lagrangian(ParticleModel(1.0), state((3, 0, 0), (0, 0.3, 0)), [SOL])
    assert (val, err) == (pytest.approx(0.1), 0.0)


def test_standard_route_reports_toroid_error():
    tor = Toroid(np.zeros(3), np.array([0, 0, 1.0]), 3.0, 1.0, 2 * math.pi)
    val, err = standard_lagrangian(ParticleModel(1.0), state((5, 0, 0), (0, 0, 0.01)), [tor])
    assert 0 < err < 1e-10 * max(abs(val), 1e-300) * 1e6


# --------------------------------------------------------------------------
# overlap route


@settings(max_examples=8, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.1, 0.9), st.floats(-2, 2))
def test_shell_overlap_is_minus_qV_anywhere_inside(x, y, z, beta, q):
    shell = ChargedShell(np.zeros(3), 1.5, PiecewiseLinear.constant(0.7))
    r0 = np.array([x, y * 0.5, z * 0.5])
    v = beta * np.array([y, z, 1.0]) / np.linalg.norm([y, z, 1.0])
    res = l_int_overlap(ParticleModel(q, 0.05), ParticleState(r0, v), shell, 0.0, QuadratureConfig(rel_tol=1e-6))
    assert abs(res.value + 0.7 * q) <= 2 * res.error_estimate + 1e-12


def test_static_charge_has_no_magnetic_overlap():
    terms = overlap_terms(ParticleModel(1.0, 0.1), state((3, 0, 0)), SOL, 0.0, QuadratureConfig())
    assert terms["magnetic"].value == 0.0


def test_routes_agree_in_static_limit():
    p = ParticleModel(1.0, 0.1)
    st0 = state((0, -5, 1), (1e-5, 5e-6, 3e-6))
    ov = l_int_overlap(p, st0, SOL, 0.0, QuadratureConfig(rel_tol=1e-6))
    std, _ = standard_lagrangian(p, st0, [SOL])
    assert abs(ov.value - std) <= 2 * ov.error_estimate


def test_instantaneous_difference_is_second_order_in_beta():
    p = ParticleModel(1.0, 0.1)
    rel = []
    for beta in (0.05, 0.1):
        s = state((3, 0, 0), (0, beta, 0))
        ov = l_int_overlap(p, s, SOL, 0.0, QuadratureConfig(rel_tol=1e-8))
        std, _ = standard_lagrangian(p, s, [SOL])
        assert abs(ov.value - std) > 100 * ov.error_estimate
        rel.append((ov.value - std) / std)
    assert rel[1] / rel[0] == pytest.approx(4.0, rel=0.02)


# --------------------------------------------------------------------------
# boundary term


def test_smoothed_potential_matches_outside_and_is_regular():
    a_s = smoothed_solenoid_a(SOL)
    out = np.array([[1.0, 0, 0], [0, 2.0, 5.0], [-3.0, 4.0, -1.0]])
    assert np.allclose(a_s(out), solenoid_potential(SOL, out).a, rtol=1e-14, atol=0)
    assert np.allclose(a_s(np.zeros((1, 3))), 0.0)
    # continuity of the first derivatives across the surface
    h = 1e-6
    inner = a_s(np.array([[1 - h, 0, 0]]))[0]
    outer = a_s(np.array([[1 + h, 0, 0]]))[0]
    assert abs((outer[1] - inner[1]) / (2 * h) - (-1.0)) < 1e-4


@pytest.mark.parametrize("r0", [(3.0, 0, 0), (0, -2.0, 1.0)])
def test_boundary_term_vanishes_for_static_charge(r0):
    p, s = ParticleModel(1.0, 0.1), state(r0)
    tol = boundary_abs_tol(p, s, SOL)
    res = solenoid_boundary_term(p, s, SOL, QuadratureConfig(rel_tol=1e-5, abs_tol=tol), scale=float(SOL.rho(s.r0)))
    assert res.converged
    assert abs(res.value) <= 2 * res.error_estimate


def test_boundary_term_without_potential_is_zero():
    res = boundary_term(ParticleModel(1.0, 0.1), state((1, 2, 3)), lambda x: np.zeros_like(x),
                        QuadratureConfig(abs_tol=1e-15))
    assert res.value == 0.0


def test_boundary_rate_is_lagrangian_difference():
    p = ParticleModel(1.0, 0.1)
    s = state((3, 0, 0), (0, 0.3, 0))
    cfg = QuadratureConfig(rel_tol=1e-7)
    ov = l_int_overlap(p, s, SOL, 0.0, cfg)
    std, _ = standard_lagrangian(p, s, [SOL])
    rate = boundary_term_rate(p, s, solenoid_a_field(SOL), QuadratureConfig(rel_tol=1e-5), scale=3.0)
    assert abs(rate.value - (ov.value - std)) <= 2 * (rate.error_estimate + ov.error_estimate)
    assert abs(ov.value - std) > 1e3 * (rate.error_estimate + ov.error_estimate)


def test_boundary_rate_static_is_zero():
    assert boundary_term_rate(ParticleModel(1.0, 0.1), state((3, 0, 0)), solenoid_a_field(SOL)).value == 0.0


# --------------------------------------------------------------------------
# field energy and mass


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_em_mass_closed_form(a):
    p = ParticleModel(1.0, a)
    res = em_mass(p)
    assert res.value == pytest.approx(1.0 / (8 * math.pi * a), rel=1e-8)
    assert res.value == pytest.approx(p.em_mass_closed_form, rel=1e-8)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-3, 3).filter(lambda q: abs(q) > 1e-3))
def test_em_mass_scales_as_q2_over_a(a, q):
    ref = em_mass(ParticleModel(1.0, 1.0)).value
    assert em_mass(ParticleModel(q, a)).value == pytest.approx(ref * q * q / a, rel=1e-7)


def test_em_mass_edge_cases():
    assert em_mass(ParticleModel(0.0, 1.0)).value == 0.0
    with pytest.raises(DomainError):
        em_mass(ParticleModel(1.0, 0.0))


def test_si_em_mass_at_half_classical_radius_is_electron_mass():
    r_e = sc.physical_constants["classical electron radius"][0]
    p = ParticleModel(-sc.e, r_e / 2, sc.m_e, SI_CONSTANTS)
    assert em_mass(p).value == pytest.approx(sc.m_e, rel=1e-8)


def test_free_field_rest_value_is_minus_field_energy():
    p = ParticleModel(1.0, 1.0)
    res = free_field_lagrangian(p, state((0, 0, 0)))
    assert res.value == pytest.approx(-p.em_mass_closed_form, rel=1e-8)


@pytest.mark.parametrize("beta", [0.3, 0.6, 0.9])
def test_free_field_lagrangian_contracts(beta):
    p = ParticleModel(1.0, 1.0)
    rest = free_field_lagrangian(p, state((0, 0, 0))).value
    moving = free_field_lagrangian(p, state((1, 2, 3), beta * np.array([0.6, 0.0, 0.8])), QuadratureConfig(rel_tol=1e-6))
    assert moving.value / rest == pytest.approx(math.sqrt(1 - beta * beta), rel=1e-5)


# --------------------------------------------------------------------------
# bilinearity


def test_two_shell_cross_term():
    parts = [(ParticleModel(1.0, 0.5), state((0, 0, 0))), (ParticleModel(1.0, 0.5), state((4, 0, 0)))]
    rep = bilinearity_check(parts, QuadratureConfig(rel_tol=1e-6))
    assert rep.cross_oracle == pytest.approx(-1.0 / (16 * math.pi))
    assert rep.cross_sum.value == pytest.approx(rep.cross_oracle, rel=1e-4)
    assert rep.cross_per_particle_sum == pytest.approx(2 * rep.cross_sum.value)
    assert rep.holds


def test_single_particle_total_is_self_term():
    rep = bilinearity_check([(ParticleModel(1.0, 1.0), state((0, 0, 0)))], QuadratureConfig(rel_tol=1e-7))
    assert rep.cross_terms == {}
    assert rep.holds
    assert rep.total.value == pytest.approx(-1.0 / (8 * math.pi), rel=1e-6)


def test_moving_pair_has_no_static_oracle():
    parts = [(ParticleModel(1.0, 0.5), state((0, 0, 0), (0.3, 0, 0))),
             (ParticleModel(-1.0, 0.5), state((0, 3, 0)))]
    rep = bilinearity_check(parts, QuadratureConfig(rel_tol=1e-5))
    assert rep.cross_oracle is None
    assert rep.holds


def test_overlapping_shells_rejected():
    parts = [(ParticleModel(1.0, 0.5), state((0, 0, 0))), (ParticleModel(1.0, 0.6), state((1, 0, 0)))]
    with pytest.raises(ConfigurationError, match="overlap"):
        bilinearity_check(parts)
    with pytest.raises(ConfigurationError):
        bilinearity_check([(ParticleModel(1.0, 0.0), state((0, 0, 0)))])
