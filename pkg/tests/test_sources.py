import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from overlap_action.emcore import SCALED_CONSTANTS as K
from overlap_action.emcore import DomainError
from overlap_action.sources import (
    ChargedShell,
    IdealSolenoid,
    ParticleModel,
    ParticleState,
    PiecewiseLinear,
    ShieldedToroid,
    Toroid,
    contraction_shape,
    particle_fields,
    particle_fields_static,
    shell_fields,
    shell_potential,
    shield_response,
    solenoid_fields,
    solenoid_potential,
    source_fields,
    toroid_fields,
    toroid_potential,
    toroid_potential_checked,
)


def sphere_grid(n_theta=48, n_phi=96):
    """Gauss-Legendre in cos(theta) times trapezoid in phi: unit normals and weights."""
    mu, wmu = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    m, p = np.meshgrid(mu, phi, indexing="ij")
    s = np.sqrt(1 - m * m)
    normals = np.stack([s * np.cos(p), s * np.sin(p), m], axis=-1).reshape(-1, 3)
    weights = np.outer(wmu, np.full(n_phi, 2 * math.pi / n_phi)).reshape(-1)
    return normals, weights


def loop_integral(a_field, center, radius, axis, n=400):
    """Line integral of A around a circle (trapezoid, spectrally accurate)."""
    axis = np.asarray(axis, float) / np.linalg.norm(axis)
    u = np.cross(axis, [1.0, 0, 0] if abs(axis[0]) < 0.9 else [0, 1.0, 0])
    u /= np.linalg.norm(u)
    w = np.cross(axis, u)
    t = 2 * math.pi * np.arange(n) / n
    pts = center + radius * (np.outer(np.cos(t), u) + np.outer(np.sin(t), w))
    tang = radius * (-np.outer(np.sin(t), u) + np.outer(np.cos(t), w))
    return float(np.sum(np.sum(a_field(pts) * tang, axis=-1)) * 2 * math.pi / n)


def curl(a_field, x, h=1e-4):
    j = np.zeros((3, 3))
    for k in range(3):
        dx = np.zeros(3)
        dx[k] = h
        j[:, k] = (a_field(x + dx) - a_field(x - dx)) / (2 * h)
    return np.array([j[2, 1] - j[1, 2], j[0, 2] - j[2, 0], j[1, 0] - j[0, 1]])


def div(a_field, x, h=1e-4):
    total = 0.0
    for k in range(3):
        dx = np.zeros(3)
        dx[k] = h
        total += (a_field(x + dx)[k] - a_field(x - dx)[k]) / (2 * h)
    return total


# --------------------------------------------------------------------------
# particle


@pytest.mark.parametrize("beta", [0.0, 0.3, 0.6, 0.9])
def test_gauss_law_for_moving_charge(beta):
    p = ParticleModel(1.7, 0.1)
    state = ParticleState(np.array([0.2, -0.1, 0.3]), np.array([0.0, beta, 0.0]))
    normals, w = sphere_grid(96, 96)
    r = 2.0
    e = particle_fields(p, state, state.r0 + r * normals).e
    flux = float(np.sum(np.sum(e * normals, axis=-1) * w)) * r * r
    assert flux == pytest.approx(p.q / K.eps0, rel=1e-6)


def test_static_field_is_coulomb():
    p = ParticleModel(2.0, 0.0)
    e = particle_fields_static(p, ParticleState(np.zeros(3)), np.array([[0.0, 0.0, 2.0]])).e
    assert e[0] == pytest.approx([0.0, 0.0, 2.0 / (4 * math.pi * 4.0)])


def test_field_vanishes_inside_contracted_shell():
    p = ParticleModel(1.0, 1.0)
    state = ParticleState(np.zeros(3), np.array([0.8, 0.0, 0.0]))
    # gamma = 5/3, contracted half-length along x is 0.6
    inside = np.array([[0.55, 0.0, 0.0], [0.0, 0.95, 0.0]])
    outside = np.array([[0.65, 0.0, 0.0], [0.0, 1.05, 0.0]])
    assert np.all(particle_fields(p, state, inside).e == 0)
    assert np.all(np.linalg.norm(particle_fields(p, state, outside).e, axis=-1) > 0)
    shape = contraction_shape(state, K)
    assert shape @ np.array([1.0, 0, 0]) == pytest.approx([0.6, 0, 0])


def test_point_charge_at_its_own_position_raises():
    with pytest.raises(DomainError):
        particle_fields(ParticleModel(1.0), ParticleState(np.zeros(3)), np.zeros((1, 3)))


def test_superluminal_state_rejected():
    with pytest.raises(DomainError):
        ParticleState(np.zeros(3), np.array([1.0, 0, 0])).check(K)


@given(st.floats(-3, 3), st.one_of(st.just(0.0), st.floats(1e-6, 0.9)), st.integers(0, 50))
def test_moving_field_relations(q, beta, seed):
    rng = np.random.default_rng(seed)
    p = ParticleModel(q, 0.0)
    v = beta * np.array([0.6, 0.0, 0.8])
    state = ParticleState(rng.normal(size=3), v)
    x = state.r0 + rng.normal(size=(8, 3)) * 2 + 0.1
    s = particle_fields(p, state, x)
    assert np.allclose(s.b, np.cross(v, s.e) / K.c**2, rtol=1e-12, atol=1e-300)
    # E is radial from the present position
    d = x - state.r0
    assert np.allclose(np.cross(d, s.e), 0.0, atol=1e-12 * (np.abs(s.e).max() + 1e-300) * 10)
    # linear in q
    unit = particle_fields(ParticleModel(1.0, 0.0), state, x)
    assert np.allclose(s.e, q * unit.e, rtol=1e-12, atol=1e-300)


def test_em_mass_closed_form():
    assert ParticleModel(1.0, 1.0).em_mass_closed_form == pytest.approx(1 / (8 * math.pi))
    assert ParticleModel(1.0, 0.0).em_mass_closed_form == math.inf
    assert ParticleModel(1.0, 1.0, m=0.5).binding_mass == pytest.approx(0.5 - 1 / (8 * math.pi))


# --------------------------------------------------------------------------
# solenoid


SOL = IdealSolenoid(np.array([0.5, -0.2, 0.0]), np.array([0.0, 0.6, 0.8]), 1.2, 3.0)


def sol_a(x):
    return solenoid_potential(SOL, x).a


@pytest.mark.parametrize("radius", [1.5, 4.0, 30.0])
def test_solenoid_circulation_is_flux(radius):
    assert loop_integral(sol_a, SOL.axis_point + 2.0 * SOL.axis_dir, radius, SOL.axis_dir) == pytest.approx(
        SOL.phi0, rel=1e-12)


def test_solenoid_loop_not_enclosing_axis_has_zero_circulation():
    center = SOL.axis_point + np.cross(SOL.axis_dir, [1.0, 0, 0]) * 5
    assert abs(loop_integral(sol_a, center, 1.0, SOL.axis_dir)) < 1e-12


@pytest.mark.parametrize("point", [[3.0, 1.0, -2.0], [0.9, 0.1, 0.3], [-4.0, 2.0, 7.0]])
def test_solenoid_potential_curl_and_divergence(point):
    x = np.array(point, dtype=float)
    b = solenoid_fields(SOL, x).b
    assert curl(sol_a, x) == pytest.approx(b, abs=1e-6)
    assert abs(div(sol_a, x)) < 1e-7


def test_solenoid_field_inside_outside():
    inside = SOL.axis_point + 0.5 * np.cross(SOL.axis_dir, [1.0, 0, 0])
    assert solenoid_fields(SOL, inside).b == pytest.approx(SOL.b_inside * SOL.axis_dir)
    assert np.all(solenoid_fields(SOL, inside * 10).b == 0)


# --------------------------------------------------------------------------
# toroid


TOR = Toroid(np.zeros(3), np.array([0.0, 0.0, 1.0]), 3.0, 1.0, 2.5)


def test_toroid_cross_section_flux():
    # field through the half-plane phi = 0 (normal +y) over the disc
    s, ws = np.polynomial.legendre.leggauss(64)
    r = 0.5 * TOR.minor_radius * (s + 1)
    wr = 0.5 * TOR.minor_radius * ws
    psi = 2 * math.pi * np.arange(128) / 128
    rr, pp = np.meshgrid(r, psi, indexing="ij")
    pts = np.stack([TOR.major_radius + rr * np.cos(pp), np.zeros_like(rr), rr * np.sin(pp)], axis=-1)
    b = toroid_fields(TOR, pts.reshape(-1, 3)).b.reshape(pts.shape)
    flux = np.sum(b[..., 1] * rr * np.outer(wr, np.full(128, 2 * math.pi / 128)))
    assert flux == pytest.approx(TOR.phi0, rel=1e-6)


def test_toroid_field_confined():
    for x in ([0.0, 0.0, 0.0], [5.0, 0, 0], [3.0, 0, 1.5], [0, 1.5, 0]):
        assert np.all(toroid_fields(TOR, np.array(x)).b == 0)


def test_toroid_potential_circulation_around_tube():
    def a_field(x):
        return toroid_potential(TOR, x).a

    # loop in the xz-plane around the tube at phi = 0, normal along +y = phi_hat
    c = loop_integral(a_field, np.array([3.0, 0.0, 0.0]), 1.8, [0.0, 1.0, 0.0], n=256)
    assert abs(c) == pytest.approx(TOR.phi0, rel=1e-6)


@pytest.mark.parametrize("point", [[0.5, 0.3, 0.4], [5.0, 0.5, -0.5], [2.0, 2.5, 1.6]])
def test_toroid_potential_coulomb_gauge_and_curl(point):
    x = np.array(point, dtype=float)

    def a_field(y):
        return toroid_potential(TOR, y).a

    scale = np.linalg.norm(a_field(x)) + 1e-12
    assert abs(div(a_field, x, 1e-3)) < 1e-5 * max(scale, 1.0)
    assert np.linalg.norm(curl(a_field, x, 1e-3)) < 1e-5 * max(scale, 1.0)


def test_toroid_potential_error_estimate_is_small_outside():
    pot, err = toroid_potential_checked(TOR, np.array([[0.5, 0.0, 0.5], [6.0, 0.0, 0.0]]))
    assert np.all(err < 1e-8 * np.linalg.norm(pot.a, axis=-1).max())


def test_toroid_rejects_bad_geometry():
    with pytest.raises(ValueError):
        Toroid(np.zeros(3), np.array([0, 0, 1.0]), 1.0, 1.5, 1.0)


# --------------------------------------------------------------------------
# shells and waveforms


def test_shell_potential_inside_and_outside():
    sh = ChargedShell(np.array([1.0, 0, 0]), 2.0, PiecewiseLinear.constant(0.7))
    phi = shell_potential(sh, 0.0, np.array([[1.5, 0.5, 0.0], [5.0, 0, 0], [1.0, 0.0, 6.0]])).phi
    assert phi == pytest.approx([0.7, 0.7 * 2 / 4, 0.7 * 2 / 6])


def test_shell_field_is_minus_gradient():
    sh = ChargedShell(np.zeros(3), 1.0, PiecewiseLinear.constant(1.3))
    x = np.array([1.4, -0.7, 2.0])
    h = 1e-5
    grad = np.array([(shell_potential(sh, 0, x + h * e).phi - shell_potential(sh, 0, x - h * e).phi) / (2 * h)
                     for e in np.eye(3)])
    assert shell_fields(sh, 0.0, x).e == pytest.approx(-grad, rel=1e-7)
    assert np.all(shell_fields(sh, 0.0, np.array([0.2, 0.1, 0.0])).e == 0)


def test_square_pulse():
    w = PiecewiseLinear.square(1.0, 3.0, 2.0)
    assert w(0.5) == 0.0 and w(1.0) == 2.0 and w(2.9) == 2.0 and w(3.0) == 0.0
    assert w.integral(0.0, 10.0) == pytest.approx(4.0)
    assert w.support == (1.0, 3.0)
    assert w.breakpoints == (1.0, 3.0)


@given(st.lists(st.tuples(st.floats(0, 10), st.floats(-5, 5)), min_size=2, max_size=6))
def test_waveform_integral_matches_trapezoid(knots):
    knots = tuple(sorted(knots, key=lambda k: k[0]))
    w = PiecewiseLinear(knots)
    ts = np.linspace(-1, 11, 24001)
    vals = np.array([w(t) for t in ts])
    approx = trapezoid(vals, ts)
    assert w.integral(-1, 11) == pytest.approx(approx, abs=0.01 * (1 + np.abs(vals).max()))


def test_unsorted_knots_rejected():
    with pytest.raises(ValueError):
        PiecewiseLinear(((1.0, 0.0), (0.0, 1.0)))


def test_shield_response_cancels_particle_field_inside_body():
    sh = ShieldedToroid(TOR)
    p = ParticleModel(1.0, 0.1)
    state = ParticleState(np.array([0.0, 0.0, 2.0]), np.array([0.3, 0.0, 0.0]))
    x = np.array([[3.0, 0.0, 0.2], [5.0, 0.0, 0.0]])
    bp = particle_fields(p, state, x)
    resp = shield_response(sh, bp, x)
    assert resp.b[0] == pytest.approx(-bp.b[0])
    assert np.all(resp.b[1] == 0)
    assert np.array_equal(source_fields(sh, 0.0, x).b, toroid_fields(TOR, x).b)
