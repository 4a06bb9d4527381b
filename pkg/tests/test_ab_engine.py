import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overlap_action import suite
from overlap_action.ab_engine import (
    Path,
    Route,
    Scenario,
    accumulate_action,
    electric_ab_phase,
    electric_phase_oracle,
    enclosed_flux,
    magnetic_ab_phase,
    magnetic_phase_oracle,
    shielded_toroid_phase,
    winding_number,
)
from overlap_action.emcore import DomainError
from overlap_action.quad3d import ConfigurationError, QuadratureConfig
from overlap_action.sources import (
    ChargedShell,
    IdealSolenoid,
    ParticleModel,
    PiecewiseLinear,
    ShieldedToroid,
    Toroid,
)

P = ParticleModel(1.0, 0.1)
AXIS = np.array([0, 0, 1.0])


def polyline(points, speed, t0=0.0, t_end=None):
    rows, t = [(t0, np.array(points[0], dtype=float))], t0
    for a, b in zip(points, points[1:]):
        t += float(np.linalg.norm(np.subtract(b, a))) / speed
        rows.append((t, np.array(b, dtype=float)))
    if t_end is not None:
        rows[-1] = (t_end, rows[-1][1])
    return Path(tuple(rows))


def rectangle_arms(L, h_a, h_b, speed):
    """Two arms from (-L,0,0) to (L,0,0) via y = h_a and y = -h_b, timed to
    arrive together."""
    a = [(-L, 0, 0), (-L, h_a, 0), (L, h_a, 0), (L, 0, 0)]
    b = [(-L, 0, 0), (-L, -h_b, 0), (L, -h_b, 0), (L, 0, 0)]
    len_a, len_b = 2 * L + 2 * h_a, 2 * L + 2 * h_b
    t_end = max(len_a, len_b) / speed
    return polyline(a, len_a / t_end, t_end=t_end), polyline(b, len_b / t_end, t_end=t_end)


def solenoid_scenario(phi0=2 * math.pi, h_a=5.0, h_b=5.0, route=Route.STANDARD, speed=1e-3, **kw):
    pa, pb = rectangle_arms(10.0, h_a, h_b, speed)
    sol = IdealSolenoid(np.zeros(3), AXIS, 1.0, phi0)
    return Scenario(P, pa, pb, (sol,), route, time_step=1.0 / speed, **kw)


# --------------------------------------------------------------------------
# time integration


def test_constant_lagrangian_gives_value_times_duration():
    path = polyline([(0, 0, 0), (1, 0, 0), (1, 2, 0)], 0.5)
    val, err = accumulate_action(path, lambda t, s, piece: (3.0, 0.0), 0.7)
    assert val == pytest.approx(3.0 * path.duration, rel=1e-14)
    assert err < 1e-12
    assert accumulate_action(path, lambda t, s, piece: (0.0, 0.0), 0.7) == (0.0, 0.0)


def test_cubic_in_time_is_exact():
    path = polyline([(0, 0, 0), (3, 0, 0)], 1.0)
    val, _ = accumulate_action(path, lambda t, s, piece: (t**3 - 2 * t, 0.0), 0.5)
    assert val == pytest.approx(81 / 4 - 9, rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.5, 4.0))
def test_step_halving_stays_within_reported_error(dt, omega):
    path = polyline([(0, 0, 0), (5, 0, 0)], 1.0)

    def lag(t, s, piece):
        return math.sin(omega * t) + s.r0[0] ** 2, 0.0

    coarse = accumulate_action(path, lag, dt)
    fine = accumulate_action(path, lag, dt / 2)
    exact = (1 - math.cos(5 * omega)) / omega + 125 / 3
    assert abs(coarse[0] - exact) <= coarse[1] + 1e-12
    assert abs(coarse[0] - fine[0]) <= coarse[1] + 1e-12


def test_quadrature_error_is_propagated():
    path = polyline([(0, 0, 0), (1, 0, 0)], 1.0)
    _, err = accumulate_action(path, lambda t, s, piece: (1.0, 1e-3), 0.1)
    assert err == pytest.approx(1e-3, rel=1e-12)


def test_breakpoints_capture_jumps():
    path = polyline([(0, 0, 0), (10, 0, 0)], 1.0)
    step = PiecewiseLinear.square(2.5, 7.25, 1.0)

    def lag(t, s, piece):
        lo, hi = piece
        return step(0.5 * (lo + hi)) if lo <= t <= hi else math.nan, 0.0

    val, _ = accumulate_action(path, lag, 3.0, breakpoints=step.breakpoints)
    assert val == pytest.approx(4.75, rel=1e-14)


def test_evaluator_errors_name_the_time():
    path = polyline([(0, 0, 0), (1, 0, 0)], 1.0)

    def lag(t, s, piece):
        raise ValueError("boom")

    with pytest.raises(ValueError, match="at t="):
        accumulate_action(path, lag, 0.5)


def test_bad_time_step_rejected():
    with pytest.raises(ConfigurationError):
        accumulate_action(polyline([(0, 0, 0), (1, 0, 0)], 1.0), lambda t, s, p: (0.0, 0.0), 0.0)


# --------------------------------------------------------------------------
# path and scenario validation


def test_superluminal_segment_rejected():
    fast = Path(((0.0, np.zeros(3)), (1.0, np.array([2.0, 0, 0]))))
    with pytest.raises(DomainError, match="superluminal segment 0"):
        Scenario(P, fast, fast, ())


def test_paths_must_share_events():
    a = polyline([(0, 0, 0), (1, 0, 0)], 0.5)
    b = polyline([(0, 0, 0), (1, 1, 0)], 0.5)
    with pytest.raises(ConfigurationError, match="start and end"):
        Scenario(P, a, b, ())


def test_waypoint_times_must_increase():
    with pytest.raises(ConfigurationError):
        Path(((0.0, np.zeros(3)), (0.0, np.ones(3))))


def test_winding_number_signs():
    pa, pb = rectangle_arms(10.0, 5.0, 5.0, 1e-3)
    assert winding_number(pa, pb, np.zeros(3), AXIS) == -1
    assert winding_number(pb, pa, np.zeros(3), AXIS) == 1
    assert winding_number(pa, pb, np.array([0, 20.0, 0]), AXIS) == 0


# --------------------------------------------------------------------------
# magnetic scheme


def test_flux_quantum_standard_route_exact():
    sc = solenoid_scenario()
    res = magnetic_ab_phase(sc)
    assert magnetic_phase_oracle(sc) == pytest.approx(2 * math.pi, rel=1e-15)
    assert abs(res.phase_difference - 2 * math.pi) <= 1e-10


@settings(max_examples=10, deadline=None)
@given(st.floats(-3.0, 3.0))
def test_phase_is_linear_in_flux(scale):
    sc = solenoid_scenario(phi0=2 * math.pi * scale)
    res = magnetic_ab_phase(sc)
    assert abs(res.phase_difference - 2 * math.pi * scale) <= 1e-10 * max(1.0, abs(scale))


def test_zero_flux_gives_zero_phase():
    assert abs(magnetic_ab_phase(solenoid_scenario(phi0=0.0)).phase_difference) <= 1e-15


def test_swapping_arms_reverses_phase():
    sc = solenoid_scenario()
    fwd, back = magnetic_ab_phase(sc), magnetic_ab_phase(sc.swapped())
    assert back.phase_difference == pytest.approx(-fwd.phase_difference, rel=1e-14)
    assert enclosed_flux(sc.swapped()) == -enclosed_flux(sc)


@settings(max_examples=5, deadline=None)
@given(st.floats(3.0, 9.0), st.floats(3.0, 9.0))
def test_phase_independent_of_path_shape(h_a, h_b):
    res = magnetic_ab_phase(solenoid_scenario(h_a=h_a, h_b=h_b))
    assert abs(res.phase_difference - 2 * math.pi) <= 1e-10


def test_path_entering_solenoid_rejected():
    with pytest.raises(ConfigurationError, match="enters the solenoid"):
        magnetic_ab_phase(solenoid_scenario(h_a=1.05))


def test_paths_not_enclosing_rejected():
    sc = solenoid_scenario()
    moved = IdealSolenoid(np.array([0, 30.0, 0]), AXIS, 1.0, 2 * math.pi)
    with pytest.raises(ConfigurationError, match="exactly once"):
        magnetic_ab_phase(Scenario(P, sc.path_a, sc.path_b, (moved,), time_step=sc.time_step))


def test_overlap_route_reaches_flux_quantum():
    sc = solenoid_scenario(route=Route.OVERLAP, quad_cfg=QuadratureConfig(rel_tol=1e-3))
    res = magnetic_ab_phase(sc)
    assert abs(res.phase_difference - 2 * math.pi) <= 2 * res.phase_error
    assert res.phase_error < 1e-3 * 2 * math.pi


# --------------------------------------------------------------------------
# electric scheme


def electric_scenario(va, vb, h=5.0, T=4.0, route=Route.STANDARD, speed=0.1):
    L = 10.0
    t1 = math.hypot(L, h) / speed

    def arm(y):
        return Path(((0.0, np.array([-L, 0, 0.0])), (t1, np.array([0, y, 0.0])),
                     (t1 + T + 2, np.array([0, y, 0.0])), (2 * t1 + T + 2, np.array([L, 0, 0.0]))))

    shells = tuple(ChargedShell(np.array([0, y, 0.0]), 1.0, PiecewiseLinear.square(t1 + 1, t1 + 1 + T, v))
                   for y, v in ((h, va), (-h, vb)))
    return Scenario(P, arm(h), arm(-h), shells, route, time_step=10.0)


def test_equal_pulses_give_no_phase():
    sc = electric_scenario(0.5, 0.5)
    assert abs(electric_ab_phase(sc).phase_difference) <= 1e-12
    assert electric_phase_oracle(sc) == 0.0


@pytest.mark.parametrize("V,T", [(0.5, 4.0), (-1.2, 2.5)])
def test_single_pulse_includes_cross_talk(V, T):
    sc = electric_scenario(V, 0.0, T=T)
    expected = V * T * (1 - 1.0 / 10.0)
    assert electric_phase_oracle(sc) == pytest.approx(expected, rel=1e-14)
    assert electric_ab_phase(sc).phase_difference == pytest.approx(expected, rel=1e-12)


def test_compensated_pulses_give_qVT():
    x = 0.1
    sc = electric_scenario(0.5 / (1 - x * x), -x * 0.5 / (1 - x * x))
    assert electric_ab_phase(sc).phase_difference == pytest.approx(0.5 * 4.0, rel=1e-12)


def test_pulse_while_crossing_rejected():
    sc = electric_scenario(0.5, 0.0)
    early = ChargedShell(sc.sources[0].center, 1.0, PiecewiseLinear.square(1.0, 200.0, 0.5))
    with pytest.raises(ConfigurationError, match="crosses the shell"):
        electric_ab_phase(Scenario(P, sc.path_a, sc.path_b, (early,), time_step=10.0))


def test_electric_overlap_route_matches():
    sc = electric_scenario(0.5, 0.0, route=Route.OVERLAP)
    sc = Scenario(sc.particle, sc.path_a, sc.path_b, sc.sources, Route.OVERLAP, 10.0, QuadratureConfig(rel_tol=1e-4))
    res = electric_ab_phase(sc)
    assert abs(res.phase_difference - electric_phase_oracle(sc)) <= 2 * res.phase_error


# --------------------------------------------------------------------------
# shielded toroid


def test_shield_term_lowers_each_action_and_cancels_for_mirror_arms():
    sc = suite.shielded_toroid().build_scenario("overlap", 1e-2)
    sc = Scenario(sc.particle, sc.path_a, sc.path_b, sc.sources, Route.OVERLAP, 2000.0, sc.quad_cfg)
    res = shielded_toroid_phase(sc)
    assert res.shield_a[0] < 0 and res.shield_b[0] < 0
    assert abs(res.shield_phase_contribution) <= res.shield_phase_error
    assert magnetic_phase_oracle(sc) == pytest.approx(-2 * math.pi)


def test_path_through_toroid_body_rejected():
    tor = ShieldedToroid(Toroid(np.zeros(3), AXIS, 3.0, 1.0, 2 * math.pi))
    a = polyline([(1, 0, 0), (1, 0, 0.5), (5, 0, 0.5), (5, 0, 0)], 1e-3)
    b = polyline([(1, 0, 0), (1, 0, -0.5), (5, 0, -0.5), (5, 0, 0)], 1e-3)
    with pytest.raises(ConfigurationError, match="toroid body"):
        shielded_toroid_phase(Scenario(P, a, b, (tor,), Route.OVERLAP, 1000.0))
