import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overlap_action.emcore import (
    SCALED,
    SCALED_CONSTANTS,
    SI,
    SI_CONSTANTS,
    DomainError,
    EMFieldSample,
    PhysicalConstants,
    UnitSystem,
    UnitTag,
    fields_to_tensor,
    gamma_factor,
    lorentz_boost_fields,
    tensor_contraction,
    tensor_to_fields,
)

K = SCALED_CONSTANTS
finite = st.floats(-10, 10, allow_nan=False)
vectors = st.tuples(finite, finite, finite).map(np.array)


@st.composite
def velocities(draw, max_beta=0.9):
    d = draw(st.tuples(finite, finite, finite).filter(lambda t: np.linalg.norm(t) > 1e-3))
    beta = draw(st.floats(0.0, max_beta))
    d = np.array(d) / np.linalg.norm(d)
    return beta * d


def contraction(s, k=K):
    f = fields_to_tensor(s, k)
    return float(tensor_contraction(f, f, k))


def scale(s, k=K):
    return float(np.dot(s.e, s.e) / k.c**2 + np.dot(s.b, s.b))


def test_constants_are_consistent():
    for k in (SI_CONSTANTS, SCALED_CONSTANTS):
        assert abs(k.c * math.sqrt(k.mu0 * k.eps0) - 1.0) <= 1e-12


def test_inconsistent_constants_rejected():
    with pytest.raises(ValueError):
        PhysicalConstants(eps0=1.0, mu0=1.0, c=2.0, hbar=1.0)


def test_unit_tags():
    assert UnitSystem.from_tag("si") == SI
    assert UnitSystem.from_tag("Scaled") == SCALED
    assert SCALED.tag is UnitTag.SCALED
    with pytest.raises(ValueError):
        UnitSystem.from_tag("cgs")


def test_contraction_of_pure_fields():
    # 2 (B^2 - E^2/c^2)
    assert contraction(EMFieldSample(np.array([1.0, 0, 0]), np.zeros(3))) == pytest.approx(-2.0)
    assert contraction(EMFieldSample(np.zeros(3), np.array([0, 0, 1.0]))) == pytest.approx(2.0)


def test_mixed_contraction_is_overlap_density():
    a = EMFieldSample(np.array([1.0, 2, 3]), np.array([0.5, -1, 2]))
    b = EMFieldSample(np.array([-2.0, 1, 0.5]), np.array([1.0, 1, -1]))
    mixed = tensor_contraction(fields_to_tensor(a, K), fields_to_tensor(b, K), K) / (2 * K.mu0)
    expected = -K.eps0 * np.dot(a.e, b.e) + np.dot(a.b, b.b) / K.mu0
    assert mixed == pytest.approx(expected, rel=1e-14)


def test_boost_example_parallel_components_unchanged():
    s = EMFieldSample(np.array([0.0, 1.0, 0.0]), np.zeros(3))
    v = np.array([0.6, 0.0, 0.0])
    out = lorentz_boost_fields(s, v, K)
    assert out.e == pytest.approx([0.0, 1.25, 0.0])
    # B' = -g v x E / c^2 = -1.25 * 0.6 z
    assert out.b == pytest.approx([0.0, 0.0, -0.75])


def test_superluminal_boost_rejected():
    with pytest.raises(DomainError):
        lorentz_boost_fields(EMFieldSample.zeros(), np.array([1.0, 0, 0]), K)
    with pytest.raises(DomainError):
        gamma_factor(np.array([0.0, 1.2, 0.0]), K)


@given(vectors, vectors)
def test_tensor_round_trip(e, b):
    s = tensor_to_fields(fields_to_tensor(EMFieldSample(e, b), K), K)
    assert np.allclose(s.e, e, atol=1e-12) and np.allclose(s.b, b, atol=1e-12)


@given(vectors, vectors)
def test_tensor_is_antisymmetric(e, b):
    f = fields_to_tensor(EMFieldSample(e, b), K)
    assert np.array_equal(f, -np.swapaxes(f, -1, -2))


@given(vectors, vectors, velocities())
def test_contraction_invariant_under_boost(e, b, v):
    s = EMFieldSample(e, b)
    out = lorentz_boost_fields(s, v, K)
    assert abs(contraction(out) - contraction(s)) <= 1e-10 * max(scale(s), 1e-300) * gamma_factor(v, K) ** 2


@given(vectors, vectors, velocities())
def test_dual_invariant_under_boost(e, b, v):
    s = EMFieldSample(e, b)
    out = lorentz_boost_fields(s, v, K)
    assert abs(np.dot(out.e, out.b) - np.dot(e, b)) <= 1e-10 * max(scale(s), 1e-300) * gamma_factor(v, K) ** 2


@given(vectors, vectors, velocities())
def test_boost_back_is_identity(e, b, v):
    s = EMFieldSample(e, b)
    back = lorentz_boost_fields(lorentz_boost_fields(s, v, K), -v, K)
    tol = 1e-10 * (np.linalg.norm(e) + np.linalg.norm(b) + 1e-300) * gamma_factor(v, K) ** 2
    assert np.allclose(back.e, e, atol=tol) and np.allclose(back.b, b, atol=tol)


@settings(max_examples=50)
@given(vectors, vectors, st.floats(0.0, 0.8), st.floats(0.0, 0.8))
def test_collinear_boosts_compose_by_velocity_addition(e, b, b1, b2):
    n = np.array([0.0, 0.0, 1.0])
    s = EMFieldSample(e, b)
    twice = lorentz_boost_fields(lorentz_boost_fields(s, b1 * n, K), b2 * n, K)
    once = lorentz_boost_fields(s, (b1 + b2) / (1 + b1 * b2) * n, K)
    tol = 1e-9 * (np.linalg.norm(e) + np.linalg.norm(b) + 1e-300) * 20
    assert np.allclose(twice.e, once.e, atol=tol) and np.allclose(twice.b, once.b, atol=tol)


def test_si_boost_keeps_invariant():
    s = EMFieldSample(np.array([3e5, -1e4, 2e3]), np.array([1e-3, 2e-3, -5e-4]))
    v = np.array([0.0, 0.5, 0.5]) * SI_CONSTANTS.c
    out = lorentz_boost_fields(s, v, SI_CONSTANTS)
    assert contraction(out, SI_CONSTANTS) == pytest.approx(contraction(s, SI_CONSTANTS), rel=1e-10)
