import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from berislab import qtensor as qt
from berislab.errors import DomainError

# frozen from np.roots on 2c/3 s^2 - b/3 s + a = 0 with (a, b, c) = (-0.2, 1, 1)
S_MINUS = -0.3520797289396148
S_PLUS = 0.8520797289396148
M = 0.28402657631320494

finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)
components = arrays(np.float64, (5,), elements=finite)


def test_stationary_scalars_match_polynomial_roots(params):
    s_minus, s_plus, m = qt.stationary_scalars(params)
    assert s_minus == pytest.approx(S_MINUS, abs=1e-14)
    assert s_plus == pytest.approx(S_PLUS, abs=1e-14)
    assert m == pytest.approx(M, abs=1e-14)
    lo, hi = qt.interval(params)
    assert lo == pytest.approx(-M, abs=1e-15) and hi == pytest.approx(2 * M, abs=1e-15)


def test_stationary_amplitudes_zero_the_bulk_gradient(params):
    s_minus, s_plus, _ = qt.stationary_scalars(params)
    n = np.array([0.3, -0.4, 0.866])
    for s in (s_minus, s_plus, 0.0):
        assert np.abs(qt.bulk_gradient(qt.uniaxial(s, n), params)).max() < 1e-14


def test_negative_discriminant_raises():
    p = qt.Params(a=1.0, b=1.0, c=1.0)
    with pytest.raises(DomainError):
        qt.stationary_scalars(p)
    with pytest.raises(DomainError):
        qt.interval(p)


@pytest.mark.parametrize("field,value", [("b", 0.0), ("c", -1.0), ("eps", 0.0), ("kappa", -1.0)])
def test_validate_names_the_constraint(field, value):
    with pytest.raises(DomainError, match=f"{field} > 0"):
        qt.Params().with_(**{field: value}).validate()


def test_admissible_range():
    assert qt.Params(a=-0.2, b=1, c=1).a_admissible
    assert not qt.Params(a=-0.4, b=1, c=1).a_admissible


def test_scaled_coefficients():
    p = qt.Params().scaled(1e-2)
    assert (p.a, p.b, p.c) == pytest.approx((-0.002, 0.1, 1.0))


def test_eigenvalues_frozen_example():
    q = qt.qtensor(0.1, 0.2, -0.05, 0.3, 0.07)
    # numpy.linalg.eigvalsh of the full matrix
    expected = [-0.41730201, -0.00766883, 0.42497085]
    assert qt.eigenvalues(q) == pytest.approx(expected, abs=1e-8)


def test_eigenvalue_short_circuits():
    assert np.all(qt.eigenvalues(np.zeros(5)) == 0)
    assert np.all(qt.eigenvalues(np.full(5, 1e-16)) == 0)
    ev = qt.eigenvalues(qt.qtensor(0.5, 0, 0, -0.1, 0))
    assert list(ev) == [-0.4, -0.1, 0.5]


def test_uniaxial_eigenvalues(params):
    q = qt.uniaxial(S_PLUS, np.array([1.0, 2.0, 2.0]))
    ev = qt.eigenvalues(q)
    assert ev == pytest.approx([-M, -M, 2 * M], abs=1e-8)


def test_bulk_energy_frozen(params):
    q = qt.qtensor(0.1, 0.2, -0.05, 0.3, 0.07)
    assert qt.bulk_energy(q, params) == pytest.approx(-0.005369240000000004, abs=1e-15)


def test_in_physical_interval(params):
    assert qt.in_physical_interval(qt.uniaxial(S_PLUS, np.array([0, 0, 1.0])), params)
    assert not qt.in_physical_interval(qt.uniaxial(1.1 * S_PLUS, np.array([0, 0, 1.0])), params)


@settings(max_examples=200, deadline=None)
@given(components)
def test_eigenvalues_agree_with_eigvalsh(q):
    expected = np.linalg.eigvalsh(qt.to_matrix(q))
    got = qt.eigenvalues(q)
    scale = max(1.0, float(np.abs(expected).max()))
    assert np.allclose(got, expected, atol=1e-7 * scale)
    assert abs(got.sum()) < 1e-12 * scale


@settings(max_examples=200, deadline=None)
@given(components)
def test_invariant_identities(q):
    mat = qt.to_matrix(q)
    assert qt.trace_sq(q) == pytest.approx(np.trace(mat @ mat), abs=1e-12)
    assert qt.det(q) == pytest.approx(np.linalg.det(mat), abs=1e-11)
    assert qt.trace_cube(q) == pytest.approx(np.trace(mat @ mat @ mat), abs=1e-11)
    sq = mat @ mat - np.trace(mat @ mat) * np.eye(3) / 3
    assert np.allclose(qt.to_matrix(qt.square_traceless(q)), sq, atol=1e-12)
    assert np.allclose(qt.from_matrix(mat), q, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(components, components)
def test_frobenius_inner_matches_matrix_product(q, r):
    expected = np.trace(qt.to_matrix(q) @ qt.to_matrix(r))
    assert qt.frobenius_inner(q, r) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(components, arrays(np.float64, (5,), elements=st.floats(-1, 1)))
def test_bulk_gradient_is_directional_derivative(q, direction):
    p = qt.Params()
    h = 1e-6
    fd = (qt.bulk_energy(q + h * direction, p) - qt.bulk_energy(q - h * direction, p)) / (2 * h)
    exact = qt.frobenius_inner(qt.bulk_gradient(q, p), direction)
    assert fd == pytest.approx(exact, abs=1e-6 * (1 + abs(exact)))


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 0.3), st.floats(0.1, 3), st.floats(0.1, 3))
def test_interval_endpoints_are_a_third_of_s_plus(a, b, c):
    p = qt.Params(a=a, b=b, c=c)
    if p.discriminant < 0:
        return
    _, s_plus, m = qt.stationary_scalars(p)
    lo, hi = qt.interval(p)
    assert lo == pytest.approx(-s_plus / 3) and hi == pytest.approx(2 * s_plus / 3)
    assert m == pytest.approx(s_plus / 3)


def test_broadcasting_over_grid(rng):
    q = rng.standard_normal((5, 4, 6))
    ev = qt.eigenvalues(q)
    assert ev.shape == (3, 4, 6)
    assert math.isclose(float(ev[:, 2, 3].sum()), 0.0, abs_tol=1e-12)


def test_diagonal_and_uniaxial_examples(params):
    ev = qt.eigenvalues(qt.qtensor(-1 / 3, 0, 0, -1 / 3, 0))
    assert list(ev) == pytest.approx([-1 / 3, -1 / 3, 2 / 3], abs=1e-15)
    ev = qt.eigenvalues(qt.uniaxial(S_PLUS, np.array([1.0, 0, 0])))
    assert ev == pytest.approx([-0.284027, -0.284027, 0.568053], abs=1e-6)
    assert ev == pytest.approx(np.linalg.eigvalsh(qt.to_matrix(qt.uniaxial(S_PLUS, np.array([1.0, 0, 0])))), abs=1e-12)


def test_bulk_energy_examples():
    assert qt.bulk_energy(np.zeros(5), qt.Params()) == 0
    q = qt.qtensor(1 / math.sqrt(2), 0, 0, -1 / math.sqrt(2), 0)
    assert qt.bulk_energy(q, qt.Params(a=1, b=0, c=1)) == pytest.approx(0.75, abs=1e-15)


def test_s_plus_state_is_global_minimum(params, rng):
    q_min = qt.uniaxial(S_PLUS, np.array([0, 0, 1.0]))
    f_min = qt.bulk_energy(q_min, params)
    samples = rng.standard_normal((5, 100_000))
    samples *= rng.uniform(0, 2, 100_000) / qt.norm(samples)
    assert np.all(qt.bulk_energy(samples, params) >= f_min - 1e-15)


def test_stationary_scalars_zero_a():
    s_minus, s_plus, m = qt.stationary_scalars(qt.Params(a=0.0, b=1.0, c=1.0))
    assert (s_minus, s_plus, m) == pytest.approx((0.0, 0.5, 1 / 6), abs=1e-15)


def test_interval_membership_examples(params):
    e1 = np.array([1.0, 0, 0])
    assert qt.in_physical_interval(np.zeros(5), params)
    assert qt.in_physical_interval(qt.uniaxial(S_PLUS, e1), params)
    assert not qt.in_physical_interval(qt.uniaxial(1.1 * S_PLUS, e1), params, tol=1e-9)
