import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enskog.errors import DegenerateAxis, DomainError
from enskog.quadrature import (
    Cube, Hemisphere, Interval, MeanAccumulator, Product, QuadratureScheme, composite_gauss, cube_rule,
    gauss_legendre, hemisphere_nodes, hemisphere_rule, integrate_hemisphere, integrate_time, integrate_velocity,
    mc_integrate, orthonormal_frames, rng_stream, sphere_rule, sum_in_order, uniform_hemisphere,
)

unit = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda t: np.linalg.norm(t) > 1e-3).map(
    lambda t: np.array(t) / np.linalg.norm(t))


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(5, 0.0, 2.0)
    assert w.sum() == pytest.approx(2.0)
    assert (w @ x**9) == pytest.approx(2.0**10 / 10, rel=1e-13)


def test_cube_rule_gaussian_moment():
    pts, w = cube_rule(48, 6.0)
    val = w @ np.exp(-np.sum(pts**2, axis=1))
    assert val == pytest.approx(np.pi**1.5, rel=1e-12)


def test_hemisphere_rule_area_and_cosine_moment():
    n, w = hemisphere_rule(8, 16)
    assert w.sum() == pytest.approx(2 * np.pi)
    assert w @ n[:, 2] == pytest.approx(np.pi, rel=1e-13)
    assert np.all(n[:, 2] > 0)


def test_sphere_rule_is_symmetric_under_reflection():
    n, w = sphere_rule(6, 12)
    assert w.sum() == pytest.approx(4 * np.pi)
    np.testing.assert_allclose(w @ n, 0.0, atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(unit)
def test_frames_are_rotations_with_pole_on_axis(axis):
    R = orthonormal_frames(axis)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-13)
    assert np.linalg.det(R) == pytest.approx(1.0)
    np.testing.assert_allclose(R[:, 2], axis, atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(unit)
def test_hemisphere_nodes_lie_on_the_axis_side(axis):
    nodes, w = hemisphere_nodes(axis, 4, 8)
    assert np.all(nodes @ axis > 0)
    assert w @ (nodes @ axis) == pytest.approx(np.pi, rel=1e-12)


def test_degenerate_axis_raises():
    with pytest.raises(DegenerateAxis):
        orthonormal_frames(np.zeros(3))
    with pytest.raises(DegenerateAxis):
        uniform_hemisphere(rng_stream(0), np.zeros(3), 4)


def test_uniform_hemisphere_side_and_mean():
    axis = np.array([0.0, 1.0, 1.0]) / np.sqrt(2)
    w = uniform_hemisphere(rng_stream(3), axis, 100_000)
    assert np.all(w @ axis >= 0)
    assert np.mean(w @ axis) == pytest.approx(0.5, abs=5e-3)


def test_streams_are_reproducible_and_distinct():
    a = rng_stream(7, 2).random(4)
    assert np.array_equal(a, rng_stream(7, 2).random(4))
    assert not np.array_equal(a, rng_stream(7, 3).random(4))


def test_mc_integrate_independent_of_block_size_and_accurate():
    g = lambda v: np.exp(-np.sum(v * v, axis=1))
    a = mc_integrate(g, Cube(4.0), 200_000, seed=5)
    assert abs(a.value - np.pi**1.5) < 4 * a.stderr
    assert a.samples_used == 200_000
    assert mc_integrate(g, Cube(4.0), 200_000, seed=5).value == a.value


def test_mc_on_product_domain():
    est = mc_integrate(lambda s, w: s * w[:, 2], Product((Interval(0, 2), Hemisphere())), 100_000, seed=1)
    # integral of s over [0,2] times integral of cos over the hemisphere
    assert abs(est.value - 2 * np.pi) < 4 * est.stderr


def test_mean_accumulator_constant_data_has_zero_error():
    acc = MeanAccumulator()
    acc.add(np.full(10, 1e8 + 0.1))
    acc.add(np.full(5, 1e8 + 0.1))
    est = acc.estimate(2.0)
    assert est.value == pytest.approx(2 * (1e8 + 0.1))
    assert est.stderr == 0.0


def test_mc_needs_two_samples():
    with pytest.raises(DomainError):
        mc_integrate(lambda v: v[:, 0], Cube(1.0), 1)


def test_scheme_driven_integrators():
    s = QuadratureScheme(velocity_nodes=32, velocity_radius=5.0)
    gauss = integrate_velocity(lambda v: np.exp(-np.sum(v * v, axis=1)), s).value
    assert gauss == pytest.approx(np.pi**1.5, rel=1e-10)
    u = np.array([1.0, 2.0, 0.5])
    val = integrate_hemisphere(lambda w: w @ u, u, s).value
    assert val == pytest.approx(np.pi * np.linalg.norm(u), rel=1e-12)
    assert integrate_time(np.cos, 0.0, 1.0, s).value == pytest.approx(np.sin(1.0), rel=1e-14)
    assert integrate_time(np.cos, 1.0, 1.0, s).value == 0.0


def test_mc_schemes_agree_with_gauss():
    s = QuadratureScheme(velocity_rule="mc", velocity_radius=5.0, velocity_samples=200_000,
                         hemisphere_rule="mc", hemisphere_samples=100_000)
    est = integrate_velocity(lambda v: np.exp(-np.sum(v * v, axis=1)), s)
    assert abs(est.value - np.pi**1.5) < 4 * est.stderr
    u = np.array([0.0, 0.0, 2.0])
    est = integrate_hemisphere(lambda w: w @ u, u, s)
    assert abs(est.value - 2 * np.pi) < 4 * est.stderr


def test_composite_gauss_panels():
    x, w = composite_gauss(0.0, 3.0, 3, 4)
    assert x.shape == (12,)
    assert w @ np.exp(x) == pytest.approx(np.expm1(3.0), rel=1e-8)


def test_sum_in_order_is_left_to_right():
    assert sum_in_order([1e16, 1.0, -1e16]) == 0.0


@pytest.mark.parametrize("kwargs", [dict(velocity_rule="x"), dict(velocity_radius=0.0), dict(polar_nodes=0)])
def test_invalid_scheme(kwargs):
    with pytest.raises(DomainError):
        QuadratureScheme(**kwargs)
