import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enskog.errors import DomainError
from enskog.forces import LinearPlusTimeField, ZeroField
from enskog.weighted import (
    DistributionField, GridSpec, NormSampling, WeightParams, comparison_initial_norm, export_csv_slice, in_MR,
    log_inverse_weight, multilinear, node_log_weights, read_field, shift_positions, shift_positions_geometric,
    weight_h, weight_m, weighted_abs, weighted_norm, write_field,
)

W = WeightParams()
SMALL = GridSpec((0.0, 0.5, 1.0), 3.0, 5, 2.0, 5)


def gaussian(t, x, v):
    return 0.01 * np.exp(-np.sum(np.asarray(x) ** 2, axis=-1) - np.sum(np.asarray(v) ** 2, axis=-1))


def test_weights_and_log_inverse():
    x, v = np.array([1.0, 0.0, 1.0]), np.array([0.5, 0.5, 0.0])
    p = WeightParams(0.5, 2.0)
    assert weight_h(x, 0.5) == pytest.approx(np.exp(-1.0))
    assert weight_m(v, 2.0) == pytest.approx(np.exp(-1.0))
    assert log_inverse_weight(x, v, p) == pytest.approx(2.0)


def test_weighted_abs_beyond_exp_range():
    out = weighted_abs(np.array([1e-300, 0.0, -2.0]), np.array([750.0, 800.0, 1.0]))
    assert out[0] == pytest.approx(np.exp(750.0 - 300 * np.log(10)), rel=1e-12)
    assert out[1] == 0.0
    assert out[2] == pytest.approx(2 * np.e)


def test_invalid_weights_and_grids():
    with pytest.raises(DomainError):
        WeightParams(0.0, 1.0)
    with pytest.raises(DomainError):
        GridSpec((0.0, 0.0), 1.0, 3, 1.0, 3)
    with pytest.raises(DomainError):
        GridSpec((0.0,), 1.0, 1, 1.0, 3)


def test_desk_grid_box():
    g = GridSpec.desk(W, T=1.0, K=4)
    assert g.v_max == 4.0 and g.x_max == 8.0
    assert g.shape == (4, 9, 9, 9, 9, 9, 9)


# interpolation

@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 4.0), min_size=3, max_size=3))
def test_multilinear_reproduces_affine_functions(c):
    a = np.arange(5.0)
    vals = 1.0 + 2 * a[:, None, None] - a[None, :, None] + 0.5 * a[None, None, :]
    got = multilinear(vals, [np.array(ci) for ci in c])
    assert got == pytest.approx(1 + 2 * c[0] - c[1] + 0.5 * c[2], abs=1e-11)   # nodes snap within 1e-12


def test_multilinear_zero_outside():
    vals = np.ones((3, 3))
    assert multilinear(vals, [np.array([-0.5, 1.0]), np.array([1.0, 2.5])]).tolist() == [0.0, 0.0]


def test_shift_positions_linear_and_zero_fill():
    a = np.arange(5.0)[None, :, None, None] * np.ones((1, 5, 2, 2))
    out = shift_positions(a, (0.5, 0.0, 0.0))
    np.testing.assert_allclose(out[0, :4, 0, 0], np.arange(4) + 0.5)
    assert out[0, 4, 0, 0] == pytest.approx(0.5 * 4.0)   # half of the far neighbour is outside


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(0.05, 1.0))
def test_geometric_shift_exact_for_gaussians(d, c):
    x = np.linspace(-4, 4, 9)
    a = np.exp(-c * x**2)[None, :, None, None] * np.ones((1, 9, 1, 1))
    got = shift_positions_geometric(a, (d, 0.0, 0.0))[0, 2:-2, 0, 0]
    np.testing.assert_allclose(got, np.exp(-c * (x[2:-2] + d) ** 2), rtol=1e-12)


def test_geometric_shift_keeps_zeros():
    a = np.zeros((1, 5, 1, 1))
    a[0, 2] = 1.0
    out = shift_positions_geometric(a, (0.3, 0.0, 0.0))
    assert np.all(np.isfinite(out)) and np.all(out >= 0)
    assert out[0, 0, 0, 0] == 0.0


# fields

def test_field_interpolates_nodes_exactly_and_zero_outside():
    f = DistributionField.from_function(SMALL, gaussian)
    x, v = np.array([1.5, 0.0, -1.5]), np.array([1.0, -1.0, 0.0])
    assert f(0.5, x, v) == pytest.approx(gaussian(0.5, x, v), rel=1e-14)
    assert f(0.5, np.array([3.5, 0, 0]), v) == 0.0
    assert f.inside(np.array([[0, 0, 3.0], [0, 0, 3.1]])).tolist() == [True, False]


def test_field_is_read_only_and_validated():
    f = DistributionField.zeros(SMALL)
    with pytest.raises(ValueError):
        f.values[0, 0, 0, 0, 0, 0, 0] = 1.0
    with pytest.raises(DomainError):
        DistributionField(SMALL, np.zeros((2, 2)))
    with pytest.raises(DomainError):
        DistributionField(SMALL, np.full(SMALL.shape, np.nan))


def test_density_exact_for_interpolant():
    g = GridSpec((0.0,), 1.0, 3, 2.0, 5)
    f = DistributionField(g, np.ones(g.shape))
    assert f.density(0.0, np.zeros(3)) == pytest.approx(64.0)


def test_time_coordinate_range():
    with pytest.raises(DomainError):
        SMALL.time_coordinate(1.5)


# norms

def test_weighted_norm_of_weight_is_constant_zero_field():
    g = GridSpec((0.0, 1.0), 3.0, 5, 2.0, 5)
    f = DistributionField.from_function(g, lambda t, x, v: 0.3 * np.exp(
        -np.sum((np.asarray(x) - t * np.asarray(v)) ** 2, -1) - np.sum(np.asarray(v) ** 2, -1)))
    est = weighted_norm(f, ZeroField(), W)
    assert est.value == pytest.approx(0.3, rel=1e-12)
    assert est.sample_count == 2 * 5**6


def test_norm_refinement_only_raises():
    f = DistributionField.from_function(SMALL, gaussian)
    base = weighted_norm(f, LinearPlusTimeField(1.0), W).value
    refined = weighted_norm(f, LinearPlusTimeField(1.0), W, NormSampling(SMALL, 2000, seed=1)).value
    assert refined >= base


def test_node_log_weights_at_t0():
    lw = node_log_weights(SMALL, ZeroField(), W)
    assert lw[0, 2, 2, 2, 2, 2, 2] == 0.0
    assert lw[0, 4, 2, 2, 2, 2, 2] == pytest.approx(9.0)


def test_in_MR_and_initial_norm():
    f0 = lambda x, v: 0.01 * np.exp(-np.sum(x * x, -1) - np.sum(v * v, -1))
    assert comparison_initial_norm(f0, W, SMALL) == pytest.approx(0.01)
    f = DistributionField.from_function(GridSpec((0.0,), 3.0, 5, 2.0, 5), gaussian)
    assert in_MR(f, 0.01, ZeroField(), W)
    assert not in_MR(f, 1e-6, ZeroField(), W)
    with pytest.raises(DomainError):
        in_MR(f, 0.0, ZeroField(), W)


# serialisation

def test_field_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    f = DistributionField(SMALL, rng.random(SMALL.shape))
    write_field(tmp_path / "f.bin", f, WeightParams(0.5, 2.0))
    g, w = read_field(tmp_path / "f.bin")
    assert g.grid == SMALL and w == WeightParams(0.5, 2.0)
    assert np.array_equal(g.values, f.values)
    write_field(tmp_path / "g.bin", g, w)
    assert (tmp_path / "f.bin").read_bytes() == (tmp_path / "g.bin").read_bytes()


def test_read_rejects_foreign_file(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"not a field")
    with pytest.raises(DomainError):
        read_field(tmp_path / "x.bin")


def test_csv_slice(tmp_path):
    f = DistributionField.from_function(SMALL, gaussian)
    export_csv_slice(tmp_path / "s.csv", f)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t,x,v,f"
    assert len(lines) == 1 + 5 * 5
