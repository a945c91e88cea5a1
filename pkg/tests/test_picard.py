import numpy as np
import pytest

from enskog.collision import CollisionParams, Constant
from enskog.errors import DomainError
from enskog.forces import LinearPlusTimeField, PhaseState, ZeroField
from enskog.picard import (
    IterationReport, MildOperator, SmallnessWarning, SolveConfig, a_priori_bound, apply_J, contraction_summary,
    free_streaming, read_residual_csv, solve, time_nodes, velocity_tilt,
)
from enskog.weighted import DistributionField, GridSpec, WeightParams

W = WeightParams()
GRID = GridSpec((0.0, 0.5, 1.0), 6.0, 7, 4.0, 7)
ONE = Constant(1.0)
FIELDS = {"zero": ZeroField(), "linear": LinearPlusTimeField(1.0)}


def f0(x, v):
    return 0.01 * np.exp(-np.sum(x * x, axis=-1) - np.sum(v * v, axis=-1))


def config(field, **kw):
    return SolveConfig(field, CollisionParams(a=0.1), ONE, ONE, W, f0, GRID, **kw)


@pytest.fixture(scope="module", params=sorted(FIELDS))
def solved(request):
    cfg = config(FIELDS[request.param])
    op = MildOperator(cfg)
    f, report = solve(cfg, operator=op)
    return cfg, op, f, report


# free streaming

@pytest.mark.parametrize("name", sorted(FIELDS))
def test_free_streaming_matches_closed_form(name):
    lift = free_streaming(f0, FIELDS[name], GRID)
    xs, vs = GRID.phase_nodes()
    t = 1.0
    if name == "zero":
        X0, V0 = xs - t * vs, vs
    else:
        X0 = xs * np.cosh(t) - vs * np.sinh(t)
        V0 = vs * np.cosh(t) - xs * np.sinh(t)
    np.testing.assert_allclose(lift.values[-1].reshape(-1), f0(X0, V0), rtol=1e-12, atol=1e-300)


def test_time_nodes_cover_the_knot_intervals():
    s, w = time_nodes(GRID, 2, 2)
    assert s.size == 4 and w.sum() == pytest.approx(1.0)
    assert time_nodes(GRID, 0, 2)[0].size == 0


# solver

def test_converges_monotonically_without_clamps(solved):
    cfg, op, f, report = solved
    assert report.converged
    assert all(b < a for a, b in zip(report.residuals, report.residuals[1:]))
    assert max(report.ratios) < 0.5
    assert report.max_clamp <= 1e-12
    assert np.all(f.values >= 0)


def test_fixed_point_is_unique_under_perturbation(solved):
    cfg, op, f, report = solved
    rng = np.random.default_rng(0)
    bumped = f.with_values(f.values * (1.0 + 0.1 * rng.uniform(-1, 1, f.values.shape)))
    g, rep = solve(cfg, start=bumped, operator=op)
    assert rep.converged
    assert op.distance(f, g) <= 1e-6


def test_first_knot_is_the_initial_datum(solved):
    cfg, op, f, report = solved
    np.testing.assert_array_equal(f.values[0], op.lift.values[0])


def test_apply_J_is_deterministic(solved):
    cfg, op, f, report = solved
    a = apply_J(f, cfg, op).values
    b = apply_J(f, cfg, MildOperator(cfg)).values
    assert a.tobytes() == b.tobytes()


def test_zero_factors_return_free_streaming():
    cfg = SolveConfig(ZeroField(), CollisionParams(a=0.1), Constant(0.0), Constant(0.0), W, f0, GRID)
    f, report = solve(cfg)
    assert report.converged and report.iterations == 1 and report.residuals == [0.0]
    np.testing.assert_array_equal(f.values, free_streaming(f0, ZeroField(), GRID).values)


def test_smallness_warning_when_R_is_small():
    cfg = SolveConfig(ZeroField(), CollisionParams(a=0.1), Constant(0.0), Constant(0.0), W, f0, GRID, R=0.01)
    with pytest.warns(SmallnessWarning):
        _, report = solve(cfg)
    assert report.notes and "R/2" in report.notes[0]


def test_velocity_tilt_selection():
    assert velocity_tilt(config(ZeroField())) == 1.0
    assert velocity_tilt(config(LinearPlusTimeField(1.0))) == 0.0
    assert velocity_tilt(config(LinearPlusTimeField(1.0), tilt=0.5)) == 0.5


@pytest.mark.parametrize("kw", [dict(tol=0.0), dict(max_iter=0), dict(R=-1.0), dict(norm_floor=1.0),
                                dict(tilt=-1.0)])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        config(ZeroField(), **kw)


def test_operator_rejects_foreign_grid(solved):
    cfg, op, f, report = solved
    with pytest.raises(DomainError):
        op(DistributionField.zeros(GridSpec((0.0, 1.0), 6.0, 7, 4.0, 7)))


# reports

def test_report_round_trips(solved, tmp_path):
    cfg, op, f, report = solved
    report.write_json(tmp_path / "r.json")
    again = IterationReport.read_json(tmp_path / "r.json")
    assert again.to_dict() == report.to_dict()
    report.write_csv(tmp_path / "r.csv")
    assert read_residual_csv(tmp_path / "r.csv") == report.residuals
    again.write_json(tmp_path / "s.json")
    assert (tmp_path / "r.json").read_bytes() == (tmp_path / "s.json").read_bytes()


def test_contraction_summary():
    rep = IterationReport(residuals=[1.0, 0.1, 0.02, 0.001])
    assert contraction_summary(rep) == pytest.approx(0.1)
    with pytest.raises(DomainError):
        contraction_summary(IterationReport(residuals=[1.0, 0.1]))


def test_a_priori_bound():
    assert a_priori_bound(0.04, 2.0, ONE, Constant(0.5), 10.0) == pytest.approx(0.02 + 2 * (0.08 + 1.5) * 10 * 0.0016)


def test_lift_is_constant_on_characteristics():
    lift = free_streaming(f0, ZeroField(), GRID)
    x, v = np.array([0.0, 2.0, -2.0]), np.array([0.0, 0.0, 4.0 / 3.0])
    back = ZeroField().flow(0.0, PhaseState(1.0, x, v))
    assert lift(1.0, x, v) == pytest.approx(f0(back.x, back.v), rel=1e-12)
