import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enskog.errors import AffineStructureViolation, DomainError
from enskog.forces import (
    CustomField, LinearPlusTimeField, PhaseState, SampleSpec, TimeOnlyField, ZeroField, affine_time_force,
    alpha_coefficients, check_hypotheses, custom_field_from_expressions, derivative_identity, evaluate_force,
    flow, parse_affine_component,
)

finite = st.floats(-3.0, 3.0, allow_nan=False)
vec = st.tuples(finite, finite, finite).map(np.array)
times = st.floats(0.0, 2.0, allow_nan=False)

E0_linear = affine_time_force(["t", "0", "0"])
ANALYTIC = [ZeroField(), TimeOnlyField(E0_linear), LinearPlusTimeField(1.0), LinearPlusTimeField(0.7, E0_linear)]


# evaluate_force

def test_zero_field_is_zero():
    assert np.array_equal(evaluate_force(ZeroField(), 3.0, np.array([1.0, 2.0, 3.0])), np.zeros(3))


def test_linear_field_identity_coefficient():
    np.testing.assert_allclose(evaluate_force(LinearPlusTimeField(1.0), 0.0, np.array([1.0, 0, 0])), [1, 0, 0])


def test_time_only_direct_evaluation():
    np.testing.assert_allclose(evaluate_force(TimeOnlyField(E0_linear), 2.0, np.zeros(3)), [2, 0, 0])


# flow

def test_free_streaming_backwards():
    out = flow(ZeroField(), 0.0, PhaseState(1.0, [0, 0, 0], [1, 0, 0]))
    np.testing.assert_allclose(out.x, [-1, 0, 0])
    np.testing.assert_allclose(out.v, [1, 0, 0])


@pytest.mark.parametrize("field", ANALYTIC, ids=lambda f: f.kind)
def test_flow_identity_at_own_time(field):
    p = PhaseState(0.7, [0.3, -1.0, 2.0], [1.0, 0.5, -0.2])
    out = flow(field, 0.7, p)
    np.testing.assert_allclose(out.x, p.x, atol=1e-14)
    np.testing.assert_allclose(out.v, p.v, atol=1e-14)


def test_harmonic_repulsion_closed_form():
    out = flow(LinearPlusTimeField(1.0), 1.0, PhaseState(0.0, [1, 0, 0], [0, 0, 0]))
    np.testing.assert_allclose(out.x, [np.cosh(1), 0, 0], rtol=1e-14)
    np.testing.assert_allclose(out.v, [np.sinh(1), 0, 0], rtol=1e-14)


def test_flow_rejects_negative_target():
    with pytest.raises(DomainError):
        flow(ZeroField(), -0.1, PhaseState(0.0, np.zeros(3), np.zeros(3)))


@settings(max_examples=40, deadline=None)
@given(times, times, times, vec, vec, st.sampled_from(range(len(ANALYTIC))))
def test_group_property(t, s1, s2, x, v, which):
    field = ANALYTIC[which]
    p = PhaseState(t, x, v)
    mid = field.flow(s1, p).restamp(s1)
    a, b = field.flow(s2, mid), field.flow(s2, p)
    np.testing.assert_allclose(a.x, b.x, atol=1e-8 * (1 + np.abs(b.x).max()))
    np.testing.assert_allclose(a.v, b.v, atol=1e-8 * (1 + np.abs(b.v).max()))


@settings(max_examples=40, deadline=None)
@given(times, vec, vec, st.sampled_from(range(len(ANALYTIC))))
def test_inverse_property(t, x, v, which):
    field = ANALYTIC[which]
    p = PhaseState(t, x, v)
    back = field.flow(t, field.flow(0.0, p).restamp(0.0))
    np.testing.assert_allclose(back.x, x, atol=1e-9)
    np.testing.assert_allclose(back.v, v, atol=1e-9)


def test_custom_integration_reproduces_closed_forms():
    custom = custom_field_from_expressions(["x1 + t", "x2", "x3"])
    exact = LinearPlusTimeField(1.0, E0_linear)
    rng = np.random.default_rng(1)
    p = PhaseState(rng.uniform(0, 1, 5), rng.uniform(-1, 1, (5, 3)), rng.uniform(-1, 1, (5, 3)))
    a, b = custom.flow(0.0, p), exact.flow(0.0, p)
    np.testing.assert_allclose(a.x, b.x, atol=1e-10)
    np.testing.assert_allclose(a.v, b.v, atol=1e-10)


# alpha coefficients

def test_alpha_free_case():
    al = alpha_coefficients(ZeroField(), 0.4, PhaseState(1.0, np.zeros(3), np.zeros(3)))
    np.testing.assert_allclose([al.a1, al.a2, al.a3, al.wronskian], [0.4, 1, 0, 1])


def test_alpha_linear_field():
    s = 0.6
    al = alpha_coefficients(LinearPlusTimeField(1.0), s, PhaseState(1.0, np.zeros(3), np.zeros(3)))
    np.testing.assert_allclose([al.a1, al.a2, al.a3, al.wronskian], [np.sinh(s), np.cosh(s), np.sinh(s), 1])


def test_alpha_time_only_matches_free_case():
    al = alpha_coefficients(TimeOnlyField(E0_linear), 0.3, PhaseState(1.0, np.zeros(3), np.zeros(3)))
    np.testing.assert_allclose([al.a1, al.a2, al.a3, al.wronskian], [0.3, 1, 0, 1])


def test_probed_alpha_matches_closed_form():
    custom = custom_field_from_expressions(["x1", "x2", "x3"])
    base = PhaseState(1.0, np.array([0.2, -0.4, 1.0]), np.array([0.5, 0.1, -0.3]))
    al = custom.alpha(np.array([0.25, 0.8]), base)
    s = np.array([0.25, 0.8])
    np.testing.assert_allclose(al.a1, np.sinh(s), atol=1e-6)
    np.testing.assert_allclose(al.a2, np.cosh(s), atol=1e-6)
    np.testing.assert_allclose(al.a3, np.sinh(s), atol=1e-6)
    np.testing.assert_allclose(al.wronskian, 1.0, atol=1e-5)


def test_nonlinear_force_is_not_affine():
    cubic = CustomField(lambda t, x: -x**3, step=1e-3)
    with pytest.raises(AffineStructureViolation):
        cubic.alpha(0.2, PhaseState(1.0, np.array([1.0, 0.5, -0.5]), np.array([0.3, 0.2, 0.1])))


@pytest.mark.parametrize("field", ANALYTIC[:3], ids=lambda f: f.kind)
def test_derivative_identity(field):
    dX, dV, a2 = derivative_identity(field, PhaseState(0.8, [0.1, 0.2, -0.3], [0.4, -0.1, 0.2]))
    np.testing.assert_allclose(dX, a2 * np.eye(3), atol=1e-6)
    np.testing.assert_allclose(dV, a2 * np.eye(3), atol=1e-6)


# hypotheses

def test_zero_field_passes_with_a3_zero():
    rep = check_hypotheses(ZeroField(), SampleSpec(count=200))
    assert rep.ok and rep.alpha3_zero and rep.tau0 is None
    assert rep.alpha0 == pytest.approx(1.0)


def test_linear_field_passes_with_tau_below_one():
    rep = check_hypotheses(LinearPlusTimeField(1.0), SampleSpec(count=200))
    assert rep.ok and not rep.alpha3_zero
    assert rep.tau0 <= 1.0
    assert rep.alpha0 == pytest.approx(1.0)


def test_attractive_harmonic_field_fails():
    rep = check_hypotheses(custom_field_from_expressions(["-x1", "-x2", "-x3"]),
                           SampleSpec(count=100, s_range=(0.0, 6.0)))
    assert not rep.ok
    ce = rep.counterexample
    assert ce["condition"] == "force01" and ce["a1"] < 0
    assert np.pi < ce["s"] < 2 * np.pi


def test_failed_report_carries_counterexample_in_dict():
    rep = check_hypotheses(custom_field_from_expressions(["-x1", "-x2", "-x3"]),
                           SampleSpec(count=50, s_range=(3.5, 6.0)))
    d = rep.to_dict()
    assert d["ok"] is False and d["counterexample"] is not None


def test_sample_count_must_be_positive():
    with pytest.raises(DomainError):
        SampleSpec(count=0)


# grammar

def test_parse_affine_component():
    cx, ct, c = parse_affine_component("2*x1 - 0.5*x3 + 3*t - 1.5")
    np.testing.assert_allclose(cx, [2, 0, -0.5])
    assert (ct, c) == (3.0, -1.5)


@pytest.mark.parametrize("bad", ["", "x4", "2**x1", "sin(t)", "x1*x2"])
def test_parse_rejects_outside_grammar(bad):
    with pytest.raises(DomainError):
        parse_affine_component(bad)


def test_time_force_rejects_positions():
    with pytest.raises(DomainError):
        affine_time_force(["x1", "0", "0"])
