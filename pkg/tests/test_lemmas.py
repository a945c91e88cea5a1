import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad
from scipy.special import erfc, gamma as gamma_fn

from enskog.errors import DomainError, HypothesisViolation
from enskog.forces import LinearPlusTimeField, PhaseState, TimeOnlyField, ZeroField, affine_time_force, \
    custom_field_from_expressions
from enskog.lemmas import (
    BoundCheck, LemmaScheme, Sweep, VerificationReport, alpha_function, estimate_constant, field_constants,
    gain_constant, lemma1_sweep, lemma4_sweep, loss_constant, reduced_integral, run_sweep, run_sweeps,
    verify_collision_bound, verify_derivative_identity, verify_gain_loss_estimates, verify_lemma1, verify_lemma2,
    verify_lemma3, verify_lemma4, verify_lemma5, verify_lemma6,
)
from enskog.quadrature import EstimateWithError

FIELDS = [ZeroField(), TimeOnlyField(affine_time_force(["t", "0", "0"])), LinearPlusTimeField(1.0)]


# constants

def test_constants_at_unit_parameters():
    assert loss_constant() == pytest.approx(4 * np.pi**2.5 * 7 / 3, rel=1e-14)
    assert loss_constant() == pytest.approx(163.2719, abs=1e-4)
    assert gain_constant(a=0.1, tau0=1.0) == pytest.approx(4 * np.pi**2 * (np.sqrt(np.pi) + 0.1) * 7 / 3)
    assert gain_constant() == pytest.approx(4 * np.pi**2.5 * 7 / 3)
    assert estimate_constant(a=0.1, tau0=1.0) == gain_constant(a=0.1, tau0=1.0)
    with pytest.raises(DomainError):
        loss_constant(p=0.0)


def test_field_constants():
    assert field_constants(ZeroField()) == (1.0, None)
    alpha0, tau0 = field_constants(LinearPlusTimeField(1.0))
    assert alpha0 == 1.0 and tau0 <= 1.0
    with pytest.raises(HypothesisViolation):
        field_constants(custom_field_from_expressions(["-x1", "-x2", "-x3"]))


# lemmas 1 and 4

def test_lemma1_sweep_has_no_violations():
    check = lemma1_sweep(20_000, seed=3)
    assert check.passed and check.lhs.value == 0.0


def test_lemma1_single_and_validation():
    om = np.array([0.0, 0.0, 1.0])
    assert verify_lemma1([0.3, -1, 2], [0, 0, 1.5], [1.0, 0.5, 0], om, 0.7, 0.2)
    with pytest.raises(DomainError):
        verify_lemma1([0, 0, 0], [0, 0, 1], [0, 1, 1], om, 1.0, 0.1)   # not orthogonal
    with pytest.raises(DomainError):
        verify_lemma1([0, 0, 0], [0, 0, -1], [1, 0, 0], om, 1.0, 0.1)  # wrong hemisphere


def test_lemma4_sweep_and_single():
    assert lemma4_sweep(20_000, seed=2).passed
    assert verify_lemma4([1, 2, 3], [0.5, 0, -1], [0, 1, 0], 0.4, -2.0)
    assert verify_lemma4([1, 2, 3], [0.5, 0, -1], [0, 1, 0], 0.4, -2.0, omega_perp=[1, 0, 0])


# lemma 2 against erfc

@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 10).flatmap(lambda m: st.sampled_from([m, -m])), st.floats(0.1, 10))
def test_lemma2_matches_erfc_and_bound(z, u, p):
    check = verify_lemma2(z, u, p)
    exact = np.sqrt(np.pi) / (2 * np.sqrt(p) * abs(u)) * erfc(np.sqrt(p) * z * np.sign(u))
    assert check.lhs.value == pytest.approx(exact, rel=1e-9, abs=1e-14 / abs(u))
    assert check.passed


def test_lemma2_spot_value():
    check = verify_lemma2(0.0, 1.0, 1.0)
    assert check.lhs.value == pytest.approx(np.sqrt(np.pi) / 2, abs=1e-12)
    assert check.bound == pytest.approx(np.sqrt(np.pi))


# lemma 3 against independent quadratures

@pytest.mark.parametrize("gamma", [-1.9, -1.5, -0.5, 0.0, 0.7, 1.0])
@pytest.mark.parametrize("q", [1.0, 2.5, 4.0])
def test_lemma3_at_origin_matches_gamma_function(gamma, q):
    exact = 2 * np.pi * gamma_fn((gamma + 2) / 2) / q ** ((gamma + 2) / 2)
    check = verify_lemma3(np.zeros(3), q, gamma)
    assert check.lhs.value == pytest.approx(exact, rel=1e-9)
    assert check.passed


@pytest.mark.parametrize("z,q,gamma", [((2.0, 0, 0), 1.0, 1.0), ((0.5, -1.0, 0.3), 2.0, 0.5),
                                       ((1.0, 1.0, 1.0), 0.5, 1.0)])
def test_lemma3_off_centre_matches_dblquad(z, q, gamma):
    zn = np.linalg.norm(z)
    # coordinates centred on z: u = z + w, polar axis along z
    val, _ = dblquad(lambda mu, r: 2 * np.pi * r * r * np.exp(-q * r * r)
                     * (zn * zn + r * r + 2 * zn * r * mu) ** ((gamma - 1) / 2),
                     0.0, 12.0 / np.sqrt(q), -1.0, 1.0, epsabs=1e-12, epsrel=1e-10)
    assert verify_lemma3(z, q, gamma).lhs.value == pytest.approx(val, rel=1e-7)


def test_lemma3_spot_values():
    check = verify_lemma3(np.zeros(3), 1.0, 1.0)
    assert check.lhs.value == pytest.approx(np.pi**1.5, abs=1e-10)
    assert check.bound == pytest.approx(4 * np.pi / 3 + np.pi)
    singular = verify_lemma3([2.0, 0, 0], 1.0, -1.5)
    assert singular.passed and singular.bound == pytest.approx(9 * np.pi)


def test_lemma3_bound_needs_q_of_order_one():
    # at z = 0, gamma = 1 the lhs is (pi/q)^{3/2}, above the bound once q is small
    check = verify_lemma3(np.zeros(3), 0.3, 1.0)
    assert check.lhs.value == pytest.approx((np.pi / 0.3) ** 1.5, rel=1e-9)
    assert not check.passed
    assert all(c.passed for c in run_sweep(Sweep("lemma3", count=200, seed=7)))


def test_lemma3_rejects_gamma_out_of_range():
    with pytest.raises(DomainError):
        verify_lemma3(np.zeros(3), 1.0, -2.0)


# reduced integrals

def test_reduced_loss_zero_diameter_closed_form():
    # a = 0, zero field, z1 = z2 = 0: 2 pi^2 int_0^t (1 + s^2)^-2 ds
    t = 1.0
    exact = 2 * np.pi**2 * (t / (2 * (1 + t * t)) + np.arctan(t) / 2)
    alpha = alpha_function(ZeroField(), t)
    for kind in ("loss", "gain"):
        est = reduced_integral(kind, np.zeros(3), np.zeros(3), t, alpha, 0.0, 1.0, 1.0, LemmaScheme(samples=400_000))
        assert abs(est.value - exact) < 4 * est.stderr


def test_reduced_gauss_engine_is_close_to_mc():
    alpha = alpha_function(ZeroField(), 1.0)
    mc = reduced_integral("loss", np.zeros(3), np.zeros(3), 1.0, alpha, 0.1, 1.0, 1.0, LemmaScheme(samples=200_000))
    gs = reduced_integral("loss", np.zeros(3), np.zeros(3), 1.0, alpha, 0.1, 1.0, 1.0, LemmaScheme(engine="gauss"))
    assert gs.value == pytest.approx(mc.value, rel=0.06)


def test_reduced_integral_is_seed_deterministic():
    alpha = alpha_function(LinearPlusTimeField(1.0), 0.8)
    s = LemmaScheme(samples=50_000, seed=11)
    a = reduced_integral("gain", [0.1, 0, 0], [0, 0.3, 0], 0.8, alpha, 0.1, 1.0, 1.0, s)
    b = reduced_integral("gain", [0.1, 0, 0], [0, 0.3, 0], 0.8, alpha, 0.1, 1.0, 1.0, s)
    assert a == b


@pytest.mark.parametrize("field", FIELDS, ids=lambda f: f.kind)
def test_lemma5_and_6_pass_on_example_fields(field):
    base = PhaseState(0.9, np.array([0.5, -0.2, 0.1]), np.array([0.3, 0.4, -0.6]))
    s = LemmaScheme(samples=100_000, seed=4)
    for fn in (verify_lemma5, verify_lemma6):
        check = fn([0.2, 0.1, -0.3], [0.1, 0.0, 0.2], 0.9, base, field, scheme=s)
        assert check.passed and check.lhs.stderr > 0


# factorisation of the characteristic integrals

@pytest.mark.parametrize("field", FIELDS, ids=lambda f: f.kind)
def test_loss_ratio_equals_reduced_integral_at_backward_point(field):
    base = PhaseState(0.8, np.array([0.4, -0.3, 0.2]), np.array([-0.5, 0.2, 0.7]))
    scheme = LemmaScheme(samples=60_000, seed=9)
    _, est_l = verify_gain_loss_estimates(base, field, 0.1, scheme=scheme)
    back = field.flow(0.0, base)
    alpha = alpha_function(field, base.t, base, scheme.alpha_nodes)
    red = reduced_integral("loss", back.x, back.v, base.t, alpha, 0.1, 1.0, 1.0, scheme)
    assert est_l.lhs.value == pytest.approx(red.value, rel=1e-9)


@pytest.mark.parametrize("field", FIELDS, ids=lambda f: f.kind)
def test_gain_ratio_is_dominated_by_reduced_integral(field):
    base = PhaseState(0.8, np.array([0.4, -0.3, 0.2]), np.array([-0.5, 0.2, 0.7]))
    scheme = LemmaScheme(samples=60_000, seed=9)
    back = field.flow(0.0, base)
    alpha = alpha_function(field, base.t, base, scheme.alpha_nodes)
    est_g, _ = verify_gain_loss_estimates(base, field, 0.1, scheme=scheme)
    red = reduced_integral("gain", back.x, back.v, base.t, alpha, 0.1, 1.0, 1.0, scheme)
    assert est_g.lhs.value <= red.value * (1 + 1e-12)
    est0, _ = verify_gain_loss_estimates(base, field, 0.0, scheme=scheme)
    red0 = reduced_integral("gain", back.x, back.v, base.t, alpha, 0.0, 1.0, 1.0, scheme)
    assert est0.lhs.value == pytest.approx(red0.value, rel=1e-9)


def test_estimate_at_time_zero_is_zero():
    g, l_ = verify_gain_loss_estimates(PhaseState(0.0, np.zeros(3), np.zeros(3)))
    assert g.lhs.value == 0.0 and l_.lhs.value == 0.0


def test_collision_bound_holds_for_gaussian_member():
    base = PhaseState(0.6, np.array([0.2, 0.0, -0.1]), np.array([0.3, -0.2, 0.1]))
    for check in verify_collision_bound(base, ZeroField(), time_nodes=3):
        assert check.passed and 0 < check.lhs.value < check.bound


@pytest.mark.parametrize("field", FIELDS, ids=lambda f: f.kind)
def test_derivative_identity_check(field):
    assert verify_derivative_identity(field, PhaseState(0.7, [0.1, 0.2, 0.3], [0.3, -0.1, 0.0])).passed


# records and sweeps

def test_bound_check_margin_and_scaling():
    c = BoundCheck("x", EstimateWithError(1.0, 0.1), 1.3, {})
    assert c.passed and c.margin == pytest.approx(0.0)
    assert not c.scaled(2.0).passed
    assert BoundCheck("x", EstimateWithError(1.0 + 1e-13), 1.0, {}, rtol=1e-12).passed


def test_report_round_trip(tmp_path):
    rep = run_sweeps([Sweep("lemma2", count=5), Sweep("lemma3", count=3)])
    rep.write_json(tmp_path / "v.json")
    again = VerificationReport.read_json(tmp_path / "v.json")
    assert again.to_dict() == rep.to_dict()
    again.write_json(tmp_path / "w.json")
    assert (tmp_path / "v.json").read_bytes() == (tmp_path / "w.json").read_bytes()


def test_sweep_independent_of_workers():
    sw = Sweep("lemma5", count=4, samples=20_000, seed=5)
    one = [c.to_dict() for c in run_sweep(sw, workers=1)]
    two = [c.to_dict() for c in run_sweep(sw, workers=2)]
    assert one == two


def test_inflated_lhs_fails():
    rep = run_sweeps([Sweep("lemma5", count=2, samples=20_000)], lhs_scale=1000.0)
    assert not rep.passed and len(rep.failures()) == 2


def test_empty_sweeps_pass():
    assert run_sweeps([]).passed
    assert run_sweep(Sweep("lemma1", count=0)) == []


def test_sweep_validation():
    with pytest.raises(DomainError):
        Sweep("lemma9")
    with pytest.raises(DomainError):
        Sweep("lemma2", count=-1)
