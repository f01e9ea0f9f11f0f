import math

import numpy as np
import pytest
from helpers import solved, unit_space

from stiga.flux import reconstruct_flux
from stiga.geometry import box_geometry
from stiga.majorant import (
    MajorantParams,
    ProblemConstants,
    ResidualNorms,
    advanced_majorant_I,
    advanced_majorant_II,
    equivalence_constant,
    error_norms,
    friedrichs_constant,
    lhs_weights,
    majorant,
    majorant_I,
    majorant_II,
    optimal_alphas,
    optimal_betas,
    residual_norms,
)
from stiga.spaces import AnalyticField, DiscreteField, GradientFlux, eval_field


def reference_I(t, C, lam, mu, g, a1, a2):
    # independent straight-line evaluation
    return g * (lam * ((1 + a1) * t.rd + (1 + 1 / a1) * C * C * t.req) + mu * ((1 + a2) * t.div_rd + (1 + 1 / a2) * t.req))


def reference_II(t, C, lam, mu, z, eps, b1, b2):
    inner = (1 + b2) * t.rd + (1 + 1 / b2) * C * C * t.req
    return eps * mu * t.rd_top + z * (lam * ((1 + b1) * inner + (1 + 1 / b1) * mu * mu / lam / lam * t.dt_rd) + mu * t.req)


def test_friedrichs_constants():
    assert abs(friedrichs_constant(box_geometry([1.0, 1.0])) - 1 / math.pi) < 1e-15
    assert abs(friedrichs_constant(box_geometry([2.0, 1.0])) - 2 / math.pi) < 1e-15
    assert abs(friedrichs_constant(box_geometry([1.0, 1.0, 1.0])) - 1 / (math.pi * math.sqrt(2))) < 1e-15


def test_optimal_alpha_examples():
    assert optimal_alphas(2.0, 2.0, 1.0, 1.0)[0] == 1.0
    a1, a2 = optimal_alphas(0.0, 1.0, 0.0, 0.3)
    assert math.isinf(a1) and math.isinf(a2)


def test_params_ranges():
    with pytest.raises(ValueError):
        MajorantParams(gamma=0.4)
    with pytest.raises(ValueError):
        MajorantParams(epsilon=0.5)
    with pytest.raises(ValueError):
        MajorantParams(alpha1=-1.0)


def test_residuals_vanish_pointwise_for_exact_inputs():
    case = solved("MS1", 2, 4)[0]
    pts = np.random.default_rng(0).uniform(0, 1, (100, 2))
    V = unit_space(2, 4)
    s = eval_field(case.field, pts, keys=["dt", "grad", "lap"], geometry=V.geometry)
    y = eval_field(case.flux, pts, keys=["val", "div"], geometry=V.geometry)
    req = case.f(s["x"]) - s["dt"] + y["div"]
    rd = y["val"] - s["grad"]
    assert np.abs(req).max() < 1e-12 and np.abs(rd).max() < 1e-12


def test_gradient_flux_zero_duality_residual():
    case, V, stab, v, K = solved("MS1", 2, 4)
    t = residual_norms(v, GradientFlux(v), case.f, K)
    assert t.rd < 1e-28 and t.div_rd < 1e-28
    # remaining equation residual f - d_t v + lap v
    ref = 0.0
    for b in V.batches(5):
        s = v.sample(b, ["dt", "lap"])
        ref += np.sum(b.measure * (case.f(b.x) - s["dt"] + s["lap"]) ** 2)
    assert abs(t.req - ref) < 1e-12 * ref


def test_zero_duality_residual_limit():
    t = ResidualNorms(rd=0.0, req=0.7, div_rd=0.0)
    K = ProblemConstants(C_F=0.3, mu=0.2)
    rep_val = majorant_value = None
    from stiga.majorant import evaluate

    majorant_value, _ = evaluate("I", t, K, MajorantParams())
    assert abs(majorant_value - (0.3**2 + 0.2) * 0.7) < 1e-15
    rep_val, _ = evaluate("I", t, K, MajorantParams(alpha1=5.0, alpha2=7.0))
    assert abs(rep_val - (0.09 * 1.2 + 0.2 * (1 + 1 / 7)) * 0.7) < 1e-15


@pytest.mark.parametrize("kind", ["I", "II"])
def test_vanishing_for_exact_inputs(kind):
    case, V, stab, v, K = solved("MS1", 2, 4)
    assert majorant(kind, case.field, case.flux, case.f, K, space=V).value < 1e-10


@pytest.mark.parametrize("kind", ["I_w", "II_w"])
def test_advanced_vanishing_with_zero_w(kind):
    case, V, stab, v, K = solved("MS1", 2, 4)
    rep = majorant(kind, case.field, case.flux, case.f, K, w=DiscreteField.zero(V), space=V)
    assert rep.value < 1e-10 and rep.terms.J == 0.0


@pytest.mark.parametrize("kind", ["I", "II"])
def test_reliability_with_analytic_flux(kind):
    case, V, stab, v, K = solved("MS1", 2, 8)
    rep = majorant(kind, v, case.flux, case.f, K, u_exact=case.field)
    assert rep.lhs <= rep.value + 1e-8


def test_formula_cross_check_I():
    case, V, stab, v, K = solved("MS1", 2, 8)
    rep = majorant_I(v, GradientFlux(v) , case.f, K, MajorantParams(alpha1=0.7, alpha2=3.0))
    ref = reference_I(rep.terms, K.C_F, K.lam, K.mu, 1.0, 0.7, 3.0)
    assert abs(rep.value - ref) <= 1e-14 * ref
    rep = majorant_I(v, case.flux, case.f, K)
    ref = reference_I(rep.terms, K.C_F, K.lam, K.mu, 1.0, rep.params["alpha1"], rep.params["alpha2"])
    assert abs(rep.value - ref) <= 1e-14 * ref


def test_formula_cross_check_II():
    case, V, stab, v, K = solved("MS1", 3, 4)
    y = reconstruct_flux(v, "minimized", f=case.f, consts=K, sweeps=2)
    rep = majorant_II(v, y, case.f, K, MajorantParams(zeta=1.5, epsilon=3.0))
    p = rep.params
    ref = reference_II(rep.terms, K.C_F, K.lam, K.mu, 1.5, 3.0, p["beta1"], p["beta2"])
    assert abs(rep.value - ref) <= 1e-14 * ref


def test_sampled_optimality():
    rng = np.random.default_rng(5)
    case, V, stab, v, K = solved("MS1", 2, 8)
    y = reconstruct_flux(v, "minimized", f=case.f, consts=K, sweeps=2)
    best_I = majorant_I(v, y, case.f, K).value
    best_II = majorant_II(v, y, case.f, K).value
    for a1, a2 in np.exp(rng.uniform(-6, 6, (20, 2))):
        assert best_I <= majorant_I(v, y, case.f, K, MajorantParams(alpha1=a1, alpha2=a2)).value * (1 + 1e-12)
    for b1, b2 in np.exp(rng.uniform(-6, 6, (20, 2))):
        assert best_II <= majorant_II(v, y, case.f, K, MajorantParams(beta1=b1, beta2=b2)).value * (1 + 1e-12)


def test_optimal_betas_closed_form():
    b1, b2 = optimal_betas(rd=0.5, req=1.0, dt_rd=2.0, C_F=0.5, lam=1.0, mu=0.25)
    assert abs(b2 - 1.0) < 1e-15
    assert abs(b1 - 0.25 * 2.0 / math.sqrt(2 * 0.25 + 2 * 0.25)) < 1e-15


def test_large_rho_limit_of_advanced_majorant():
    case, V, stab, v, K = solved("MS1", 2, 4)
    y = GradientFlux(v)
    w = DiscreteField.zero(V)
    base = majorant_I(v, y, case.f, K)
    adv = advanced_majorant_I(v, y, w, case.f, K, MajorantParams(rho1=1e6, rho2=1e6))
    assert abs(adv.value - base.value) <= 1e-12 * base.value
    wI = lhs_weights("I_w", K.lam, K.mu, MajorantParams(rho1=1e6, rho2=1e6))
    np.testing.assert_allclose(wI, lhs_weights("I", K.lam, K.mu, MajorantParams()), rtol=1e-5)


def test_advanced_II_constraint():
    case, V, stab, v, K = solved("MS1", 2, 4)
    with pytest.raises(ValueError, match="epsilon"):
        advanced_majorant_II(v, GradientFlux(v), DiscreteField.zero(V), case.f, K, MajorantParams(epsilon=1.5, rho2=2.0))
    with pytest.raises(ValueError):
        advanced_majorant_I(v, GradientFlux(v), DiscreteField.zero(V), case.f, K, MajorantParams(rho1=1.0))


def test_functional_J_for_error_as_free_function():
    # J(v, u - v) = mu |d_t e|^2 + mu/2 |grad e|^2_T - lam |grad e|^2 - lam/2 |e|^2_T
    case, V, stab, v, K = solved("MS1", 2, 8)
    t = residual_norms(v, case.flux, case.f, K, w=case.field - v)
    E = error_norms(v, case.field)
    ref = K.mu * E.dt + K.mu / 2 * E.grad_top - K.lam * E.grad - K.lam / 2 * E.val_top
    assert abs(t.J - ref) < 1e-9 * abs(ref)
    assert abs(t.req) < 1e-20


def test_equivalence_constants():
    p = MajorantParams(gamma=1.0, rho1=3.0, rho2=3.0)
    assert equivalence_constant("I_w", 1.0, 1.0, p) == max(2.0, 3 * 5 / 2)
    p2 = MajorantParams(zeta=1.0, epsilon=2.0, rho1=3.0, rho2=4.0)
    assert abs(equivalence_constant("II_w", 1.0, 0.5, p2) - max(2.0, 7.5, 5.0 / (0.5 * 0.25))) < 1e-13


def test_error_norm_analytic_gradient():
    case, V, *_ = solved("MS1", 2, 8)
    E = error_norms(DiscreteField.zero(V), case.field)
    assert abs(E.grad - math.pi**2 / 4) < 1e-10
    assert abs(E.weighted((1, 0, 0, 0)) - math.pi**2 / 4) < 1e-10


def test_error_norm_zero_for_interpolant():
    case, V, stab, v, K = solved("MS2", 2, 4)
    assert error_norms(v, case.field).weighted((1, 1, 1, 1)) < 1e-24


def test_preset_weights():
    p = MajorantParams(gamma=2.0, rho1=3.0, rho2=5.0)
    assert lhs_weights("I_w", 1.5, 0.2, p) == (1.5 * 1.5, 1.5 * 0.2, 0.2 * 0.8, 1.5 * (2 / 3))
    with pytest.raises(ValueError):
        lhs_weights("III", 1, 1, p)


def test_report_breakdown_nonnegative():
    case, V, stab, v, K = solved("MS1", 2, 4)
    rep = advanced_majorant_II(v, GradientFlux(v), 0.5 * (case.field - v), case.f, K)
    d = rep.terms.as_dict()
    assert all(val >= 0 for k, val in d.items() if k != "J")
    assert rep.value >= 0


def test_analytic_field_missing_derivative():
    f = AnalyticField(lambda X: X[..., 0])
    case, V, *_ = solved("MS1", 2, 2)
    with pytest.raises(ValueError, match="dt"):
        next(iter([f.sample(b, ["dt"]) for b in V.batches(3)]))
