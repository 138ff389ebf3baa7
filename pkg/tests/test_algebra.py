import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sktsim.algebra import (
    CFG_A,
    Coefficients,
    SpeciesPair,
    check_conditions,
    dual_exponent,
    eval_l,
    eval_p,
    eval_q,
    inverse_norm_check,
    jac_P,
    jac_Q,
    max_alpha,
    mean_value_P,
    mean_value_Q,
    quad_form_margin,
)

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
state = st.tuples(finite, finite).map(lambda t: SpeciesPair(*t))


def test_cfg_a_derived_fields():
    assert CFG_A.d0 == 1.0
    assert 0.0 < CFG_A.alpha < 1.0


def test_coefficients_reject_negative_and_nonfinite():
    with pytest.raises(ValueError):
        Coefficients(1, -1, 1, 1)
    with pytest.raises(ValueError):
        Coefficients(1, math.inf, 1, 1)
    with pytest.raises(ValueError):
        Coefficients(1, 1, 1, 1, alpha=1.5)
    with pytest.raises(ValueError):
        Coefficients(1, 1, 1, 1, alpha=0.0)


def test_eval_p_worked_examples():
    assert eval_p(CFG_A, SpeciesPair(2.0, 1.0)) == (8.0, 4.0)
    assert eval_p(CFG_A, SpeciesPair(0.0, 0.0)) == (0.0, 0.0)
    assert eval_p(CFG_A, SpeciesPair(0.0, 2.0)) == (0.0, 6.0)


def test_eval_q_worked_examples():
    assert eval_q(CFG_A, SpeciesPair(1.0, 1.0)) == (2.0, 2.0)
    assert eval_q(CFG_A, SpeciesPair(0.0, 0.0)) == (0.0, 0.0)
    assert eval_q(CFG_A, SpeciesPair(2.0, 0.0)) == (4.0, 0.0)


def test_eval_l_worked_examples():
    assert eval_l(CFG_A, SpeciesPair(3.0, 5.0)) == (3.0, 5.0)
    c = Coefficients(1, 1, 1, 1, a1=2.0, a2=0.0)
    assert eval_l(c, SpeciesPair(1.0, 7.0)) == (2.0, 0.0)


def test_eval_rejects_nonfinite():
    with pytest.raises(ValueError):
        eval_p(CFG_A, SpeciesPair(math.nan, 0.0))
    with pytest.raises(ValueError):
        eval_q(CFG_A, SpeciesPair(0.0, math.inf))
    with pytest.raises(ValueError):
        eval_l(CFG_A, SpeciesPair(-math.inf, 0.0))


def test_jacobian_worked_examples():
    assert jac_P(CFG_A, SpeciesPair(0.0, 0.0)) == (1.0, 0.0, 0.0, 1.0)
    assert jac_P(CFG_A, SpeciesPair(1.0, 1.0)) == (4.0, 1.0, 1.0, 4.0)
    assert jac_P(CFG_A, SpeciesPair(0.0, 1.0)) == (2.0, 0.0, 1.0, 3.0)
    assert jac_Q(CFG_A, SpeciesPair(0.0, 0.0)) == (0.0, 0.0, 0.0, 0.0)
    assert jac_Q(CFG_A, SpeciesPair(1.0, 1.0)) == (3.0, 1.0, 1.0, 3.0)
    assert jac_Q(CFG_A, SpeciesPair(1.0, 0.0)) == (2.0, 1.0, 0.0, 1.0)


def _fd_jacobian(fn, c, s, h):
    cols = []
    for du, dv in ((h, 0.0), (0.0, h)):
        plus = fn(c, SpeciesPair(s.u + du, s.v + dv))
        minus = fn(c, SpeciesPair(s.u - du, s.v - dv))
        cols.append(((plus.u - minus.u) / (2 * h), (plus.v - minus.v) / (2 * h)))
    return np.array([[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]])


@pytest.mark.parametrize("fn,jac", [(eval_p, jac_P), (eval_q, jac_Q)])
def test_jacobian_matches_central_differences(fn, jac):
    # The maps are quadratic, so central differences are exact up to
    # roundoff; agreement is asserted tightly at both step sizes.
    rng = np.random.default_rng(7)
    for _ in range(100):
        s = SpeciesPair(*rng.uniform(-5.0, 5.0, size=2))
        J = jac(CFG_A, s)
        exact = np.array([[J.m11, J.m12], [J.m21, J.m22]])
        for h in (1e-4, 5e-5):
            fd = _fd_jacobian(fn, CFG_A, s, h)
            assert np.max(np.abs(fd - exact)) < 1e-8


def test_check_conditions_worked_examples():
    rep = check_conditions(CFG_A)
    assert rep.holds_1_5c and rep.holds_coef_cond
    assert rep.margin_1_5c == 63.0
    assert rep.margins_coef_cond == (7.0, 7.0)

    boundary = check_conditions(Coefficients(1, 8, 8, 1))
    assert not boundary.holds_1_5c  # 64 < 64 fails strictly

    degenerate = check_conditions(Coefficients(1, 0, 1, 1))
    assert not degenerate.holds_1_5c and not degenerate.holds_coef_cond


@given(st.tuples(*(st.floats(min_value=0.0, max_value=50.0, allow_subnormal=False)
                   for _ in range(4))))
def test_coef_cond_implies_1_5c(aij):
    a11, a12, a21, a22 = aij
    rep = check_conditions(Coefficients(a11, a12, a21, a22))
    if rep.holds_coef_cond:
        assert rep.holds_1_5c


def test_coef_cond_implication_bulk():
    rng = np.random.default_rng(11)
    draws = rng.uniform(0.0, 20.0, size=(100_000, 4))
    a11, a12, a21, a22 = draws.T
    coef = (a12**2 > 0) & (a12**2 < 8 * a11 * a21) & (a21**2 > 0) & (a21**2 < 8 * a22 * a12)
    one5c = (a12 * a21 > 0) & (a12 * a21 < 64 * a11 * a22)
    assert not np.any(coef & ~one5c)


def test_quad_form_margin_worked_examples():
    c = CFG_A.with_alpha(0.5)
    assert quad_form_margin(c, SpeciesPair(0.0, 0.0), (1.0, 0.0)) == 0.0  # d1 == d0
    # P(1,1) = [[4,1],[1,4]]: form = 6, minus d0*2 minus 0.5*2*2
    assert quad_form_margin(c, SpeciesPair(1.0, 1.0), (1.0, -1.0)) == 2.0
    assert quad_form_margin(c, SpeciesPair(3.0, 4.0), (0.0, 0.0)) == 0.0
    with pytest.raises(ValueError):
        quad_form_margin(c, SpeciesPair(-1.0, 0.0), (1.0, 0.0))


def test_max_alpha_certificate_and_determinism():
    alpha = max_alpha(CFG_A)
    assert 0.0 < alpha < 1.0
    assert alpha == max_alpha(CFG_A)  # deterministic rerun
    # fresh samples not used during bisection
    rng = np.random.default_rng(2024)
    s = SpeciesPair(rng.uniform(0, 100, 200_000), rng.uniform(0, 100, 200_000))
    theta = rng.uniform(0, 2 * np.pi, 200_000)
    margins = quad_form_margin(CFG_A.with_alpha(alpha), s, (np.cos(theta), np.sin(theta)))
    assert float(np.min(margins)) >= -1e-12


def test_max_alpha_decreases_toward_condition_boundary():
    # The certified margin collapses to zero as a12 = a21 approaches the
    # strict admissibility bound 8 (non-increasing on the approach branch).
    values = [max_alpha(Coefficients(1.0, g, g, 1.0))
              for g in (2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 7.5)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[-1] > 0.0  # still positive strictly inside the condition
    assert values[-1] < 0.15


def test_max_alpha_requires_condition():
    with pytest.raises(ValueError):
        max_alpha(Coefficients(1, 0, 1, 1))


def test_inverse_norm_check_identity_case():
    first, second = inverse_norm_check(CFG_A, SpeciesPair(0.0, 0.0))
    assert first == pytest.approx(1.0, abs=1e-14)
    assert second == 1.0
    assert first <= second


def test_inverse_norm_check_explicit_2x2():
    alpha = max_alpha(CFG_A)
    c = CFG_A.with_alpha(alpha)
    first, second = inverse_norm_check(c, SpeciesPair(1.0, 1.0))
    # P = [[4, 1], [1, 4]] is symmetric; smallest eigenvalue 3
    assert first == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert second == pytest.approx(1.0 / (1.0 + 2.0 * alpha), rel=1e-12)
    assert first <= second


def test_inverse_norm_check_bulk_samples():
    alpha = max_alpha(CFG_A)
    c = CFG_A.with_alpha(alpha)
    rng = np.random.default_rng(5)
    s = SpeciesPair(rng.uniform(0, 200, 10_000), rng.uniform(0, 200, 10_000))
    first, second = inverse_norm_check(c, s)
    assert np.all(first <= second * (1 + 1e-12))


def test_mean_value_worked_examples():
    lhs, rhs = mean_value_P(CFG_A, SpeciesPair(2.0, 1.0), SpeciesPair(0.0, 1.0))
    assert lhs == (8.0, 2.0) and rhs == (8.0, 2.0)
    lhs, rhs = mean_value_Q(CFG_A, SpeciesPair(2.0, 0.0), SpeciesPair(0.0, 0.0))
    assert lhs == (4.0, 0.0) and rhs == (4.0, 0.0)
    lhs, rhs = mean_value_P(CFG_A, SpeciesPair(1.5, -2.0), SpeciesPair(1.5, -2.0))
    assert lhs == (0.0, 0.0) and rhs == (0.0, 0.0)


def _rel_gap(lhs, rhs, fn, s1, s2):
    # Both sides are differences of O(|f|) quantities, so "relative" is
    # anchored to the magnitude of the evaluated maps, not to a possibly
    # cancelling result.
    f1, f2 = fn(CFG_A, s1), fn(CFG_A, s2)
    scale = np.maximum.reduce([np.abs(f1.u), np.abs(f1.v), np.abs(f2.u),
                               np.abs(f2.v), np.ones_like(np.asarray(f1.u))])
    return max(float(np.max(np.abs(lhs.u - rhs.u) / scale)),
               float(np.max(np.abs(lhs.v - rhs.v) / scale)))


@pytest.mark.parametrize("identity,fn", [(mean_value_P, eval_p), (mean_value_Q, eval_q)])
def test_mean_value_identity_bulk(identity, fn):
    rng = np.random.default_rng(13)
    s1 = SpeciesPair(rng.uniform(-10, 10, 100_000), rng.uniform(-10, 10, 100_000))
    s2 = SpeciesPair(rng.uniform(-10, 10, 100_000), rng.uniform(-10, 10, 100_000))
    lhs, rhs = identity(CFG_A, s1, s2)
    assert _rel_gap(lhs, rhs, fn, s1, s2) <= 1e-12


@settings(max_examples=300)
@given(state, state)
def test_mean_value_identity_hypothesis(s1, s2):
    for identity, fn in ((mean_value_P, eval_p), (mean_value_Q, eval_q)):
        lhs, rhs = identity(CFG_A, s1, s2)
        f1, f2 = fn(CFG_A, s1), fn(CFG_A, s2)
        scale = max(abs(f1.u), abs(f1.v), abs(f2.u), abs(f2.v), 1.0)
        for a, b in ((lhs.u, rhs.u), (lhs.v, rhs.v)):
            assert abs(a - b) <= 1e-12 * scale


def test_dual_exponent_table():
    assert dual_exponent(2) == 2.0
    assert dual_exponent(1) == 4.0 / 3.0
    assert dual_exponent(4) == 4.0
    assert dual_exponent(3) == 2.4
    with pytest.raises(ValueError):
        dual_exponent(5)
