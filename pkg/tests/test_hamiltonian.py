import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from merton_lab.closed_form import merton_constant, optimal_strategy, value, value_d1, value_d2
from merton_lab.hamiltonian import (Derivs, UnboundedHamiltonian, crra_utility, h_max, hcv,
                                    hjb_residual, maximizers)

from conftest import well_posed_specs


def test_crra_utility():
    assert crra_utility(2.0, 2.0) == pytest.approx(-0.5)
    assert crra_utility(0.0, 3.0) == -math.inf
    np.testing.assert_allclose(crra_utility(np.array([1.0, 4.0]), 3.0), [-0.5, -1.0 / 32.0])


def test_h_max_set_b_frozen(spec_b):
    # closed-form derivatives at x=1: p = a, P = -2a, so H_max = -0.03 a = rho V(1)
    a = merton_constant(spec_b)
    h = h_max(spec_b, 1.0, Derivs(a, -2.0 * a))
    assert h == pytest.approx(-0.03 * a, rel=1e-12)


def test_maximizers_set_b_frozen(spec_b):
    a = merton_constant(spec_b)
    c, pi = maximizers(spec_b, 1.0, Derivs(a, -2.0 * a))
    assert c == pytest.approx(0.03, rel=1e-12)
    assert pi == pytest.approx(0.4, rel=1e-12)


def test_trivial_branch_is_zero(spec_a):
    assert h_max(spec_a, 1.0, Derivs(0.0, 0.0)) == 0.0
    assert h_max(spec_a, 1.0, Derivs(0.0, -1.0)) == 0.0
    assert hjb_residual(spec_a, 1.0, 0.0, 0.0, 0.0) == 0.0


@pytest.mark.parametrize("p,P", [(-1.0, -1.0), (1.0, 0.0), (1.0, 2.0), (0.0, 1.0)])
def test_unbounded_cases_raise(spec_b, p, P):
    with pytest.raises(UnboundedHamiltonian):
        h_max(spec_b, 1.0, Derivs(p, P))


@pytest.mark.parametrize("p,P", [(0.0, -1.0), (1.0, 0.0), (-1.0, -1.0)])
def test_maximizers_guard(spec_b, p, P):
    with pytest.raises(ValueError):
        maximizers(spec_b, 1.0, Derivs(p, P))


def test_array_guard_fails_whole_call(spec_b):
    with pytest.raises(UnboundedHamiltonian):
        h_max(spec_b, np.ones(3), Derivs(np.array([1.0, -1.0, 1.0]), -np.ones(3)))


@given(well_posed_specs(), st.floats(0.01, 100.0), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3),
       st.floats(1e-3, 10.0), st.floats(-10.0, 10.0))
def test_h_max_dominates_hcv(spec, x, p, negP, c, pi):
    d = Derivs(p, -negP)
    top = h_max(spec, x, d)
    assert hcv(spec, x, d, c, pi) <= top + 1e-9 * max(1.0, abs(top))
    cs, pis = maximizers(spec, x, d)
    assert hcv(spec, x, d, cs, pis) == pytest.approx(top, rel=1e-10, abs=1e-10)


@given(well_posed_specs(), st.floats(1e-3, 1e3))
def test_closed_form_triple_solves_hjb(spec, x):
    v, p, P = value(spec, x), value_d1(spec, x), value_d2(spec, x)
    res = hjb_residual(spec, x, v, p, P)
    assert abs(res) <= 1e-9 * max(abs(spec.rho * v), abs(h_max(spec, x, Derivs(p, P))))


@given(well_posed_specs(), st.floats(1e-2, 1e2))
def test_feedback_is_proportional(spec, x):
    c, pi = maximizers(spec, x, Derivs(value_d1(spec, x), value_d2(spec, x)))
    opt = optimal_strategy(spec)
    assert c / x == pytest.approx(opt.kappa, rel=1e-10)
    assert pi / x == pytest.approx(opt.theta, rel=1e-10, abs=1e-12)
