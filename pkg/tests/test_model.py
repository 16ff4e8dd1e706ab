from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harvestreg.model import (
    CostSpec, ModelParams, ModelValidationError, MuSpec, PriceSpec, RequiresSimulation,
    full_revenue_reservation, reference_params, params_from_mapping, reservation_tilde,
    unregulated_value, unregulated_value_grid, validate,
)


def test_reference_parameters_accepted(params):
    assert validate(params) is params
    assert (params.gamma, params.lam, params.sigma, params.price.P, params.horizon) == (0.1, 1.2, 0.1, 1.0, 1.0)
    assert (params.cost.beta, params.cost.c, params.m_lower, params.m_upper) == (0.9, 3.0, 10.0, 10.0)
    assert params.trunc_level == 100 and params.epsilon == 0.01 and params.x0 == 1.2


def test_zero_sigma_rejected():
    with pytest.raises(ModelValidationError, match="sigma must be positive"):
        validate(ModelParams(sigma=0.0))


def test_degenerate_effort_set_rejected():
    with pytest.raises(ModelValidationError, match="degenerate effort set"):
        validate(ModelParams(m_lower=0.0, m_upper=0.0))


@pytest.mark.parametrize("field,value", [("gamma", 0.0), ("horizon", -1.0), ("x0", 0.0),
                                         ("reservation", 0.5), ("epsilon", 0.0), ("m_lower", -1.0)])
def test_each_invariant_named(field, value):
    with pytest.raises(ModelValidationError, match=field.split("_")[0]):
        validate(ModelParams(**{field: value}))


def test_reservation_tilde_examples():
    assert reservation_tilde(ModelParams(reservation=-1.0)) == 0.0
    # the formula printed with the reference experiment
    assert reservation_tilde(ModelParams(reservation=-math.exp(-0.1))) == pytest.approx(-1.0, abs=1e-14)
    assert reservation_tilde(ModelParams(reservation=-math.exp(-0.05))) == pytest.approx(-0.5, abs=1e-14)


def test_unregulated_value_against_grid_oracle():
    p = ModelParams()
    assert unregulated_value(p) == pytest.approx(-math.exp(-0.05), abs=1e-15)
    bound = 1e-4 * (p.price.P + p.m_upper + p.m_lower)
    assert abs(unregulated_value(p) - unregulated_value_grid(p)) <= bound


def test_unregulated_value_zero_price_and_clamped():
    assert unregulated_value(ModelParams(price=PriceSpec(P=0.0))) == -1.0
    clamped = ModelParams(m_upper=0.5)
    expected = -math.exp(-0.1 * (0.5 - 0.125))
    assert unregulated_value(clamped) == pytest.approx(expected, abs=1e-15)
    assert abs(unregulated_value_grid(clamped) - expected) <= 1e-4 * 11.5


def test_unregulated_value_needs_simulation_for_price_impact():
    with pytest.raises(RequiresSimulation):
        unregulated_value(ModelParams(price=PriceSpec("exp_impact", 1.0, 1.0, 1.0)))


def test_full_revenue_reservation_differs_by_factor_two():
    p = ModelParams()
    assert reservation_tilde(p.with_(reservation=full_revenue_reservation(p))) == pytest.approx(-1.0)
    assert reservation_tilde(p.with_(reservation=unregulated_value(p))) == pytest.approx(-0.5)


def test_inverse_price_revenue_is_constant():
    x = np.logspace(-6, 6, 10_000)
    assert np.all(PriceSpec(P=1.7).revenue(x) == 1.7)


def test_exp_impact_revenue_bounded_by_cap():
    pr = PriceSpec("exp_impact", 2.0, 0.5, 1.5)
    x = np.logspace(-6, 6, 10_000)
    assert np.all(pr.revenue(x) <= 2.0)
    validate(ModelParams(price=pr, reservation=-0.9))


def test_cost_endpoints_exact():
    f = CostSpec(3.0, 0.9)
    assert f(0.0) == 3.0
    assert f(0.9) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 5.0), st.floats(0.1, 2.0))
def test_cost_nonincreasing_and_bounded(a, b, c, beta):
    f = CostSpec(c, beta)
    lo, hi = min(a, b), max(a, b)
    assert f(hi) <= f(lo) + 1e-15
    assert 0.0 <= f(lo) <= c
    if lo >= beta:
        assert f(lo) == 0.0


def test_truncated_mu_matches_logistic_below_level():
    x = np.linspace(0.0, math.e ** 3, 5000)
    np.testing.assert_array_equal(MuSpec("truncated", 3)(x), MuSpec("logistic")(x))


def test_custom_mu_interpolates_and_extrapolates_flat():
    m = MuSpec("custom", table_x=(0.0, 1.0, 2.0), table_mu=(0.0, 1.0, 1.5))
    assert m(0.5) == pytest.approx(0.5)
    assert m(10.0) == 1.5
    with pytest.raises(ModelValidationError):
        validate(ModelParams(competition=MuSpec("custom", table_x=(1.0, 0.5), table_mu=(0.0, 0.0))))


def test_mapping_defaults_reproduce_reference_set():
    assert params_from_mapping({}) == reference_params()


def test_mapping_unknown_key_is_error():
    with pytest.raises(ModelValidationError, match="unknown config keys: lamda"):
        params_from_mapping({"lamda": 1.0})


def test_mapping_reservation_modes():
    assert reservation_tilde(params_from_mapping({"reservation_mode": "full_revenue"})) == pytest.approx(-1.0)
    p = params_from_mapping({"reservation_mode": "explicit", "reservation": -0.5})
    assert p.reservation == -0.5
    with pytest.raises(ModelValidationError):
        params_from_mapping({"reservation_mode": "explicit"})
