from __future__ import annotations

import numpy as np
import pytest

from harvestreg.contract import (
    agent_exponent, outcome_table, principal_value_mc, reconstruct_batch, reconstruct_tax, stopped_policy,
    write_outcomes_csv,
)
from harvestreg.dynamics import TimeGrid, brownian_increments, simulate_batch, simulate_controlled
from harvestreg.hjb import FeedbackPolicy
from harvestreg.model import CostSpec, ModelParams, reservation_tilde


def test_zero_sensitivity_tax_closed_form(params):
    pol = FeedbackPolicy.constant(params, 0.0)
    grid = TimeGrid(200)
    paths = simulate_controlled(params, grid, pol, seed=3, n_paths=25)
    out = reconstruct_batch(paths, params)
    expected = reservation_tilde(params) + 0.5 * params.price.P ** 2 * params.horizon
    np.testing.assert_allclose(out.xi, expected, atol=1e-12)
    assert np.all(out.agrees)


def test_zero_horizon_step_returns_reservation(params):
    pol = FeedbackPolicy.constant(params, 0.7)
    paths = simulate_controlled(params, TimeGrid(50), pol, seed=0, n_paths=3)
    out = reconstruct_batch(paths, params)
    np.testing.assert_array_equal(out.y_path[:, 0], reservation_tilde(params))
    np.testing.assert_array_equal(out.y_alt[:, 0], reservation_tilde(params))


def test_zero_cost_zero_sensitivity_principal_value_exact():
    p = ModelParams(cost=CostSpec(0.0, 0.9), reservation=-0.95)
    est = principal_value_mc(p, TimeGrid(100), FeedbackPolicy.constant(p, 0.0), n_paths=50, seed=2)
    assert est.mean == pytest.approx(reservation_tilde(p) + 0.5, abs=1e-12)
    assert est.se <= 1e-12


def test_single_path_outcome_and_y_written(params):
    pol = FeedbackPolicy.constant(params, 0.2)
    path = simulate_controlled(params, TimeGrid(100), pol, seed=1)
    out = reconstruct_tax(path, params)
    assert isinstance(out.xi, float)
    np.testing.assert_array_equal(path.y, out.y_path)
    assert out.xi == path.y[-1]
    assert out.principal_payoff == pytest.approx(out.xi - params.cost(path.x[-1]))


def test_two_discretizations_agree_for_constant_sensitivity(params):
    pol = FeedbackPolicy.constant(params, 0.5)
    paths = simulate_controlled(params, TimeGrid(2000), pol, seed=4, n_paths=50)
    out = reconstruct_batch(paths, params)
    assert np.all(out.agrees)
    assert out.gap.max() <= 5e-3


def test_agent_exponent_matches_closed_form(params):
    pol = FeedbackPolicy.constant(params, 0.0)
    paths = simulate_controlled(params, TimeGrid(100), pol, seed=0, n_paths=4)
    # alpha = clamp(P) = 1 throughout: sum (P - 1/2) dt = 1/2
    np.testing.assert_allclose(agent_exponent(paths, params, np.zeros(4)), 0.5, atol=1e-12)


def test_optimal_tax_tracks_abundance(params, policy):
    grid = TimeGrid(2500, params.horizon)
    paths = simulate_controlled(params, grid, policy, seed=6, n_paths=200)
    out = reconstruct_batch(paths, params, policy)
    assert np.all(out.agrees)
    # w is nondecreasing in y, so z = -D1 w / kappa <= 0 and the promised value moves against abundance
    assert paths.z.max() <= 1e-12
    dy = np.diff(out.y_path, axis=1).ravel()
    dx = np.diff(paths.x, axis=1).ravel()
    assert np.corrcoef(dy, dx)[0, 1] < 0.0


def test_stopped_at_zero_level_stops_immediately(params, policy):
    grid = TimeGrid(200)
    pol = stopped_policy(policy, 0.0)
    paths = simulate_controlled(params, grid, pol, seed=1, n_paths=10)
    np.testing.assert_array_equal(paths.z, 0.0)
    np.testing.assert_array_equal(paths.alpha, params.price.P)


def test_stopped_without_hits_is_identical(params, policy):
    grid = TimeGrid(500)
    a = simulate_controlled(params, grid, policy, seed=2, n_paths=20)
    b = simulate_controlled(params, grid, stopped_policy(policy, 2.0), seed=2, n_paths=20)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(reconstruct_batch(a, params).xi, reconstruct_batch(b, params).xi)


def test_stopped_policy_value_matches_base(params, policy):
    grid = TimeGrid(1000)
    base = principal_value_mc(params, grid, policy, n_paths=200, seed=8)
    stop = principal_value_mc(params, grid, stopped_policy(policy, 2.0), n_paths=200, seed=8)
    assert stop.mean == base.mean


def test_stopped_policy_rejects_pointwise_use(policy):
    with pytest.raises(TypeError):
        stopped_policy(policy, 1.0).z(0.0, 1.0)


def test_stopping_freezes_sensitivity_after_hit(params, policy):
    grid = TimeGrid(400)
    level = 0.1  # e^0.1 ~ 1.105 is below x0 = 1.2
    paths = simulate_controlled(params, grid, stopped_policy(policy, level), seed=0, n_paths=5)
    assert np.all(paths.z == 0.0)


def test_outcomes_csv(tmp_path, params):
    pol = FeedbackPolicy.constant(params, 0.1)
    tab = outcome_table(params, TimeGrid(50), pol, n_paths=7, seed=5, batch=3)
    assert tab.shape == (7, 5)
    np.testing.assert_array_equal(tab[:, 0], np.arange(7))
    p = tmp_path / "o.csv"
    write_outcomes_csv(p, tab)
    lines = p.read_text().splitlines()
    assert lines[0] == "seed,xi,x_T,principal_payoff,agent_exponent"
    row = lines[3].split(",")
    assert int(row[0]) == 2 and float(row[1]) == tab[2, 1]


def test_batch_and_single_reconstruction_agree(params):
    pol = FeedbackPolicy.constant(params, 0.3)
    grid = TimeGrid(100)
    dw = brownian_increments(0, np.arange(3), grid)
    paths = simulate_batch(params, grid, pol, dw)
    batch = reconstruct_batch(paths, params)
    for i in range(3):
        assert reconstruct_batch(paths.path(i), params).xi == batch.xi[i]
