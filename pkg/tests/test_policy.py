import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.stats import norm

from alpha_trading.policy import (
	Boundaries,
	MarketParams,
	Mode,
	Zone,
	classify_zone,
	decide,
	dvalue_dq,
	fill_probability,
	hjb_source,
	limit_boundaries,
	nt_boundaries,
	objective_from_value,
	trade_rate_power,
	trade_rate_quadratic,
	value_approx,
	value_from_objective,
)
from alpha_trading.signals import AlphaModel, OUParams, SignalState


@pytest.fixture
def mp():
	return MarketParams.with_q_bar(0.3, nu=0.01, lam=37.4, C=0.01)


def test_market_params_validation():
	with pytest.raises(ValueError):
		MarketParams(nu=0.0, C=0.01)
	with pytest.raises(ValueError):
		MarketParams(nu=0.01, C=-0.01)
	with pytest.raises(ValueError):
		MarketParams(nu=0.01, C=0.01, p=1.0)
	with pytest.raises(ValueError):
		MarketParams(nu=0.01, C=0.01).A


def test_q_bar_is_markowitz_target(mp):
	assert mp.q_bar == pytest.approx(0.3)
	assert mp.alpha_bar == pytest.approx(0.3 * 37.4 * 0.01)


def test_value_and_slope(mp, tg):
	t = tg.t_open
	assert value_approx(t, mp.q_bar, 0.5, mp, tg) == 0.0
	h = 1e-6
	fd = (value_approx(t, 1.0 + h, 0.0, mp, tg) - value_approx(t, 1.0 - h, 0.0, mp, tg)) / (2 * h)
	assert dvalue_dq(t, 1.0, mp, tg) == pytest.approx(fd, rel=1e-8)
	with pytest.raises(ValueError):
		value_approx(tg.T + 0.1, 1.0, 0.0, mp, tg)


def test_value_objective_conversion_round_trip(mp, tg):
	omega = objective_from_value(0.7, 0.8, 1.2, 0.05, mp, tg)
	assert value_from_objective(omega, 0.8, 1.2, 0.05, mp, tg) == pytest.approx(0.7)


def test_nt_boundaries_formula(mp, tg):
	t, g = 0.9, 0.002
	b_minus, b_plus = nt_boundaries(t, g, mp, tg)
	denom = 0.01 * 37.4 * (2 - t)
	assert b_minus == pytest.approx(0.3 + (g + 0.01) / denom)
	assert b_plus == pytest.approx(0.3 + (g - 0.01) / denom)
	with pytest.raises(ValueError):
		nt_boundaries(2.0, g, mp, tg)


def test_band_collapses_without_spread(tg):
	mp = MarketParams.with_q_bar(0.0, nu=0.01, lam=37.4, C=0.0)
	b_minus, b_plus = nt_boundaries(np.linspace(0.75, 1.0, 10), 0.01, mp, tg)
	np.testing.assert_array_equal(b_minus, b_plus)


def test_band_widens_toward_close(mp, tg):
	t = tg.decision_times()
	b_minus, b_plus = nt_boundaries(t, 0.0, mp, tg)
	assert np.all(np.diff(b_minus - b_plus) > 0)


def test_limit_boundaries_ordered_for_random_inputs(rng, tg):
	n = 10_000
	t = rng.uniform(tg.t_open, tg.T, n)
	g = rng.normal(0.0, 0.05, n)
	P_plus = rng.uniform(0.0, 0.999, n)
	P_minus = rng.uniform(0.0, 0.999, n)
	mp = MarketParams(nu=0.01, C=0.02, lam=37.4, alpha_bar=0.001)
	assert limit_boundaries(t, g, P_plus, P_minus, mp, tg).is_ordered()


def test_limit_boundaries_reduce_to_band_without_fills(mp, tg):
	bd = limit_boundaries(0.8, 0.0, 0.0, 0.0, mp, tg)
	assert bd.b_tilde_minus == pytest.approx(bd.b_minus)
	assert bd.b_tilde_plus == pytest.approx(bd.b_plus)
	with pytest.raises(ValueError):
		limit_boundaries(0.8, 0.0, 1.0, 0.0, mp, tg)


@pytest.mark.parametrize('q, zone, target', [
	(-1.0, Zone.BUY_MARKET, -0.5),
	(-0.5, Zone.BUY_LIMIT, 0.0),
	(-0.2, Zone.BUY_LIMIT, 0.0),
	(0.0, Zone.MARKET_MAKE, 0.0),
	(0.5, Zone.MARKET_MAKE, 0.5),
	(1.0, Zone.SELL_LIMIT, 0.5),
	(1.5, Zone.SELL_LIMIT, 0.5),
	(2.0, Zone.SELL_MARKET, 1.5),
])
def test_classify_zone_edges_belong_to_inner_zone(q, zone, target):
	bd = Boundaries(b_minus=0.5, b_plus=0.0, b_tilde_minus=1.5, b_tilde_plus=-0.5)
	decision = classify_zone(q, bd)
	assert decision.zone is zone
	assert decision.target == pytest.approx(target)
	assert decision.trade == pytest.approx(target - q)


def test_classify_zone_rejects_unordered_edges():
	with pytest.raises(ValueError):
		classify_zone(0.0, Boundaries(b_minus=-0.1, b_plus=0.1))


def test_quadratic_rate_zero_inside_band_and_continuous():
	mp = MarketParams(nu=0.01, C=0.02, K=0.1)
	g = 0.05
	assert trade_rate_quadratic(g, g, mp) == 0.0
	edge = g - mp.C
	assert trade_rate_quadratic(g, edge - 1e-12, mp) == pytest.approx(0.0, abs=1e-10)
	assert trade_rate_quadratic(g, edge + 1e-12, mp) == 0.0
	slopes = np.linspace(-1, 1, 101)
	np.testing.assert_allclose(
		trade_rate_quadratic(-g, -slopes, mp), -trade_rate_quadratic(g, slopes, mp)
	)
	with pytest.raises(ValueError):
		trade_rate_quadratic(g, 0.0, MarketParams(nu=0.01, C=0.02))


def test_power_rate_reduces_to_quadratic():
	mp = MarketParams(nu=0.01, C=0.02, K=0.1, p=2.0)
	slopes = np.linspace(-0.5, 0.5, 51)
	np.testing.assert_allclose(trade_rate_power(0.1, slopes, mp), trade_rate_quadratic(0.1, slopes, mp))


@pytest.mark.parametrize('p', [1.5, 2.0, 3.0])
def test_hjb_source_is_minimized_hamiltonian(p):
	mp = MarketParams(nu=0.01, C=0.02, K=0.3, p=p)
	g, slope = 0.4, 0.1
	u_star = float(trade_rate_power(g, slope, mp))
	res = minimize_scalar(
		lambda u: mp.K * abs(u) ** p + mp.C * abs(u) + (slope - g) * u,
		bounds=(-5.0, 5.0), method='bounded', options={'xatol': 1e-12}
	)
	assert res.x == pytest.approx(u_star, rel=1e-5)
	assert res.fun == pytest.approx(-float(hjb_source(u_star, mp)), rel=1e-8)


def test_fill_probability_base_value(tg):
	nu = 0.01
	C = 0.5 * math.sqrt(nu * tg.dt)
	mp = MarketParams(nu=nu, C=C)
	P_plus, P_minus = fill_probability(0.0, mp, tg)
	assert P_plus == pytest.approx(norm.cdf(-1.0))
	assert P_minus == pytest.approx(norm.cdf(-1.0))


def test_fill_probability_symmetry_and_cap(tg):
	mp = MarketParams(nu=0.01, C=0.0005)
	eps = np.linspace(-3, 3, 13)
	P_plus, P_minus = fill_probability(eps, mp, tg, beta_tilde=13.0)
	np.testing.assert_allclose(P_plus, P_minus[::-1])
	assert np.all(np.diff(P_minus) > 0)

	zero_spread = MarketParams(nu=0.01, C=0.0)
	assert fill_probability(0.0, zero_spread, tg)[0] == pytest.approx(0.5)
	_, P_minus = fill_probability(1e6, zero_spread, tg, cap=1e-3)
	assert P_minus == pytest.approx(1 - 1e-3)


def test_fill_probability_negligible_at_daily_units(tg):
	mp = MarketParams(nu=0.01, C=0.01)
	P_plus, _ = fill_probability(0.0, mp, tg)
	assert P_plus < 1e-12


def _model():
	return AlphaModel(OUParams.from_reversion_minutes(30), OUParams.from_reversion_minutes(1))


def test_decide_market_only_maps_to_three_zones(tg):
	mp = MarketParams(nu=0.01, C=0.01, lam=37.4)
	model = _model()
	state = SignalState(epsilon=0.0, alpha_daily=0.0)
	t = tg.t_open
	b_minus, b_plus = nt_boundaries(t, 0.0, mp, tg)

	low = decide(t, state, b_plus - 0.1, mp, tg, model, approximate_gain=True)
	assert low.zone is Zone.BUY_MARKET
	assert low.target == pytest.approx(b_plus)

	inside = decide(t, state, 0.0, mp, tg, model, approximate_gain=True)
	assert inside.zone is Zone.NO_TRADE
	assert inside.trade == 0.0

	high = decide(t, state, b_minus + 0.1, mp, tg, model, approximate_gain=True)
	assert high.zone is Zone.SELL_MARKET
	assert high.target == pytest.approx(b_minus)


def test_decide_uses_daily_alpha_as_target(tg):
	mp = MarketParams(nu=0.01, C=0.0, lam=37.4)
	state = SignalState(alpha_daily=0.0374)
	decision = decide(tg.t_open, state, 0.0, mp, tg, _model(), approximate_gain=True)
	assert decision.target == pytest.approx(0.1)


def test_decide_with_limits(tg):
	mp = MarketParams(nu=0.01, C=0.0005, lam=37.4)
	model = _model()
	state = SignalState(epsilon_fast=0.0)
	t = 0.9
	b_minus, _ = nt_boundaries(t, 0.0, mp, tg)
	q = b_minus + 1e-4
	decision = decide(t, state, q, mp, tg, model, mode=Mode.MARKET_AND_LIMIT, approximate_gain=True)
	assert decision.zone is Zone.SELL_LIMIT
	assert decision.target == pytest.approx(b_minus)
	with pytest.raises(ValueError):
		decide(0.1, state, q, mp, tg, model)


_ZONE_SEQUENCE = [Zone.BUY_MARKET, Zone.BUY_LIMIT, Zone.MARKET_MAKE, Zone.SELL_LIMIT, Zone.SELL_MARKET]


def _random_boundaries(rng):
	edges = np.sort(rng.normal(0.0, 1.0, 4))
	return Boundaries(b_minus=edges[2], b_plus=edges[1], b_tilde_minus=edges[3], b_tilde_plus=edges[0])


def test_zone_sequence_is_monotone_in_position(rng):
	for _ in range(10_000):
		bd = _random_boundaries(rng)
		qs = np.sort(rng.uniform(bd.b_tilde_plus - 1, bd.b_tilde_minus + 1, 2))
		lo, hi = (_ZONE_SEQUENCE.index(classify_zone(q, bd).zone) for q in qs)
		assert lo <= hi


def test_zone_label_is_shift_covariant(rng):
	for _ in range(10_000):
		bd = _random_boundaries(rng)
		q = rng.uniform(bd.b_tilde_plus - 1, bd.b_tilde_minus + 1)
		delta = float(rng.integers(-8, 9)) / 4
		shifted = Boundaries(
			b_minus=bd.b_minus + delta, b_plus=bd.b_plus + delta,
			b_tilde_minus=bd.b_tilde_minus + delta, b_tilde_plus=bd.b_tilde_plus + delta,
		)
		assert classify_zone(q + delta, shifted).zone is classify_zone(q, bd).zone


def test_rate_agrees_with_market_only_zones(rng, tg):
	mp = MarketParams.with_q_bar(0.2, nu=0.01, lam=37.4, C=0.01, K=0.05)
	n = 10_000
	t = rng.uniform(tg.t_open, tg.T, n)
	g = rng.normal(0.0, 0.02, n)
	q = rng.normal(0.2, 0.2, n)
	b_minus, b_plus = nt_boundaries(t, g, mp, tg)
	u = trade_rate_quadratic(g, dvalue_dq(t, q, mp, tg), mp)
	np.testing.assert_array_equal(u > 0, q < b_plus)
	np.testing.assert_array_equal(u < 0, q > b_minus)


def test_rate_non_decreasing_in_gain(rng):
	mp = MarketParams(nu=0.01, C=0.01, K=0.05)
	n = 10_000
	slope = rng.normal(0.0, 0.05, n)
	g = rng.normal(0.0, 0.05, n)
	step = np.abs(rng.normal(0.0, 0.01, n))
	assert np.all(trade_rate_quadratic(g + step, slope, mp) >= trade_rate_quadratic(g, slope, mp))
