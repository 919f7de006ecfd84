import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import ks_2samp

from alpha_trading.signals import (
	AlphaModel,
	OUParams,
	SignalState,
	TimeGrid,
	calibrate_beta,
	calibrate_lambda,
	daily_alpha_scale,
	fast_signal_dominates,
	gain_diffusion,
	gain_moments,
	gain_pde_residual,
	integrated_gain,
	ou_conditional_moments,
	ou_integrated_variance,
	ou_step,
	zscore_alpha,
)


def test_ou_params_validation():
	with pytest.raises(ValueError):
		OUParams(kappa=-1.0)
	with pytest.raises(ValueError):
		OUParams(kappa=1.0, eta=-0.1)
	with pytest.raises(ValueError):
		OUParams.from_reversion_minutes(0)


def test_zscore_params_from_reversion_time():
	ou = OUParams.from_reversion_minutes(30)
	assert ou.kappa == pytest.approx(48.0)
	assert ou.eta == pytest.approx(96.0)
	assert ou.stationary_variance == pytest.approx(1.0)
	assert ou.reversion_minutes == pytest.approx(30.0)
	assert OUParams.from_reversion_days(10).kappa == pytest.approx(0.1)


def test_time_grid_geometry():
	tg = TimeGrid()
	assert tg.steps_per_day == 1440
	assert tg.open_index == 1050
	assert tg.t_open == pytest.approx(1050 / 1440)
	times = tg.decision_times()
	assert len(times) == 390
	assert times[-1] + tg.dt == pytest.approx(tg.T)
	with pytest.raises(ValueError):
		TimeGrid(n_steps=1441)


def test_signal_state_rejects_non_finite():
	with pytest.raises(ValueError):
		SignalState(epsilon=math.nan)


def test_conditional_moments_limits():
	ou = OUParams(kappa=2.0, xbar=0.3, eta=0.5)
	mean, var = ou_conditional_moments(ou, 1.0, 0.2, 0.2)
	assert mean == pytest.approx(1.0)
	assert var == 0.0
	mean, var = ou_conditional_moments(ou, 1.0, 0.2, np.inf)
	assert mean == pytest.approx(0.3)
	assert var == pytest.approx(ou.stationary_variance)
	with pytest.raises(ValueError):
		ou_conditional_moments(ou, 1.0, 0.5, 0.2)


def test_ou_step_sample_moments(rng):
	ou = OUParams(kappa=2.0, xbar=0.1, eta=1.0)
	n = 100_000
	x = ou_step(ou, 0.5, 0.1, rng.standard_normal(n))
	mean, var = ou_conditional_moments(ou, 0.5, 0.0, 0.1)
	assert abs(x.mean() - mean) < 3 * math.sqrt(var / n)
	assert abs(x.var(ddof=1) - var) < 3 * var * math.sqrt(2 / (n - 1))


def test_ou_step_composes_over_substeps(rng):
	ou = OUParams(kappa=2.0, xbar=0.1, eta=1.0)
	n, n_sub, dt = 10_000, 20, 0.3
	x = np.full(n, 0.5)
	for _ in range(n_sub):
		x = ou_step(ou, x, dt / n_sub, rng.standard_normal(n))
	direct = ou_step(ou, 0.5, dt, rng.standard_normal(n))
	assert ks_2samp(x, direct).pvalue > 0.01


def test_integrated_gain_matches_mean_path_integral():
	ou = OUParams(kappa=3.0, xbar=0.05, eta=0.2)
	x, t, H = 0.4, 0.3, 2.0
	expected, _ = quad(lambda s: ou_conditional_moments(ou, x, t, s)[0], t, H)
	assert integrated_gain(ou, x, t, H) == pytest.approx(expected, rel=1e-10)


def test_integrated_gain_without_reversion():
	ou = OUParams(kappa=0.0, xbar=0.2)
	assert integrated_gain(ou, 0.7, 0.25, 2.0) == pytest.approx(0.7 * 1.75)
	with pytest.raises(ValueError):
		integrated_gain(ou, 0.7, 2.5, 2.0)


def test_gain_moments_against_sampling(rng):
	ou = OUParams(kappa=4.0, eta=0.08)
	x, t, s, H = 0.15, 0.7, 0.9, 2.0
	n = 100_000
	x_s = ou_step(ou, x, s - t, rng.standard_normal(n))
	g = integrated_gain(ou, x_s, s, H)
	gm = gain_moments(ou, x, t, s, H)
	assert abs(g.mean() - gm.mean) < 3 * gm.std / math.sqrt(n)
	assert abs(g.var(ddof=1) - gm.variance) < 3 * gm.variance * math.sqrt(2 / (n - 1))


def test_gain_variance_from_diffusion_coefficient():
	ou = OUParams(kappa=4.0, eta=0.08)
	t, s, H = 0.7, 0.95, 2.0
	decay, _ = quad(lambda u: math.exp(-2 * ou.kappa * (s - u)), t, s)
	expected = float(gain_diffusion(ou, s, H)) ** 2 * decay
	assert gain_moments(ou, 0.0, t, s, H).variance == pytest.approx(expected, rel=1e-10)


def test_gain_pde_residual_small():
	ou = OUParams(kappa=4.0, eta=0.08)
	t_points = np.linspace(0.3, 0.95, 20)
	x_points = np.linspace(-0.5, 0.5, 21)
	assert gain_pde_residual(ou, t_points, x_points, 2.0) < 1e-6


def test_gain_pde_residual_detects_wrong_gain():
	ou = OUParams(kappa=4.0, eta=0.08)
	t_points = np.linspace(0.3, 0.95, 20)
	x_points = np.linspace(-0.5, 0.5, 21)

	def scaled(x, t):
		return 1.01 * integrated_gain(ou, x, t, 2.0)

	assert gain_pde_residual(ou, t_points, x_points, 2.0, gain_fn=scaled) > 1e-3


def test_calibrations():
	assert calibrate_beta(2.1, 1.0) == pytest.approx(2.1 / math.sqrt(252))
	assert calibrate_lambda(2.0, 0.5) == pytest.approx(4.0)
	with pytest.raises(ValueError):
		calibrate_lambda(2.0, 0.0)
	np.testing.assert_allclose(zscore_alpha(2.0, 0.01, np.array([1.0, -0.5])), [0.2, -0.1])


def test_alpha_model_drift_params():
	model = AlphaModel(OUParams.from_reversion_minutes(30), OUParams.from_reversion_minutes(1))
	drift = model.drift_params(0.01)
	assert drift.kappa == model.ou_slow.kappa
	assert drift.stationary_variance == pytest.approx(model.beta ** 2 * 0.01)
	assert model.slow_gain(1.0, 0.8, 2.0, 0.01, approximate=True) == pytest.approx(0.1 / 48)
	assert model.slow_gain(1.0, 0.8, 2.0, 0.01) == pytest.approx(0.1 / 48, rel=1e-12)


def test_fast_signal_dominates():
	slow = OUParams.from_reversion_minutes(30)
	fast = OUParams.from_reversion_minutes(1)
	assert fast_signal_dominates(AlphaModel(slow, fast, beta=1.0, beta_tilde=13.0))
	assert not fast_signal_dominates(AlphaModel(slow, fast, beta=1.0, beta_tilde=0.5))
	assert not fast_signal_dominates(AlphaModel(slow, fast, beta=1.0, beta_tilde=100.0))


def test_ou_integrated_variance_matches_autocovariance():
	ou = OUParams(kappa=3.0, eta=0.6)
	tau = 0.8
	expected, _ = quad(
		lambda u: 2 * (tau - u) * ou.stationary_variance * math.exp(-ou.kappa * u), 0, tau
	)
	assert ou_integrated_variance(ou, tau) == pytest.approx(expected, rel=1e-10)


def test_daily_alpha_scale_hits_target_sharpe():
	tg = TimeGrid()
	nu, rev, annual, V = 0.01, 10.0, 2.1, 0.003
	s = daily_alpha_scale(annual, nu, tg, rev, intraday_variance=V)
	s2 = s ** 2
	phi = math.exp(-1 / rev)
	tau1, tau0 = tg.T - tg.t_open, tg.t_open
	mean = s2 * (tau1 + phi * tau0)
	var = s2 * (nu * tg.T + V) + s2 ** 2 * (
		2 * tau1 ** 2 + (1 + phi ** 2) * tau0 ** 2 + 4 * phi * tau0 * tau1
	)
	assert mean / math.sqrt(var) * math.sqrt(252) == pytest.approx(annual, rel=1e-10)


def test_daily_alpha_scale_edges():
	tg = TimeGrid()
	assert daily_alpha_scale(0.0, 0.01, tg, 10.0) == 0.0
	assert daily_alpha_scale(1.0, 0.01, tg, 10.0) < daily_alpha_scale(2.0, 0.01, tg, 10.0)
	with pytest.raises(ValueError):
		daily_alpha_scale(100.0, 0.01, tg, 10.0)
	with pytest.raises(ValueError):
		daily_alpha_scale(2.0, 0.01, tg, 0.0)
