"""Ornstein-Uhlenbeck alpha signals and their integrated gains.

Time is measured in days throughout (T = 1 is one day, dt = 1/1440 is one
minute). Signals in drift units are OU processes

	dx = kappa * (xbar - x) dt + sqrt(eta) dZ

and the intraday alphas are carried as unit-variance z-scores with
eta = 2 * kappa, mapped to drift units by x = beta * sqrt(nu) * epsilon.

All functions are vectorized over their signal/time arguments and hold no
random state: normal draws are supplied by the caller.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np


TRADING_DAYS_PER_YEAR = 252
MINUTES_PER_DAY = 1440
SMALL_RATE_TIME = 1e-12


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OUParams:
	"""Mean-reverting signal dynamics.

	Args:
		kappa (float): Mean-reversion rate in 1/day.
		xbar (float): Long-run mean in drift units.
		eta (float): Diffusion variance rate in drift^2/day.
	"""
	kappa: float
	xbar: float = 0.0
	eta: float = 0.0

	def __post_init__(self):
		if not self.kappa >= 0:
			raise ValueError(f'OU reversion rate kappa must be >= 0, got {self.kappa}.')
		if not self.eta >= 0:
			raise ValueError(f'OU variance rate eta must be >= 0, got {self.eta}.')
		if not math.isfinite(self.xbar):
			raise ValueError(f'OU mean xbar must be finite, got {self.xbar}.')

	@classmethod
	def from_reversion_minutes(cls, minutes, xbar=0.0, eta=None):
		"""Build parameters from a mean-reversion time in minutes.

		If eta is None the process is a unit-variance z-score (eta = 2 kappa).
		"""
		if minutes <= 0:
			raise ValueError(f'Reversion time must be positive, got {minutes} minutes.')
		return cls.from_reversion_days(minutes / MINUTES_PER_DAY, xbar=xbar, eta=eta)

	@classmethod
	def from_reversion_days(cls, days, xbar=0.0, eta=None):
		if days <= 0:
			raise ValueError(f'Reversion time must be positive, got {days} days.')
		kappa = 1.0 / days
		return cls(kappa=kappa, xbar=xbar, eta=2.0 * kappa if eta is None else eta)

	@property
	def stationary_variance(self):
		if self.kappa == 0:
			return math.inf
		return self.eta / (2.0 * self.kappa)

	@property
	def reversion_minutes(self):
		return math.inf if self.kappa == 0 else MINUTES_PER_DAY / self.kappa


@dataclass(frozen=True)
class TimeGrid:
	"""Trading-day geometry.

	The session is the last n_steps decision steps of the day, so
	t_open + n_steps * dt = T.

	Args:
		T (float): Day length in days. Default is 1.
		dt (float): Decision step in days. Default is one minute.
		n_steps (int): Decision steps per session. Default is 390 (6.5 hours).
	"""
	T: float = 1.0
	dt: float = 1.0 / MINUTES_PER_DAY
	n_steps: int = 390

	def __post_init__(self):
		if not self.dt > 0:
			raise ValueError(f'Decision step dt must be positive, got {self.dt}.')
		if not self.T > 0:
			raise ValueError(f'Day length T must be positive, got {self.T}.')
		if int(self.n_steps) != self.n_steps or self.n_steps < 1:
			raise ValueError(f'n_steps must be a positive integer, got {self.n_steps}.')
		if not self.t_open > 0:
			raise ValueError(
				f'Session of {self.n_steps} steps of {self.dt} days does not fit '
				f'in a day of length {self.T}.'
			)

	@property
	def t_open(self):
		return self.T - self.n_steps * self.dt

	@property
	def steps_per_day(self):
		"""Number of dt steps between consecutive closes."""
		n = self.T / self.dt
		if abs(n - round(n)) > 1e-9 * max(1.0, n):
			raise ValueError(f'Day length {self.T} is not a multiple of dt = {self.dt}.')
		return int(round(n))

	@property
	def open_index(self):
		"""Index of the opening decision on the per-day dt grid."""
		return self.steps_per_day - self.n_steps

	def decision_times(self):
		return self.t_open + self.dt * np.arange(self.n_steps)


@dataclass(frozen=True)
class SignalState:
	"""Observed signals at a decision time.

	Args:
		epsilon (float): Slow intraday z-score.
		epsilon_fast (float): Fast intraday z-score.
		alpha_daily (float): Daily drift alpha-bar in drift units.
	"""
	epsilon: float = 0.0
	epsilon_fast: float = 0.0
	alpha_daily: float = 0.0

	def __post_init__(self):
		for name in ('epsilon', 'epsilon_fast', 'alpha_daily'):
			if not math.isfinite(getattr(self, name)):
				raise ValueError(f'SignalState.{name} must be finite.')


@dataclass(frozen=True)
class GainMoments:
	"""Conditional mean and variance of g(s, x_s) given x_t = x."""
	mean: np.ndarray
	variance: np.ndarray

	@property
	def std(self):
		return np.sqrt(self.variance)


@dataclass(frozen=True)
class AlphaModel:
	"""Slow and fast intraday z-score signals and their loadings.

	Args:
		ou_slow (OUParams): Unit-variance dynamics of the slow z-score.
		ou_fast (OUParams): Unit-variance dynamics of the fast z-score.
		beta (float): Loading of the slow z-score. Default is 1.
		beta_tilde (float): Loading of the fast z-score. Default is 13.
	"""
	ou_slow: OUParams
	ou_fast: OUParams
	beta: float = 1.0
	beta_tilde: float = 13.0

	def slow_alpha(self, epsilon, nu):
		return zscore_alpha(self.beta, nu, epsilon)

	def fast_alpha(self, epsilon_fast, nu):
		return zscore_alpha(self.beta_tilde, nu, epsilon_fast)

	def drift_params(self, nu):
		"""OU parameters of the slow alpha x = beta sqrt(nu) epsilon."""
		s = self.beta ** 2 * nu
		return OUParams(
			kappa=self.ou_slow.kappa,
			xbar=self.beta * math.sqrt(nu) * self.ou_slow.xbar,
			eta=self.ou_slow.eta * s,
		)

	def slow_gain(self, epsilon, t, horizon_end, nu, approximate=False):
		"""Integrated gain of the slow signal.

		With approximate=True uses g = x / kappa, valid when
		kappa * (horizon_end - t) >> 1.
		"""
		x = self.slow_alpha(epsilon, nu)
		if approximate:
			if self.ou_slow.kappa == 0:
				raise ValueError('The gain approximation x/kappa needs kappa > 0.')
			return x / self.ou_slow.kappa
		return integrated_gain(self.drift_params(nu), x, t, horizon_end)


def _decay_integral(kappa, tau):
	"""(1 - exp(-kappa tau)) / kappa with its kappa tau -> 0 limit."""
	tau = np.asarray(tau, dtype=float)
	kt = kappa * tau
	small = np.abs(kt) < SMALL_RATE_TIME
	safe_kappa = kappa if kappa > 0 else 1.0
	with np.errstate(invalid='ignore'):
		regular = -np.expm1(-kt) / safe_kappa
	return np.where(small, tau * (1.0 - 0.5 * kt), regular)


def ou_conditional_moments(params, x, t, s):
	"""Mean and variance of x_s given x_t = x.

	Args:
		params (OUParams): Signal dynamics.
		x (float or np.ndarray): Signal value at time t.
		t (float or np.ndarray): Conditioning time.
		s (float or np.ndarray): Target time, s >= t. May be np.inf.

	Returns:
		(mean, variance) tuple.
	"""
	tau = np.asarray(s, dtype=float) - np.asarray(t, dtype=float)
	if np.any(tau < 0):
		raise ValueError('ou_conditional_moments requires s >= t.')
	x = np.asarray(x, dtype=float)
	mean = params.xbar + (x - params.xbar) * np.exp(-params.kappa * tau)
	variance = params.eta * _decay_integral(2.0 * params.kappa, tau)
	return mean, variance


def ou_step(params, x, dt, z):
	"""Exact OU transition over dt driven by the unit normal draw z."""
	if not np.all(np.asarray(dt) > 0):
		raise ValueError(f'ou_step requires dt > 0, got {dt}.')
	mean, variance = ou_conditional_moments(params, x, 0.0, dt)
	return mean + np.sqrt(variance) * np.asarray(z, dtype=float)


def integrated_gain(params, x, t, horizon_end):
	"""Expected integral of x_s over [t, horizon_end] given x_t = x.

	g = xbar (H - t) + (x - xbar)(1 - exp(-kappa (H - t))) / kappa, whose
	kappa = 0 limit is x (H - t).
	"""
	tau = np.asarray(horizon_end, dtype=float) - np.asarray(t, dtype=float)
	if np.any(tau < 0):
		raise ValueError('integrated_gain requires horizon_end >= t.')
	x = np.asarray(x, dtype=float)
	return params.xbar * tau + (x - params.xbar) * _decay_integral(params.kappa, tau)


def gain_moments(params, x, t, s, horizon_end):
	"""Gaussian law of g(s, x_s) conditional on x_t = x.

	The mean is the gain evaluated at the conditional mean path and the
	variance is the OU variance scaled by the squared gain slope in x.
	"""
	t_arr = np.asarray(t, dtype=float)
	s_arr = np.asarray(s, dtype=float)
	h_arr = np.asarray(horizon_end, dtype=float)
	if np.any(s_arr < t_arr) or np.any(h_arr < s_arr):
		raise ValueError('gain_moments requires t <= s <= horizon_end.')
	x_mean, x_var = ou_conditional_moments(params, x, t_arr, s_arr)
	slope = _decay_integral(params.kappa, h_arr - s_arr)
	return GainMoments(
		mean=integrated_gain(params, x_mean, s_arr, h_arr),
		variance=x_var * slope ** 2,
	)


def gain_diffusion(params, t, horizon_end):
	"""Coefficient of dZ in dg(t, x_t)."""
	tau = np.asarray(horizon_end, dtype=float) - np.asarray(t, dtype=float)
	if np.any(tau < 0):
		raise ValueError('gain_diffusion requires horizon_end >= t.')
	return math.sqrt(params.eta) * _decay_integral(params.kappa, tau)


def gain_pde_residual(params, t_points, x_points, horizon_end, h=1e-4, gain_fn=None):
	"""Max |D g + x| over the (t, x) grid by central finite differences.

	D is the generator d/dt + kappa (xbar - x) d/dx + (eta / 2) d^2/dx^2.
	gain_fn(x, t) overrides the analytic gain and is used for negative
	controls.
	"""
	if gain_fn is None:
		def gain_fn(x, t):
			return integrated_gain(params, x, t, horizon_end)

	t_mesh, x_mesh = np.meshgrid(
		np.asarray(t_points, dtype=float),
		np.asarray(x_points, dtype=float),
		indexing='ij'
	)
	if np.any(t_mesh + h > horizon_end):
		raise ValueError('Grid times must lie at least h before horizon_end.')

	g = gain_fn(x_mesh, t_mesh)
	g_t = (gain_fn(x_mesh, t_mesh + h) - gain_fn(x_mesh, t_mesh - h)) / (2 * h)
	g_up = gain_fn(x_mesh + h, t_mesh)
	g_down = gain_fn(x_mesh - h, t_mesh)
	g_x = (g_up - g_down) / (2 * h)
	g_xx = (g_up - 2 * g + g_down) / h ** 2

	generator = g_t + params.kappa * (params.xbar - x_mesh) * g_x + 0.5 * params.eta * g_xx
	return float(np.max(np.abs(generator + x_mesh)))


def zscore_alpha(beta, nu, epsilon):
	"""Map a z-score to drift units: x = beta sqrt(nu) epsilon."""
	if nu < 0:
		raise ValueError(f'Price variance rate nu must be >= 0, got {nu}.')
	return beta * math.sqrt(nu) * np.asarray(epsilon, dtype=float)


def calibrate_lambda(annual_sharpe, annual_vol):
	"""Risk aversion from the annual Sharpe and volatility of the daily target."""
	if not annual_vol > 0:
		raise ValueError(f'annual_vol must be positive, got {annual_vol}.')
	return annual_sharpe / annual_vol


def calibrate_beta(annual_sharpe, T):
	"""Slow-signal loading giving the requested annual Sharpe of the HF signal."""
	if not T > 0:
		raise ValueError(f'Day length T must be positive, got {T}.')
	return annual_sharpe / math.sqrt(TRADING_DAYS_PER_YEAR * T)


def fast_signal_dominates(model):
	"""True when the fast signal is stronger per unit time but weaker in gain.

	In that regime one-step fill probabilities depend on the fast z-score
	while the integrated gain depends on the slow one.
	"""
	slow, fast = model.ou_slow.kappa, model.ou_fast.kappa
	if slow == 0 or fast == 0:
		return False
	return model.beta_tilde > model.beta and model.beta_tilde / fast < model.beta / slow


def ou_integrated_variance(params, tau):
	"""Variance of the integral of a stationary OU process over tau days."""
	if params.kappa == 0:
		raise ValueError('A stationary OU process needs kappa > 0.')
	sigma2 = params.stationary_variance
	return 2.0 * sigma2 * (tau - float(_decay_integral(params.kappa, tau))) / params.kappa


def daily_alpha_scale(annual_sharpe, nu, tg, reversion_days, intraday_variance=0.0):
	"""Stationary std of the daily alpha for a target ideal-daily Sharpe.

	The ideal strategy holds alpha_d / (lambda nu) from the open of day d and
	carries it overnight, so day d earns alpha_d on today's target during the
	session and on yesterday's target before the open. With Gaussian AR(1)
	daily alphas of correlation phi the daily P&L has

		mean = s2 (tau1 + phi tau0) / (lambda nu)
		var  = [s2 (nu T + V) + s2^2 (2 tau1^2 + (1 + phi^2) tau0^2
			+ 4 phi tau0 tau1)] / (lambda nu)^2

	where tau1 is the session length, tau0 the pre-open time and V the
	variance of the integrated intraday alphas. The daily Sharpe
	annual_sharpe / sqrt(252) is solved for s2 in closed form.
	"""
	if reversion_days <= 0:
		raise ValueError(f'reversion_days must be positive, got {reversion_days}.')
	if annual_sharpe < 0:
		raise ValueError(f'annual_sharpe must be >= 0, got {annual_sharpe}.')
	phi = math.exp(-1.0 / reversion_days)
	tau1 = tg.T - tg.t_open
	tau0 = tg.t_open
	b = tau1 + phi * tau0
	d = 2 * tau1 ** 2 + (1 + phi ** 2) * tau0 ** 2 + 4 * phi * tau0 * tau1
	daily = annual_sharpe / math.sqrt(TRADING_DAYS_PER_YEAR)
	denom = b ** 2 - daily ** 2 * d
	if denom <= 0:
		raise ValueError(
			f'An annual Sharpe of {annual_sharpe} is unreachable by the ideal '
			'daily strategy for this session geometry.'
		)
	s2 = daily ** 2 * (nu * tg.T + intraday_variance) / denom
	logger.debug(f'daily alpha std {math.sqrt(s2):.6g} for annual Sharpe {annual_sharpe}')
	return math.sqrt(s2)
