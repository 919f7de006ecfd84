"""Approximate value function, trading zones and trading rates.

Positions are tracked against the daily Markowitz target
q_bar = alpha_bar / (lambda nu). Low positions (below b_plus) are in the buy
region, high positions (above b_minus) in the sell region. With limit orders
the buy side splits at b_tilde_plus into a market-order zone below and a
limit-order zone above, and symmetrically on the sell side:

	b_tilde_plus <= b_plus <= b_minus <= b_tilde_minus

A position exactly on an edge belongs to the inner, less aggressive zone.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.stats import norm


FILL_PROBABILITY_CAP = 1e-6


logger = logging.getLogger(__name__)


class Zone(Enum):
	BUY_MARKET = 'buy_market'
	BUY_LIMIT = 'buy_limit'
	MARKET_MAKE = 'market_make'
	SELL_LIMIT = 'sell_limit'
	SELL_MARKET = 'sell_market'
	NO_TRADE = 'no_trade'


class Mode(Enum):
	MARKET_ONLY = 'market_only'
	MARKET_AND_LIMIT = 'market_and_limit'


@dataclass(frozen=True)
class MarketParams:
	"""Scalar model constants.

	Args:
		nu (float): Price variance rate in price^2/day.
		C (float): Half-spread in price units.
		K (float): Temporary impact coefficient. Default is 0 (jump mode).
		lam (float): Risk aversion lambda. Default is 1.
		alpha_bar (float): Daily drift in price/day. Default is 0.
		p (float): Impact exponent. Default is 2.
	"""
	nu: float
	C: float
	K: float = 0.0
	lam: float = 1.0
	alpha_bar: float = 0.0
	p: float = 2.0

	def __post_init__(self):
		if not self.nu > 0:
			raise ValueError(f'Price variance rate nu must be positive, got {self.nu}.')
		if not self.C >= 0:
			raise ValueError(f'Half-spread C must be >= 0, got {self.C}.')
		if not self.K >= 0:
			raise ValueError(f'Impact coefficient K must be >= 0, got {self.K}.')
		if not self.lam > 0:
			raise ValueError(f'Risk aversion lambda must be positive, got {self.lam}.')
		if not self.p > 1:
			raise ValueError(f'Impact exponent p must be > 1, got {self.p}.')
		if not math.isfinite(self.alpha_bar):
			raise ValueError(f'alpha_bar must be finite, got {self.alpha_bar}.')

	@property
	def q_bar(self):
		return self.alpha_bar / (self.lam * self.nu)

	@property
	def risk(self):
		"""lambda * nu, the curvature of the risk penalty."""
		return self.lam * self.nu

	@property
	def A(self):
		"""sqrt(lambda nu / 2K), the inverse relaxation time under quadratic impact."""
		if not self.K > 0:
			raise ValueError('A is defined only for K > 0.')
		return math.sqrt(self.lam * self.nu / (2.0 * self.K))

	@classmethod
	def with_q_bar(cls, q_bar, nu, lam, **kwargs):
		return cls(nu=nu, lam=lam, alpha_bar=q_bar * lam * nu, **kwargs)


@dataclass(frozen=True)
class Boundaries:
	"""Zone edges in position units.

	b_tilde_* default to the corresponding b_* (market orders only).
	"""
	b_minus: float
	b_plus: float
	b_tilde_minus: float = None
	b_tilde_plus: float = None

	def __post_init__(self):
		if self.b_tilde_minus is None:
			object.__setattr__(self, 'b_tilde_minus', self.b_minus)
		if self.b_tilde_plus is None:
			object.__setattr__(self, 'b_tilde_plus', self.b_plus)

	def is_ordered(self):
		return bool(np.all(
			(self.b_tilde_plus <= self.b_plus)
			& (self.b_plus <= self.b_minus)
			& (self.b_minus <= self.b_tilde_minus)
		))


@dataclass(frozen=True)
class ZoneDecision:
	zone: Zone
	target: float
	position: float

	@property
	def trade(self):
		return self.target - self.position


def _check_before_horizon(t, tg):
	if np.any(np.asarray(t) >= 2 * tg.T):
		raise ValueError('Boundaries are defined only for t < 2T.')


def value_approx(t, q, x, mp, tg):
	"""Leading-order value 0.5 lambda nu (2T - t)(q - q_bar)^2.

	The signal x does not enter at this order.
	"""
	if np.any(np.asarray(t) > tg.T):
		raise ValueError('value_approx is defined for t <= T.')
	return 0.5 * mp.risk * (2 * tg.T - np.asarray(t)) * (np.asarray(q) - mp.q_bar) ** 2


def dvalue_dq(t, q, mp, tg):
	if np.any(np.asarray(t) > tg.T):
		raise ValueError('dvalue_dq is defined for t <= T.')
	return mp.risk * (2 * tg.T - np.asarray(t)) * (np.asarray(q) - mp.q_bar)


def value_from_objective(omega, t, q, g, mp, tg):
	"""V = Omega + g q + 0.5 lambda nu q_bar^2 (2T - t).

	The two objectives differ by terms independent of the trading rate.
	"""
	return omega + g * q + 0.5 * mp.risk * mp.q_bar ** 2 * (2 * tg.T - t)


def objective_from_value(value, t, q, g, mp, tg):
	return value - g * q - 0.5 * mp.risk * mp.q_bar ** 2 * (2 * tg.T - t)


def nt_boundaries(t, g, mp, tg):
	"""No-trade band edges (b_minus, b_plus) = q_bar + (g -/+ C) / (lambda nu (2T - t))."""
	_check_before_horizon(t, tg)
	denom = mp.risk * (2 * tg.T - np.asarray(t, dtype=float))
	g = np.asarray(g, dtype=float)
	b_minus = mp.q_bar + (g + mp.C) / denom
	b_plus = mp.q_bar + (g - mp.C) / denom
	return b_minus, b_plus


def limit_boundaries(t, g, P_plus, P_minus, mp, tg):
	"""All four edges when limit orders fill with probabilities P_plus/P_minus.

	Market-order edges use the inflated cost C (1 + P) / (1 - P).
	"""
	P_plus = np.asarray(P_plus, dtype=float)
	P_minus = np.asarray(P_minus, dtype=float)
	for name, P in (('P_plus', P_plus), ('P_minus', P_minus)):
		if np.any(P < 0) or np.any(P >= 1):
			raise ValueError(f'{name} must lie in [0, 1).')
	b_minus, b_plus = nt_boundaries(t, g, mp, tg)
	denom = mp.risk * (2 * tg.T - np.asarray(t, dtype=float))
	g = np.asarray(g, dtype=float)
	c_plus = mp.C * (1 + P_plus) / (1 - P_plus)
	c_minus = mp.C * (1 + P_minus) / (1 - P_minus)
	return Boundaries(
		b_minus=b_minus,
		b_plus=b_plus,
		b_tilde_minus=mp.q_bar + (g + c_minus) / denom,
		b_tilde_plus=mp.q_bar + (g - c_plus) / denom,
	)


def classify_zone(q, bd):
	"""Five-way zone of position q and the position to trade toward."""
	if not bd.is_ordered():
		raise ValueError(
			'Boundaries must satisfy b_tilde_plus <= b_plus <= b_minus <= b_tilde_minus, '
			f'got {bd}.'
		)
	if q < bd.b_tilde_plus:
		return ZoneDecision(Zone.BUY_MARKET, float(bd.b_tilde_plus), q)
	if q < bd.b_plus:
		return ZoneDecision(Zone.BUY_LIMIT, float(bd.b_plus), q)
	if q <= bd.b_minus:
		return ZoneDecision(Zone.MARKET_MAKE, q, q)
	if q <= bd.b_tilde_minus:
		return ZoneDecision(Zone.SELL_LIMIT, float(bd.b_minus), q)
	return ZoneDecision(Zone.SELL_MARKET, float(bd.b_tilde_minus), q)


def trade_rate_quadratic(g, dVdq, mp):
	"""u = [(g - C - V_q)_+ - (-g - C + V_q)_+] / 2K."""
	if not mp.K > 0:
		raise ValueError('trade_rate_quadratic needs K > 0; use classify_zone for jump mode.')
	g = np.asarray(g, dtype=float)
	dVdq = np.asarray(dVdq, dtype=float)
	buy = np.maximum(g - mp.C - dVdq, 0.0)
	sell = np.maximum(-g - mp.C + dVdq, 0.0)
	return (buy - sell) / (2 * mp.K)


def trade_rate_power(g, dVdq, mp):
	"""Optimal rate under impact K |u|^p."""
	if not mp.p > 1:
		raise ValueError(f'Impact exponent p must be > 1, got {mp.p}.')
	if not mp.K > 0:
		raise ValueError('trade_rate_power needs K > 0.')
	g = np.asarray(g, dtype=float)
	dVdq = np.asarray(dVdq, dtype=float)
	expo = 1.0 / (mp.p - 1)
	scale = (1.0 / (mp.p * mp.K)) ** expo
	buy = np.maximum(g - mp.C - dVdq, 0.0) ** expo
	sell = np.maximum(-g - mp.C + dVdq, 0.0) ** expo
	return scale * (buy - sell)


def hjb_source(u, mp):
	"""K (p - 1)|u|^p, the impact term left in the HJB after minimizing over u."""
	return mp.K * (mp.p - 1) * np.abs(np.asarray(u, dtype=float)) ** mp.p


def fill_probability(epsilon_fast, mp, tg, beta_tilde=1.0, cap=FILL_PROBABILITY_CAP):
	"""Chance that a top-of-book limit order fills within one step.

	A buy fills when the price falls by at least 2C over dt, a sell when it
	rises by 2C. The drift over the step is the fast alpha
	beta_tilde sqrt(nu) epsilon_fast. The default beta_tilde = 1 gives the
	plain sqrt(nu) epsilon_fast drift, which only holds when the fast loading
	is 1; callers with a loaded fast signal pass its beta_tilde so the
	probabilities match the fills of a simulated price.

	Returns:
		(P_plus, P_minus) tuple, clamped to [0, 1 - cap].
	"""
	drift = beta_tilde * math.sqrt(mp.nu) * np.asarray(epsilon_fast, dtype=float)
	scale = math.sqrt(mp.nu / tg.dt)
	shift = 2 * mp.C / tg.dt
	P_plus = norm.cdf((-drift - shift) / scale)
	P_minus = norm.cdf((drift - shift) / scale)
	return np.clip(P_plus, 0.0, 1.0 - cap), np.clip(P_minus, 0.0, 1.0 - cap)


_MARKET_ONLY_ZONES = {
	Zone.BUY_LIMIT: Zone.BUY_MARKET,
	Zone.SELL_LIMIT: Zone.SELL_MARKET,
	Zone.MARKET_MAKE: Zone.NO_TRADE,
}


def decide(t, state, q, mp, tg, model, mode=Mode.MARKET_ONLY, approximate_gain=False,
		fill_cap=FILL_PROBABILITY_CAP):
	"""Trading decision at time t for position q.

	Args:
		t (float): Decision time within the session.
		state (SignalState): Observed signals; alpha_daily sets q_bar.
		q (float): Current position.
		mp (MarketParams): Model constants; alpha_bar is taken from state.
		tg (TimeGrid): Day geometry.
		model (AlphaModel): Signal loadings and dynamics.
		mode (Mode): Market orders only or market and limit orders.
		approximate_gain (bool): Use g = x / kappa. Default is False.

	Returns:
		ZoneDecision.
	"""
	if not (tg.t_open - 1e-12 <= t <= tg.T):
		raise ValueError(f'Decision time {t} lies outside the session.')
	mp = replace(mp, alpha_bar=state.alpha_daily)
	g = float(model.slow_gain(state.epsilon, t, 2 * tg.T, mp.nu, approximate=approximate_gain))

	if mode is Mode.MARKET_ONLY:
		b_minus, b_plus = nt_boundaries(t, g, mp, tg)
		decision = classify_zone(q, Boundaries(float(b_minus), float(b_plus)))
		return replace(decision, zone=_MARKET_ONLY_ZONES.get(decision.zone, decision.zone))

	P_plus, P_minus = fill_probability(
		state.epsilon_fast, mp, tg, beta_tilde=model.beta_tilde, cap=fill_cap
	)
	bd = limit_boundaries(t, g, P_plus, P_minus, mp, tg)
	bd = Boundaries(*(float(v) for v in (bd.b_minus, bd.b_plus, bd.b_tilde_minus, bd.b_tilde_plus)))
	return classify_zone(q, bd)
