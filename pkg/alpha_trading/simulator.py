"""Monte Carlo market and strategy engine.

Each simulated day has steps_per_day steps of length dt; the session is the
last n_steps of them. Over step k of day d the mid price moves by

	dP = (alpha_daily_d + x_k) dt + sqrt(nu) dW_k,
	x_k = sqrt(nu) (beta epsilon_k + beta_tilde epsilon_fast_k)

with epsilon and epsilon_fast unit-variance OU z-scores (exact AR(1)
discretization across day boundaries) and alpha_daily an AR(1) across days,
constant within a day. Positions are carried overnight and the first
position is 0.

Strategies all read the same PathSet:

	- DailyIdealNoCost / DailyIdealWithCost: trade to alpha_d / (lambda nu)
		at the open and hold.
	- HjbMarket: jump to the nearer no-trade band edge whenever outside it.
	- HjbMarketLimit: market orders outside the outer edges, one-step limit
		orders toward the band between the outer and inner edges. A limit
		buy fills iff the mid falls by at least 2C over the step, a sell iff
		it rises by 2C, and a fill earns the half-spread.

Gross P&L is marked to mid. Costs are C per unit for market orders and -C
per unit for filled limit orders. A market order trades at the start of its
step. A limit fill is booked at the end-of-step mid minus (buy) or plus (sell)
C, so the filled lot carries no exposure to the move that triggered it.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import pandas as pd
import psutil
from numba import njit
from scipy.signal import lfilter
from tqdm import tqdm

from alpha_trading.exceptions import ZeroVarianceError
from alpha_trading.policy import FILL_PROBABILITY_CAP, MarketParams, fill_probability
from alpha_trading.signals import (
	TRADING_DAYS_PER_YEAR,
	AlphaModel,
	OUParams,
	TimeGrid,
	daily_alpha_scale,
	integrated_gain,
	ou_integrated_variance,
)


logger = logging.getLogger(__name__)


PNL_COLUMNS = [
	'date_index',
	'gross',
	'linear_cost',
	'impact_cost',
	'net',
	'cum_net',
	'position_close',
	'trade_to_close',
	'close_to_close',
	'market_volume',
	'limit_volume',
	'n_fills',
]


class StrategyKind(Enum):
	DAILY_IDEAL_NO_COST = 'DailyIdealNoCost'
	DAILY_IDEAL_WITH_COST = 'DailyIdealWithCost'
	HJB_MARKET = 'HjbMarket'
	HJB_MARKET_LIMIT = 'HjbMarketLimit'


@dataclass(frozen=True)
class SimConfig:
	"""Simulation settings.

	Args:
		n_days (int): Simulated days.
		seed (int): Seed of all random streams.
		mp (MarketParams): nu, C and lambda; K must be 0 and alpha_bar is
			replaced by the simulated daily alpha.
		tg (TimeGrid): Day geometry. Default is one-minute steps with a
			390-minute session.
		ou_slow (OUParams): Slow z-score dynamics. Default is 30-minute
			reversion.
		ou_fast (OUParams): Fast z-score dynamics. Default is 1-minute
			reversion.
		beta (float): Slow loading. Default is 1.
		beta_tilde (float): Fast loading. Default is 13.
		daily_reversion_days (float): Reversion time of alpha_daily in days.
			Default is 10.
		annual_sharpe (float): Annual Sharpe of the cost-free ideal daily
			strategy, which sets the scale of alpha_daily. Default is 2.1.
		strategies (tuple): StrategyKind members to run. Default is all.
		approximate_gain (bool): Use g = beta sqrt(nu) epsilon / kappa.
			Default is True.
		fill_cap (float): Fill probabilities are clamped to 1 - fill_cap.
		initial_position (float): Position before the first open. Default is 0.
	"""
	n_days: int
	seed: int
	mp: MarketParams
	tg: TimeGrid = field(default_factory=TimeGrid)
	ou_slow: OUParams = field(default_factory=lambda: OUParams.from_reversion_minutes(30))
	ou_fast: OUParams = field(default_factory=lambda: OUParams.from_reversion_minutes(1))
	beta: float = 1.0
	beta_tilde: float = 13.0
	daily_reversion_days: float = 10.0
	annual_sharpe: float = 2.1
	strategies: tuple = tuple(StrategyKind)
	approximate_gain: bool = True
	fill_cap: float = FILL_PROBABILITY_CAP
	initial_position: float = 0.0

	def __post_init__(self):
		if int(self.n_days) != self.n_days or self.n_days < 1:
			raise ValueError(f'n_days must be a positive integer, got {self.n_days}.')
		if int(self.seed) != self.seed or self.seed < 0:
			raise ValueError(f'seed must be a non-negative integer, got {self.seed}.')
		if self.mp.K != 0:
			raise ValueError('Simulations trade in jump mode; set K = 0.')
		for name in ('ou_slow', 'ou_fast'):
			ou = getattr(self, name)
			if not ou.kappa > 0 or abs(ou.stationary_variance - 1.0) > 1e-12 or ou.xbar != 0:
				raise ValueError(f'{name} must be a stationary zero-mean unit-variance z-score.')
		if self.beta < 0 or self.beta_tilde < 0:
			raise ValueError('Signal loadings beta and beta_tilde must be >= 0.')
		if self.approximate_gain and self.beta > 0 and self.ou_slow.kappa * self.tg.T < 1:
			logger.warning('Gain approximation x / kappa used with kappa T < 1.')
		strategies = tuple(StrategyKind(s) for s in self.strategies)
		if not strategies:
			raise ValueError('At least one strategy is required.')
		object.__setattr__(self, 'strategies', strategies)
		if self.tg.steps_per_day < self.tg.n_steps:
			raise ValueError('The session is longer than the day.')

	@property
	def model(self):
		return AlphaModel(self.ou_slow, self.ou_fast, self.beta, self.beta_tilde)

	@property
	def intraday_variance(self):
		"""Variance of one day's integrated intraday alpha."""
		total = 0.0
		for ou, loading in ((self.ou_slow, self.beta), (self.ou_fast, self.beta_tilde)):
			if loading > 0:
				drift = replace(ou, eta=ou.eta * loading ** 2 * self.mp.nu)
				total += ou_integrated_variance(drift, self.tg.T)
		return total

	@property
	def alpha_daily_std(self):
		if self.annual_sharpe == 0:
			return 0.0
		return daily_alpha_scale(
			self.annual_sharpe, self.mp.nu, self.tg, self.daily_reversion_days,
			intraday_variance=self.intraday_variance
		)


@dataclass
class PathSet:
	"""Simulated market for n_days days.

	price has shape (n_days, steps_per_day + 1) with price[d, 0] equal to the
	previous close; the per-step arrays have shape (n_days, steps_per_day) and
	hold values at the start of each step. price_noise holds the Wiener
	increments dW.
	"""
	price: np.ndarray
	price_noise: np.ndarray
	epsilon: np.ndarray
	epsilon_fast: np.ndarray
	alpha_daily: np.ndarray
	tg: TimeGrid
	nu: float
	beta: float
	beta_tilde: float

	def __post_init__(self):
		n_days, n = self.epsilon.shape
		assert self.price.shape == (n_days, n + 1), 'price must have one more column than the step arrays.'
		assert self.price_noise.shape == (n_days, n), 'price_noise shape mismatch.'
		assert self.epsilon_fast.shape == (n_days, n), 'epsilon_fast shape mismatch.'
		assert self.alpha_daily.shape == (n_days,), 'alpha_daily must have one value per day.'

	@property
	def n_days(self):
		return self.alpha_daily.shape[0]

	@property
	def price_increments(self):
		return np.diff(self.price, axis=1)

	def drift(self):
		"""Drift alpha_daily + x over every step."""
		x = math.sqrt(self.nu) * (self.beta * self.epsilon + self.beta_tilde * self.epsilon_fast)
		return self.alpha_daily[:, None] + x


@dataclass
class PnLSeries:
	"""Per-day P&L of one strategy.

	frame has the PNL_COLUMNS columns, one row per day, with
	net = gross - linear_cost - impact_cost and cum_net its prefix sum.
	"""
	strategy: StrategyKind
	frame: pd.DataFrame

	@property
	def net(self):
		return self.frame['net'].to_numpy()

	@property
	def cumulative(self):
		return self.frame['cum_net'].to_numpy()

	@property
	def sharpe(self):
		return compute_sharpe(self)

	def __len__(self):
		return len(self.frame)


@dataclass
class StrategyTrace:
	"""Session-step detail of a zone strategy, arrays of shape (n_days, n_steps).

	exposures holds the position carried over each step and positions the
	position at its end. They differ only on limit-fill steps.
	"""
	exposures: np.ndarray
	positions: np.ndarray
	market_trades: np.ndarray
	limit_trades: np.ndarray
	b_minus: np.ndarray
	b_plus: np.ndarray
	b_tilde_minus: np.ndarray
	b_tilde_plus: np.ndarray
	start_position: float


def _ar1(phi, scale, innovations, x0):
	"""x_k = phi x_{k-1} + scale z_k over a flat innovation vector, x_{-1} = x0."""
	out, _ = lfilter([scale], [1.0, -phi], innovations, zi=[phi * x0])
	return out


def generate_paths(cfg):
	"""Simulate prices and signals for cfg.n_days days.

	The W, Z, Z_fast and daily streams are spawned from one SeedSequence,
	so the paths depend only on the seed and the market settings.
	"""
	tg = cfg.tg
	n = tg.steps_per_day
	n_total = cfg.n_days * n
	rng_w, rng_z, rng_zf, rng_daily = (
		np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(4)
	)

	z_price = rng_w.standard_normal(n_total)
	z_slow = rng_z.standard_normal(n_total)
	z_fast = rng_zf.standard_normal(n_total)
	z_daily = rng_daily.standard_normal(cfg.n_days)

	def zscore_path(ou, z):
		phi = math.exp(-ou.kappa * tg.dt)
		rest = _ar1(phi, math.sqrt(-math.expm1(-2 * ou.kappa * tg.dt)), z[1:], z[0])
		return np.concatenate([z[:1], rest]).reshape(cfg.n_days, n)

	epsilon = zscore_path(cfg.ou_slow, z_slow)
	epsilon_fast = zscore_path(cfg.ou_fast, z_fast)

	std = cfg.alpha_daily_std
	phi_d = math.exp(-1.0 / cfg.daily_reversion_days)
	alpha_daily = std * np.concatenate([
		z_daily[:1],
		_ar1(phi_d, math.sqrt(1 - phi_d ** 2), z_daily[1:], z_daily[0]),
	])

	price_noise = math.sqrt(tg.dt) * z_price.reshape(cfg.n_days, n)
	paths = PathSet(
		price=np.zeros((cfg.n_days, n + 1)),
		price_noise=price_noise,
		epsilon=epsilon,
		epsilon_fast=epsilon_fast,
		alpha_daily=alpha_daily,
		tg=tg,
		nu=cfg.mp.nu,
		beta=cfg.beta,
		beta_tilde=cfg.beta_tilde,
	)
	increments = paths.drift() * tg.dt + math.sqrt(cfg.mp.nu) * price_noise
	flat = np.concatenate([[0.0], np.cumsum(increments.ravel())])
	closes = flat[::n]
	paths.price[:, 0] = closes[:-1]
	paths.price[:, 1:] = flat[1:].reshape(cfg.n_days, n)
	logger.debug(f'generated {cfg.n_days} days, alpha_daily std {std:.6g}')
	return paths


def limit_fills(price_increments, C):
	"""Fill events of one-step top-of-book orders: (buy filled, sell filled)."""
	return price_increments <= -2 * C, price_increments >= 2 * C


def _pnl_series(strategy, paths, start_position, exposures, positions, market_trades, limit_trades, C):
	"""Daily accounting for per-step session exposures and end-of-step positions."""
	tg = paths.tg
	dP = paths.price_increments
	open_idx = tg.open_index
	closes = positions[:, -1]
	prev_close = np.concatenate([[start_position], closes[:-1]])

	gross = (
		prev_close * (paths.price[:, open_idx] - paths.price[:, 0])
		+ np.sum(exposures * dP[:, open_idx:], axis=1)
	)
	close_to_close = prev_close * (paths.price[:, -1] - paths.price[:, 0])
	market_volume = np.sum(np.abs(market_trades), axis=1)
	limit_volume = np.sum(np.abs(limit_trades), axis=1)
	linear_cost = C * (market_volume - limit_volume)
	impact_cost = np.zeros(paths.n_days)
	net = gross - linear_cost - impact_cost

	frame = pd.DataFrame({
		'date_index': np.arange(paths.n_days),
		'gross': gross,
		'linear_cost': linear_cost,
		'impact_cost': impact_cost,
		'net': net,
		'cum_net': np.cumsum(net),
		'position_close': closes,
		'trade_to_close': gross - close_to_close,
		'close_to_close': close_to_close,
		'market_volume': market_volume,
		'limit_volume': limit_volume,
		'n_fills': np.count_nonzero(limit_trades, axis=1),
	})
	return PnLSeries(strategy=strategy, frame=frame[PNL_COLUMNS])


def run_daily_strategy(paths, cfg, with_costs):
	"""Trade to alpha_d / (lambda nu) at each open and hold to the next open."""
	n_steps = cfg.tg.n_steps
	targets = paths.alpha_daily / cfg.mp.risk
	positions = np.repeat(targets[:, None], n_steps, axis=1)
	market_trades = np.zeros_like(positions)
	market_trades[:, 0] = np.diff(np.concatenate([[cfg.initial_position], targets]))
	kind = StrategyKind.DAILY_IDEAL_WITH_COST if with_costs else StrategyKind.DAILY_IDEAL_NO_COST
	return _pnl_series(
		kind, paths, cfg.initial_position, positions, positions, market_trades,
		np.zeros_like(positions), cfg.mp.C if with_costs else 0.0
	)


def _session_gains(paths, cfg):
	tg = cfg.tg
	eps = paths.epsilon[:, tg.open_index:]
	x = cfg.beta * math.sqrt(cfg.mp.nu) * eps
	if cfg.approximate_gain:
		return x / cfg.ou_slow.kappa
	drift = cfg.model.drift_params(cfg.mp.nu)
	return integrated_gain(drift, x, tg.decision_times()[None, :], 2 * tg.T)


@njit(cache=True)
def _zone_kernel(q0, b_tilde_plus, b_plus, b_minus, b_tilde_minus, buy_fill, sell_fill):
	"""Sequential zone decisions over flat session-step arrays.

	Returns (exposures, positions, market, limit). A market order is sent at
	the start of the step and is held over it. A limit fill completes at the
	end of the step, so the step is held at the pre-fill position.
	"""
	n = b_plus.size
	exposures = np.empty(n)
	positions = np.empty(n)
	market = np.zeros(n)
	limit = np.zeros(n)
	q = q0
	for k in range(n):
		if q < b_tilde_plus[k]:
			market[k] = b_tilde_plus[k] - q
			q = b_tilde_plus[k]
			exposures[k] = q
		elif q < b_plus[k]:
			exposures[k] = q
			if buy_fill[k]:
				limit[k] = b_plus[k] - q
				q = b_plus[k]
		elif q <= b_minus[k]:
			exposures[k] = q
		elif q <= b_tilde_minus[k]:
			exposures[k] = q
			if sell_fill[k]:
				limit[k] = b_minus[k] - q
				q = b_minus[k]
		else:
			market[k] = b_tilde_minus[k] - q
			q = b_tilde_minus[k]
			exposures[k] = q
		positions[k] = q
	return exposures, positions, market, limit


def trace_hjb_strategy(paths, cfg, use_limits=False):
	"""Step-by-step positions of the jump-mode zone strategy.

	With use_limits=False only market orders are sent and the outer edges
	coincide with the band edges.
	"""
	tg = cfg.tg
	mp = cfg.mp
	C = mp.C
	g = _session_gains(paths, cfg)
	q_bar = (paths.alpha_daily / mp.risk)[:, None]
	denom = (mp.risk * (2 * tg.T - tg.decision_times()))[None, :]
	b_minus = q_bar + (g + C) / denom
	b_plus = q_bar + (g - C) / denom

	if use_limits:
		P_plus, P_minus = fill_probability(
			paths.epsilon_fast[:, tg.open_index:], mp, tg,
			beta_tilde=cfg.beta_tilde, cap=cfg.fill_cap
		)
		b_tilde_minus = q_bar + (g + C * (1 + P_minus) / (1 - P_minus)) / denom
		b_tilde_plus = q_bar + (g - C * (1 + P_plus) / (1 - P_plus)) / denom
		buy_fill, sell_fill = limit_fills(paths.price_increments[:, tg.open_index:], C)
	else:
		b_tilde_minus, b_tilde_plus = b_minus, b_plus
		buy_fill = sell_fill = np.zeros(b_minus.shape, dtype=bool)

	shape = b_minus.shape
	edges = (
		np.ascontiguousarray(a, dtype=np.float64).ravel()
		for a in (b_tilde_plus, b_plus, b_minus, b_tilde_minus)
	)
	fills = (np.ascontiguousarray(a, dtype=np.bool_).ravel() for a in (buy_fill, sell_fill))
	exposures, positions, market, limit = _zone_kernel(float(cfg.initial_position), *edges, *fills)

	return StrategyTrace(
		exposures=exposures.reshape(shape),
		positions=positions.reshape(shape),
		market_trades=market.reshape(shape),
		limit_trades=limit.reshape(shape),
		b_minus=b_minus,
		b_plus=b_plus,
		b_tilde_minus=b_tilde_minus,
		b_tilde_plus=b_tilde_plus,
		start_position=cfg.initial_position,
	)


def _trace_pnl(kind, paths, cfg, trace):
	return _pnl_series(
		kind, paths, trace.start_position, trace.exposures, trace.positions,
		trace.market_trades, trace.limit_trades, cfg.mp.C
	)


def run_hjb_market(paths, cfg):
	return _trace_pnl(StrategyKind.HJB_MARKET, paths, cfg, trace_hjb_strategy(paths, cfg))


def run_hjb_limit(paths, cfg):
	trace = trace_hjb_strategy(paths, cfg, use_limits=True)
	return _trace_pnl(StrategyKind.HJB_MARKET_LIMIT, paths, cfg, trace)


def compute_sharpe(pnl):
	"""Annualized Sharpe mean / std (ddof=1) * sqrt(252) of daily net P&L.

	Args:
		pnl (PnLSeries or array-like): Daily net P&L.
	"""
	net = pnl.net if isinstance(pnl, PnLSeries) else np.asarray(pnl, dtype=float)
	if net.size < 2:
		raise ValueError(f'A Sharpe ratio needs at least 2 daily records, got {net.size}.')
	std = float(np.std(net, ddof=1))
	mean = float(np.mean(net))
	if std == 0 or std <= 1e-15 * abs(mean):
		raise ZeroVarianceError('Daily P&L has zero variance.')
	return mean / std * math.sqrt(TRADING_DAYS_PER_YEAR)


_RUNNERS = {
	StrategyKind.DAILY_IDEAL_NO_COST: lambda paths, cfg: run_daily_strategy(paths, cfg, False),
	StrategyKind.DAILY_IDEAL_WITH_COST: lambda paths, cfg: run_daily_strategy(paths, cfg, True),
	StrategyKind.HJB_MARKET: run_hjb_market,
	StrategyKind.HJB_MARKET_LIMIT: run_hjb_limit,
}


@dataclass
class ExperimentReport:
	seed: int
	results: dict
	alpha_daily_std: float

	@property
	def sharpes(self):
		out = {}
		for kind, pnl in self.results.items():
			try:
				out[kind.value] = compute_sharpe(pnl)
			except ZeroVarianceError:
				out[kind.value] = math.nan
		return out

	def cumulative_frame(self):
		"""Wide table of cumulative net P&L, one column per strategy."""
		first = next(iter(self.results.values()))
		frame = pd.DataFrame({'date_index': first.frame['date_index']})
		for kind, pnl in self.results.items():
			frame[kind.value] = pnl.cumulative
		return frame

	def summary(self):
		sharpes = self.sharpes
		return {
			'seed': self.seed,
			'alpha_daily_std': self.alpha_daily_std,
			'strategies': {
				kind.value: {
					'sharpe_annualized': None if math.isnan(sharpes[kind.value]) else sharpes[kind.value],
					'total_net': float(pnl.frame['net'].sum()),
					'total_linear_cost': float(pnl.frame['linear_cost'].sum()),
					'n_fills': int(pnl.frame['n_fills'].sum()),
				}
				for kind, pnl in self.results.items()
			},
		}


def run_experiment(cfg, paths=None):
	"""Run every configured strategy on one shared PathSet."""
	paths = generate_paths(cfg) if paths is None else paths
	results = {}
	for kind in cfg.strategies:
		results[kind] = _RUNNERS[kind](paths, cfg)
		logger.info(f'seed {cfg.seed} {kind.value}: total net {results[kind].frame["net"].sum():.6g}')
	return ExperimentReport(seed=cfg.seed, results=results, alpha_daily_std=cfg.alpha_daily_std)


def _seed_sharpes(cfg):
	return cfg.seed, run_experiment(cfg).sharpes


def run_seed_sweep(cfg, seeds, n_jobs=None, verbose=True):
	"""Sharpe of every strategy for each seed.

	Args:
		cfg (SimConfig): Template configuration; its seed is replaced.
		seeds (list): Seeds to evaluate.
		n_jobs (int): Worker processes. Default is the physical core count.
		verbose (bool): Show a progress bar. Default is True.

	Returns:
		pd.DataFrame with a 'seed' column and one Sharpe column per strategy,
		sorted by seed.
	"""
	seeds = list(seeds)
	if not seeds:
		raise ValueError('run_seed_sweep needs at least one seed.')
	if len(set(seeds)) != len(seeds):
		raise ValueError('Seeds must be distinct.')
	if n_jobs is None:
		n_jobs = psutil.cpu_count(logical=False) or 1
	n_jobs = max(1, min(n_jobs, len(seeds)))
	configs = [replace(cfg, seed=int(s)) for s in seeds]

	rows = []
	if n_jobs == 1:
		for c in tqdm(configs, desc='Seeds', ncols=100, disable=not verbose):
			rows.append(_seed_sharpes(c))
	else:
		with ProcessPoolExecutor(max_workers=n_jobs) as executor:
			futures = [executor.submit(_seed_sharpes, c) for c in configs]
			for fut in tqdm(as_completed(futures), total=len(futures), desc='Seeds', ncols=100,
					disable=not verbose):
				rows.append(fut.result())

	table = pd.DataFrame([{'seed': seed, **sharpes} for seed, sharpes in rows])
	return table.sort_values('seed').reset_index(drop=True)
