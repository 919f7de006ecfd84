"""Configuration loading.

User configurations are JSON files holding any subset of the keys in the
bundled default_config.json; they are deep-merged on top of the defaults.
Keys carry their units (e.g. 'half_spread_price', 'reversion_minutes').
"""

import copy
import json
import logging
import math
import os

from alpha_trading.oracle import GridSpec
from alpha_trading.policy import MarketParams
from alpha_trading.signals import (
	MINUTES_PER_DAY,
	OUParams,
	TimeGrid,
	fast_signal_dominates,
)
from alpha_trading.simulator import SimConfig, StrategyKind


DEFAULTS_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'default_config.json')


logger = logging.getLogger(__name__)


def load_defaults():
	with open(DEFAULTS_PATH, 'r') as f:
		return json.load(f)


def deep_merge(base, override, path=''):
	"""Copy of base with override applied; unknown keys raise KeyError."""
	merged = copy.deepcopy(base)
	for key, value in override.items():
		if key not in merged:
			raise KeyError(f'Unknown configuration key {path}{key}')
		if isinstance(merged[key], dict):
			if not isinstance(value, dict):
				raise ValueError(f'Configuration key {path}{key} must be an object.')
			merged[key] = deep_merge(merged[key], value, path=f'{path}{key}.')
		else:
			merged[key] = copy.deepcopy(value)
	return merged


def load_config(path=None, seed=None):
	"""Resolved and validated configuration dict.

	Args:
		path (str): User JSON configuration. Default is None (defaults only).
		seed (int): Overrides simulation.seed when given.
	"""
	config = load_defaults()
	if path is not None:
		with open(path, 'r') as f:
			user = json.load(f)
		if not isinstance(user, dict):
			raise ValueError('The configuration file must hold a JSON object.')
		config = deep_merge(config, user)
	if seed is not None:
		config['simulation']['seed'] = seed
	validate_config(config)
	return config


def time_grid(config):
	section = config['time_grid']
	dt = section['step_minutes'] / MINUTES_PER_DAY
	n_steps = section['session_minutes'] / section['step_minutes']
	if abs(n_steps - round(n_steps)) > 1e-9:
		raise ValueError('session_minutes must be a multiple of step_minutes.')
	return TimeGrid(T=section['day_length_days'], dt=dt, n_steps=int(round(n_steps)))


def market_params(section, K=None):
	"""MarketParams from a section with price_variance_per_day and risk_aversion.

	half_spread_price, impact_coefficient and target_position default to 0.
	"""
	K = section.get('impact_coefficient', 0.0) if K is None else K
	return MarketParams.with_q_bar(
		section.get('target_position', 0.0),
		nu=section['price_variance_per_day'],
		lam=section['risk_aversion'],
		C=section.get('half_spread_price', 0.0),
		K=K,
		p=section.get('impact_exponent', 2.0),
	)


def signal_params(section):
	"""Drift-unit OU parameters; eta = 2 kappa signal_std^2 (0 if absent)."""
	if 'reversion_minutes' in section:
		kappa = MINUTES_PER_DAY / section['reversion_minutes']
	else:
		kappa = 1.0 / section['reversion_days']
	std = section.get('signal_std', 0.0)
	return OUParams(kappa=kappa, eta=2 * kappa * std ** 2)


def sim_config(config):
	sim = config['simulation']
	signals = config['signals']
	cfg = SimConfig(
		n_days=sim['n_days'],
		seed=sim['seed'],
		mp=market_params(config['market']),
		tg=time_grid(config),
		ou_slow=OUParams.from_reversion_minutes(signals['slow_reversion_minutes']),
		ou_fast=OUParams.from_reversion_minutes(signals['fast_reversion_minutes']),
		beta=signals['beta'],
		beta_tilde=signals['beta_tilde'],
		daily_reversion_days=signals['daily_reversion_days'],
		annual_sharpe=signals['daily_annual_sharpe'],
		strategies=tuple(StrategyKind(s) for s in sim['strategies']),
		approximate_gain=sim['approximate_gain'],
		fill_cap=sim['fill_probability_cap'],
		initial_position=sim['initial_position'],
	)
	if not fast_signal_dominates(cfg.model):
		logger.warning(
			'The fast signal does not dominate short-term predictability; '
			'fill probabilities still use the fast signal only.'
		)
	return cfg


def grid_spec(section):
	return GridSpec(**section)


def validate_config(config):
	"""Build every typed object once so bad values fail before any work starts."""
	time_grid(config)
	cfg = sim_config(config)
	logger.debug(f'alpha_daily std {cfg.alpha_daily_std:.6g}')
	for seed in config['simulation']['seeds']:
		if int(seed) != seed or seed < 0:
			raise ValueError(f'Seeds must be non-negative integers, got {seed}.')
	n_jobs = config['simulation']['n_jobs']
	if n_jobs is not None and (int(n_jobs) != n_jobs or n_jobs < 1):
		raise ValueError(f'n_jobs must be a positive integer or null, got {n_jobs}.')

	bnd = config['boundaries']
	if bnd['time_points'] < 2 or bnd['slow_zscore_points'] < 1:
		raise ValueError('boundaries needs at least 2 time points and 1 signal point.')
	if not bnd['slow_zscore_min'] <= bnd['slow_zscore_max']:
		raise ValueError('slow_zscore_min must not exceed slow_zscore_max.')
	if not math.isfinite(bnd['alpha_daily_per_day']):
		raise ValueError('alpha_daily_per_day must be finite.')

	det = config['deterministic_check']
	if not det['impact_sweep']:
		raise ValueError('deterministic_check.impact_sweep must not be empty.')
	for K in det['impact_sweep']:
		if not K > 0:
			raise ValueError(f'Impact coefficients must be positive, got {K}.')
		market_params(det, K=K)
	signal_params(det)

	quad = config['quadcost_check']
	market_params(quad)
	signal_params(quad)
	if quad['time_points'] < 1 or quad['signal_points'] < 1 or quad['position_points'] < 1:
		raise ValueError('quadcost_check grid sizes must be positive.')

	exp = config['expansion_check']
	if not exp['impact_sweep']:
		raise ValueError('expansion_check.impact_sweep must not be empty.')
	for K in exp['impact_sweep']:
		if not K > 0:
			raise ValueError(f'Impact coefficients must be positive, got {K}.')
		market_params(exp, K=K)
	ou = signal_params(exp)
	if not ou.eta > 0:
		raise ValueError('expansion_check needs signal_std > 0.')
	grid_spec(exp['grid'])
	if exp['mc_points'] < 0 or exp['mc_paths'] < 2:
		raise ValueError('expansion_check needs mc_points >= 0 and mc_paths >= 2.')

	for section, keys in (
		(det, ('position_tolerance', 'euler_lagrange_tolerance', 'stopping_tolerance')),
		(quad, ('riccati_tolerance', 'hjb_tolerance', 'gain_pde_tolerance')),
		(exp, ('boundary_tolerance_grid_spacings', 'mc_standard_errors')),
	):
		for key in keys:
			if not section[key] >= 0:
				raise ValueError(f'{key} must be >= 0, got {section[key]}.')
