"""Run simulations, boundary tables and numerical checks.

Commands:

	- simulate: Monte Carlo run of the configured strategies on shared
		paths. With a non-empty simulation.seeds list the Sharpe ratios of
		every seed are also tabulated.
	- boundaries: Zone edges on a (t, slow z-score, fast z-score) grid.
	- exact-check: Residuals of the closed-form solutions (deterministic
		Euler-Lagrange and stopping conditions, Riccati, quadratic-cost HJB,
		gain PDE) against configured tolerances.
	- oracle-compare: Analytic deterministic trajectories against the
		discrete optimizer over an impact sweep, expansion boundaries against
		the finite-difference HJB, and the first-order slope correction
		against Monte Carlo.

The configuration JSON file may hold any subset of the keys in the bundled
default_config.json; missing keys take the default values.

Outputs (in --out):

	- simulate: 'pnl_<strategy>.csv' per strategy (columns date_index,
		gross, linear_cost, impact_cost, net, cum_net, position_close, then
		trade_to_close, close_to_close, market_volume, limit_volume,
		n_fills), 'cumulative_pnl.csv', 'summary.json' and, for seed
		sweeps, 'seed_sweep.csv'.
	- boundaries: 'boundaries.csv'.
	- exact-check: 'exact_check.json' and 'exact_check.csv'.
	- oracle-compare: 'oracle_compare.json', 'deterministic_sweep.csv',
		'boundary_sweep.csv' and 'mc_dv1_dq.csv'.
	- Every command: 'resolved_config.json' and 'runtime.json' (the runtime
		in seconds under the key 'runtime_seconds').

With --format json the tables are written as JSON lists of records instead
of CSV.

Exit codes: 0 success, 1 tolerance breach or numerical failure, 2 invalid
input. Failures print one line 'error: <kind>: <message>' to stderr.

Args:

	* command: One of 'simulate', 'boundaries', 'exact-check',
		'oracle-compare'.
	* -c, --config: Path to the configuration JSON file. Default: bundled
		defaults only.
	* -o, --out: Directory in which to save the output files. Default: '.'.
	* -s, --seed: Overrides simulation.seed.
	* -f, --format: 'csv' or 'json'. Default: 'csv'.


run_alpha_trading simulate -c ../dev_data/dev_simulate.json -o ../dev_data/output
"""

import argparse
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import time
from dataclasses import replace
from pprint import pprint

import numpy as np
import pandas as pd
import polars as pl
from tqdm import tqdm

from alpha_trading.configs import (
	grid_spec,
	load_config,
	market_params,
	signal_params,
	sim_config,
	time_grid,
)
from alpha_trading.exact import (
	det_euler_lagrange_residual,
	det_objective,
	det_stopping_residual,
	det_trajectory_solve,
	expansion_dv1_dq,
	quadcost_hjb_residual,
	quadcost_value,
	riccati_residual,
)
from alpha_trading.exceptions import AlphaTradingError
from alpha_trading.oracle import (
	DiscreteProblem,
	compare_boundaries,
	expansion_boundaries_on_grid,
	mc_expansion_dv1_dq,
	solve_discrete_deterministic,
	solve_hjb_grid,
)
from alpha_trading.policy import fill_probability, limit_boundaries
from alpha_trading.signals import gain_pde_residual, integrated_gain
from alpha_trading.simulator import StrategyKind, run_experiment, run_seed_sweep


COMMANDS = ('simulate', 'boundaries', 'exact-check', 'oracle-compare')


logger = logging.getLogger(__name__)


def parse_args(argv=None):
	"""Parse command line arguments."""
	parser = argparse.ArgumentParser(
		description='Optimal trading with alpha predictors: simulations and checks.'
	)
	parser.add_argument(
		'command',
		choices=COMMANDS,
		help='Command to run.'
	)
	parser.add_argument(
		'-c', '--config',
		default=None,
		help='Path to the configuration JSON file. Defaults to the bundled '
			'default_config.json.'
	)
	parser.add_argument(
		'-o', '--out',
		default='.',
		help='Directory in which to save the output files.'
	)
	parser.add_argument(
		'-s', '--seed',
		type=int,
		default=None,
		help='Seed overriding simulation.seed.'
	)
	parser.add_argument(
		'-f', '--format',
		choices=('csv', 'json'),
		default='csv',
		help='Format of tabular outputs.'
	)
	return parser.parse_args(argv)


def _records(frame):
	"""JSON-safe list of row dicts from a pandas or polars frame."""
	if isinstance(frame, pl.DataFrame):
		rows = frame.to_dicts()
	else:
		rows = frame.to_dict(orient='records')
	return [
		{
			k: (None if isinstance(v, float) and not math.isfinite(v) else
				v.item() if isinstance(v, np.generic) else v)
			for k, v in row.items()
		}
		for row in rows
	]


def write_table(frame, out_dir, name, fmt):
	"""Write a table as '<name>.csv' or '<name>.json'; returns the file name."""
	if fmt == 'json':
		file_name = f'{name}.json'
		with open(os.path.join(out_dir, file_name), 'w') as f:
			json.dump(_records(frame), f, indent=4)
	elif isinstance(frame, pl.DataFrame):
		file_name = f'{name}.csv'
		frame.write_csv(os.path.join(out_dir, file_name))
	else:
		file_name = f'{name}.csv'
		frame.to_csv(os.path.join(out_dir, file_name), index=False, lineterminator='\n')
	return file_name


def write_json(obj, out_dir, name):
	with open(os.path.join(out_dir, name), 'w') as f:
		json.dump(obj, f, indent=4)


def _check(value, tolerance):
	return {'value': float(value), 'tolerance': float(tolerance), 'passed': bool(value < tolerance)}


###############################################################################
# Commands
###############################################################################

def simulate(config, out_dir, fmt):
	cfg = sim_config(config)
	print(f'Simulating {cfg.n_days} days with seed {cfg.seed}...', flush=True)
	report = run_experiment(cfg)
	for kind, pnl in report.results.items():
		write_table(pnl.frame, out_dir, f'pnl_{kind.value}', fmt)
	write_table(report.cumulative_frame(), out_dir, 'cumulative_pnl', fmt)

	summary = report.summary()
	seeds = config['simulation']['seeds']
	if seeds:
		print(f'Running seed sweep over {len(seeds)} seeds...', flush=True)
		table = run_seed_sweep(cfg, seeds, n_jobs=config['simulation']['n_jobs'])
		write_table(table, out_dir, 'seed_sweep', fmt)
		summary['seed_sweep'] = _seed_orderings(table)
	write_json(summary, out_dir, 'summary.json')

	print('Annualized Sharpe ratios:', flush=True)
	pprint(report.sharpes)
	return 0


def _seed_orderings(table):
	"""Counts of seeds on which one strategy's Sharpe beats another's."""
	pairs = (
		(StrategyKind.HJB_MARKET, StrategyKind.DAILY_IDEAL_WITH_COST),
		(StrategyKind.HJB_MARKET_LIMIT, StrategyKind.HJB_MARKET),
		(StrategyKind.DAILY_IDEAL_NO_COST, StrategyKind.HJB_MARKET),
	)
	out = {'n_seeds': int(len(table))}
	for better, worse in pairs:
		if better.value in table and worse.value in table:
			out[f'{better.value}>={worse.value}'] = int(
				np.sum(table[better.value].to_numpy() >= table[worse.value].to_numpy())
			)
	for col in table.columns:
		if col != 'seed':
			values = table[col].to_numpy(dtype=float)
			out[f'mean_sharpe_{col}'] = float(np.nanmean(values)) if np.any(np.isfinite(values)) else None
	return out


def boundaries(config, out_dir, fmt):
	tg = time_grid(config)
	cfg = sim_config(config)
	bnd = config['boundaries']
	mp = replace(cfg.mp, alpha_bar=bnd['alpha_daily_per_day'])

	times = np.linspace(tg.t_open, tg.T - tg.dt, bnd['time_points'])
	eps = np.linspace(bnd['slow_zscore_min'], bnd['slow_zscore_max'], bnd['slow_zscore_points'])
	eps_fast = np.asarray(bnd['fast_zscores'], dtype=float)
	t_m, e_m, f_m = (a.ravel() for a in np.meshgrid(times, eps, eps_fast, indexing='ij'))

	model = cfg.model
	g = model.slow_gain(e_m, t_m, 2 * tg.T, mp.nu, approximate=cfg.approximate_gain)
	g = np.broadcast_to(g, t_m.shape)
	P_plus, P_minus = fill_probability(f_m, mp, tg, beta_tilde=model.beta_tilde, cap=cfg.fill_cap)
	bd = limit_boundaries(t_m, g, P_plus, P_minus, mp, tg)

	frame = pl.DataFrame({
		't': t_m,
		'epsilon': e_m,
		'x': model.slow_alpha(e_m, mp.nu),
		'gain': g,
		'epsilon_fast': f_m,
		'P_plus': P_plus,
		'P_minus': P_minus,
		'b_tilde_plus': bd.b_tilde_plus,
		'b_plus': bd.b_plus,
		'b_minus': bd.b_minus,
		'b_tilde_minus': bd.b_tilde_minus,
	})
	write_table(frame, out_dir, 'boundaries', fmt)
	print(f'Wrote {frame.height} boundary rows.', flush=True)
	return 0


def exact_check(config, out_dir, fmt):
	tg = time_grid(config)
	det = config['deterministic_check']
	quad = config['quadcost_check']
	ou_det = signal_params(det)

	det_rows = []
	for K in tqdm(det['impact_sweep'], desc='Deterministic paths', ncols=100):
		mp = market_params(det, K=K)
		traj = det_trajectory_solve(det['initial_position'], det['initial_signal'], mp, tg, ou_det)
		if traj.t_hat > traj.t0:
			s = np.linspace(traj.t0, traj.t_hat, 203)[1:-1]
			el = det_euler_lagrange_residual(traj, s)
		else:
			el = 0.0
		det_rows.append({
			'K': K,
			't_hat': traj.t_hat,
			'side': traj.side.value,
			'integration_constant': traj.c,
			'euler_lagrange_residual': el,
			'stopping_residual': max(det_stopping_residual(traj)),
		})

	mp_q = market_params(quad)
	ou_q = signal_params(quad)
	print('Building quadratic-cost value function...', flush=True)
	qcv = quadcost_value(mp_q, ou_q, tg, t_min=tg.t_open)
	h_t = 1e-4
	riccati_times = np.linspace(tg.t_open, tg.T - 1e-4, quad['riccati_points'])
	t_points = np.linspace(tg.t_open + 2 * h_t, tg.T - 2 * h_t, quad['time_points'])
	sd = math.sqrt(ou_q.stationary_variance) if ou_q.eta > 0 else 1.0
	x_points = ou_q.xbar + sd * np.linspace(-3, 3, quad['signal_points'])
	q_points = mp_q.q_bar + np.linspace(-1, 1, quad['position_points'])

	residuals = {
		'euler_lagrange': _check(
			max(r['euler_lagrange_residual'] for r in det_rows), det['euler_lagrange_tolerance']
		),
		'stopping': _check(max(r['stopping_residual'] for r in det_rows), det['stopping_tolerance']),
		'riccati': _check(riccati_residual(qcv, riccati_times), quad['riccati_tolerance']),
		'quadcost_hjb': _check(
			quadcost_hjb_residual(qcv, t_points, x_points, q_points, h_t=h_t),
			quad['hjb_tolerance']
		),
		'gain_pde': _check(
			gain_pde_residual(ou_q, t_points, x_points, 2 * tg.T), quad['gain_pde_tolerance']
		),
	}
	all_passed = all(r['passed'] for r in residuals.values())
	write_json(
		{'residuals': residuals, 'all_passed': all_passed, 'deterministic': det_rows},
		out_dir, 'exact_check.json'
	)
	table = pd.DataFrame([{'check': k, **v} for k, v in residuals.items()])
	write_table(table, out_dir, 'exact_check', fmt)
	pprint(residuals)
	return 0 if all_passed else 1


def _deterministic_sweep(config, tg):
	det = config['deterministic_check']
	ou = signal_params(det)
	rows = []
	for K in tqdm(det['impact_sweep'], desc='Impact sweep', ncols=100):
		mp = market_params(det, K=K)
		q0, x0 = det['initial_position'], det['initial_signal']
		traj = det_trajectory_solve(q0, x0, mp, tg, ou)
		prob = DiscreteProblem.from_decaying_signal(q0, x0, mp, ou, tg)
		sol = solve_discrete_deterministic(prob)
		gap = float(np.max(np.abs(sol.positions - traj.q_of_s(sol.times))))
		rows.append({
			'K': K,
			't_hat': traj.t_hat,
			'sup_norm': gap,
			'analytic_objective': det_objective(traj),
			'discrete_objective': sol.objective,
			'iterations': sol.iterations,
			'passed': bool(gap < det['position_tolerance']),
		})
	return rows


def _boundary_sweep(config, tg):
	exp = config['expansion_check']
	ou = signal_params(exp)
	spec = grid_spec(exp['grid'])
	sd = math.sqrt(ou.stationary_variance)
	rows = []
	for K in tqdm(sorted(exp['impact_sweep']), desc='Grid HJB', ncols=100):
		mp = market_params(exp, K=K)
		grid = solve_hjb_grid(mp, ou, tg, spec)
		# outer x nodes carry a truncated second derivative
		xi = np.nonzero(np.abs(grid.x_grid - ou.xbar) <= 2 * sd + 1e-12)[0]
		reports = {
			order: compare_boundaries(grid, expansion_boundaries_on_grid(grid, ou, order, [0], xi))
			for order in (0, 1)
		}
		rows.append({
			'K': K,
			'order0_sup_norm': reports[0].sup_norm,
			'order1_sup_norm': reports[1].sup_norm,
			'symmetry_defect': reports[1].symmetry_defect,
			'q_spacing': grid.dq,
			'time_steps': len(grid.t_grid) - 1,
		})
	errors = [r['order1_sup_norm'] for r in rows]
	checks = {
		'largest_K_within_grid_spacing': bool(
			errors[-1] < exp['boundary_tolerance_grid_spacings'] * rows[-1]['q_spacing']
		),
		'order1_decreases_with_K': bool(all(b < a for a, b in zip(errors, errors[1:]))),
		'order1_beats_order0': bool(all(r['order1_sup_norm'] < r['order0_sup_norm'] for r in rows)),
	}
	return rows, checks


def _mc_slope_check(config, tg):
	exp = config['expansion_check']
	ou = signal_params(exp)
	mp = market_params(exp, K=max(exp['impact_sweep']))
	rng = np.random.default_rng(exp['mc_seed'])
	sd = math.sqrt(ou.stationary_variance)
	rows = []
	for _ in range(exp['mc_points']):
		t = tg.t_open + 0.95 * (tg.T - tg.t_open) * rng.random()
		x = ou.xbar + sd * rng.standard_normal()
		g = float(integrated_gain(ou, x, t, 2 * tg.T))
		half_width = (mp.C + abs(g)) / (mp.risk * (2 * tg.T - t))
		q = mp.q_bar + 1.5 * half_width * (2 * rng.random() - 1)
		closed = expansion_dv1_dq(t, q, x, mp, ou, tg)
		mean, se = mc_expansion_dv1_dq(t, q, x, mp, ou, tg, exp['mc_paths'], rng)
		gap = abs(closed - mean)
		rows.append({
			't': t, 'q': q, 'x': x,
			'closed_form': closed,
			'monte_carlo': mean,
			'standard_error': se,
			'passed': bool(gap <= exp['mc_standard_errors'] * se or gap <= 1e-12),
		})
	return rows


def oracle_compare(config, out_dir, fmt):
	tg = time_grid(config)
	det_rows = _deterministic_sweep(config, tg)
	boundary_rows, boundary_checks = _boundary_sweep(config, tg)
	mc_rows = _mc_slope_check(config, tg)

	checks = {
		'deterministic_within_tolerance': all(r['passed'] for r in det_rows),
		'largest_K_within_grid_spacing': boundary_checks['largest_K_within_grid_spacing'],
		'mc_slope_within_standard_errors': all(r['passed'] for r in mc_rows),
	}
	all_passed = all(checks.values())
	write_table(pd.DataFrame(det_rows), out_dir, 'deterministic_sweep', fmt)
	write_table(pd.DataFrame(boundary_rows), out_dir, 'boundary_sweep', fmt)
	write_table(
		pd.DataFrame(mc_rows, columns=[
			't', 'q', 'x', 'closed_form', 'monte_carlo', 'standard_error', 'passed'
		]),
		out_dir, 'mc_dv1_dq', fmt
	)
	write_json(
		{
			'deterministic': det_rows,
			'boundaries': boundary_rows,
			'mc_dv1_dq': mc_rows,
			'checks': checks,
			'expansion_ordering': {
				k: v for k, v in boundary_checks.items() if k != 'largest_K_within_grid_spacing'
			},
			'all_passed': all_passed,
		},
		out_dir, 'oracle_compare.json'
	)
	pprint(checks)
	return 0 if all_passed else 1


RUNNERS = {
	'simulate': simulate,
	'boundaries': boundaries,
	'exact-check': exact_check,
	'oracle-compare': oracle_compare,
}


def _one_line(err):
	msg = err.args[0] if isinstance(err, KeyError) and err.args else str(err)
	return ' '.join(str(msg).split())


def run(args):
	"""Validate the configuration, run the command and move outputs into place.

	Returns:
		Exit code.
	"""
	start_time = time.time()
	try:
		config = load_config(args.config, seed=args.seed)
	except (OSError, ValueError, KeyError, TypeError) as e:
		print(f'error: invalid_input: {_one_line(e)}', file=sys.stderr, flush=True)
		return 2

	os.makedirs(args.out, exist_ok=True)
	stage_dir = tempfile.mkdtemp(prefix='.staging-', dir=args.out)
	# the configuration is valid past this point; KeyError and TypeError propagate
	try:
		write_json(config, stage_dir, 'resolved_config.json')
		code = RUNNERS[args.command](config, stage_dir, args.format)
		runtime_seconds = time.time() - start_time
		print(f'\n{args.command} runtime: {runtime_seconds:.2f} seconds', flush=True)
		with open(os.path.join(stage_dir, 'runtime.json'), 'w') as f:
			json.dump({'runtime_seconds': runtime_seconds}, f)
		for name in sorted(os.listdir(stage_dir)):
			os.replace(os.path.join(stage_dir, name), os.path.join(args.out, name))
	except (AlphaTradingError, ArithmeticError, ValueError) as e:
		print(f'error: numerical_failure: {type(e).__name__}: {_one_line(e)}', file=sys.stderr, flush=True)
		return 1
	finally:
		shutil.rmtree(stage_dir, ignore_errors=True)
	return code


def main(argv=None):
	args = parse_args(argv)
	logging.basicConfig(
		level=logging.INFO,
		format='%(asctime)s %(name)s %(levelname)s: %(message)s'
	)
	print('Args:', flush=True)
	pprint(vars(args))
	return run(args)


if __name__ == '__main__':
	sys.exit(main())
