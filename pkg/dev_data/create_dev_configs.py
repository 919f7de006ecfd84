"""Write small configurations for development runs of run_alpha_trading.

Each file holds only the keys that differ from the bundled
default_config.json:

	- dev_simulate.json: 60 days, three seeds.
	- dev_limit_fills.json: spread small enough for limit orders to fill.
	- dev_zero_spread.json: C = 0, the band collapses to a single curve.
	- dev_exact.json: reduced residual grids for exact-check.
	- dev_oracle_minimal.json: one impact value per oracle comparison on a
		coarse grid.

Run from the dev_data directory:

	python create_dev_configs.py
	run_alpha_trading simulate -c dev_simulate.json -o output
"""

import json


if __name__ == '__main__':

	configs = {
		'dev_simulate.json': {
			'simulation': {
				'n_days': 60,
				'seed': 0,
				'seeds': [0, 1, 2],
				'n_jobs': 1,
			},
		},
		'dev_limit_fills.json': {
			'market': {'half_spread_price': 0.0005},
			'simulation': {
				'n_days': 20,
				'strategies': ['HjbMarket', 'HjbMarketLimit'],
			},
		},
		'dev_zero_spread.json': {
			'market': {'half_spread_price': 0.0},
			'boundaries': {'time_points': 5, 'slow_zscore_points': 5},
		},
		'dev_exact.json': {
			'deterministic_check': {'impact_sweep': [0.001]},
			'quadcost_check': {
				'riccati_points': 200,
				'time_points': 5,
				'signal_points': 5,
				'position_points': 5,
			},
		},
		'dev_oracle_minimal.json': {
			'deterministic_check': {'impact_sweep': [0.001]},
			'expansion_check': {
				'impact_sweep': [0.8],
				'grid': {'n_x': 21, 'n_q': 61},
				'mc_points': 2,
				'mc_paths': 20000,
			},
		},
	}

	for file_name, config in configs.items():
		with open(file_name, 'w') as f:
			json.dump(config, f, indent=4)
		print(f'Wrote {file_name}', flush=True)
