import json
import os

import numpy as np
import pandas as pd
import pytest

from alpha_trading import run_alpha_trading
from alpha_trading.run_alpha_trading import main


def _write_config(tmp_path, config, name='config.json'):
	path = tmp_path / name
	path.write_text(json.dumps(config))
	return str(path)


def _run(tmp_path, command, config, *extra, out='out'):
	out_dir = tmp_path / out
	code = main([command, '-c', _write_config(tmp_path, config), '-o', str(out_dir), *extra])
	return code, out_dir


SMALL_SIM = {'simulation': {'n_days': 5, 'seeds': [], 'n_jobs': 1}}


def test_simulate_writes_outputs(tmp_path):
	code, out_dir = _run(tmp_path, 'simulate', SMALL_SIM)
	assert code == 0
	files = set(os.listdir(out_dir))
	for kind in ('DailyIdealNoCost', 'DailyIdealWithCost', 'HjbMarket', 'HjbMarketLimit'):
		assert f'pnl_{kind}.csv' in files
	assert {'cumulative_pnl.csv', 'summary.json', 'resolved_config.json', 'runtime.json'} <= files
	assert not any(f.startswith('.staging-') for f in files)

	pnl = pd.read_csv(out_dir / 'pnl_HjbMarket.csv')
	assert len(pnl) == 5
	np.testing.assert_allclose(pnl['cum_net'], pnl['net'].cumsum())

	resolved = json.loads((out_dir / 'resolved_config.json').read_text())
	assert resolved['simulation']['n_days'] == 5
	assert resolved['market']['risk_aversion'] == 37.4
	assert 'runtime_seconds' in json.loads((out_dir / 'runtime.json').read_text())


def test_simulate_same_seed_same_pnl(tmp_path):
	_, first = _run(tmp_path, 'simulate', SMALL_SIM, '-s', '3', out='a')
	_, second = _run(tmp_path, 'simulate', SMALL_SIM, '-s', '3', out='b')
	for name in ('pnl_HjbMarket.csv', 'pnl_HjbMarketLimit.csv', 'cumulative_pnl.csv'):
		assert (first / name).read_bytes() == (second / name).read_bytes()


def test_simulate_seed_sweep(tmp_path):
	config = {'simulation': {
		'n_days': 5, 'seeds': [1, 2], 'n_jobs': 1,
		'strategies': ['DailyIdealNoCost', 'HjbMarket'],
	}}
	code, out_dir = _run(tmp_path, 'simulate', config)
	assert code == 0
	sweep = pd.read_csv(out_dir / 'seed_sweep.csv')
	assert sweep['seed'].tolist() == [1, 2]
	summary = json.loads((out_dir / 'summary.json').read_text())
	assert summary['seed_sweep']['n_seeds'] == 2


@pytest.mark.parametrize('contents', [
	'{"simulation": {"n_days": 5,',
	'{"simulation": {"n_dayz": 5}}',
	'{"simulation": {"n_days": 0}}',
	'{"market": {"half_spread_price": -0.01}}',
	'{"simulation": 5}',
])
def test_invalid_input_exits_before_writing(tmp_path, capsys, contents):
	path = tmp_path / 'bad.json'
	path.write_text(contents)
	out_dir = tmp_path / 'out'
	code = main(['simulate', '-c', str(path), '-o', str(out_dir)])
	assert code == 2
	assert capsys.readouterr().err.startswith('error: invalid_input:')
	assert not out_dir.exists()


def test_missing_config_file(tmp_path, capsys):
	code = main(['boundaries', '-c', str(tmp_path / 'missing.json'), '-o', str(tmp_path / 'out')])
	assert code == 2
	assert 'error: invalid_input:' in capsys.readouterr().err


def test_boundaries_zero_spread_collapse(tmp_path):
	config = {
		'market': {'half_spread_price': 0.0},
		'boundaries': {'time_points': 5, 'slow_zscore_points': 5},
	}
	code, out_dir = _run(tmp_path, 'boundaries', config)
	assert code == 0
	frame = pd.read_csv(out_dir / 'boundaries.csv')
	assert len(frame) == 5 * 5 * 3
	np.testing.assert_allclose(frame['b_plus'], frame['b_minus'])
	np.testing.assert_allclose(frame['b_tilde_plus'], frame['b_tilde_minus'])


def test_boundaries_band_ordered_and_widening(tmp_path):
	config = {'boundaries': {'time_points': 6, 'slow_zscore_points': 3, 'fast_zscores': [0.0]}}
	code, out_dir = _run(tmp_path, 'boundaries', config, '-f', 'json')
	assert code == 0
	frame = pd.DataFrame(json.loads((out_dir / 'boundaries.json').read_text()))
	assert np.all(frame['b_tilde_plus'] <= frame['b_plus'] + 1e-12)
	assert np.all(frame['b_plus'] <= frame['b_minus'])
	assert np.all(frame['b_minus'] <= frame['b_tilde_minus'] + 1e-12)

	flat = frame[frame['epsilon'] == 0.0].sort_values('t')
	width = (flat['b_minus'] - flat['b_plus']).to_numpy()
	assert np.all(np.diff(width) > 0)


EXACT = {
	'deterministic_check': {'impact_sweep': [0.001]},
	'quadcost_check': {
		'riccati_points': 200, 'time_points': 5, 'signal_points': 5, 'position_points': 5,
	},
}


def test_exact_check_passes(tmp_path):
	code, out_dir = _run(tmp_path, 'exact-check', EXACT)
	assert code == 0
	report = json.loads((out_dir / 'exact_check.json').read_text())
	assert report['all_passed']
	assert set(report['residuals']) == {
		'euler_lagrange', 'stopping', 'riccati', 'quadcost_hjb', 'gain_pde'
	}
	assert len(report['deterministic']) == 1
	table = pd.read_csv(out_dir / 'exact_check.csv')
	assert table['passed'].all()


def test_exact_check_zero_tolerance_fails(tmp_path):
	config = {
		'deterministic_check': {'impact_sweep': [0.001], 'stopping_tolerance': 0.0},
		'quadcost_check': EXACT['quadcost_check'],
	}
	code, out_dir = _run(tmp_path, 'exact-check', config)
	assert code == 1
	report = json.loads((out_dir / 'exact_check.json').read_text())
	assert not report['all_passed']
	assert not report['residuals']['stopping']['passed']


def test_exact_check_stopping_after_close(tmp_path, capsys):
	config = {
		'deterministic_check': {'impact_sweep': [1.0]},
		'quadcost_check': EXACT['quadcost_check'],
	}
	code, out_dir = _run(tmp_path, 'exact-check', config)
	assert code == 1
	assert 'error: numerical_failure: StoppingAfterCloseError' in capsys.readouterr().err
	assert not (out_dir / 'exact_check.json').exists()


def test_oracle_compare_minimal(tmp_path):
	config = {
		'deterministic_check': {'impact_sweep': [0.001]},
		'expansion_check': {
			'impact_sweep': [0.8],
			'grid': {'n_x': 21, 'n_q': 61},
			'mc_points': 2,
			'mc_paths': 20000,
			'mc_standard_errors': 5.0,
		},
	}
	code, out_dir = _run(tmp_path, 'oracle-compare', config)
	report = json.loads((out_dir / 'oracle_compare.json').read_text())
	assert code == (0 if report['all_passed'] else 1)
	assert report['checks']['deterministic_within_tolerance']
	assert report['checks']['mc_slope_within_standard_errors']
	assert len(report['mc_dv1_dq']) == 2
	assert report['boundaries'][0]['K'] == 0.8
	for name in ('deterministic_sweep.csv', 'boundary_sweep.csv', 'mc_dv1_dq.csv'):
		assert (out_dir / name).exists()


@pytest.mark.parametrize('error', [
	np.linalg.LinAlgError('Singular matrix'),
	ValueError('array must not contain infs or NaNs'),
	FloatingPointError('overflow encountered in exp'),
])
def test_failure_after_validation_is_numerical(tmp_path, capsys, monkeypatch, error):
	def failing(config, out_dir, fmt):
		raise error

	monkeypatch.setitem(run_alpha_trading.RUNNERS, 'boundaries', failing)
	code, out_dir = _run(tmp_path, 'boundaries', {})
	assert code == 1
	err = capsys.readouterr().err
	assert f'error: numerical_failure: {type(error).__name__}:' in err
	assert not (out_dir / 'resolved_config.json').exists()


def test_internal_errors_propagate(tmp_path, monkeypatch):
	def failing(config, out_dir, fmt):
		return config['no_such_section']

	monkeypatch.setitem(run_alpha_trading.RUNNERS, 'boundaries', failing)
	with pytest.raises(KeyError):
		_run(tmp_path, 'boundaries', {})
