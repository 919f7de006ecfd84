import numpy as np
import pytest

from alpha_trading.exact import quadcost_value
from alpha_trading.policy import MarketParams
from alpha_trading.signals import OUParams, TimeGrid


@pytest.fixture
def tg():
	return TimeGrid()


@pytest.fixture
def rng():
	return np.random.default_rng(20240611)


@pytest.fixture
def det_market():
	"""Market for the deterministic-signal checks; K is set per test."""
	def make(K, C=0.1):
		return MarketParams.with_q_bar(1.0, nu=0.01, lam=50.0, C=C, K=K)
	return make


@pytest.fixture
def det_signal():
	"""20-minute decaying signal with no noise."""
	return OUParams.from_reversion_minutes(20, eta=0.0)


@pytest.fixture
def stochastic_signal():
	"""Drift-unit signal with 6-hour reversion and stationary std 0.1."""
	kappa = 4.0
	return OUParams(kappa=kappa, eta=2 * kappa * 0.1 ** 2)


@pytest.fixture(scope='session')
def quadcost_setup():
	tg = TimeGrid()
	mp = MarketParams.with_q_bar(0.5, nu=0.01, lam=50.0, C=0.0, K=1e-3)
	ou = OUParams(kappa=4.0, eta=2 * 4.0 * 0.1 ** 2)
	qcv = quadcost_value(mp, ou, tg, t_min=tg.t_open)
	return mp, ou, tg, qcv
