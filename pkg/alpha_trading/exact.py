"""Analytically tractable regimes used as ground truth.

Three limits of the market-order problem have (semi-)closed forms:

	- Deterministic signal (eta = 0) with quadratic impact. The optimal path
		relaxes toward the no-trade band and stops at the first time t_hat
		where it touches the band with zero speed. DetTrajectory carries the
		explicit path and det_trajectory_solve fixes (a, t_hat).
	- Zero spread (C = 0) with quadratic impact. The value is quadratic in
		q - q_bar, V = V0 + V1 (q - q_bar) + V2 (q - q_bar)^2, with V2 the
		solution of a Riccati equation and V1, V0 Feynman-Kac integrals
		(QuadCostValue).
	- Large impact K. The value expands in 1/K around the zero-trading value
		0.5 lambda nu (2T - t)(q - q_bar)^2, and the first correction moves
		the band edges by -dV1/dq / (K d2V0/dq2).

Functions in this module accept the signal in drift units; OUParams here
describe x, not the z-score.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import IntegrationWarning, quad, quad_vec
from scipy.interpolate import BarycentricInterpolator
from scipy.optimize import brentq
from scipy.stats import norm

from alpha_trading.exceptions import (
	NoConvergenceError,
	QuadratureFailureError,
	StartsInsideZoneError,
	StoppingAfterCloseError,
)
from alpha_trading.policy import nt_boundaries
from alpha_trading.signals import (
	_decay_integral,
	gain_moments,
	integrated_gain,
	ou_conditional_moments,
)


RESONANCE_TOL = 1e-10
STOPPING_TOL = 1e-9
SIGMA_FLOOR = 1e-14


logger = logging.getLogger(__name__)


class Side(Enum):
	FROM_SELL = 'from_sell'
	FROM_BUY = 'from_buy'


def _quad(func, a, b, epsrel=1e-8, epsabs=1e-13, limit=200):
	with warnings.catch_warnings():
		warnings.simplefilter('error', IntegrationWarning)
		try:
			value, _ = quad(func, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit)
		except IntegrationWarning as e:
			raise QuadratureFailureError(f'quad on [{a}, {b}]: {e}') from e
	return value


def _quad_vec(func, a, b, epsrel=1e-10, epsabs=1e-14):
	if b <= a:
		return np.zeros_like(np.asarray(func(a), dtype=float))
	value, _, info = quad_vec(func, a, b, epsabs=epsabs, epsrel=epsrel, full_output=True)
	if not info.success:
		raise QuadratureFailureError(f'quad_vec on [{a}, {b}] failed: {info.message}')
	return value


###############################################################################
# Deterministic signal
###############################################################################

@dataclass(frozen=True)
class DetTrajectory:
	"""Optimal position path for a deterministic exponentially decaying signal.

	On [t0, t_hat] the position is

		q(s) = x0 (e^{-A tau} - e^{-kappa tau}) / (2 K kappa^2 - lambda nu)
			+ a e^{s A} (1 - e^{-2 tau A}) + q_bar (1 - e^{-A tau}) + q0 e^{-A tau}

	with tau = s - t0, and constant afterwards. The integration constant is
	stored as c = a e^{t0 A}, so the a-term reads 2 c sinh(A tau).
	"""
	q0: float
	x0: float
	t0: float
	c: float
	t_hat: float
	A: float
	side: Side
	mp: object
	ou: object
	tg: object

	@property
	def a(self):
		return self.c * math.exp(-self.t0 * self.A)

	def _resonant(self):
		risk = self.mp.risk
		return abs(2 * self.mp.K * self.ou.kappa ** 2 - risk) < RESONANCE_TOL * risk

	def _signal_term(self, tau):
		A, kappa, K = self.A, self.ou.kappa, self.mp.K
		e_a = np.exp(-A * tau)
		if self._resonant():
			value = self.x0 * tau * e_a / (4 * K * A)
			slope = self.x0 * e_a * (1 - A * tau) / (4 * K * A)
		else:
			denom = 2 * K * kappa ** 2 - self.mp.risk
			e_k = np.exp(-kappa * tau)
			value = self.x0 * (e_a - e_k) / denom
			slope = self.x0 * (-A * e_a + kappa * e_k) / denom
		return value, slope

	def _free(self, tau):
		"""Path and speed without the a-term."""
		A, q_bar = self.A, self.mp.q_bar
		e_a = np.exp(-A * tau)
		sig, sig_dot = self._signal_term(tau)
		return (
			sig + q_bar * (1 - e_a) + self.q0 * e_a,
			sig_dot + (q_bar - self.q0) * A * e_a,
		)

	def q_of_s(self, s):
		"""Position at time(s) s, frozen at q(t_hat) after the stopping time."""
		s = np.minimum(np.asarray(s, dtype=float), self.t_hat)
		tau = s - self.t0
		free, _ = self._free(tau)
		return free + 2 * self.c * np.sinh(self.A * tau)

	def q_dot(self, s):
		tau = np.asarray(s, dtype=float) - self.t0
		_, free_dot = self._free(tau)
		speed = free_dot + 2 * self.c * self.A * np.cosh(self.A * tau)
		return np.where(np.asarray(s) > self.t_hat, 0.0, speed)

	def q_unfrozen(self, s):
		"""Analytic path formula without the stop, for differentiation."""
		tau = np.asarray(s, dtype=float) - self.t0
		free, _ = self._free(tau)
		return free + 2 * self.c * np.sinh(self.A * tau)

	def signal_of_s(self, s):
		return self.x0 * np.exp(-self.ou.kappa * (np.asarray(s, dtype=float) - self.t0))

	def gain_of_s(self, s):
		return integrated_gain(self.ou, self.signal_of_s(s), s, 2 * self.tg.T)

	def boundary_at_stop(self):
		return det_boundary(self.t_hat, float(self.gain_of_s(self.t_hat)), self.mp, self.tg, self.side)


def det_boundary(t_hat, g_hat, mp, tg, side):
	"""Band edge reached at the stopping time.

	FROM_SELL paths stop on b_minus = q_bar + (g + C) / (lambda nu (2T - t_hat)),
	FROM_BUY paths on b_plus = q_bar + (g - C) / (...). The form does not depend
	on the impact exponent.
	"""
	if t_hat >= 2 * tg.T:
		raise ValueError('det_boundary is defined for t_hat < 2T.')
	b_minus, b_plus = nt_boundaries(t_hat, g_hat, mp, tg)
	return float(b_minus if side is Side.FROM_SELL else b_plus)


def _stopping_gap(traj, tau):
	"""q(t_hat) - b(t_hat) after eliminating c through q_dot(t_hat) = 0."""
	free, free_dot = traj._free(tau)
	q_hat = free - free_dot * np.tanh(traj.A * tau) / traj.A
	s = traj.t0 + tau
	g = integrated_gain(traj.ou, traj.signal_of_s(s), s, 2 * traj.tg.T)
	b_minus, b_plus = nt_boundaries(s, g, traj.mp, traj.tg)
	return q_hat - (b_minus if traj.side is Side.FROM_SELL else b_plus)


def _first_sign_change(traj, lo, hi, sign0, n_lin=2000, n_geo=400):
	taus = np.unique(np.concatenate([
		np.geomspace(max(lo, 1e-10), hi, n_geo),
		np.linspace(lo, hi, n_lin + 1)[1:],
	]))
	taus = taus[(taus > lo) & (taus <= hi)]
	gaps = sign0 * _stopping_gap(traj, taus)
	crossed = np.nonzero(gaps <= 0)[0]
	if len(crossed) == 0:
		return None
	i = crossed[0]
	left = taus[i - 1] if i > 0 else lo
	return left, taus[i]


def det_trajectory_solve(q0, x0, mp, tg, ou, t0=None):
	"""Solve for the stopping time and integration constant.

	Args:
		q0 (float): Position at t0, outside the no-trade band.
		x0 (float): Signal at t0 in drift units; x(s) = x0 e^{-kappa (s - t0)}.
		mp (MarketParams): Needs K > 0.
		tg (TimeGrid): Day geometry.
		ou (OUParams): Signal decay; must have eta = 0 and xbar = 0.
		t0 (float): Start time. Default is the session open.

	Returns:
		DetTrajectory.
	"""
	if not mp.K > 0:
		raise ValueError('det_trajectory_solve needs K > 0.')
	if ou.eta != 0 or ou.xbar != 0:
		raise ValueError('The deterministic solver needs an OU signal with eta = 0 and xbar = 0.')
	t0 = tg.t_open if t0 is None else t0
	if not t0 < tg.T:
		raise ValueError(f'Start time {t0} must precede the close T = {tg.T}.')

	g0 = float(integrated_gain(ou, x0, t0, 2 * tg.T))
	b_minus0, b_plus0 = (float(v) for v in nt_boundaries(t0, g0, mp, tg))
	scale = max(1.0, abs(q0))
	if q0 > b_minus0 + 1e-12 * scale:
		side = Side.FROM_SELL
	elif q0 < b_plus0 - 1e-12 * scale:
		side = Side.FROM_BUY
	elif abs(q0 - b_minus0) <= 1e-12 * scale or abs(q0 - b_plus0) <= 1e-12 * scale:
		side = Side.FROM_SELL if abs(q0 - b_minus0) <= abs(q0 - b_plus0) else Side.FROM_BUY
		traj = DetTrajectory(q0, x0, t0, 0.0, t0, mp.A, side, mp, ou, tg)
		_, free_dot = traj._free(0.0)
		logger.debug('q0 on the band edge, trivial trajectory')
		return DetTrajectory(q0, x0, t0, -float(free_dot) / (2 * mp.A), t0, mp.A, side, mp, ou, tg)
	else:
		raise StartsInsideZoneError(
			f'q0 = {q0} lies inside the no-trade band [{b_plus0}, {b_minus0}] at t = {t0}.'
		)

	probe = DetTrajectory(q0, x0, t0, 0.0, t0, mp.A, side, mp, ou, tg)
	sign0 = 1.0 if side is Side.FROM_SELL else -1.0
	bracket = _first_sign_change(probe, 0.0, tg.T - t0, sign0)
	if bracket is None:
		late = _first_sign_change(probe, tg.T - t0, 2 * tg.T - t0 - 1e-9, sign0)
		if late is not None:
			tau_late = brentq(lambda tau: _stopping_gap(probe, tau), *late, xtol=1e-15)
			raise StoppingAfterCloseError(
				f'Optimal stopping time {t0 + tau_late:.6f} falls after the close T = {tg.T}.',
				t_hat=t0 + tau_late,
			)
		raise NoConvergenceError('No stopping time found before 2T.')

	lo, hi = bracket
	if _stopping_gap(probe, hi) == 0:
		tau_hat = hi
	else:
		tau_hat = brentq(
			lambda tau: float(_stopping_gap(probe, tau)), lo, hi,
			xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200
		)
	_, free_dot = probe._free(tau_hat)
	c = -float(free_dot) / (2 * mp.A * math.cosh(mp.A * tau_hat))
	traj = DetTrajectory(q0, x0, t0, c, t0 + tau_hat, mp.A, side, mp, ou, tg)

	speed_gap, position_gap = det_stopping_residual(traj)
	if max(speed_gap, position_gap) > STOPPING_TOL * max(1.0, abs(q0)):
		raise NoConvergenceError(
			f'Stopping conditions not met: |q_dot| = {speed_gap:.3g}, |q - b| = {position_gap:.3g}.'
		)
	logger.debug(f'det trajectory: side={side.value} t_hat={traj.t_hat:.6f} c={c:.6g}')
	return traj


def det_stopping_residual(traj):
	"""(|q_dot(t_hat)|, |q(t_hat) - b(t_hat)|)."""
	tau = traj.t_hat - traj.t0
	_, free_dot = traj._free(tau)
	speed = float(free_dot) + 2 * traj.c * traj.A * math.cosh(traj.A * tau)
	position = float(traj.q_unfrozen(traj.t_hat))
	return abs(speed), abs(position - traj.boundary_at_stop())


def det_euler_lagrange_residual(traj, grid, h=1e-4):
	"""Max |-2K q'' + g' + lambda nu (q - q_bar)| on grid by central differences."""
	s = np.asarray(grid, dtype=float)
	q = traj.q_unfrozen(s)
	q_dd = (traj.q_unfrozen(s + h) - 2 * q + traj.q_unfrozen(s - h)) / h ** 2
	g_d = (traj.gain_of_s(s + h) - traj.gain_of_s(s - h)) / (2 * h)
	mp = traj.mp
	return float(np.max(np.abs(-2 * mp.K * q_dd + g_d + mp.risk * (q - mp.q_bar))))


def det_euler_lagrange_residual_power(q_of_s, side, gain_of_s, mp, grid, h=1e-4):
	"""Residual of the Euler-Lagrange equation under impact K |u|^p.

	-p (p - 1) K |q'|^{p-2} q'' + g' + lambda nu (q - q_bar) = 0 on the trading
	interval. Sell-side paths must be non-increasing, buy-side paths
	non-decreasing.
	"""
	s = np.asarray(grid, dtype=float)
	q = q_of_s(s)
	q_d = (q_of_s(s + h) - q_of_s(s - h)) / (2 * h)
	q_dd = (q_of_s(s + h) - 2 * q + q_of_s(s - h)) / h ** 2
	sign = -1.0 if side is Side.FROM_SELL else 1.0
	if np.any(sign * q_d < -1e-8):
		raise ValueError(f'Trajectory moves against its {side.value} side.')
	g_d = (gain_of_s(s + h) - gain_of_s(s - h)) / (2 * h)
	p = mp.p
	inertia = p * (p - 1) * mp.K * np.abs(q_d) ** (p - 2) * q_dd
	return float(np.max(np.abs(-inertia + g_d + mp.risk * (q - mp.q_bar))))


def det_objective(traj):
	"""Deterministic cost of the path from t0 to 2T.

	int [C |q'| + K q'^2 - g q' + 0.5 lambda nu (q - q_bar)^2] ds over the
	trading interval plus the risk of holding q(t_hat) until 2T.
	"""
	mp, T = traj.mp, traj.tg.T

	def running(s):
		u = float(traj.q_dot(s))
		y = float(traj.q_of_s(s)) - mp.q_bar
		return mp.C * abs(u) + mp.K * u ** 2 - float(traj.gain_of_s(s)) * u + 0.5 * mp.risk * y ** 2

	trading = _quad(running, traj.t0, traj.t_hat, epsrel=1e-10) if traj.t_hat > traj.t0 else 0.0
	y_hat = float(traj.q_of_s(traj.t_hat)) - mp.q_bar
	return trading + 0.5 * mp.risk * (2 * T - traj.t_hat) * y_hat ** 2


###############################################################################
# Zero spread, quadratic impact
###############################################################################

class QuadCostValue:
	"""Value function V0(t,x) + V1(t,x) y + V2(t) y^2 for C = 0, y = q - q_bar.

	V2 is closed form. V1 = P(t) + Q(t)(x - xbar) where P and Q are
	Feynman-Kac integrals weighted by exp(-int V2 / K) = phi(s) / phi(t); V0 is
	quadratic in x - xbar with coefficients integrated over the Gaussian law of
	x_s. P and Q are evaluated by direct quadrature on Chebyshev nodes of
	[t_min, T] and interpolated; V1(..., exact=True) bypasses the cache.
	"""

	def __init__(self, mp, ou, tg, t_min=0.0, n_cache=129):
		self.mp = mp
		self.ou = ou
		self.tg = tg
		self.t_min = t_min
		self.A = mp.A
		self._v0_coefs = {}

		k = np.arange(n_cache)
		nodes = t_min + (tg.T - t_min) * (1 - np.cos(np.pi * k / (n_cache - 1))) / 2
		values = np.array([self._pq_exact(t) for t in nodes])
		self._pq_cache = BarycentricInterpolator(nodes, values)
		logger.debug(f'cached V1 coefficients on {n_cache} nodes of [{t_min}, {tg.T}]')

	def _log_phi(self, t):
		A, T = self.A, self.tg.T
		tau = T - np.asarray(t, dtype=float)
		return A * tau + np.log(0.5 * (1 + T * A) + 0.5 * (1 - T * A) * np.exp(-2 * A * tau))

	def V2(self, t):
		A, T, K = self.A, self.tg.T, self.mp.K
		th = np.tanh((T - np.asarray(t, dtype=float)) * A)
		return K * A * (th + T * A) / (1 + T * A * th)

	def _weight(self, t, s):
		return self.V2(s) / self.mp.K * np.exp(self._log_phi(s) - self._log_phi(t))

	def _pq_exact(self, t):
		ou, T = self.ou, self.tg.T

		def integrand(s):
			w = self._weight(t, s)
			return np.array([
				w * ou.xbar * (2 * T - s),
				w * _decay_integral(ou.kappa, 2 * T - s) * math.exp(-ou.kappa * (s - t)),
			])

		return _quad_vec(integrand, t, T)

	def _check_t(self, t):
		t = np.asarray(t, dtype=float)
		if np.any(t < self.t_min - 1e-12) or np.any(t > self.tg.T + 1e-12):
			raise ValueError(f'QuadCostValue is cached on [{self.t_min}, {self.tg.T}].')
		return t

	def pq(self, t):
		t = self._check_t(t)
		out = self._pq_cache(np.clip(t, self.t_min, self.tg.T))
		return out[..., 0], out[..., 1]

	def V1(self, t, x, exact=False):
		d = np.asarray(x, dtype=float) - self.ou.xbar
		if exact:
			t = np.asarray(self._check_t(t), dtype=float)
			pq = np.array([self._pq_exact(tt) for tt in t.ravel()]).reshape(t.shape + (2,))
			P, Q = pq[..., 0], pq[..., 1]
		else:
			P, Q = self.pq(t)
		return P + Q * d

	def _v0_coefficients(self, t):
		t = float(t)
		if t in self._v0_coefs:
			return self._v0_coefs[t]
		ou, T, K = self.ou, self.tg.T, self.mp.K

		def integrand(s):
			P, Q = self.pq(s)
			alpha = ou.xbar * (2 * T - s) - P
			beta = _decay_integral(ou.kappa, 2 * T - s) - Q
			_, var = ou_conditional_moments(ou, 0.0, t, s)
			decay = math.exp(-ou.kappa * (s - t))
			return np.array([
				alpha ** 2 + beta ** 2 * var,
				2 * alpha * beta * decay,
				beta ** 2 * decay ** 2,
			], dtype=float)

		coefs = -_quad_vec(integrand, t, T) / (4 * K)
		self._v0_coefs[t] = coefs
		return coefs

	def V0(self, t, x):
		self._check_t(t)
		d = np.asarray(x, dtype=float) - self.ou.xbar
		coefs = np.vectorize(
			lambda tt: tuple(self._v0_coefficients(tt)), otypes=[float, float, float]
		)(np.asarray(t, dtype=float))
		r0, r1, r2 = coefs
		return r0 + r1 * d + r2 * d ** 2

	def value(self, t, x, q):
		y = np.asarray(q, dtype=float) - self.mp.q_bar
		return self.V0(t, x) + self.V1(t, x) * y + self.V2(t) * y ** 2

	def dvalue_dq(self, t, x, q):
		y = np.asarray(q, dtype=float) - self.mp.q_bar
		return self.V1(t, x) + 2 * self.V2(t) * y

	def gain(self, t, x):
		return integrated_gain(self.ou, x, t, 2 * self.tg.T)


def quadcost_value(mp, ou, tg, t_min=0.0, n_cache=129):
	"""Closed-form value for zero spread and quadratic impact.

	Args:
		mp (MarketParams): Needs C = 0 and K > 0.
		ou (OUParams): Signal dynamics in drift units.
		tg (TimeGrid): Day geometry.
		t_min (float): Earliest time the value is evaluated at. Default is 0.
		n_cache (int): Chebyshev nodes for V1 coefficients. Default is 129.

	Returns:
		QuadCostValue.
	"""
	if mp.C != 0:
		raise ValueError(f'quadcost_value needs C = 0, got C = {mp.C}.')
	if not mp.K > 0:
		raise ValueError('quadcost_value needs K > 0.')
	return QuadCostValue(mp, ou, tg, t_min=t_min, n_cache=n_cache)


def quadcost_rate(t, q, x, qcv, mp):
	"""u = (g - V1 - 2 V2 (q - q_bar)) / 2K."""
	if mp.C != 0:
		raise ValueError(f'quadcost_rate needs C = 0, got C = {mp.C}.')
	return (qcv.gain(t, x) - qcv.dvalue_dq(t, x, q)) / (2 * mp.K)


def riccati_residual(qcv, times, h=1e-5):
	"""Max |V2' + 0.5 lambda nu - V2^2 / K| by central differences."""
	t = np.asarray(times, dtype=float)
	dV2 = (qcv.V2(t + h) - qcv.V2(t - h)) / (2 * h)
	V2 = qcv.V2(t)
	return float(np.max(np.abs(dV2 + 0.5 * qcv.mp.risk - V2 ** 2 / qcv.mp.K)))


def quadcost_hjb_residual(qcv, t_points, x_points, q_points, h_t=1e-4, h_x=None):
	"""Max finite-difference residual of the zero-spread HJB.

	D V + 0.5 lambda nu (q - q_bar)^2 - (g - V_q)^2 / 4K on the tensor grid,
	with D the OU generator plus d/dt.
	"""
	ou, mp = qcv.ou, qcv.mp
	t = np.asarray(t_points, dtype=float)
	x = np.asarray(x_points, dtype=float)
	q = np.asarray(q_points, dtype=float)
	if np.any(t - h_t < qcv.t_min) or np.any(t + h_t > qcv.tg.T):
		raise ValueError('Residual times must lie h_t inside the cached interval.')
	if h_x is None:
		h_x = 1e-3 * (1.0 + float(np.max(np.abs(x))))

	worst = 0.0
	for ti in t:
		T3 = np.array([ti - h_t, ti, ti + h_t])
		xm, qm = np.meshgrid(x, q, indexing='ij')

		def V(tt, xx):
			return qcv.value(np.full_like(xx, tt), xx, qm)

		v_t = (V(T3[2], xm) - V(T3[0], xm)) / (2 * h_t)
		v = V(ti, xm)
		v_up = V(ti, xm + h_x)
		v_down = V(ti, xm - h_x)
		v_x = (v_up - v_down) / (2 * h_x)
		v_xx = (v_up - 2 * v + v_down) / h_x ** 2
		generator = v_t + ou.kappa * (ou.xbar - xm) * v_x + 0.5 * ou.eta * v_xx
		v_q = qcv.dvalue_dq(ti, xm, qm)
		g = qcv.gain(ti, xm)
		residual = generator + 0.5 * mp.risk * (qm - mp.q_bar) ** 2 - (g - v_q) ** 2 / (4 * mp.K)
		worst = max(worst, float(np.max(np.abs(residual))))
	return worst


###############################################################################
# Large-impact expansion
###############################################################################

@dataclass(frozen=True)
class ExpansionTerms:
	"""Terms of the 1/K expansion at (t, q, x).

	b0 and b1 are (b_minus, b_plus) pairs; the order-one boundary is b0 + b1 / K.
	"""
	V0_exp: float
	dV1_dq: float
	b0: tuple
	b1: tuple


def _band_edges(s, q, mp, tg):
	"""Edges a_plus = V0_q + C, a_minus = V0_q - C and curvature V0_qq at time s."""
	curvature = mp.risk * (2 * tg.T - s)
	slope = curvature * (q - mp.q_bar)
	return slope + mp.C, slope - mp.C, curvature


def _partial_moments(M, sigma, a_plus, a_minus):
	"""E(g - a_plus)_+ and E(a_minus - g)_+ for g ~ N(M, sigma^2)."""
	if sigma < SIGMA_FLOOR * (1.0 + abs(M)):
		return max(M - a_plus, 0.0), max(a_minus - M, 0.0)
	lam_plus = (a_plus - M) / sigma
	lam_minus = (a_minus - M) / sigma
	above = sigma * (norm.pdf(lam_plus) - lam_plus * norm.sf(lam_plus))
	below = sigma * (norm.pdf(lam_minus) + lam_minus * norm.cdf(lam_minus))
	return above, below


def _second_partial_moments(M, sigma, a_plus, a_minus):
	"""E(g - a_plus)_+^2 and E(a_minus - g)_+^2 for g ~ N(M, sigma^2)."""
	if sigma < SIGMA_FLOOR * (1.0 + abs(M)):
		return max(M - a_plus, 0.0) ** 2, max(a_minus - M, 0.0) ** 2
	lp = (a_plus - M) / sigma
	lm = (a_minus - M) / sigma
	above = sigma ** 2 * ((1 + lp ** 2) * norm.sf(lp) - lp * norm.pdf(lp))
	below = sigma ** 2 * ((1 + lm ** 2) * norm.cdf(lm) + lm * norm.pdf(lm))
	return above, below


def expansion_dv1_dq(t, q, x, mp, ou, tg, epsrel=1e-8):
	"""First-order slope correction dV1/dq of the 1/K expansion.

	0.5 int_t^T V0_qq(s) [E(g_s - a_plus(s))_+ - E(a_minus(s) - g_s)_+] ds with
	g_s = g(s, x_s) Gaussian with moments from gain_moments and the band
	a_plus/minus = V0_q(s) +/- C. The first term pushes toward buying, the
	second toward selling.
	"""
	H = 2 * tg.T

	def integrand(s):
		a_plus, a_minus, curvature = _band_edges(s, q, mp, tg)
		gm = gain_moments(ou, x, t, s, H)
		above, below = _partial_moments(float(gm.mean), float(gm.std), a_plus, a_minus)
		return 0.5 * curvature * (above - below)

	if t >= tg.T:
		return 0.0
	return _quad(integrand, t, tg.T, epsrel=epsrel)


def expansion_v1(t, q, x, mp, ou, tg, epsrel=1e-8):
	"""First-order value correction V1 = -1/4 int E[(g - a_plus)_+^2 + (a_minus - g)_+^2] ds."""
	H = 2 * tg.T

	def integrand(s):
		a_plus, a_minus, _ = _band_edges(s, q, mp, tg)
		gm = gain_moments(ou, x, t, s, H)
		above, below = _second_partial_moments(float(gm.mean), float(gm.std), a_plus, a_minus)
		return -0.25 * (above + below)

	if t >= tg.T:
		return 0.0
	return _quad(integrand, t, tg.T, epsrel=epsrel)


def expansion_boundary(t, x, mp, ou, tg, order=1, epsrel=1e-8):
	"""Band edges (b_minus, b_plus) to order 0 or 1 in 1/K."""
	if order not in (0, 1):
		raise ValueError(f'order must be 0 or 1, got {order}.')
	g = float(integrated_gain(ou, x, t, 2 * tg.T))
	b_minus0, b_plus0 = (float(v) for v in nt_boundaries(t, g, mp, tg))
	if order == 0:
		return b_minus0, b_plus0
	if not mp.K > 0:
		raise ValueError('The order-one expansion needs K > 0.')
	curvature = mp.risk * (2 * tg.T - t)
	b1_minus = -expansion_dv1_dq(t, b_minus0, x, mp, ou, tg, epsrel) / curvature
	b1_plus = -expansion_dv1_dq(t, b_plus0, x, mp, ou, tg, epsrel) / curvature
	return b_minus0 + b1_minus / mp.K, b_plus0 + b1_plus / mp.K


def expansion_terms(t, q, x, mp, ou, tg, epsrel=1e-8):
	g = float(integrated_gain(ou, x, t, 2 * tg.T))
	b0 = tuple(float(v) for v in nt_boundaries(t, g, mp, tg))
	curvature = mp.risk * (2 * tg.T - t)
	b1 = tuple(-expansion_dv1_dq(t, b, x, mp, ou, tg, epsrel) / curvature for b in b0)
	return ExpansionTerms(
		V0_exp=0.5 * curvature * (q - mp.q_bar) ** 2,
		dV1_dq=expansion_dv1_dq(t, q, x, mp, ou, tg, epsrel),
		b0=b0,
		b1=b1,
	)
