"""Brute-force optimizers that validate the analytic machinery.

	- solve_discrete_deterministic minimizes the time-discretized deterministic
		objective over per-step trades. The |trade| cost is handled by a
		proximal (soft-threshold) step, so buys and sells are never both
		active, followed by an exact solve on the identified active set.
	- solve_hjb_grid integrates the market-order HJB backward from the close
		with an explicit, monotone upwind scheme on an (x, q) grid.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from alpha_trading.exceptions import CFLViolationError, NoConvergenceError
from alpha_trading.exact import expansion_boundary
from alpha_trading.policy import dvalue_dq, value_approx
from alpha_trading.signals import integrated_gain, ou_conditional_moments


logger = logging.getLogger(__name__)


###############################################################################
# Discrete deterministic problem
###############################################################################

@dataclass(frozen=True)
class DiscreteProblem:
	"""Time-discretized deterministic trading problem.

	Positions q_i = q0 + sum_{k<=i} dq_k at t_i = t_start + i dt, i = 1..n.
	The objective is

		sum_i [C |dq_i| - g_i dq_i + K dq_i^2 / dt]
			+ 0.5 lambda nu * trapezoid integral of (q - q_bar)^2 over [t_0, t_n]
			+ 0.5 lambda nu (2T - t_n)(q_n - q_bar)^2

	with g_i the gain at the middle of step i.

	Args:
		n (int): Number of steps.
		dt (float): Step length in days.
		q0 (float): Initial position.
		gains (np.ndarray): Per-step gains, length n.
		mp (MarketParams): Model constants.
		tg (TimeGrid): Day geometry; supplies T.
		t_start (float): Time of q0. Default is T - n dt.
	"""
	n: int
	dt: float
	q0: float
	gains: np.ndarray
	mp: object
	tg: object
	t_start: float = None

	def __post_init__(self):
		if self.n < 1:
			raise ValueError(f'DiscreteProblem needs n >= 1, got {self.n}.')
		gains = np.asarray(self.gains, dtype=float)
		if gains.shape != (self.n,):
			raise ValueError(f'gains must have {self.n} entries, got shape {gains.shape}.')
		object.__setattr__(self, 'gains', gains)
		if self.t_start is None:
			object.__setattr__(self, 't_start', self.tg.T - self.n * self.dt)
		if not self.dt > 0:
			raise ValueError(f'dt must be positive, got {self.dt}.')

	@classmethod
	def from_decaying_signal(cls, q0, x0, mp, ou, tg, n=None, dt=None, t_start=None):
		"""Discretize the deterministic problem with signal x0 e^{-kappa (s - t_start)}."""
		n = tg.n_steps if n is None else n
		dt = tg.dt if dt is None else dt
		t_start = tg.T - n * dt if t_start is None else t_start
		mids = t_start + dt * (np.arange(n) + 0.5)
		x_mid = x0 * np.exp(-ou.kappa * (mids - t_start))
		gains = integrated_gain(ou, x_mid, mids, 2 * tg.T)
		return cls(n=n, dt=dt, q0=q0, gains=gains, mp=mp, tg=tg, t_start=t_start)

	@property
	def times(self):
		return self.t_start + self.dt * np.arange(self.n + 1)

	def risk_weights(self):
		"""Weights of (q_i - q_bar)^2, i = 1..n, in units of 0.5 lambda nu."""
		w = np.full(self.n, self.dt)
		w[-1] = 0.5 * self.dt + (2 * self.tg.T - self.times[-1])
		return w

	def objective(self, trades):
		mp = self.mp
		trades = np.asarray(trades, dtype=float)
		y = self.q0 - mp.q_bar + np.cumsum(trades)
		y0 = self.q0 - mp.q_bar
		return float(
			mp.C * np.sum(np.abs(trades))
			- self.gains @ trades
			+ mp.K / self.dt * trades @ trades
			+ 0.5 * mp.risk * (self.risk_weights() @ y ** 2 + 0.5 * self.dt * y0 ** 2)
		)


@dataclass
class DiscreteSolution:
	trades: np.ndarray
	positions: np.ndarray
	times: np.ndarray
	objective: float
	iterations: int
	kkt_residual: float
	history: np.ndarray = field(repr=False)


def _rev_cumsum(v):
	return np.cumsum(v[::-1])[::-1]


class _DiscreteObjective:
	"""Smooth part, gradient and KKT residual of a DiscreteProblem."""

	def __init__(self, prob):
		self.prob = prob
		mp = prob.mp
		self.w = mp.risk * prob.risk_weights()
		self.y0 = prob.q0 - mp.q_bar
		self.quad = 2 * mp.K / prob.dt
		tail = _rev_cumsum(self.w)
		idx = np.arange(prob.n)
		self.hessian = tail[np.maximum.outer(idx, idx)] + self.quad * np.eye(prob.n)
		self.lipschitz = float(np.linalg.eigvalsh(self.hessian)[-1])

	def smooth_grad(self, u):
		y = self.y0 + np.cumsum(u)
		return -self.prob.gains + self.quad * u + _rev_cumsum(self.w * y)

	def total(self, u):
		return self.prob.objective(u)

	def kkt_residual(self, u, grad=None):
		C = self.prob.mp.C
		grad = self.smooth_grad(u) if grad is None else grad
		r = np.where(
			u > 0, np.abs(grad + C),
			np.where(u < 0, np.abs(grad - C), np.maximum(np.abs(grad) - C, 0.0))
		)
		return float(np.max(r))

	def polish(self, u):
		"""Exact minimizer on the sign pattern of u, or None if inconsistent."""
		C = self.prob.mp.C
		sign = np.sign(u)
		free = sign != 0
		polished = np.zeros_like(u)
		if np.any(free):
			rhs = self.prob.gains - C * sign - _rev_cumsum(self.w * self.y0)
			polished[free] = np.linalg.solve(self.hessian[np.ix_(free, free)], rhs[free])
			if np.any(np.sign(polished[free]) != sign[free]):
				return None
		return polished


def solve_discrete_deterministic(prob, tol=1e-10, max_iter=200_000, polish_every=50):
	"""Minimize the discrete deterministic objective.

	Accelerated proximal gradient with a monotone safeguard and restarts:
	the reported objective never increases between iterations. Once the
	sign pattern of the trades settles, the quadratic problem on that pattern
	is solved exactly and accepted when it satisfies the optimality
	conditions.

	Args:
		prob (DiscreteProblem): Problem instance; needs K > 0 or C > 0.
		tol (float): KKT residual tolerance, relative to max(1, |g|, C).
			Default is 1e-10.
		max_iter (int): Iteration cap. Default is 200000.
		polish_every (int): Iterations between active-set polish attempts.

	Returns:
		DiscreteSolution.
	"""
	mp = prob.mp
	if not (mp.K > 0 or mp.C > 0):
		raise ValueError('solve_discrete_deterministic needs K > 0 or C > 0.')
	obj = _DiscreteObjective(prob)
	scale = max(1.0, float(np.max(np.abs(prob.gains))), mp.C)
	step = 1.0 / obj.lipschitz

	def prox(v):
		return np.sign(v) * np.maximum(np.abs(v) - step * mp.C, 0.0)

	x = np.zeros(prob.n)
	F_x = obj.total(x)
	history = [F_x]
	y = x.copy()
	momentum = 1.0
	last_sign = np.sign(x)
	converged = False
	kkt = obj.kkt_residual(x)

	if kkt <= tol * scale:
		converged = True

	it = 0
	while not converged and it < max_iter:
		it += 1
		z = prox(y - step * obj.smooth_grad(y))
		F_z = obj.total(z)
		next_momentum = 0.5 * (1 + math.sqrt(1 + 4 * momentum ** 2))
		if F_z <= F_x:
			x_prev, x = x, z
			F_x = F_z
			y = x + ((momentum - 1) / next_momentum) * (x - x_prev)
			momentum = next_momentum
		else:
			y = x.copy()
			momentum = 1.0
		history.append(F_x)

		if it % polish_every == 0:
			kkt = obj.kkt_residual(x)
			if kkt <= tol * scale:
				converged = True
				break
			sign = np.sign(x)
			if np.array_equal(sign, last_sign):
				candidate = obj.polish(x)
				if candidate is not None:
					F_c = obj.total(candidate)
					kkt_c = obj.kkt_residual(candidate)
					if kkt_c <= tol * scale and F_c <= F_x + 1e-12 * max(1.0, abs(F_x)):
						x, F_x, kkt = candidate, min(F_c, F_x), kkt_c
						history.append(F_x)
						converged = True
						break
			last_sign = sign

	if not converged:
		raise NoConvergenceError(
			f'Discrete optimizer stopped after {max_iter} iterations with KKT residual {kkt:.3g}.'
		)
	logger.debug(f'discrete optimum after {it} iterations, objective {F_x:.12g}')
	return DiscreteSolution(
		trades=x,
		positions=prob.q0 + np.concatenate([[0.0], np.cumsum(x)]),
		times=prob.times,
		objective=F_x,
		iterations=it,
		kkt_residual=obj.kkt_residual(x),
		history=np.asarray(history),
	)


###############################################################################
# Finite-difference HJB
###############################################################################

@dataclass(frozen=True)
class GridSpec:
	"""Resolution and extent of the (t, x, q) grid.

	Args:
		n_x (int): Signal nodes. Default is 41.
		n_q (int): Position nodes. Default is 121.
		n_t (int): Time steps; None picks the smallest stable count.
		x_width (float): Half-width of the x grid in stationary standard
			deviations. Default is 5.
		q_width (float): Half-width of the q grid in units of
			(C + max |g|) / (lambda nu T). Default is 5.
		q_half_width (float): Explicit q half-width overriding q_width.
		t_start (float): Earliest time. Default is the session open.
		cfl_safety (float): Fraction of the stability bound used when n_t is
			chosen automatically. Default is 0.9.
	"""
	n_x: int = 41
	n_q: int = 121
	n_t: int = None
	x_width: float = 5.0
	q_width: float = 5.0
	q_half_width: float = None
	t_start: float = None
	cfl_safety: float = 0.9

	def __post_init__(self):
		if self.n_x < 3 or self.n_q < 3:
			raise ValueError('GridSpec needs at least 3 nodes in x and q.')
		if self.n_t is not None and self.n_t < 1:
			raise ValueError(f'n_t must be positive, got {self.n_t}.')
		if not 0 < self.cfl_safety <= 1:
			raise ValueError(f'cfl_safety must lie in (0, 1], got {self.cfl_safety}.')


@dataclass
class GridValue:
	"""Grid solution of the market-order HJB.

	values[n, i, j] is V(t_grid[n], x_grid[i], q_grid[j]); b_minus and b_plus
	are the implied band edges per (t, x) node (NaN where the slice has no
	sign change).
	"""
	t_grid: np.ndarray
	x_grid: np.ndarray
	q_grid: np.ndarray
	values: np.ndarray
	gains: np.ndarray
	b_minus: np.ndarray
	b_plus: np.ndarray
	mp: object
	tg: object

	@property
	def dq(self):
		return float(self.q_grid[1] - self.q_grid[0])

	@property
	def dx(self):
		return float(self.x_grid[1] - self.x_grid[0])


def zero_trading_value(t, q, mp, tg):
	"""Cost of never trading again, an upper bound of the optimal value."""
	return value_approx(t, q, 0.0, mp, tg)


def _hamiltonian(g, p_fwd, p_bwd, mp):
	"""min over u of C|u| + K|u|^p + (V_q - g) u, upwinded by trade direction.

	Returns the Hamiltonian and the buy/sell rates.
	"""
	expo = 1.0 / (mp.p - 1)
	u_buy = (np.maximum(g - mp.C - p_fwd, 0.0) / (mp.p * mp.K)) ** expo
	u_sell = (np.maximum(p_bwd - g - mp.C, 0.0) / (mp.p * mp.K)) ** expo
	h_buy = -mp.K * (mp.p - 1) * u_buy ** mp.p
	h_sell = -mp.K * (mp.p - 1) * u_sell ** mp.p
	return np.minimum(h_buy, h_sell), u_buy, u_sell


def _implied_edges(v_q_mid, q_mid, level):
	"""First q where level - V_q crosses zero along the last axis, by interpolation."""
	f = level[..., None] - v_q_mid
	below = f <= 0
	has = below.any(axis=-1) & (f[..., 0] > 0)
	j = np.argmax(below, axis=-1)
	j_prev = np.maximum(j - 1, 0)
	f1 = np.take_along_axis(f, j[..., None], axis=-1)[..., 0]
	f0 = np.take_along_axis(f, j_prev[..., None], axis=-1)[..., 0]
	q1 = q_mid[j]
	q0 = q_mid[j_prev]
	with np.errstate(invalid='ignore', divide='ignore'):
		edge = q0 + f0 * (q1 - q0) / (f0 - f1)
	return np.where(has, edge, np.nan)


def solve_hjb_grid(mp, ou, tg, spec=None, verbose=False):
	"""Backward explicit solution of the market-order HJB.

	D V + 0.5 lambda nu (q - q_bar)^2 + min_u [C|u| + K|u|^p + (V_q - g) u] = 0
	with V(T) = 0.5 lambda nu T (q - q_bar)^2. The x-drift is upwinded, the
	buy branch uses the forward q-difference and the sell branch the backward
	one, which keeps the scheme monotone under the CFL bound

		dt (|drift| / dx + eta / dx^2 + max rate / dq) <= 1.

	Args:
		mp (MarketParams): Needs K > 0.
		ou (OUParams): Signal dynamics in drift units; needs kappa, eta > 0.
		tg (TimeGrid): Day geometry.
		spec (GridSpec): Grid resolution. Default is GridSpec().
		verbose (bool): Show a progress bar. Default is False.

	Returns:
		GridValue.
	"""
	spec = GridSpec() if spec is None else spec
	if not mp.K > 0:
		raise ValueError('solve_hjb_grid needs K > 0.')
	if not (ou.kappa > 0 and ou.eta > 0):
		raise ValueError('solve_hjb_grid needs a stationary signal (kappa > 0, eta > 0).')

	T = tg.T
	t_start = tg.t_open if spec.t_start is None else spec.t_start
	x_sd = math.sqrt(ou.stationary_variance)
	x_grid = ou.xbar + x_sd * np.linspace(-spec.x_width, spec.x_width, spec.n_x)
	dx = x_grid[1] - x_grid[0]

	g_max = float(np.max(np.abs(integrated_gain(ou, x_grid, t_start, 2 * T))))
	if spec.q_half_width is not None:
		q_half = spec.q_half_width
	else:
		q_half = spec.q_width * (mp.C + g_max) / (mp.risk * T)
	if not q_half > 0:
		raise ValueError('The q grid has zero width; set GridSpec.q_half_width.')
	q_grid = mp.q_bar + np.linspace(-q_half, q_half, spec.n_q)
	dq = q_grid[1] - q_grid[0]
	q_mid = 0.5 * (q_grid[1:] + q_grid[:-1])

	drift = ou.kappa * (ou.xbar - x_grid)
	slope_max = g_max + mp.risk * (2 * T - t_start) * q_half
	u_max = (slope_max / (mp.p * mp.K)) ** (1.0 / (mp.p - 1))
	rate_max = float(np.max(np.abs(drift))) / dx + ou.eta / dx ** 2 + u_max / dq
	horizon = T - t_start
	if spec.n_t is None:
		n_t = max(1, int(math.ceil(horizon * rate_max / spec.cfl_safety)))
	else:
		n_t = spec.n_t
	dt_g = horizon / n_t
	if dt_g * rate_max > 1:
		raise CFLViolationError(
			f'{n_t} time steps violate the stability bound; need at least '
			f'{int(math.ceil(horizon * rate_max))}.'
		)
	logger.info(f'HJB grid {spec.n_x}x{spec.n_q}, {n_t} steps, CFL number {dt_g * rate_max:.3f}')

	t_grid = T - dt_g * np.arange(n_t + 1)[::-1]
	t_grid[0] = t_start
	gains = integrated_gain(ou, x_grid[None, :], t_grid[:, None], 2 * T)

	values = np.empty((n_t + 1, spec.n_x, spec.n_q))
	y2 = (q_grid - mp.q_bar) ** 2
	values[-1] = 0.5 * mp.risk * T * y2[None, :]
	up = drift > 0

	v = values[-1].copy()
	for n in tqdm(
		range(n_t - 1, -1, -1),
		desc='HJB backward sweep',
		total=n_t,
		ncols=100,
		disable=not verbose
	):
		g = gains[n + 1][:, None]

		d_fwd = np.empty_like(v)
		d_bwd = np.empty_like(v)
		d_fwd[:-1] = (v[1:] - v[:-1]) / dx
		d_fwd[-1] = d_fwd[-2]
		d_bwd[1:] = (v[1:] - v[:-1]) / dx
		d_bwd[0] = d_bwd[1]
		v_x = np.where(up[:, None], d_fwd, d_bwd)
		v_xx = np.zeros_like(v)
		v_xx[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / dx ** 2

		p_fwd = np.empty_like(v)
		p_bwd = np.empty_like(v)
		p_fwd[:, :-1] = (v[:, 1:] - v[:, :-1]) / dq
		p_fwd[:, -1] = p_fwd[:, -2]
		p_bwd[:, 1:] = (v[:, 1:] - v[:, :-1]) / dq
		p_bwd[:, 0] = p_bwd[:, 1]
		ham, u_buy, u_sell = _hamiltonian(g, p_fwd, p_bwd, mp)

		local_rate = np.abs(drift)[:, None] / dx + ou.eta / dx ** 2 + np.maximum(u_buy, u_sell) / dq
		if dt_g * float(np.max(local_rate)) > 1 + 1e-12:
			raise CFLViolationError(
				f'Trading rate {float(np.max(np.maximum(u_buy, u_sell))):.4g} broke the '
				f'stability bound at t = {t_grid[n + 1]:.6f}.'
			)

		generator = drift[:, None] * v_x + 0.5 * ou.eta * v_xx
		v = v + dt_g * (generator + 0.5 * mp.risk * y2[None, :] + ham)
		values[n] = v

	v_q_mid = (values[:, :, 1:] - values[:, :, :-1]) / dq
	b_plus = _implied_edges(v_q_mid, q_mid, gains - mp.C)
	b_minus = _implied_edges(v_q_mid, q_mid, gains + mp.C)
	return GridValue(
		t_grid=t_grid, x_grid=x_grid, q_grid=q_grid, values=values, gains=gains,
		b_minus=b_minus, b_plus=b_plus, mp=mp, tg=tg,
	)


@dataclass
class BoundaryReport:
	"""Grid-implied minus analytic band edges on selected time slices."""
	t_indices: np.ndarray
	times: np.ndarray
	signed_minus: np.ndarray
	signed_plus: np.ndarray
	sup_minus: float
	sup_plus: float
	symmetry_defect: float
	dq: float

	@property
	def sup_norm(self):
		return max(self.sup_minus, self.sup_plus)

	def to_dict(self):
		return {
			'times': self.times.tolist(),
			'sup_norm': self.sup_norm,
			'sup_norm_b_minus': self.sup_minus,
			'sup_norm_b_plus': self.sup_plus,
			'symmetry_defect': self.symmetry_defect,
			'q_spacing': self.dq,
			'signed_b_minus': np.where(np.isnan(self.signed_minus), None, self.signed_minus).tolist(),
			'signed_b_plus': np.where(np.isnan(self.signed_plus), None, self.signed_plus).tolist(),
		}


def expansion_boundaries_on_grid(grid, ou, order, t_indices, x_indices=None):
	"""Analytic band edges from expansion_boundary on grid (t, x) nodes."""
	t_indices = np.atleast_1d(np.asarray(t_indices, dtype=int))
	x_indices = np.arange(len(grid.x_grid)) if x_indices is None else np.asarray(x_indices, dtype=int)
	b_minus = np.full((len(t_indices), len(grid.x_grid)), np.nan)
	b_plus = np.full_like(b_minus, np.nan)
	for a, n in enumerate(t_indices):
		for i in x_indices:
			b_minus[a, i], b_plus[a, i] = expansion_boundary(
				float(grid.t_grid[n]), float(grid.x_grid[i]), grid.mp, ou, grid.tg, order=order
			)
	return {'t_indices': t_indices, 'b_minus': b_minus, 'b_plus': b_plus}


def compare_boundaries(grid, analytic):
	"""Sup-norm and signed differences between grid and analytic band edges.

	Args:
		grid (GridValue): Grid solution.
		analytic (dict): 't_indices', 'b_minus' and 'b_plus' as returned by
			expansion_boundaries_on_grid; NaN entries are skipped.

	Returns:
		BoundaryReport.
	"""
	t_idx = np.asarray(analytic['t_indices'], dtype=int)
	b_minus = np.asarray(analytic['b_minus'], dtype=float)
	b_plus = np.asarray(analytic['b_plus'], dtype=float)
	if b_minus.shape != (len(t_idx), len(grid.x_grid)) or b_plus.shape != b_minus.shape:
		raise ValueError('Analytic boundaries do not match the grid (t, x) layout.')

	signed_minus = grid.b_minus[t_idx] - b_minus
	signed_plus = grid.b_plus[t_idx] - b_plus

	def sup(a):
		return float(np.nanmax(np.abs(a))) if np.any(np.isfinite(a)) else math.nan

	q_bar = grid.mp.q_bar
	flip = (grid.b_plus[t_idx] - q_bar) + (grid.b_minus[t_idx][:, ::-1] - q_bar)
	return BoundaryReport(
		t_indices=t_idx,
		times=grid.t_grid[t_idx],
		signed_minus=signed_minus,
		signed_plus=signed_plus,
		sup_minus=sup(signed_minus),
		sup_plus=sup(signed_plus),
		symmetry_defect=sup(flip),
		dq=grid.dq,
	)


###############################################################################
# Monte Carlo Feynman-Kac
###############################################################################

def mc_expansion_dv1_dq(t, q, x, mp, ou, tg, n_paths, rng):
	"""Monte Carlo estimate of the first-order slope correction.

	Samples s uniformly on [t, T] and x_s from its exact OU law, evaluates
	the gain g(s, x_s) and averages (T - t) * 0.5 V0_qq(s) [(g - a_plus)_+ -
	(a_minus - g)_+].

	Returns:
		(mean, standard error) tuple.
	"""
	if n_paths < 2:
		raise ValueError('mc_expansion_dv1_dq needs at least 2 paths.')
	T = tg.T
	s = t + (T - t) * rng.random(n_paths)
	mean, var = ou_conditional_moments(ou, x, t, s)
	x_s = mean + np.sqrt(var) * rng.standard_normal(n_paths)
	g = integrated_gain(ou, x_s, s, 2 * T)
	slope = dvalue_dq(s, q, mp, tg)
	curvature = mp.risk * (2 * T - s)
	samples = 0.5 * (T - t) * curvature * (
		np.maximum(g - (slope + mp.C), 0.0) - np.maximum((slope - mp.C) - g, 0.0)
	)
	return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(n_paths))
