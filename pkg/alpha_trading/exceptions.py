"""Exception types raised by the alpha_trading numerical routines."""


class AlphaTradingError(Exception):
	"""Base class for numerical failures in this library."""


class NoConvergenceError(AlphaTradingError):
	"""A root finder or iterative optimizer hit its iteration cap."""


class StartsInsideZoneError(AlphaTradingError):
	"""The initial position already lies strictly inside the no-trade zone."""


class StoppingAfterCloseError(AlphaTradingError):
	"""The optimal stopping time falls after the session close T."""

	def __init__(self, message, t_hat=None):
		super().__init__(message)
		self.t_hat = t_hat


class QuadratureFailureError(AlphaTradingError):
	"""Adaptive quadrature did not reach the requested tolerance."""


class CFLViolationError(AlphaTradingError):
	"""Explicit finite-difference time step exceeds the stability bound."""


class ZeroVarianceError(AlphaTradingError):
	"""A Sharpe ratio was requested for a P&L series with zero variance."""
