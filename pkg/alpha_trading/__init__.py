from alpha_trading.exceptions import (
	AlphaTradingError,
	CFLViolationError,
	NoConvergenceError,
	QuadratureFailureError,
	StartsInsideZoneError,
	StoppingAfterCloseError,
	ZeroVarianceError,
)
from alpha_trading.signals import (
	AlphaModel,
	GainMoments,
	OUParams,
	SignalState,
	TimeGrid,
	gain_moments,
	integrated_gain,
	ou_conditional_moments,
	ou_step,
)
from alpha_trading.policy import (
	Boundaries,
	MarketParams,
	Mode,
	Zone,
	ZoneDecision,
	classify_zone,
	decide,
	fill_probability,
	limit_boundaries,
	nt_boundaries,
)
from alpha_trading.exact import (
	DetTrajectory,
	QuadCostValue,
	det_trajectory_solve,
	expansion_boundary,
	quadcost_value,
)
from alpha_trading.oracle import (
	DiscreteProblem,
	GridSpec,
	GridValue,
	compare_boundaries,
	solve_discrete_deterministic,
	solve_hjb_grid,
)
from alpha_trading.simulator import (
	PathSet,
	PnLSeries,
	SimConfig,
	StrategyKind,
	compute_sharpe,
	generate_paths,
	run_experiment,
	run_seed_sweep,
)
