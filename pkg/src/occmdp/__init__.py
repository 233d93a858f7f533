"""Average-cost Markov decision processes by occupation-measure linear programming."""
from .chain import ChainReport, analyze_chain, dobrushin, ergodic_decomposition, return_time_stats
from .lp import LpProblem, LpSolution, solve_lp
from .measures import OccupationMeasure, StationaryPolicy
from .model import ContinuousModel1D, FiniteMdp, discretize, majorization_bound, validate_model
from .occupation import (
    build_occupation_lp,
    expected_cost,
    invariance_residual,
    mix_occupations,
    occupation_of_policy,
    solve_occupation_lp,
)
from .policy import disintegrate, mix_policies, policy_kernel, quantize_policy

__version__ = "0.1.0"
