"""Threshold scheduling for the mean age of incorrect information."""
from .errors import (InsufficientCheckpoints, NoRoot, NonConvergence, NoStationary,
                     OutOfRange, VolatilityRequired)
from .model import (AgeTable, Regime, SourceParams, age_by_sum, age_closed, age_increment, age_limit,
                    belief, build_age_table, make_params)
from .steady import (INFINITE, StationaryDist, SteadyAverages, ThresholdPolicy, avg_active,
                     avg_age, avg_cost, averages, build_Q, lambda_2n, lambda_limit, lambda_n,
                     spectral_radius, stationary)
from .solver import (PolicyVector, brute_force_threshold, extract_threshold,
                     optimal_threshold, r_limit, value_iteration)

__version__ = "0.1.0"
