"""Discrete-time oracles: optimum LP, equilibrium LCP and comparison metrics."""
from .grid import TimeGrid
from .lp import DsoLp, LpSolution, build_dso_lp, solve_lp
from .lcp import LcpProblem, LcpSolution, build_lcp, check_contract, dump_lcp, lcp_residuals, solve_lcp
from .compare import ComparisonReport, Regime, SampledState, classify_regime, compare_solutions, grid_tolerances, sample_state
