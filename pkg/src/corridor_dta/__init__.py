"""Optimum and equilibrium departure-time assignment on tandem-bottleneck corridors."""
from .core import (ArrivalWindow, CallableSchedule, CorridorNetwork, Direction, PiecewiseLinearSchedule,
                   ScheduleDelay, VSchedule, eval_schedule, eval_schedule_slope, window_from_length)
from .pwl import PiecewiseLinearFn
from .reduction import ReducedNetwork, disaggregate, normalized_demands, reduce
from .analytic import (CumulativeCurves, DsoSolution, DueSolution, FeasibilityReport, build_cumulative_curves,
                       check_due_feasibility, solve_dso, solve_due, solve_due_evening, solve_due_morning)

__version__ = "0.1.0"
