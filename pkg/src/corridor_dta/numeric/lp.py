"""Discrete-time system-optimum LP and its dual prices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..core import CorridorNetwork, ScheduleDelay
from ..errors import InfeasibleProblemError, NonConvergenceError
from .grid import TimeGrid


@dataclass(frozen=True, eq=False)
class DsoLp:
    """min c^T x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, x >= 0.

    ``x[k * N + i]`` is the flow rate of origin i in interval k.
    """

    network: CorridorNetwork
    grid: TimeGrid
    c: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    schedule: ScheduleDelay | None = None


@dataclass(frozen=True, eq=False)
class LpSolution:
    lp: DsoLp
    x: np.ndarray
    objective: float
    dual_objective: float
    prices: np.ndarray
    costs: np.ndarray

    @property
    def flows(self) -> np.ndarray:
        """Flow rates, shape (K, N)."""
        return self.x.reshape(self.lp.grid.K, self.lp.network.n_bottlenecks)

    @property
    def duality_gap(self) -> float:
        return abs(self.objective - self.dual_objective)


def build_dso_lp(net: CorridorNetwork, s: ScheduleDelay, grid: TimeGrid) -> DsoLp:
    grid.check_horizon(net.horizon)
    N, K, dk = net.n_bottlenecks, grid.K, grid.dk
    cost = (np.asarray(s.value(grid.times))[:, None] + net.free_flow_times[None, :]) * dk
    U = sp.csr_matrix(np.triu(np.ones((N, N))))
    A_ub = sp.kron(sp.identity(K), U, format="csr")
    b_ub = np.tile(net.capacities, K)
    A_eq = sp.kron(dk * np.ones((1, K)), sp.identity(N), format="csr")
    return DsoLp(net, grid, cost.ravel(), A_ub, b_ub, A_eq, net.demands.copy(), s)


def solve_lp(lp: DsoLp, gap_tol: float = 1e-7) -> LpSolution:
    """Solve with HiGHS; prices are capacity-row duals per unit time."""
    res = linprog(lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, A_eq=lp.A_eq, b_eq=lp.b_eq,
                  bounds=(0, None), method="highs")
    if res.status == 2:
        raise InfeasibleProblemError("discrete optimum LP is infeasible (demand exceeds capacity over the horizon)")
    if res.status == 3:
        raise InfeasibleProblemError("discrete optimum LP is unbounded")
    if res.status != 0:
        raise NonConvergenceError(f"LP solver stopped: {res.message}")
    y_ub = res.ineqlin.marginals
    y_eq = res.eqlin.marginals
    dual = float(lp.b_ub @ y_ub + lp.b_eq @ y_eq)
    primal = float(res.fun)
    if abs(primal - dual) > gap_tol * max(1.0, abs(primal)):
        raise NonConvergenceError("LP duality gap above tolerance", {"primal": primal, "dual": dual})
    K, N = lp.grid.K, lp.network.n_bottlenecks
    prices = (-y_ub / lp.grid.dk).reshape(K, N)
    return LpSolution(lp, np.maximum(res.x, 0.0), primal, dual, np.maximum(prices, 0.0), np.asarray(y_eq, float))
