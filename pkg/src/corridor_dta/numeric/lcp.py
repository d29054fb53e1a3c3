"""Discrete-time equilibrium as a linear complementarity problem.

Unknowns X = [q, w, rho] with q[k, i] the vehicles of origin i in interval k,
w[k, i] the queuing delay at bottleneck i and rho[i] the equilibrium cost.
Both q and w are stacked time-major (index k * N + i).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linprog

from ..core import CorridorNetwork, Direction, ScheduleDelay
from ..errors import NonConvergenceError
from .grid import TimeGrid

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LcpProblem:
    network: CorridorNetwork
    grid: TimeGrid
    direction: Direction
    M: sp.csc_matrix
    b: np.ndarray
    schedule: ScheduleDelay | None = None

    @property
    def N(self) -> int:
        return self.network.n_bottlenecks

    @property
    def K(self) -> int:
        return self.grid.K

    @property
    def size(self) -> int:
        return self.b.size

    @property
    def blocks(self) -> tuple[slice, slice, slice]:
        nk = self.N * self.K
        return slice(0, nk), slice(nk, 2 * nk), slice(2 * nk, 2 * nk + self.N)

    def dense(self) -> np.ndarray:
        return self.M.toarray()

    def F(self, X: np.ndarray) -> np.ndarray:
        return self.M @ X + self.b


@dataclass(frozen=True, eq=False)
class LcpSolution:
    problem: LcpProblem
    X: np.ndarray
    method: str
    iterations: int = 0
    residuals: dict = field(default_factory=dict)

    @property
    def q(self) -> np.ndarray:
        """Vehicles per interval, shape (K, N)."""
        return self.X[self.problem.blocks[0]].reshape(self.problem.K, self.problem.N)

    @property
    def rates(self) -> np.ndarray:
        return self.q / self.problem.grid.dk

    @property
    def w(self) -> np.ndarray:
        return self.X[self.problem.blocks[1]].reshape(self.problem.K, self.problem.N)

    @property
    def rho(self) -> np.ndarray:
        return self.X[self.problem.blocks[2]].copy()

    @classmethod
    def from_analytic(cls, problem: LcpProblem, solution) -> LcpSolution:
        """Embed a closed-form solution: interval masses, delays at t_k, costs."""
        g = problem.grid
        edges = g.edges
        N = problem.N
        q = np.empty((g.K, N))
        w = np.empty((g.K, N))
        delays = getattr(solution, "delays", None) or solution.prices
        for i in range(N):
            f = solution.flows[i]
            cum = np.array([f.integral(edges[0], e) for e in edges])
            q[:, i] = np.diff(cum)
            w[:, i] = delays[i](g.times)
        X = np.concatenate([q.ravel(), w.ravel(), np.asarray(solution.costs, float)])
        return cls(problem, X, "analytic", 0, lcp_residuals(problem, X))


def _kron_blocks(N: int, K: int, mu: np.ndarray, direction: Direction):
    L = np.tril(np.ones((N, N)))
    I_K = sp.identity(K, format="csr")
    I_N = sp.identity(N, format="csr")
    diff = sp.diags([np.ones(K), -np.ones(K - 1)], [0, -1], format="csr")
    if direction is Direction.MORNING:
        G = np.diag(mu) @ (np.eye(N) - L)
    else:
        G = np.diag(mu) @ L
    ones = np.ones((K, 1))
    return L, I_K, I_N, diff, G, ones


def build_lcp(net: CorridorNetwork, s: ScheduleDelay, grid: TimeGrid, direction=None) -> LcpProblem:
    """Assemble (M, b); the evening blocks follow from sigma = t + sum_{j<=i} w_j + c_i."""
    grid.check_horizon(net.horizon)
    direction = Direction.parse(direction or net.direction)
    N, K = net.n_bottlenecks, grid.K
    L, I_K, I_N, diff, G, ones = _kron_blocks(N, K, net.capacities, direction)
    M = sp.bmat([
        [None, sp.kron(I_K, L), -sp.kron(ones, I_N)],
        [-sp.kron(I_K, L.T), sp.kron(diff, G), None],
        [sp.kron(ones.T, I_N), None, sp.csr_matrix((N, N))],
    ], format="csc")
    sched = np.asarray(s.value(grid.times), dtype=float)
    b = np.concatenate([
        (sched[:, None] + net.free_flow_times[None, :]).ravel(),
        grid.dk * np.tile(net.capacities, K),
        -net.demands,
    ])
    return LcpProblem(net, grid, direction, M, b, s)


def lcp_residuals(problem: LcpProblem, X: np.ndarray) -> dict:
    F = problem.F(X)
    return {
        "min_x": float(X.min(initial=0.0)),
        "min_f": float(F.min(initial=0.0)),
        "complementarity": float(abs(X @ F)),
        "max_pair": float(np.max(np.abs(X * F), initial=0.0)),
    }


def check_contract(problem: LcpProblem, X: np.ndarray, eps_c: float = 1e-8) -> tuple[bool, dict]:
    b = problem.b
    res = lcp_residuals(problem, X)
    eps_f = 1e-7 * max(np.max(np.abs(b)), 1.0)
    scale = 1.0 + np.linalg.norm(b) * np.linalg.norm(X)
    ok = res["min_x"] >= 0.0 and res["min_f"] >= -eps_f and res["complementarity"] <= eps_c * scale
    res.update(eps_f=eps_f, eps_c_scaled=eps_c * scale)
    return ok, res


# ----------------------------------------------------------------------
# Lemke's complementary pivoting


def lemke(M: sp.spmatrix, q: np.ndarray, max_iter: int = 50000, pivot_tol: float = 1e-9):
    """Lemke's method with covering vector 1, refactorising the sparse basis core.

    The basis consists of basic z columns J, the artificial z0, and the w
    variables whose index is not in ``Ic``. Only the core system on rows
    ``Ic`` needs a factorisation.
    """
    n = q.size
    M = sp.csc_matrix(M)
    d = np.ones(n)
    if q.min() >= 0:
        return np.zeros(n), 0
    r = int(np.argmin(q))
    J: list[int] = []
    Ic: list[int] = [r]
    in_w = np.ones(n, dtype=bool)
    in_w[r] = False
    entering = ("z", r)
    for it in range(1, max_iter + 1):
        Jarr = np.array(J, dtype=int)
        Icarr = np.array(Ic, dtype=int)
        MJ = M[:, Jarr]
        core = sp.hstack([-MJ[Icarr, :], sp.csc_matrix(-d[Icarr][:, None])], format="csc")
        lu = spla.splu(core)
        xc = lu.solve(q[Icarr])
        Iarr = np.flatnonzero(in_w)
        MIJ = MJ[Iarr, :]
        zJ, z0 = xc[:-1], xc[-1]
        wI = q[Iarr] + MIJ @ zJ + d[Iarr] * z0
        kind, e = entering
        if kind == "z":
            a = -M[:, e].toarray().ravel()
        else:
            a = np.zeros(n)
            a[e] = 1.0
        dc = lu.solve(a[Icarr])
        dw = a[Iarr] + MIJ @ dc[:-1] + d[Iarr] * dc[-1]
        xb = np.concatenate([zJ, [z0], wI])
        db = np.concatenate([dc, dw])
        pos = db > pivot_tol
        if not pos.any():
            raise NonConvergenceError("Lemke terminated on a secondary ray", {"iterations": it})
        ratios = np.full(xb.size, np.inf)
        ratios[pos] = np.maximum(xb[pos], 0.0) / db[pos]
        theta = ratios.min()
        cand = np.flatnonzero(ratios <= theta + 1e-12)
        nJ = len(J)
        leave = nJ if nJ in cand else int(cand[np.argmax(db[cand])])
        if leave == nJ:
            z = np.zeros(n)
            z[Jarr] = xb[:nJ] - theta * db[:nJ]
            if kind == "z":
                z[e] += theta
            return z, it
        if leave < nJ:
            left = ("z", J.pop(leave))
        else:
            row = int(Iarr[leave - nJ - 1])
            in_w[row] = False
            Ic.append(row)
            left = ("w", row)
        if kind == "z":
            J.append(e)
        else:
            Ic.remove(e)
            in_w[e] = True
        entering = ("w", left[1]) if left[0] == "z" else ("z", left[1])
    raise NonConvergenceError("Lemke iteration limit reached", {"iterations": max_iter})


# ----------------------------------------------------------------------
# Frank-Wolfe on min X^T (M X + b) over {X >= 0, M X + b >= 0}


def _box(problem: LcpProblem) -> np.ndarray:
    net = problem.network
    K, N = problem.K, problem.N
    sched_max = float(np.max(problem.b[problem.blocks[0]]))
    rho_max = sched_max + net.horizon + 1.0
    return np.concatenate([
        np.tile(net.demands, K) + 1.0,
        np.full(N * K, rho_max),
        np.full(N, rho_max),
    ])


def frank_wolfe(problem: LcpProblem, max_iter: int = 500, tol: float = 1e-9):
    """Conditional-gradient descent on the QP form of the LCP.

    Each step solves an LP over the feasible polyhedron (bounded by a box that
    the solution respects) and takes the exact line-search step.
    """
    M, b = problem.M, problem.b
    n = b.size
    S = 0.5 * (M + M.T)
    ub = _box(problem)
    A_ub = -M
    b_ub = b
    X = None
    res = linprog(b, A_ub=A_ub, b_ub=b_ub, bounds=list(zip(np.zeros(n), ub)), method="highs")
    if res.status != 0:
        raise NonConvergenceError(f"Frank-Wolfe start LP failed: {res.message}")
    X = res.x
    gap = np.inf
    for it in range(1, max_iter + 1):
        grad = 2.0 * (S @ X) + b
        sub = linprog(grad, A_ub=A_ub, b_ub=b_ub, bounds=list(zip(np.zeros(n), ub)), method="highs")
        if sub.status != 0:
            raise NonConvergenceError(f"Frank-Wolfe subproblem failed: {sub.message}")
        D = sub.x - X
        gap = float(-grad @ D)
        f = float(X @ (M @ X + b))
        if gap <= tol * max(1.0, abs(f)) and f <= tol * max(1.0, np.abs(b).max()):
            return X, it, f
        curv = float(D @ (S @ D))
        step = 1.0 if curv <= 0 else min(1.0, gap / (2.0 * curv))
        X = X + step * D
    f = float(X @ (M @ X + b))
    raise NonConvergenceError("Frank-Wolfe iteration limit reached", {"objective": f, "gap": gap})


def solve_lcp(problem: LcpProblem, method: str = "lemke", max_iter: int | None = None,
              eps_c: float = 1e-8) -> LcpSolution:
    """Solve and enforce the residual contract, raising NonConvergenceError otherwise."""
    if method == "lemke":
        X, its = lemke(problem.M, problem.b, max_iter=max_iter or 50000)
    elif method in ("frank-wolfe", "fw"):
        X, its, _ = frank_wolfe(problem, max_iter=max_iter or 500)
        method = "frank-wolfe"
    else:
        raise ValueError(f"unknown LCP method {method!r}")
    X = np.where(X < 0, 0.0, X)
    ok, res = check_contract(problem, X, eps_c)
    log.info("LCP %s: %d iterations, residuals %s", method, its, res)
    if not ok:
        raise NonConvergenceError("LCP residuals above tolerance", res)
    return LcpSolution(problem, X, method, its, res)


# ----------------------------------------------------------------------
# plain-text dump for external cross-checks


def dump_lcp(problem: LcpProblem, directory, X: np.ndarray | None = None) -> list:
    """Write M as row,col,value triplets and b (and X) as index,value rows."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    coo = problem.M.tocoo()
    order = np.lexsort((coo.col, coo.row))
    paths = []
    p = out / "lcp_M.csv"
    with open(p, "w", newline="\n") as fh:
        fh.write("row,col,value\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r},{c},{v:.12g}\n")
    paths.append(p)
    for name, vec in (("lcp_b.csv", problem.b), ("lcp_X.csv", X)):
        if vec is None:
            continue
        p = out / name
        with open(p, "w", newline="\n") as fh:
            fh.write("index,value\n")
            for k, v in enumerate(vec):
                fh.write(f"{k},{v:.12g}\n")
        paths.append(p)
    return paths
