"""False-bottleneck screening and reduced-network construction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CorridorNetwork
from .errors import InternalConsistencyError
from .pwl import PiecewiseLinearFn


@dataclass(frozen=True, eq=False)
class ReducedNetwork:
    network: CorridorNetwork
    origin_map: tuple[tuple[int, ...], ...]
    false_set: frozenset[int]
    survivors: tuple[int, ...]
    normalized: np.ndarray

    @property
    def is_identity(self) -> bool:
        return not self.false_set

    def reduced_index(self, original: int) -> int:
        for r, group in enumerate(self.origin_map):
            if original in group:
                return r
        raise IndexError(original)


def _qbar(Q, mu, surv, k) -> float:
    """Normalized demand of survivor ``surv[k]`` given the survivor list."""
    N = Q.size
    i = surv[k]
    nxt = surv[k + 1] if k + 1 < len(surv) else N
    mass = Q[i:nxt].sum()
    denom = mu[i] - mu[nxt] if nxt < N else mu[i]
    return mass / denom if denom > 0 else np.inf


def _sweep(Q, mu) -> list[int]:
    surv = list(range(Q.size))
    for i in range(Q.size - 2, -1, -1):
        while i != len(surv) - 1 and _qbar(Q, mu, surv, i) >= _qbar(Q, mu, surv, i + 1):
            del surv[i + 1]
    return surv


def normalized_demands(net: CorridorNetwork) -> np.ndarray:
    """Normalized demand of every bottleneck.

    The reference bottleneck of ``i`` is the closest non-false bottleneck
    upstream, resolved by the same sweep as :func:`reduce`. A nonpositive
    capacity difference gives ``inf``.
    """
    surv = _sweep(net.demands, net.capacities)
    return _normalized_all(net.demands, net.capacities, surv)


def _normalized_all(Q, mu, surv) -> np.ndarray:
    N = Q.size
    out = np.empty(N)
    for i in range(N):
        up = [m for m in surv if m > i]
        n = up[0] if up else N
        mass = Q[i:n].sum()
        denom = mu[i] - mu[n] if n < N else mu[i]
        out[i] = mass / denom if denom > 0 else np.inf
    return out


def reduce(net: CorridorNetwork) -> ReducedNetwork:
    """Merge every false bottleneck into its downstream neighbour."""
    Q, mu, c = net.demands, net.capacities, net.free_flow_times
    N = net.n_bottlenecks
    surv = _sweep(Q, mu)
    groups = []
    for k, i in enumerate(surv):
        nxt = surv[k + 1] if k + 1 < len(surv) else N
        groups.append(tuple(range(i, nxt)))
    reduced = CorridorNetwork(
        capacities=mu[surv],
        free_flow_times=c[surv],
        demands=[Q[list(g)].sum() for g in groups],
        horizon=net.horizon,
        direction=net.direction,
    )
    return ReducedNetwork(
        network=reduced,
        origin_map=tuple(groups),
        false_set=frozenset(set(range(N)) - set(surv)),
        survivors=tuple(surv),
        normalized=_normalized_all(Q, mu, surv),
    )


def detection_criterion(net: CorridorNetwork, survivors=None) -> np.ndarray:
    """Boolean mask: bottleneck ``i`` has strictly larger normalized demand
    than every surviving bottleneck downstream of it."""
    Q, mu = net.demands, net.capacities
    surv = list(_sweep(Q, mu) if survivors is None else survivors)
    qbar = _normalized_all(Q, mu, surv)
    keep = np.empty(net.n_bottlenecks, dtype=bool)
    for i in range(net.n_bottlenecks):
        keep[i] = all(qbar[m] < qbar[i] for m in surv if m < i)
    return keep


def disaggregate(reduced_solution, reduction: ReducedNetwork, original: CorridorNetwork):
    """Map a reduced-network DSO solution back onto the original network.

    Costs follow rho_j = rho_r - c_r + c_j. False bottlenecks carry zero
    price. Merged origins split the reduced flow proportionally to demand,
    which is one of many optimal splits; ``flow_split_unique`` is False
    whenever a merge happened.
    """
    from .analytic import DsoSolution

    sol = reduced_solution
    N = original.n_bottlenecks
    c = original.free_flow_times
    mu = original.capacities
    windows, costs, prices, flows, rates = [], [], [], [], []
    for r, group in enumerate(reduction.origin_map):
        Qr = sol.network.demands[r]
        cr = sol.network.free_flow_times[r]
        for j in group:
            windows.append(sol.windows[r])
            costs.append(sol.costs[r] - cr + c[j])
            prices.append(sol.prices[r] if j == group[0] else PiecewiseLinearFn.zero())
            share = original.demands[j] / Qr if Qr > 0 else 0.0
            flows.append(sol.flows[r] * share)
            rates.append(sol.merged_capacities[r] * share)
    # capacity check on every original bottleneck, including false ones
    for i in range(N):
        total = flows[i]
        for j in range(i + 1, N):
            total = total + flows[j]
        peak = max(np.max(total.y), total.left, total.right)
        if peak > mu[i] * (1 + 1e-9) + 1e-12:
            raise InternalConsistencyError(
                f"proportional split exceeds capacity at bottleneck {i}: {peak:g} > {mu[i]:g}")
    return DsoSolution(
        network=original,
        schedule=sol.schedule,
        windows=tuple(windows),
        costs=np.array(costs),
        prices=tuple(prices),
        flows=tuple(flows),
        merged_capacities=np.array(rates),
        flow_split_unique=reduction.is_identity and sol.flow_split_unique,
    )
