"""Uniform time grid shared by the discrete LP and LCP."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """K intervals of length ``dk``; interval k covers ((k-1) dk, k dk].

    Sample times are the right endpoints t_k = k dk, k = 1..K, which pairs with
    the backward difference w_k - w_{k-1} (w_0 = 0) in the LCP.
    """

    K: int
    dk: float

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2:
            raise ValueError("K must be an integer >= 2")
        if not self.dk > 0:
            raise ValueError("dk must be positive")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "dk", float(self.dk))

    @classmethod
    def for_horizon(cls, horizon: float, K: int) -> TimeGrid:
        return cls(K, horizon / K)

    @property
    def horizon(self) -> float:
        return self.K * self.dk

    @property
    def times(self) -> np.ndarray:
        return self.dk * np.arange(1, self.K + 1)

    @property
    def edges(self) -> np.ndarray:
        return self.dk * np.arange(self.K + 1)

    def check_horizon(self, horizon: float) -> None:
        if abs(self.horizon - horizon) > 1e-9 * max(1.0, horizon):
            raise ValueError(f"grid covers {self.horizon:g} but the horizon is {horizon:g}")
