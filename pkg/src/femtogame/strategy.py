"""Finite per-femtocell strategy spaces and vectorized joint-profile tables.

A strategy index is a mixed-radix number: the allocation digit is most
significant, followed by one power-level digit per channel (channel 0 first).
Index 0 is therefore "every channel unused, every power zero" whenever the
space includes the ``NONE`` allocation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .model import NONE, JointStrategy, PureStrategy, Scenario, batch_user_rates

DEFAULT_BUDGET = 10**6
DEFAULT_LEVELS = 4


class BudgetExceeded(RuntimeError):
    """An enumeration would exceed its configured size budget."""


def build_grid(pmax: float, levels: int) -> np.ndarray:
    """``levels`` evenly spaced powers from 0 to ``pmax`` inclusive."""
    if levels < 2:
        raise ValueError(f"need at least 2 power levels, got {levels}")
    return np.linspace(0.0, float(pmax), int(levels))


@dataclass(frozen=True, eq=False)
class StrategySpace:
    fc_index: int
    power_levels: tuple
    allocations: np.ndarray

    @property
    def n_channels(self) -> int:
        return len(self.power_levels)

    @cached_property
    def radices(self) -> tuple:
        return tuple(len(lv) for lv in self.power_levels)

    @cached_property
    def n_power(self) -> int:
        return math.prod(self.radices)

    @property
    def total_count(self) -> int:
        return len(self.allocations) * self.n_power

    @cached_property
    def alloc_index(self) -> dict:
        return {tuple(int(v) for v in a): n for n, a in enumerate(self.allocations)}

    @cached_property
    def alloc_values(self) -> tuple:
        """Allocation values that occur on each channel."""
        return tuple(tuple(np.unique(self.allocations[:, i]).tolist()) for i in range(self.n_channels))

    def decompose(self, idx: int) -> tuple:
        if not 0 <= idx < self.total_count:
            raise IndexError(f"strategy index {idx} outside [0, {self.total_count})")
        a, rem = divmod(int(idx), self.n_power)
        digits = []
        for r in reversed(self.radices):
            rem, d = divmod(rem, r)
            digits.append(d)
        return a, tuple(reversed(digits))

    def compose(self, alloc_idx: int, digits: Sequence[int]) -> int:
        idx = 0
        for d, r in zip(digits, self.radices):
            idx = idx * r + int(d)
        return int(alloc_idx) * self.n_power + idx

    @cached_property
    def powers(self) -> np.ndarray:
        """``(total_count, N)`` power of every enumerated strategy."""
        grid = np.array(list(itertools.product(*self.power_levels)), dtype=float).reshape(-1, self.n_channels)
        out = np.tile(grid, (len(self.allocations), 1))
        out.setflags(write=False)
        return out

    @cached_property
    def allocs(self) -> np.ndarray:
        """``(total_count, N)`` allocation of every enumerated strategy."""
        out = np.repeat(self.allocations, self.n_power, axis=0)
        out.setflags(write=False)
        return out

    @cached_property
    def strategies(self) -> tuple:
        return tuple(PureStrategy(p, a) for p, a in zip(self.powers, self.allocs))


def index_to_strategy(space: StrategySpace, idx: int) -> PureStrategy:
    a, digits = space.decompose(idx)
    power = [space.power_levels[i][d] for i, d in enumerate(digits)]
    return PureStrategy(power, space.allocations[a])


def strategy_to_index(space: StrategySpace, strat: PureStrategy, atol: float = 1e-12) -> int:
    try:
        a = space.alloc_index[tuple(strat.alloc)]
    except KeyError:
        raise ValueError(f"allocation {strat.alloc} is not in the space") from None
    digits = []
    for i, p in enumerate(strat.power):
        hit = np.flatnonzero(np.abs(space.power_levels[i] - p) <= atol)
        if hit.size == 0:
            raise ValueError(f"channel {i}: power {p} is not on the grid")
        digits.append(int(hit[0]))
    return space.compose(a, digits)


def _allocations(M: int, N: int, alloc_filter) -> np.ndarray:
    if alloc_filter in ("all_assigned", "no_none"):
        allocs = itertools.product(range(M), repeat=N)
    else:
        allocs = itertools.product([NONE, *range(M)], repeat=N)
        if callable(alloc_filter):
            allocs = (a for a in allocs if alloc_filter(a))
        elif alloc_filter is not None:
            raise ValueError(f"unknown allocation filter {alloc_filter!r}")
    out = np.array(list(allocs), dtype=int).reshape(-1, N)
    if len(out) == 0:
        raise ValueError("allocation filter rejected every allocation")
    return out


def enumerate_space(s: Scenario, k: int, levels=DEFAULT_LEVELS,
                    alloc_filter: str | Callable | None = None,
                    budget: int = DEFAULT_BUDGET) -> StrategySpace:
    """Allocation set crossed with a uniform power grid for FC ``k``.

    ``levels`` is a count shared by every channel or a per-channel sequence.
    ``alloc_filter`` is ``None`` (every map incl. unused channels),
    ``"all_assigned"`` (every channel serves some user) or a predicate on the
    allocation tuple.
    """
    N, M = s.N, s.M[k]
    per_channel = [int(levels)] * N if np.isscalar(levels) else [int(v) for v in levels]
    if len(per_channel) != N:
        raise ValueError(f"need {N} level counts, got {len(per_channel)}")
    n_alloc = M**N if alloc_filter in ("all_assigned", "no_none") else (M + 1) ** N
    if n_alloc * math.prod(per_channel) > budget:
        raise BudgetExceeded(
            f"FC {k}: {n_alloc} allocations x {math.prod(per_channel)} power grids exceeds "
            f"the budget of {budget}; use Monte Carlo mode or fewer levels")
    grids = tuple(build_grid(s.Pmax[k, i], per_channel[i]) for i in range(N))
    for g in grids:
        g.setflags(write=False)
    allocations = _allocations(M, N, alloc_filter)
    allocations.setflags(write=False)
    return StrategySpace(k, grids, allocations)


def enumerate_spaces(s: Scenario, levels=DEFAULT_LEVELS, alloc_filter=None,
                     budget: int = DEFAULT_BUDGET) -> list:
    return [enumerate_space(s, k, levels, alloc_filter, budget) for k in range(s.K)]


def joint_strategy(spaces: Sequence[StrategySpace], indices: Sequence[int]) -> JointStrategy:
    return JointStrategy([index_to_strategy(sp, i) for sp, i in zip(spaces, indices)])


def profile_rates(s: Scenario, spaces, indices) -> list:
    """Per-FC user-rate vectors of one joint profile via the batch kernel."""
    powers = np.array([sp.powers[i] for sp, i in zip(spaces, indices)])[None]
    return [batch_user_rates(s, k, powers[:, k], spaces[k].allocs[[indices[k]]], powers)[0]
            for k in range(s.K)]


class ProfileTable:
    """User rates of every FC at every joint profile, for exhaustive evaluation.

    Joint profiles are flattened in C order over ``shape = (|X_1|, ..., |X_K|)``.
    """

    def __init__(self, s: Scenario, spaces: Sequence[StrategySpace],
                 budget: int = DEFAULT_BUDGET, chunk: int = 1 << 15):
        self.scenario = s
        self.spaces = list(spaces)
        self.shape = tuple(sp.total_count for sp in self.spaces)
        self.size = math.prod(self.shape)
        if self.size > budget:
            raise BudgetExceeded(f"{self.size} joint profiles exceed the budget of {budget}")
        self.rates = [np.empty((self.size, m)) for m in s.M]
        for lo in range(0, self.size, chunk):
            idx = np.unravel_index(np.arange(lo, min(lo + chunk, self.size)), self.shape)
            powers = np.stack([sp.powers[i] for sp, i in zip(self.spaces, idx)], axis=1)
            for k in range(s.K):
                self.rates[k][lo:lo + len(idx[0])] = batch_user_rates(
                    s, k, powers[:, k], self.spaces[k].allocs[idx[k]], powers)
        for r in self.rates:
            r.setflags(write=False)

    def own_index(self, k: int) -> np.ndarray:
        return np.unravel_index(np.arange(self.size), self.shape)[k]

    def own_power(self, k: int) -> np.ndarray:
        return self.spaces[k].powers[self.own_index(k)]

    def per_fc(self, fn) -> list:
        """``fn(s, k, rates, power)`` for every FC, each reshaped to ``shape``."""
        return [np.asarray(fn(self.scenario, k, self.rates[k], self.own_power(k)), dtype=float)
                .reshape(self.shape) for k in range(self.scenario.K)]

    def flat_index(self, indices) -> int:
        return int(np.ravel_multi_index(tuple(indices), self.shape))

    def unflatten(self, flat: int) -> tuple:
        return tuple(int(v) for v in np.unravel_index(flat, self.shape))
