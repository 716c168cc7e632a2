"""Coarse correlated equilibria of the discretized game via multiplicative weights.

Weights are kept in log space: after thousands of rounds ``(1 - eps)**sum(C)``
underflows double precision, while its logarithm stays exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import model
from .model import TOL, JointStrategy, Scenario, batch_user_rates
from .powergame import PowerGameState, best_response_power, run_power_game
from .strategy import DEFAULT_BUDGET, BudgetExceeded, ProfileTable, StrategySpace, joint_strategy

CostFn = Callable  # (scenario, k, rates (B, M_k), power (B, N)) -> costs in [0, 1]


@dataclass(frozen=True)
class WeightState:
    log_weights: np.ndarray
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")

    @classmethod
    def uniform(cls, n: int, epsilon: float) -> "WeightState":
        return cls(np.zeros(n), epsilon)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def probs(self) -> np.ndarray:
        z = np.exp(self.log_weights - self.log_weights.max())
        return z / z.sum()


def mw_update(w: WeightState, costs) -> WeightState:
    """``W * (1 - eps)**C`` element-wise."""
    costs = np.asarray(costs, dtype=float)
    if costs.shape != w.log_weights.shape:
        raise ValueError("cost vector does not match the weight vector")
    if np.any(costs < -TOL) or np.any(costs > 1.0 + TOL):
        raise ValueError("costs must lie in [0, 1]; the cost function is mis-scaled")
    return WeightState(w.log_weights + costs * math.log1p(-w.epsilon), w.epsilon)


@dataclass(frozen=True)
class StopRule:
    max_iters: int = 5000
    tol: float = 1e-4
    window: int = 10


@dataclass
class CceReport:
    solver: str
    mixed: list
    indices: tuple
    profile: JointStrategy
    alpha: np.ndarray
    total_power: np.ndarray
    gap: float | None
    iterations: int
    converged: bool
    status: str
    trace: list = field(default_factory=list)
    power_game: PowerGameState | None = None
    pre_game_total_power: np.ndarray | None = None
    cce_profile: JointStrategy | None = None


# ---------------------------------------------------------------------------
# expected costs

def cost_tables(table: ProfileTable, cost_fn: CostFn) -> list:
    """Per-FC cost tensors over the joint space."""
    return table.per_fc(cost_fn)


def contract(tensor: np.ndarray, mixed: Sequence[np.ndarray], k: int) -> np.ndarray:
    """Expectation of ``tensor`` over every axis but ``k`` under the product of ``mixed``."""
    t = tensor
    for l in reversed(range(len(mixed))):
        if l != k:
            t = np.tensordot(t, mixed[l], axes=([l], [0]))
    return t


def _mc_rng(seed: int, iteration: int, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, iteration, k])))


def expected_costs(s: Scenario, spaces: Sequence[StrategySpace], k: int, mixed: Sequence,
                   cost_fn: CostFn, mode: str = "exact", samples: int = 256, seed: int = 0,
                   iteration: int = 0, table: list | None = None,
                   budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Cost of every strategy of FC ``k`` in expectation over the opponents' mixtures.

    ``mixed[k]`` itself is ignored. ``table`` (per-FC cost tensors) short-cuts
    the exact computation. Monte Carlo draws ``samples`` opponent profiles from
    a counter-based generator keyed by ``(seed, iteration, k)``.
    """
    if table is not None and mode == "exact":
        return contract(table[k], mixed, k)
    sp = spaces[k]
    n = sp.total_count
    others = [l for l in range(s.K) if l != k]
    if mode == "exact":
        supports = [np.flatnonzero(np.asarray(mixed[l]) > 0) for l in others]
        combos = math.prod(len(sup) for sup in supports)
        if n * combos > budget:
            raise BudgetExceeded(f"exact expectation needs {n * combos} evaluations (budget {budget})")
        grid = np.array(list(itertools.product(*supports)), dtype=int).reshape(combos, len(others))
        weights = np.ones(combos)
        for c, l in enumerate(others):
            weights = weights * np.asarray(mixed[l])[grid[:, c]]
    elif mode == "monte_carlo":
        rng = _mc_rng(seed, iteration, k)
        grid = np.stack([rng.choice(spaces[l].total_count, size=samples, p=mixed[l]) for l in others],
                        axis=1).reshape(samples, len(others))
        weights = np.full(samples, 1.0 / samples)
        combos = samples
    else:
        raise ValueError(f"unknown expectation mode {mode!r}")
    powers = np.empty((n, combos, s.K, s.N))
    powers[:, :, k] = sp.powers[:, None, :]
    for c, l in enumerate(others):
        powers[:, :, l] = spaces[l].powers[grid[:, c]][None, :, :]
    powers = powers.reshape(n * combos, s.K, s.N)
    own_power = np.repeat(sp.powers, combos, axis=0)
    rates = batch_user_rates(s, k, own_power, np.repeat(sp.allocs, combos, axis=0), powers)
    costs = np.asarray(cost_fn(s, k, rates, own_power), dtype=float).reshape(n, combos)
    return costs @ weights


def expected_cost(s, spaces, k, x_k_idx, mixed, cost_fn, mode="exact", **kw) -> float:
    return float(expected_costs(s, spaces, k, mixed, cost_fn, mode, **kw)[x_k_idx])


def cce_gap(s: Scenario, spaces: Sequence[StrategySpace], sigma: Sequence, cost_fn: CostFn,
            table: list | None = None, budget: int = DEFAULT_BUDGET) -> float:
    """Largest gain any FC gets by committing to a fixed deviation.

    ``sigma`` is a product distribution given by one mixture per FC.
    """
    if table is None:
        table = cost_tables(ProfileTable(s, spaces, budget), cost_fn)
    gap = 0.0
    for k in range(s.K):
        c = contract(table[k], sigma, k)
        gap = max(gap, float(np.dot(sigma[k], c) - c.min()))
    return max(gap, 0.0)


# ---------------------------------------------------------------------------
# Algo-CCE

class _ProfileEval:
    """alpha and total power of pure profiles, memoized."""

    def __init__(self, s, spaces, table: ProfileTable | None, alpha_fn):
        self.s, self.spaces, self.table, self.alpha_fn = s, spaces, table, alpha_fn
        self.cache = {}

    def __call__(self, indices):
        indices = tuple(int(i) for i in indices)
        hit = self.cache.get(indices)
        if hit is None:
            if self.table is not None:
                f = self.table.flat_index(indices)
                rates = [r[f] for r in self.table.rates]
            else:
                from .strategy import profile_rates
                rates = profile_rates(self.s, self.spaces, indices)
            alpha = [float(self.alpha_fn(self.s, k, rates[k])) for k in range(self.s.K)]
            power = [float(sp.powers[i].sum()) for sp, i in zip(self.spaces, indices)]
            hit = self.cache[indices] = (alpha, power)
        return hit


def run_algo_cce(s: Scenario, spaces: Sequence[StrategySpace], cost_fn: CostFn | str,
                 epsilon: float = 0.1, schedule: str = "simultaneous",
                 stop: StopRule = StopRule(), mode: str = "exact", samples: int = 256,
                 seed: int = 0, solver: str = "cce", alpha_fn=None,
                 budget: int = DEFAULT_BUDGET) -> CceReport:
    """Multiplicative weights on every FC until the mixtures stop moving.

    Each round, FC ``k`` prices its strategies against the opponents' previous
    mixtures (``simultaneous``) or against the already-updated mixtures of
    lower-indexed FCs (``sequential``), then scales its weights by
    ``(1 - eps)**cost``. Converged once the largest L1 move of any mixture
    stays below ``stop.tol`` for ``stop.window`` consecutive rounds. The
    reported pure profile is each FC's most likely strategy.
    """
    if isinstance(cost_fn, str):
        cost_fn = model.COST_FUNCTIONS[cost_fn]
    if schedule not in ("simultaneous", "sequential"):
        raise ValueError(f"unknown schedule {schedule!r}")
    alpha_fn = alpha_fn or model.alpha_from_rates
    weights = [WeightState.uniform(sp.total_count, epsilon) for sp in spaces]
    mixed = [w.probs for w in weights]

    table = None
    profile_table = None
    if mode == "exact":
        profile_table = ProfileTable(s, spaces, budget)
        table = cost_tables(profile_table, cost_fn)
    evaluate = _ProfileEval(s, spaces, profile_table, alpha_fn)

    def costs_for(k, current, n):
        return expected_costs(s, spaces, k, current, cost_fn, mode, samples, seed, n, table, budget)

    trace = []
    calm = 0
    converged = False
    n = 0
    for n in range(1, stop.max_iters + 1):
        previous = [m.copy() for m in mixed]
        expected = [0.0] * s.K
        if schedule == "simultaneous":
            costs = [costs_for(k, previous, n) for k in range(s.K)]
            for k in range(s.K):
                expected[k] = float(np.dot(previous[k], costs[k]))
                weights[k] = mw_update(weights[k], costs[k])
            mixed = [w.probs for w in weights]
        else:
            for k in range(s.K):
                c = costs_for(k, mixed, n)
                expected[k] = float(np.dot(mixed[k], c))
                weights[k] = mw_update(weights[k], c)
                mixed[k] = weights[k].probs
        move = max(float(np.abs(m - p).sum()) for m, p in zip(mixed, previous))
        indices = tuple(int(np.argmax(m)) for m in mixed)
        alpha, power = evaluate(indices)
        trace.append({
            "iteration": n,
            "solver": solver,
            "utility": alpha,
            "cost": expected,
            "social_value": float(sum(alpha)),
            "total_power": power,
            "accepted": None,
            "l1_change": move,
        })
        calm = calm + 1 if move < stop.tol else 0
        if calm >= stop.window:
            converged = True
            break

    indices = tuple(int(np.argmax(m)) for m in mixed)
    alpha, power = evaluate(indices)
    gap = cce_gap(s, spaces, mixed, cost_fn, table) if table is not None else None
    return CceReport(
        solver=solver,
        mixed=mixed,
        indices=indices,
        profile=joint_strategy(spaces, indices),
        alpha=np.array(alpha),
        total_power=np.array(power),
        gap=gap,
        iterations=n,
        converged=converged,
        status="converged" if converged else "max_iters",
        trace=trace,
    )


def kkt_trim(s: Scenario, x: JointStrategy) -> JointStrategy:
    """Lower the power of every over-served user to exactly its requirement.

    FCs are visited in index order against the current profile; trimming only
    removes interference, so nobody else's rate drops.
    """
    powers = x.powers.copy()
    allocs = x.allocs
    for k in range(s.K):
        rates = model.user_rates(s, JointStrategy.from_arrays(powers, allocs), k)
        over = rates / s.Rreq[k] > 1.0 + TOL
        if not over.any():
            continue
        br = best_response_power(s, k, allocs[k], powers, rreq=np.where(over, s.Rreq[k], 0.0))
        for j in np.flatnonzero(over):
            chans = allocs[k] == j
            powers[k, chans] = br.power[chans]
    return JointStrategy.from_arrays(powers, allocs)


def _refresh(s: Scenario, report: CceReport, x: JointStrategy) -> None:
    report.profile = x
    report.alpha = np.array([model.alpha(s, x, k) for k in range(s.K)])
    report.total_power = np.array([strat.total_power for strat in x])


def run_allocation_algorithm_1(s: Scenario, spaces, epsilon: float = 0.1,
                               stop: StopRule = StopRule(), trim: bool = False,
                               game_tol: float = 1e-9, max_rounds: int = 500, **kw) -> CceReport:
    """CCE with the squared alpha cost, then the power game if every FC is served.

    When some FC ends below its requirement the CCE point is kept (optionally
    with over-served users trimmed to their requirement, ``trim=True``).
    """
    report = run_algo_cce(s, spaces, model.squared_alpha_cost, epsilon, stop=stop,
                          solver="alg1", **kw)
    report.cce_profile = report.profile
    report.pre_game_total_power = report.total_power.copy()
    if np.any(report.alpha < 1.0 - TOL):
        report.status = "qos_unmet"
        if trim:
            _refresh(s, report, kkt_trim(s, report.profile))
        return report
    game = run_power_game(s, report.profile.allocs, report.profile.powers, game_tol, max_rounds)
    report.power_game = game
    if game.status == "infeasible":
        report.status = "infeasible"
        return report
    _refresh(s, report, game.joint())
    report.status = "power_game_" + game.status
    return report


def run_algorithm_2A(s: Scenario, spaces, epsilon: float = 0.1, stop: StopRule = StopRule(),
                     **kw) -> CceReport:
    """CCE with the normalized penalty cost; no power game afterwards."""
    return run_algo_cce(s, spaces, model.normalized_penalty_cost, epsilon, stop=stop,
                        solver="alg2a", **kw)


def run_voice_data_cce(s: Scenario, spaces, epsilon: float = 0.1, stop: StopRule = StopRule(),
                       cost: str = "gated", **kw) -> CceReport:
    """CCE where an FC with any unserved voice user has alpha 0.

    ``cost="gated"`` prices the gated alpha with the squared cost;
    ``cost="penalty"`` uses the normalized voice/data penalty.
    """
    fn = {"gated": model.voice_gated_cost, "penalty": model.normalized_penalty_cost}[cost]
    return run_algo_cce(s, spaces, fn, epsilon, stop=stop, solver="cce_vd",
                        alpha_fn=model.gated_alpha_from_rates, **kw)


def rate_overshoot(s: Scenario, x: JointStrategy) -> float:
    """Largest rate/requirement ratio among users whose requirement is met."""
    worst = 0.0
    for k in range(s.K):
        frac = model.user_rates(s, x, k) / s.Rreq[k]
        met = frac[frac >= 1.0 - TOL]
        if met.size:
            worst = max(worst, float(met.max()))
    return worst
