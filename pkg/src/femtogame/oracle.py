"""Brute-force ground truth on enumerable instances.

Everything here walks the joint space profile by profile with the scalar rate
functions, so it shares no code with the solvers' vectorized tables beyond the
payoff formulas. It is meant for tests and the ``verify`` command, not for
production runs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import model
from .cce import cce_gap
from .model import TOL, JointStrategy, Scenario
from .search import ObjectiveParams, payoff_vector, social_value
from .strategy import DEFAULT_BUDGET, BudgetExceeded, StrategySpace


@dataclass(frozen=True, eq=False)
class JointSpace:
    spaces: tuple
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "spaces", tuple(self.spaces))
        if self.joint_count > self.budget:
            raise BudgetExceeded(
                f"oracle: {self.joint_count} joint profiles exceed the budget of {self.budget}")

    @property
    def joint_count(self) -> int:
        return math.prod(sp.total_count for sp in self.spaces)

    def profiles(self):
        """``(indices, JointStrategy)`` pairs in ascending joint-index order."""
        strategies = [sp.strategies for sp in self.spaces]
        for idx in itertools.product(*(range(sp.total_count) for sp in self.spaces)):
            yield idx, JointStrategy([strategies[k][i] for k, i in enumerate(idx)])


def _as_joint(spaces) -> JointSpace:
    return spaces if isinstance(spaces, JointSpace) else JointSpace(spaces)


def global_optimum(s: Scenario, joint, objective: str, params: ObjectiveParams | None = None):
    """Exhaustive argmax of the social value; ties go to the lowest joint index.

    Returns ``(JointStrategy, value, indices)``.
    """
    joint = _as_joint(joint)
    params = params or ObjectiveParams.resolve(s)
    best = None
    for idx, x in joint.profiles():
        v = social_value(s, x, objective, params)
        if best is None or v > best[1] + TOL:
            best = (x, v, idx)
    return best


def all_values(s: Scenario, joint, objective: str, params: ObjectiveParams | None = None) -> np.ndarray:
    joint = _as_joint(joint)
    params = params or ObjectiveParams.resolve(s)
    return np.array([social_value(s, x, objective, params) for _, x in joint.profiles()])


def objective_payoffs(objective: str, params: ObjectiveParams | None = None) -> Callable:
    def payoffs(s, x):
        return payoff_vector(s, x, objective, params or ObjectiveParams.resolve(s))
    return payoffs


def is_pareto(s: Scenario, joint, x: JointStrategy, payoffs: Callable | str):
    """Scan for a profile at least as good for every FC and better for one.

    Returns ``(True, None)`` or ``(False, witness)``.
    """
    joint = _as_joint(joint)
    if isinstance(payoffs, str):
        payoffs = objective_payoffs(payoffs)
    ref = np.asarray(payoffs(s, x), dtype=float)
    for _, y in joint.profiles():
        p = np.asarray(payoffs(s, y), dtype=float)
        if np.all(p >= ref - TOL) and np.any(p > ref + TOL):
            return False, y
    return True, None


def power_utility(s: Scenario, x: JointStrategy, k: int) -> float:
    """``-sum(P^k)`` when every FC meets its requirements, else ``-inf``."""
    for l in range(s.K):
        if model.alpha(s, x, l) < 1.0 - TOL:
            return -math.inf
    return -x[k].total_power


def feasible_profiles(s: Scenario, joint, limit: int | None = None) -> list:
    """Joint index tuples where every FC has alpha >= 1, in joint-index order."""
    joint = _as_joint(joint)
    found = []
    for idx, x in joint.profiles():
        if all(model.alpha(s, x, k) >= 1.0 - TOL for k in range(s.K)):
            found.append(idx)
            if limit is not None and len(found) >= limit:
                break
    return found


def is_eps_nash(s: Scenario, joint, x: JointStrategy, epsilon: float,
                utility: Callable = power_utility) -> bool:
    """No FC has a unilateral deviation improving its utility by ``epsilon`` or more."""
    joint = _as_joint(joint)
    for k, sp in enumerate(joint.spaces):
        base = utility(s, x, k)
        for strat in sp.strategies:
            if utility(s, x.replace(k, strat), k) >= base + epsilon - TOL:
                return False
    return True


def best_deviation_gain(s: Scenario, joint, x: JointStrategy,
                        utility: Callable = power_utility) -> float:
    joint = _as_joint(joint)
    gain = 0.0
    for k, sp in enumerate(joint.spaces):
        base = utility(s, x, k)
        for strat in sp.strategies:
            gain = max(gain, utility(s, x.replace(k, strat), k) - base)
    return gain


def exact_cce_gap(s: Scenario, spaces: Sequence[StrategySpace], sigma, cost_fn) -> float:
    """Exhaustive CCE gap (same implementation as :func:`femtogame.cce.cce_gap`)."""
    return cce_gap(s, list(_as_joint(spaces).spaces), sigma, cost_fn)
