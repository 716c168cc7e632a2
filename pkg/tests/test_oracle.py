import itertools
import math

import numpy as np
import pytest

from femtogame import oracle
from femtogame.search import payoff_vector, social_value
from femtogame.strategy import BudgetExceeded, enumerate_spaces, joint_strategy
from femtogame.scenarios import ample_power_scenario

from helpers import desk_scenario, single_channel_pair


def _hand_value(s, x):
    # weighted alpha straight from the rate formula, one channel per FC
    total = 0.0
    for k in range(s.K):
        leak = sum(s.Gc[l][k][0, 0] * x[l].power[0] for l in range(s.K) if l != k)
        sinr = x[k].power[0] * s.G[k][0, 0] / (s.Gamma * (s.sigma2 + s.I[k][0, 0] + leak))
        rate = s.B * math.log2(1 + sinr) if x[k].alloc[0] == 0 else 0.0
        total += s.beta[k] * min(1.0, rate / s.Rreq[k][0])
    return total


def test_sixteen_profiles_by_hand():
    s = single_channel_pair()
    spaces = enumerate_spaces(s, 2)
    joint = oracle.JointSpace(spaces)
    assert joint.joint_count == 16
    hand = [_hand_value(s, x) for _, x in joint.profiles()]
    np.testing.assert_allclose(oracle.all_values(s, joint, "weighted_alpha"), hand, rtol=1e-12)
    x, value, idx = oracle.global_optimum(s, joint, "weighted_alpha")
    assert value == pytest.approx(max(hand))
    assert idx == next(iter(itertools.compress(itertools.product(range(4), range(4)),
                                              [h >= max(hand) - 1e-12 for h in hand])))


def test_optimum_beats_random_profiles():
    s = desk_scenario(seed=5)
    spaces = enumerate_spaces(s, 2)
    _, value, _ = oracle.global_optimum(s, spaces, "weighted_alpha")
    rng = np.random.default_rng(1)
    for _ in range(200):
        idx = tuple(int(rng.integers(sp.total_count)) for sp in spaces)
        assert social_value(s, joint_strategy(spaces, idx), "weighted_alpha") <= value + 1e-12


def test_weighted_optimum_is_pareto_and_silence_is_not():
    s = desk_scenario(seed=5)
    spaces = enumerate_spaces(s, 2)
    x, _, _ = oracle.global_optimum(s, spaces, "weighted_alpha")
    assert oracle.is_pareto(s, spaces, x, "weighted_alpha") == (True, None)
    silent = joint_strategy(spaces, (0, 0))
    ok, witness = oracle.is_pareto(s, spaces, silent, "weighted_alpha")
    assert not ok
    better = payoff_vector(s, witness, "weighted_alpha")
    base = payoff_vector(s, silent, "weighted_alpha")
    assert np.all(better >= base) and np.any(better > base)


def test_constant_payoffs_make_everything_pareto():
    s = single_channel_pair()
    spaces = enumerate_spaces(s, 2)
    for _, x in oracle.JointSpace(spaces).profiles():
        assert oracle.is_pareto(s, spaces, x, lambda s_, y: np.zeros(2))[0]


def test_power_utility_and_feasible_profiles():
    s = ample_power_scenario(N=2, M=2)
    spaces = enumerate_spaces(s, 3)
    found = oracle.feasible_profiles(s, spaces)
    assert found
    for idx in found:
        x = joint_strategy(spaces, idx)
        assert oracle.power_utility(s, x, 0) == -x[0].total_power
    assert oracle.power_utility(s, joint_strategy(spaces, (0, 0)), 0) == -math.inf
    assert oracle.feasible_profiles(s, spaces, limit=1) == found[:1]


def test_eps_nash_agrees_with_deviation_gain():
    s = ample_power_scenario(N=2, M=2)
    spaces = enumerate_spaces(s, 3)
    for idx in oracle.feasible_profiles(s, spaces)[:8]:
        x = joint_strategy(spaces, idx)
        gain = oracle.best_deviation_gain(s, spaces, x)
        for eps in (1e-4, 5e-3, 2e-2):
            assert oracle.is_eps_nash(s, spaces, x, eps) == (gain < eps - 1e-12)


def test_budget_guard():
    s = desk_scenario()
    with pytest.raises(BudgetExceeded, match="oracle"):
        oracle.JointSpace(enumerate_spaces(s, 3), budget=100)

