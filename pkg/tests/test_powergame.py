import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from femtogame import model, oracle, powergame
from femtogame.model import NONE, JointStrategy
from femtogame.scenarios import GeneratorSpec, ample_power_scenario, generate_scenario
from femtogame.strategy import enumerate_spaces

from helpers import desk_scenario, flat_scenario


def test_single_channel_inverse_of_rate_formula():
    s = flat_scenario(K=1, N=1, M=1, g=0.7, i=2e-3, rreq=90e3, pmax=1.0)
    br = powergame.best_response_power(s, 0, [0], np.zeros((1, 1)))
    g = 0.7 / (s.sigma2 + 2e-3)
    assert br.feasible
    assert br.power[0] == pytest.approx((2 ** (90e3 / s.B) - 1) / g, rel=1e-12)


def test_zero_requirement_means_zero_power():
    s = flat_scenario(K=1, N=2, M=2)
    br = powergame.best_response_power(s, 0, [0, 1], np.zeros((1, 2)), rreq=[0.0, 0.0])
    assert np.all(br.power == 0)


def test_identical_channels_split_the_rate_evenly():
    s = flat_scenario(K=1, N=2, M=1, rreq=200e3, pmax=1.0)
    br = powergame.best_response_power(s, 0, [0, 0], np.zeros((1, 2)))
    assert br.power[0] == pytest.approx(br.power[1], rel=1e-12)
    x = JointStrategy.from_arrays(br.power[None], [[0, 0]])
    assert model.channel_rate(s, x, 0, 0, 0) == pytest.approx(100e3, rel=1e-9)


def test_unreachable_requirement_is_reported_not_raised():
    s = flat_scenario(K=1, N=2, M=2, rreq=2e6)
    br = powergame.best_response_power(s, 0, [0, 1], np.zeros((1, 2)))
    assert not br.feasible
    assert br.infeasible_users == (0, 1)
    x = JointStrategy.from_arrays(s.Pmax, [[0, 1]])
    np.testing.assert_allclose(br.max_rate, model.user_rates(s, x, 0), rtol=1e-12)


def test_unused_channels_stay_silent():
    s = flat_scenario(K=1, N=3, M=1, rreq=50e3)
    br = powergame.best_response_power(s, 0, [0, NONE, 0], np.zeros((1, 3)))
    assert br.power[1] == 0.0


@settings(max_examples=80, deadline=None)
@given(g=st.lists(st.floats(0.5, 500.0), min_size=1, max_size=5),
       cap_scale=st.floats(0.2, 3.0), frac=st.floats(0.05, 0.95))
def test_capped_water_filling_satisfies_kkt(g, cap_scale, frac):
    g = np.array(g)
    caps = np.full(len(g), 0.01 * cap_scale)
    reach = float(np.sum(np.log2(1 + g * caps)))
    target = frac * reach
    p = powergame.min_power_allocation(g, caps, target)
    assert np.all(p >= 0) and np.all(p <= caps + 1e-15)
    assert np.sum(np.log2(1 + g * p)) == pytest.approx(target, rel=1e-9)
    level = p + 1 / g
    free = (p > 1e-15) & (p < caps - 1e-15)
    if free.any():
        mu = level[free].mean()
        np.testing.assert_allclose(level[free], mu, rtol=1e-7)
        assert np.all(1 / g[p <= 1e-15] >= mu * (1 - 1e-7))
        assert np.all(level[p >= caps - 1e-15] <= mu * (1 + 1e-7))


def test_best_response_is_tight():
    s = desk_scenario(seed=7, N=3, rreq=120e3)
    others = np.full((2, 3), 2e-3)
    for alloc in ([0, 1, 1], [1, 1, 0], [0, 0, 1]):
        br = powergame.best_response_power(s, 0, alloc, others)
        if not br.feasible:
            continue
        powers = others.copy()
        powers[0] = br.power
        x = JointStrategy.from_arrays(powers, [alloc, [0, 1, 1]])
        frac = model.user_rates(s, x, 0) / s.Rreq[0]
        np.testing.assert_allclose(frac, 1.0, rtol=1e-6)
        for i in np.flatnonzero(br.power > 1e-9):
            lower = powers.copy()
            lower[0, i] -= 1e-9
            y = JointStrategy.from_arrays(lower, [alloc, [0, 1, 1]])
            assert model.user_rates(s, y, 0)[alloc[i]] < s.Rreq[0][alloc[i]]


# --- the round-robin game --------------------------------------------------------

def test_single_fc_game_is_one_best_response():
    s = flat_scenario(K=1, N=3, M=2, rreq=80e3)
    st_ = powergame.run_power_game(s, [[0, 1, 1]])
    br = powergame.best_response_power(s, 0, [0, 1, 1], s.Pmax)
    np.testing.assert_allclose(st_.powers[0], br.power)
    assert st_.converged


def test_uncoupled_fcs_settle_after_the_first_round():
    s = flat_scenario(K=3, N=2, M=1, cross=0.0, rreq=80e3)
    st_ = powergame.run_power_game(s, [[0, 0]] * 3)
    assert st_.converged and st_.rounds == 2  # round 2 only confirms
    assert st_.trace[0]["total_power"] == st_.trace[1]["total_power"]


def test_coupled_pair_descends_to_a_fixed_point():
    s = flat_scenario(K=2, N=2, M=2, cross=0.3, rreq=150e3)
    allocs = [[0, 1], [1, 0]]
    st_ = powergame.run_power_game(s, allocs)
    assert st_.converged
    totals = [s.Pmax.sum()] + [sum(r["total_power"]) for r in st_.trace]
    assert all(b <= a for a, b in zip(totals, totals[1:]))
    for k in range(2):
        br = powergame.best_response_power(s, k, allocs[k], st_.powers)
        np.testing.assert_allclose(br.power, st_.powers[k], atol=1e-9)
    assert np.all(st_.powers <= s.Pmax) and np.all(st_.powers >= 0)


def test_multi_channel_users_can_raise_total_power():
    # Water-filling moves power between a user's channels; a channel that gets
    # more power hurts another FC, whose previous answer may become infeasible.
    spec = GeneratorSpec(K=3, N=4, M=(2, 2, 2), Rreq=[np.full(2, 90e3)] * 3)
    s = generate_scenario(spec, 1054)
    st_ = powergame.run_power_game(s, [[0, 1, 0, 1]] * 3)
    totals = [sum(r["total_power"]) for r in st_.trace]
    assert st_.converged
    assert max(np.diff(totals)) > 1e-4


def test_infeasible_game_names_the_fc():
    s = flat_scenario(K=2, N=1, M=1, rreq=2e6)
    st_ = powergame.run_power_game(s, [[0], [0]])
    assert st_.status == "infeasible" and st_.infeasible_fc == 0 and st_.infeasible_users == (0,)


def test_initial_powers_are_validated():
    s = flat_scenario(K=2, N=1, M=1)
    with pytest.raises(ValueError):
        powergame.run_power_game(s, [[0], [0]], init_powers=np.ones((2, 1)))


def test_max_rounds_is_reported():
    s = flat_scenario(K=2, N=2, M=2, cross=0.3, rreq=150e3)
    st_ = powergame.run_power_game(s, [[0, 1], [1, 0]], max_rounds=1)
    assert st_.status == "max_rounds" and not st_.converged


# --- epsilon-better response ------------------------------------------------------

def test_better_response_from_potential_maximizer_does_nothing():
    s = ample_power_scenario(N=2, M=2)
    spaces = enumerate_spaces(s, 3)
    utility = lambda s_, x: oracle.power_utility(s_, x, 0) + oracle.power_utility(s_, x, 1)
    joint = oracle.JointSpace(spaces)
    best = max(joint.profiles(), key=lambda p: utility(s, p[1]))
    res = powergame.epsilon_better_response(s, spaces, 1e-4, start=best[0])
    assert res.steps == 0 and res.converged


def test_better_response_reaches_an_eps_nash_point():
    s = ample_power_scenario(N=2, M=2, headroom=0.6)
    spaces = enumerate_spaces(s, 3)
    eps = 1e-3
    res = powergame.epsilon_better_response(s, spaces, eps)
    assert res.status == "converged"
    assert oracle.is_eps_nash(s, spaces, res.profile, eps)
    diffs = np.diff(res.potential_trace)
    assert np.all(diffs >= eps - 1e-12)
    span = sum(float(sp.powers.sum(axis=1).max()) for sp in spaces)
    assert res.steps <= span / eps


def test_better_response_single_fc_finds_its_cheapest_feasible_strategy():
    s = flat_scenario(K=1, N=2, M=1, rreq=60e3)
    spaces = enumerate_spaces(s, 4)
    res = powergame.epsilon_better_response(s, spaces, 1e-6, choice="best")
    feasible = [x for _, x in oracle.JointSpace(spaces).profiles() if model.alpha(s, x, 0) >= 1 - 1e-12]
    assert res.profile[0].total_power == pytest.approx(min(x[0].total_power for x in feasible))


def test_better_response_without_feasible_profile():
    s = flat_scenario(K=2, N=1, M=1, rreq=2e6)
    res = powergame.epsilon_better_response(s, enumerate_spaces(s, 2), 1e-3)
    assert res.status == "no_feasible_profile" and res.profile is None


def test_better_response_rejects_non_positive_epsilon():
    s = flat_scenario(K=1, N=1, M=1)
    with pytest.raises(ValueError):
        powergame.epsilon_better_response(s, enumerate_spaces(s, 2), 0.0)
