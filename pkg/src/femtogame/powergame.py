"""Fixed-allocation power game: minimal-power best responses and their dynamics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import TOL, JointStrategy, Scenario, batch_user_rates
from .strategy import ProfileTable, StrategySpace, joint_strategy

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class BestResponse:
    power: np.ndarray
    feasible: bool
    max_rate: np.ndarray
    infeasible_users: tuple = ()


def effective_gains(s: Scenario, k: int, j: int, powers) -> np.ndarray:
    """``G / (Gamma * (noise + macro + cross interference))`` per channel for user ``j``."""
    powers = np.asarray(powers, dtype=float)
    noise = s.sigma2 + s.I[k][:, j]
    for l in range(s.K):
        if l != k:
            noise = noise + s.Gc[l][k][:, j] * powers[l]
    return s.G[k][:, j] / (s.Gamma * noise)


def _spectral(g, p):
    return float(np.sum(np.log1p(g * p)) / _LN2)


def _water_level(g, target, iters=200):
    """Smallest level ``mu`` with ``sum(log2(max(1, g*mu))) >= target`` (g > 0)."""
    lo = 1.0 / g.max()
    hi = 2.0 ** target / g.max()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if np.sum(np.log2(np.maximum(1.0, g * mid))) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def min_power_allocation(g, caps, target) -> np.ndarray:
    """Minimum total power reaching ``target`` bits/s/Hz over parallel channels.

    Water-filling with per-channel caps: channels whose uncapped level exceeds
    their cap are fixed at the cap and the remainder is re-solved.
    Assumes the target is reachable at ``caps``.
    """
    g = np.asarray(g, dtype=float)
    caps = np.asarray(caps, dtype=float)
    p = np.zeros_like(g)
    if target <= 0:
        return p
    free = g > 0
    capped = np.zeros_like(free)
    while True:
        residual = target - _spectral(g[capped], caps[capped])
        if residual <= 0 or not free.any():
            break
        mu = _water_level(g[free], residual)
        trial = np.maximum(0.0, mu - 1.0 / g[free])
        over = trial > caps[free]
        if not over.any():
            p[free] = trial
            break
        idx = np.flatnonzero(free)[over]
        capped[idx] = True
        free[idx] = False
    p[capped] = caps[capped]
    return p


def best_response_power(s: Scenario, k: int, alloc, powers, rreq=None) -> BestResponse:
    """Least total power for FC ``k`` meeting every user's requirement.

    ``alloc`` is FC ``k``'s channel map; ``powers`` is the ``(K, N)`` profile of
    all FCs (row ``k`` is ignored). Users own disjoint channel sets, so the
    problem splits into one capped water-filling per user.
    """
    alloc = np.asarray(alloc, dtype=int)
    rreq = s.Rreq[k] if rreq is None else np.asarray(rreq, dtype=float)
    out = np.zeros(s.N)
    max_rate = np.zeros(s.M[k])
    short = []
    for j in range(s.M[k]):
        chans = np.flatnonzero(alloc == j)
        g = effective_gains(s, k, j, powers)[chans]
        caps = s.Pmax[k, chans]
        max_rate[j] = s.B * _spectral(g, caps)
        if rreq[j] <= 0:
            continue
        if max_rate[j] < rreq[j] * (1.0 - TOL):
            short.append(j)
            continue
        out[chans] = min_power_allocation(g, caps, rreq[j] / s.B)
    return BestResponse(out, not short, max_rate, tuple(short))


@dataclass
class PowerGameState:
    allocs: np.ndarray
    powers: np.ndarray
    rounds: int = 0
    converged: bool = False
    status: str = "running"
    trace: list = field(default_factory=list)
    infeasible_fc: int | None = None
    infeasible_users: tuple = ()

    @property
    def total_power(self) -> np.ndarray:
        return self.powers.sum(axis=1)

    def joint(self) -> JointStrategy:
        return JointStrategy.from_arrays(self.powers, self.allocs)


def run_power_game(s: Scenario, allocs, init_powers=None, tol: float = 1e-9,
                   max_rounds: int = 500) -> PowerGameState:
    """Round-robin best responses (ascending FC index) until a round moves < ``tol`` watts."""
    allocs = np.array(allocs, dtype=int)
    powers = np.array(s.Pmax if init_powers is None else init_powers, dtype=float)
    if powers.shape != (s.K, s.N) or np.any(powers < 0) or np.any(powers > s.Pmax + TOL):
        raise ValueError("initial powers must be a (K, N) array within [0, Pmax]")
    state = PowerGameState(allocs, powers, status="max_rounds")
    for r in range(1, max_rounds + 1):
        change = 0.0
        for k in range(s.K):
            br = best_response_power(s, k, allocs[k], powers)
            if not br.feasible:
                state.status = "infeasible"
                state.infeasible_fc = k
                state.infeasible_users = br.infeasible_users
                state.rounds = r
                return state
            change = max(change, abs(br.power.sum() - powers[k].sum()))
            powers[k] = br.power
        state.rounds = r
        state.trace.append({
            "iteration": r,
            "solver": "powergame",
            "total_power": powers.sum(axis=1).tolist(),
            "social_value": -float(powers.sum()),
            "max_change": change,
        })
        if change < tol:
            state.converged = True
            state.status = "converged"
            break
    state.powers = powers
    return state


# ---------------------------------------------------------------------------
# epsilon-better response on the discretized game

@dataclass
class BetterResponseResult:
    indices: tuple
    profile: JointStrategy
    steps: int
    converged: bool
    status: str
    potential_trace: list
    trace: list


def _joint_feasible_moves(s: Scenario, spaces, indices, k):
    """Feasibility of every strategy of FC ``k`` against the others' current play.

    A deviation is admissible only if every FC's rate constraints still hold,
    since each FC's feasible set depends on the interference the others create.
    """
    sp = spaces[k]
    n = sp.total_count
    powers = np.empty((n, s.K, s.N))
    for l, (space, i) in enumerate(zip(spaces, indices)):
        powers[:, l] = space.powers[i]
    powers[:, k] = sp.powers
    ok = np.ones(n, dtype=bool)
    for l in range(s.K):
        alloc = sp.allocs if l == k else np.broadcast_to(spaces[l].allocs[indices[l]], (n, s.N))
        rates = batch_user_rates(s, l, powers[:, l], alloc, powers)
        ok &= np.all(rates / s.Rreq[l] >= 1.0 - TOL, axis=1)
    return ok


def first_feasible_profile(s: Scenario, spaces, budget: int = 10**6):
    table = ProfileTable(s, spaces, budget)
    ok = np.ones(table.size, dtype=bool)
    for k in range(s.K):
        ok &= np.all(table.rates[k] / s.Rreq[k] >= 1.0 - TOL, axis=1)
    hits = np.flatnonzero(ok)
    return None if hits.size == 0 else table.unflatten(int(hits[0]))


def epsilon_better_response(s: Scenario, spaces: list, epsilon: float, sweep_order=None,
                            start=None, max_steps: int = 100_000,
                            choice: str = "first") -> BetterResponseResult:
    """Sweep the FCs; each switches to a strategy lowering its power by >= ``epsilon`` W.

    Utilities are ``-sum(P^k)`` on jointly feasible profiles. ``choice`` picks
    the lowest-index improving strategy (``"first"``) or the best one.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    order = list(range(s.K)) if sweep_order is None else list(sweep_order)
    indices = first_feasible_profile(s, spaces) if start is None else tuple(int(i) for i in start)
    if indices is None:
        return BetterResponseResult((), None, 0, False, "no_feasible_profile", [], [])
    indices = list(indices)
    totals = [sp.powers.sum(axis=1) for sp in spaces]

    def pot():
        return -float(sum(t[i] for t, i in zip(totals, indices)))

    for k in range(s.K):
        if not _joint_feasible_moves(s, spaces, indices, k)[indices[k]]:
            return BetterResponseResult(tuple(indices), joint_strategy(spaces, indices), 0, False,
                                        "infeasible_start", [pot()], [])
    potentials = [pot()]
    trace = []
    steps = 0
    while steps < max_steps:
        moved = False
        for k in order:
            ok = _joint_feasible_moves(s, spaces, indices, k)
            util = -totals[k]
            better = np.flatnonzero(ok & (util >= util[indices[k]] + epsilon - TOL))
            if better.size == 0:
                continue
            new = int(better[0]) if choice == "first" else int(better[np.argmax(util[better])])
            indices[k] = new
            steps += 1
            moved = True
            potentials.append(pot())
            trace.append({"iteration": steps, "solver": "better_response", "fc": k,
                          "total_power": [float(t[i]) for t, i in zip(totals, indices)],
                          "social_value": potentials[-1], "accepted": True})
            if steps >= max_steps:
                break
        if not moved:
            return BetterResponseResult(tuple(indices), joint_strategy(spaces, indices), steps, True,
                                        "converged", potentials, trace)
    return BetterResponseResult(tuple(indices), joint_strategy(spaces, indices), steps, False,
                                "max_steps", potentials, trace)
