"""Stochastic search for Pareto points and Nash bargaining solutions.

Every FC proposes a new strategy in the same iteration; a central evaluator
accepts the joint proposal only if the weighted social value strictly grows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import model
from .model import TOL, JointStrategy, Scenario
from .strategy import DEFAULT_BUDGET, BudgetExceeded, ProfileTable, joint_strategy, profile_rates

OBJECTIVES = ("weighted_alpha", "weighted_penalty", "voice_data", "voice_penalty", "nbs")
VARIANTS = ("algo3", "algo3M")


@dataclass(frozen=True)
class SearchConfig:
    objective: str = "weighted_alpha"
    variant: str = "algo3"
    beta: tuple | None = None
    alpha_hat: tuple | None = None
    c_nbs: float | None = None
    nbs_payoff: str | None = None
    N1: int | None = None
    max_iters: int = 100_000
    seed: int = 0
    start: tuple | None = None
    trace: str = "full"
    prop1_eps: float = 0.01

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.beta is not None and any(b <= 0 for b in self.beta):
            raise ValueError("beta must be positive")
        if self.c_nbs is not None and self.c_nbs <= 0:
            raise ValueError("c_nbs must be positive")
        if self.N1 is not None and self.N1 < 1:
            raise ValueError("N1 must be at least 1")
        if self.trace not in ("full", "accepted", "none"):
            raise ValueError(f"unknown trace level {self.trace!r}")


@dataclass(frozen=True)
class ObjectiveParams:
    beta: np.ndarray
    alpha_hat: np.ndarray
    c_nbs: float
    nbs_payoff: str

    @classmethod
    def resolve(cls, s: Scenario, cfg: SearchConfig | None = None) -> "ObjectiveParams":
        cfg = cfg or SearchConfig()
        payoff = cfg.nbs_payoff
        if payoff is None:
            payoff = "voice_data" if s.has_voice else "alpha"
        return cls(
            beta=np.asarray(s.beta if cfg.beta is None else cfg.beta, dtype=float),
            alpha_hat=np.asarray(s.alpha_hat if cfg.alpha_hat is None else cfg.alpha_hat, dtype=float),
            c_nbs=float(s.c_nbs if cfg.c_nbs is None else cfg.c_nbs),
            nbs_payoff=payoff,
        )


def fc_payoffs(s: Scenario, k: int, rates, power, objective: str, params: ObjectiveParams):
    """Per-FC payoff the weighted sum (or the bargaining product) is built from."""
    if objective == "weighted_alpha":
        return np.minimum(1.0, model.alpha_from_rates(s, k, rates))
    if objective == "weighted_penalty":
        return -model.penalty_from_rates(s, k, rates, power)
    if objective == "voice_data":
        return model.surplus_from_rates(s, k, rates)
    if objective == "voice_penalty":
        return -model.voice_penalty_from_rates(s, k, rates, power)
    if objective == "nbs":
        if params.nbs_payoff == "voice_data":
            return model.surplus_from_rates(s, k, rates)
        return np.minimum(1.0, model.alpha_from_rates(s, k, rates))
    raise ValueError(f"unknown objective {objective!r}")


def combine(payoffs, objective: str, params: ObjectiveParams):
    """Social value from a ``(..., K)`` payoff array; -inf below the disagreement point."""
    payoffs = np.asarray(payoffs, dtype=float)
    if objective != "nbs":
        return payoffs @ params.beta
    gain = payoffs - params.alpha_hat
    ok = np.all(gain >= -TOL, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.log(np.maximum(params.c_nbs + gain, 0.0)).sum(axis=-1)
    return np.where(ok, val, -np.inf)


def payoff_vector(s: Scenario, x: JointStrategy, objective: str, params: ObjectiveParams | None = None):
    params = params or ObjectiveParams.resolve(s)
    return np.array([float(fc_payoffs(s, k, model.user_rates(s, x, k), np.array(x[k].power),
                                      objective, params)) for k in range(s.K)])


def social_value(s: Scenario, x: JointStrategy, objective: str,
                 params: ObjectiveParams | None = None) -> float:
    """Weighted social value of a joint strategy (scalar path)."""
    params = params or ObjectiveParams.resolve(s)
    return float(combine(payoff_vector(s, x, objective, params), objective, params))


def prop1_bound(M: int, eps: float) -> int:
    """Iterations after which uniform global search has hit a given point w.p. >= 1 - eps."""
    if M < 1:
        raise ValueError("M must be at least 1")
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if M == 1 or eps == 1.0:
        return 0
    n = math.log(eps) / math.log1p(-1.0 / M)
    return math.ceil(n - 1e-9)


def hit_probability(M: int, n: int) -> float:
    return 1.0 - (1.0 - 1.0 / M) ** n


# ---------------------------------------------------------------------------
# proposals

def algo3_propose(s: Scenario, spaces, x, rng: np.random.Generator) -> tuple:
    """Each FC re-assigns one random channel and redraws all its channel powers."""
    out = []
    for sp, idx in zip(spaces, x):
        a, _ = sp.decompose(int(idx))
        alloc = list(sp.allocations[a])
        i = int(rng.integers(sp.n_channels))
        values = sp.alloc_values[i]
        new_a = a
        for _ in range(32):
            trial = alloc.copy()
            trial[i] = values[int(rng.integers(len(values)))]
            hit = sp.alloc_index.get(tuple(int(v) for v in trial))
            if hit is not None:
                new_a = hit
                break
        digits = [int(rng.integers(r)) for r in sp.radices]
        out.append(sp.compose(new_a, digits))
    return tuple(out)


def algo3M_propose(s: Scenario, spaces, x, rng: np.random.Generator) -> tuple:
    """Uniform draw from every FC's full strategy space (independent of ``x``)."""
    return tuple(int(rng.integers(sp.total_count)) for sp in spaces)


class _BlockProposer:
    """Global-search proposals drawn a block at a time; same law as :func:`algo3M_propose`."""

    def __init__(self, spaces, block: int = 4096):
        self.counts = np.array([sp.total_count for sp in spaces])
        self.block = block
        self.buf = np.empty((0, len(spaces)), dtype=np.int64)
        self.pos = 0

    def __call__(self, s, spaces, x, rng):
        if self.pos == len(self.buf):
            self.buf = rng.integers(self.counts, size=(self.block, len(self.counts)))
            self.pos = 0
        row = self.buf[self.pos]
        self.pos += 1
        return tuple(int(v) for v in row)


# ---------------------------------------------------------------------------
# the search loop

@dataclass
class SearchState:
    indices: tuple
    profile: JointStrategy
    value: float
    payoffs: np.ndarray
    alpha: np.ndarray
    iteration: int
    plateau: int
    accepted: int
    status: str
    trace: list = field(default_factory=list)
    objective: str = "weighted_alpha"
    variant: str = "algo3"
    joint_count: int = 0
    prop1_bound: int | None = None


class _Evaluator:
    """Social value, per-FC payoffs and alphas of joint profiles.

    Uses a full joint table when it fits the budget, else memoized batch calls.
    """

    def __init__(self, s, spaces, objective, params, budget):
        self.s, self.spaces, self.objective, self.params = s, spaces, objective, params
        self.shape = tuple(sp.total_count for sp in spaces)
        self.strides = np.array([math.prod(self.shape[k + 1:]) for k in range(len(self.shape))])
        self.cache = {}
        try:
            table = ProfileTable(s, spaces, budget)
        except BudgetExceeded:
            self.table = None
            return
        self.table = table
        pay = np.stack([fc_payoffs(s, k, table.rates[k], table.own_power(k), objective, params)
                        for k in range(s.K)], axis=1)
        self.payoffs = pay
        self.values = combine(pay, objective, params)
        self.alphas = np.stack([model.alpha_from_rates(s, k, table.rates[k]) for k in range(s.K)], axis=1)

    def flat(self, indices) -> int:
        return int(np.dot(self.strides, indices))

    def value(self, indices) -> float:
        if self.table is not None:
            return float(self.values[self.flat(indices)])
        return self._slow(indices)[0]

    def details(self, indices):
        if self.table is not None:
            f = self.flat(indices)
            return float(self.values[f]), self.payoffs[f], self.alphas[f]
        return self._slow(indices)

    def _slow(self, indices):
        indices = tuple(int(i) for i in indices)
        hit = self.cache.get(indices)
        if hit is None:
            rates = profile_rates(self.s, self.spaces, indices)
            pay = np.array([float(fc_payoffs(self.s, k, rates[k], self.spaces[k].powers[indices[k]],
                                             self.objective, self.params)) for k in range(self.s.K)])
            alphas = np.array([float(model.alpha_from_rates(self.s, k, rates[k])) for k in range(self.s.K)])
            hit = self.cache[indices] = (float(combine(pay, self.objective, self.params)), pay, alphas)
        return hit


def _record(n, solver, indices, value, evaluator, accepted):
    _, pay, _ = evaluator.details(indices)
    return {
        "iteration": n,
        "solver": solver,
        "utility": pay.tolist(),
        "social_value": value,
        "total_power": [float(sp.powers[i].sum()) for sp, i in zip(evaluator.spaces, indices)],
        "accepted": accepted,
        "strategy_index": list(indices),
    }


def run_search(s: Scenario, spaces, cfg: SearchConfig = SearchConfig(),
               budget: int = DEFAULT_BUDGET) -> SearchState:
    """Accept-if-strictly-better stochastic search over the joint strategy space.

    Stops after ``N1`` consecutive iterations without a change (default 2000
    for local search, ``5 * |X|`` for global search) or at ``max_iters``.
    """
    params = ObjectiveParams.resolve(s, cfg)
    evaluator = _Evaluator(s, spaces, cfg.objective, params, budget)
    joint_count = math.prod(sp.total_count for sp in spaces)
    N1 = cfg.N1 or (2000 if cfg.variant == "algo3" else 5 * joint_count)
    rng = np.random.default_rng(cfg.seed)
    propose = algo3_propose if cfg.variant == "algo3" else _BlockProposer(spaces)
    solver = f"search_{cfg.variant}_{cfg.objective}"

    x = tuple(int(i) for i in cfg.start) if cfg.start is not None else (0,) * s.K
    v = evaluator.value(x)
    trace = []
    if cfg.trace != "none":
        trace.append(_record(0, solver, x, v, evaluator, None))
    plateau = accepted = 0
    status = "max_iters"
    n = 0
    for n in range(1, cfg.max_iters + 1):
        y = propose(s, spaces, x, rng)
        vy = evaluator.value(y)
        take = vy > v + TOL or (v == -np.inf and vy > v)
        if take:
            x, v = y, vy
            plateau = 0
            accepted += 1
        else:
            plateau += 1
        if cfg.trace == "full" or (take and cfg.trace == "accepted"):
            trace.append(_record(n, solver, x, v, evaluator, take))
        if plateau >= N1:
            status = "plateau"
            break
    if cfg.objective == "nbs" and v == -np.inf:
        status = "infeasible"
    value, pay, alphas = evaluator.details(x)
    return SearchState(
        indices=x,
        profile=joint_strategy(spaces, x),
        value=value,
        payoffs=np.array(pay),
        alpha=np.array(alphas),
        iteration=n,
        plateau=plateau,
        accepted=accepted,
        status=status,
        trace=trace,
        objective=cfg.objective,
        variant=cfg.variant,
        joint_count=joint_count,
        prop1_bound=prop1_bound(joint_count, cfg.prop1_eps) if cfg.variant == "algo3M" else None,
    )


def disagreement_feasible(s: Scenario, spaces, cfg: SearchConfig, budget: int = DEFAULT_BUDGET):
    """Whether some profile meets ``alpha_hat``; ``None`` if the joint space is too big to scan."""
    params = ObjectiveParams.resolve(s, cfg)
    try:
        table = ProfileTable(s, spaces, budget)
    except BudgetExceeded:
        return None
    pay = np.stack([fc_payoffs(s, k, table.rates[k], table.own_power(k), "nbs", params)
                    for k in range(s.K)], axis=1)
    return bool(np.any(np.all(pay - params.alpha_hat >= -TOL, axis=1)))


def run_nbs(s: Scenario, spaces, cfg: SearchConfig = SearchConfig(objective="nbs"),
            budget: int = DEFAULT_BUDGET) -> SearchState:
    """Nash bargaining point via the same search on the log-gain objective."""
    if cfg.objective != "nbs":
        cfg = SearchConfig(**{**cfg.__dict__, "objective": "nbs"})
    feasible = disagreement_feasible(s, spaces, cfg, budget)
    if feasible is False:
        x = tuple(int(i) for i in cfg.start) if cfg.start is not None else (0,) * s.K
        params = ObjectiveParams.resolve(s, cfg)
        ev = _Evaluator(s, spaces, "nbs", params, budget)
        value, pay, alphas = ev.details(x)
        return SearchState(x, joint_strategy(spaces, x), value, np.array(pay), np.array(alphas),
                           0, 0, 0, "infeasible", [], "nbs", cfg.variant,
                           math.prod(sp.total_count for sp in spaces), None)
    return run_search(s, spaces, cfg, budget)
