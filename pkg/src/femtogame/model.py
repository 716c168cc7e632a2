"""Network instance, per-channel rates, and the utilities/costs the solvers optimize.

Units are SI throughout: powers in watts, rates in bits/s, bandwidth in Hz.
Users and channels are indexed from 0; an unused channel carries ``NONE``.

Two evaluation paths exist on purpose:

* scalar functions (``channel_rate``, ``user_rate``, ``alpha`` ...) that take a
  :class:`JointStrategy` and loop in plain Python; the brute-force oracle uses
  these.
* :func:`batch_user_rates`, a broadcasting kernel over many strategies at once,
  which the iterative solvers use through :class:`~femtogame.strategy.ProfileTable`.

The ``*_from_rates`` kernels map a user-rate vector (and own powers) to a
payoff; both paths share them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NONE = -1
VOICE = "voice"
DATA = "data"

# Absolute tolerance for comparisons of dimensionless quantities.
TOL = 1e-12
_LN2 = math.log(2.0)


class ScenarioError(ValueError):
    """Raised for inconsistent or physically invalid network instances."""


def _frozen(a, shape=None, name="array"):
    arr = np.array(a, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ScenarioError(f"{name}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{name}: contains NaN or infinite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Scenario:
    """A multi-femtocell network instance.

    ``G[k]`` and ``I[k]`` have shape ``(N, M[k])`` and ``Gc[l][k]`` is the
    ``(N, M[k])`` cross gain from FC ``l``'s transmitter to FC ``k``'s users
    (the diagonal entries are zero). ``Pmax`` is ``(K, N)``.
    """

    G: Sequence
    Gc: Sequence
    I: Sequence
    Pmax: Sequence
    Rreq: Sequence
    sigma2: float
    Gamma: float = 1.0
    B: float = 180e3
    user_class: Sequence | None = None
    rho: float = 15.0
    beta: Sequence | None = None
    alpha_hat: Sequence | None = None
    c_nbs: float = 1.0
    name: str = ""
    seed: int = 0

    def __post_init__(self):
        set_ = object.__setattr__
        K = len(self.G)
        if K < 1:
            raise ScenarioError("need at least one femtocell")
        G = tuple(_frozen(g, name=f"G[{k}]") for k, g in enumerate(self.G))
        if any(g.ndim != 2 for g in G):
            raise ScenarioError("G[k] must be a (N, M_k) matrix")
        N = G[0].shape[0]
        M = tuple(g.shape[1] for g in G)
        if any(g.shape[0] != N for g in G):
            raise ScenarioError("all G[k] must share the channel count N")
        if N < 1 or min(M) < 1:
            raise ScenarioError("need at least one channel and one user per femtocell")
        set_(self, "G", G)

        if len(self.Gc) != K:
            raise ScenarioError(f"Gc: expected {K} source rows, got {len(self.Gc)}")
        rows = []
        for l in range(K):
            if len(self.Gc[l]) != K:
                raise ScenarioError(f"Gc[{l}]: expected {K} entries")
            row = []
            for k in range(K):
                entry = self.Gc[l][k]
                if l == k:
                    if entry is not None and np.any(np.asarray(entry, dtype=float) != 0):
                        raise ScenarioError(f"Gc[{k}][{k}] must be empty or zero")
                    entry = np.zeros((N, M[k]))
                row.append(_frozen(entry, (N, M[k]), f"Gc[{l}][{k}]"))
            rows.append(tuple(row))
        set_(self, "Gc", tuple(rows))

        if len(self.I) != K:
            raise ScenarioError(f"I: expected {K} matrices")
        set_(self, "I", tuple(_frozen(i, (N, M[k]), f"I[{k}]") for k, i in enumerate(self.I)))
        set_(self, "Pmax", _frozen(self.Pmax, (K, N), "Pmax"))
        if len(self.Rreq) != K:
            raise ScenarioError(f"Rreq: expected {K} vectors")
        set_(self, "Rreq", tuple(_frozen(r, (M[k],), f"Rreq[{k}]") for k, r in enumerate(self.Rreq)))

        classes = self.user_class
        if classes is None:
            classes = [[DATA] * m for m in M]
        if len(classes) != K or any(len(c) != m for c, m in zip(classes, M)):
            raise ScenarioError("user_class dimensions do not match M")
        classes = tuple(tuple(str(c) for c in row) for row in classes)
        if any(c not in (VOICE, DATA) for row in classes for c in row):
            raise ScenarioError("user_class entries must be 'voice' or 'data'")
        set_(self, "user_class", classes)

        set_(self, "beta", _frozen(np.ones(K) if self.beta is None else self.beta, (K,), "beta"))
        set_(self, "alpha_hat",
             _frozen(np.zeros(K) if self.alpha_hat is None else self.alpha_hat, (K,), "alpha_hat"))
        for attr in ("sigma2", "Gamma", "B", "rho", "c_nbs"):
            val = float(getattr(self, attr))
            if not math.isfinite(val):
                raise ScenarioError(f"{attr} must be finite")
            set_(self, attr, val)
        set_(self, "seed", int(self.seed))
        set_(self, "name", str(self.name))
        self._validate()

    def _validate(self):
        if any(np.any(g < 0) for g in self.G):
            raise ScenarioError("direct gains must be non-negative")
        if any(np.any(g < 0) for row in self.Gc for g in row):
            raise ScenarioError("cross gains must be non-negative")
        if any(np.any(i < 0) for i in self.I):
            raise ScenarioError("interference must be non-negative")
        if self.sigma2 < 0:
            raise ScenarioError("sigma2 must be non-negative")
        if any(np.any(self.sigma2 + i <= 0) for i in self.I):
            raise ScenarioError("sigma2 + I must be positive on every channel (rates would be unbounded)")
        if self.Gamma < 1:
            raise ScenarioError("Gamma (SNR gap) must be >= 1")
        if self.B <= 0:
            raise ScenarioError("bandwidth B must be positive")
        if np.any(self.Pmax <= 0):
            raise ScenarioError("Pmax must be positive")
        if any(np.any(r <= 0) for r in self.Rreq):
            raise ScenarioError("Rreq must be positive")
        if self.rho < 0:
            raise ScenarioError("rho must be non-negative")
        if np.any(self.beta <= 0):
            raise ScenarioError("beta must be positive")
        if self.c_nbs <= 0:
            raise ScenarioError("c_nbs must be positive")

    @property
    def K(self) -> int:
        return len(self.G)

    @property
    def N(self) -> int:
        return self.G[0].shape[0]

    @property
    def M(self) -> tuple:
        return tuple(g.shape[1] for g in self.G)

    def voice_users(self, k) -> np.ndarray:
        return np.array([j for j, c in enumerate(self.user_class[k]) if c == VOICE], dtype=int)

    def data_users(self, k) -> np.ndarray:
        return np.array([j for j, c in enumerate(self.user_class[k]) if c == DATA], dtype=int)

    @property
    def has_voice(self) -> bool:
        return any(c == VOICE for row in self.user_class for c in row)

    def replace(self, **changes) -> "Scenario":
        fields_ = {f: getattr(self, f) for f in self.__dataclass_fields__}
        fields_.update(changes)
        return Scenario(**fields_)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        for f in self.__dataclass_fields__:
            a, b = getattr(self, f), getattr(other, f)
            if f in ("G", "I", "Rreq"):
                if len(a) != len(b) or not all(np.array_equal(x, y) for x, y in zip(a, b)):
                    return False
            elif f == "Gc":
                if len(a) != len(b) or not all(
                        np.array_equal(x, y) for ra, rb in zip(a, b) for x, y in zip(ra, rb)):
                    return False
            elif isinstance(a, np.ndarray):
                if not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = object.__hash__


@dataclass(frozen=True)
class PureStrategy:
    """One femtocell's per-channel powers (W) and channel-to-user map."""

    power: tuple
    alloc: tuple

    def __post_init__(self):
        object.__setattr__(self, "power", tuple(float(p) for p in self.power))
        object.__setattr__(self, "alloc", tuple(int(a) for a in self.alloc))
        if len(self.power) != len(self.alloc):
            raise ValueError("power and alloc must have one entry per channel")

    @property
    def total_power(self) -> float:
        return math.fsum(self.power)


@dataclass(frozen=True)
class JointStrategy:
    strats: tuple

    def __post_init__(self):
        object.__setattr__(self, "strats", tuple(self.strats))

    def __len__(self):
        return len(self.strats)

    def __getitem__(self, k) -> PureStrategy:
        return self.strats[k]

    def __iter__(self):
        return iter(self.strats)

    def replace(self, k, strat: PureStrategy) -> "JointStrategy":
        strats = list(self.strats)
        strats[k] = strat
        return JointStrategy(strats)

    @property
    def powers(self) -> np.ndarray:
        return np.array([s.power for s in self.strats], dtype=float)

    @property
    def allocs(self) -> np.ndarray:
        return np.array([s.alloc for s in self.strats], dtype=int)

    @classmethod
    def from_arrays(cls, powers, allocs) -> "JointStrategy":
        return cls([PureStrategy(p, a) for p, a in zip(powers, allocs)])


def validate_strategy(s: Scenario, k: int, strat: PureStrategy) -> None:
    """Raise ``ValueError`` unless ``strat`` respects FC ``k``'s caps and users."""
    if len(strat.power) != s.N:
        raise ValueError(f"FC {k}: expected {s.N} channels, got {len(strat.power)}")
    for i, (p, a) in enumerate(zip(strat.power, strat.alloc)):
        if not (0.0 <= p <= s.Pmax[k, i] + TOL):
            raise ValueError(f"FC {k} channel {i}: power {p} outside [0, {s.Pmax[k, i]}]")
        if a != NONE and not 0 <= a < s.M[k]:
            raise ValueError(f"FC {k} channel {i}: user {a} out of range")


def validate_joint(s: Scenario, x: JointStrategy) -> None:
    if len(x) != s.K:
        raise ValueError(f"expected {s.K} femtocell strategies, got {len(x)}")
    for k, strat in enumerate(x):
        validate_strategy(s, k, strat)


# ---------------------------------------------------------------------------
# scalar path

def channel_rate(s: Scenario, x: JointStrategy, k: int, i: int, j: int) -> float:
    """Capacity (bits/s) of channel ``i`` for user ``j`` of FC ``k``, ignoring allocation."""
    interference = math.fsum(s.Gc[l][k][i, j] * x[l].power[i] for l in range(s.K) if l != k)
    sinr = x[k].power[i] * s.G[k][i, j] / (s.Gamma * (s.sigma2 + s.I[k][i, j] + interference))
    return s.B * math.log1p(sinr) / _LN2


def user_rate(s: Scenario, x: JointStrategy, k: int, j: int) -> float:
    return math.fsum(channel_rate(s, x, k, i, j) for i, a in enumerate(x[k].alloc) if a == j)


def user_rates(s: Scenario, x: JointStrategy, k: int) -> np.ndarray:
    return np.array([user_rate(s, x, k, j) for j in range(s.M[k])])


def alpha(s: Scenario, x: JointStrategy, k: int) -> float:
    """Worst user's fraction of its rate requirement."""
    return float(alpha_from_rates(s, k, user_rates(s, x, k)))


def squared_cost(a):
    """``(1 - a)**2`` clamped to 1, so the cost stays in [0, 1] for a > 2."""
    out = np.minimum(1.0, (1.0 - np.asarray(a, dtype=float)) ** 2)
    return float(out) if out.ndim == 0 else out


def penalty_cost(s: Scenario, x: JointStrategy, k: int) -> float:
    return float(penalty_from_rates(s, k, user_rates(s, x, k), np.array(x[k].power)))


def normalized_cost(s: Scenario, x: JointStrategy, k: int) -> float:
    return float(normalized_from_rates(s, k, user_rates(s, x, k), np.array(x[k].power)))


def voice_gated_alpha(s: Scenario, x: JointStrategy, k: int) -> float:
    return float(gated_alpha_from_rates(s, k, user_rates(s, x, k)))


def voice_data_surplus(s: Scenario, x: JointStrategy, k: int) -> float:
    return float(surplus_from_rates(s, k, user_rates(s, x, k)))


def voice_penalty_cost(s: Scenario, x: JointStrategy, k: int) -> float:
    return float(voice_penalty_from_rates(s, k, user_rates(s, x, k), np.array(x[k].power)))


def potential(s: Scenario, x: JointStrategy) -> float:
    return -math.fsum(strat.total_power for strat in x)


@dataclass(frozen=True)
class UtilityReport:
    rate: tuple
    alpha: tuple
    total_power: tuple
    potential: float


def utility_report(s: Scenario, x: JointStrategy) -> UtilityReport:
    rates = tuple(tuple(user_rates(s, x, k)) for k in range(s.K))
    return UtilityReport(
        rate=rates,
        alpha=tuple(alpha(s, x, k) for k in range(s.K)),
        total_power=tuple(strat.total_power for strat in x),
        potential=potential(s, x),
    )


# ---------------------------------------------------------------------------
# batch path

def batch_user_rates(s: Scenario, k: int, power, alloc, all_powers) -> np.ndarray:
    """User rates of FC ``k`` for a batch of strategies.

    ``power`` and ``alloc`` are ``(B, N)``; ``all_powers`` is ``(B, K, N)`` with
    every FC's powers (row ``k`` is ignored). Returns ``(B, M[k])``.
    """
    power = np.asarray(power, dtype=float)
    alloc = np.asarray(alloc)
    all_powers = np.asarray(all_powers, dtype=float)
    noise = s.sigma2 + s.I[k][None, :, :]
    for l in range(s.K):
        if l != k:
            noise = noise + s.Gc[l][k][None, :, :] * all_powers[:, l, :, None]
    sinr = power[:, :, None] * s.G[k][None, :, :] / (s.Gamma * noise)
    crate = s.B * np.log1p(sinr) / _LN2
    mask = alloc[:, :, None] == np.arange(s.M[k])[None, None, :]
    return np.where(mask, crate, 0.0).sum(axis=1)


def rate_fractions(s: Scenario, k: int, rates) -> np.ndarray:
    return np.asarray(rates, dtype=float) / s.Rreq[k]


def alpha_from_rates(s: Scenario, k: int, rates):
    return rate_fractions(s, k, rates).min(axis=-1)


def _deficits(s, k, rates):
    return np.maximum(0.0, s.Rreq[k] - np.asarray(rates, dtype=float))


def penalty_from_rates(s: Scenario, k: int, rates, power):
    # watts + rho * bits/s: rho carries the unit conversion
    return np.asarray(power, dtype=float).sum(axis=-1) + s.rho * _deficits(s, k, rates).sum(axis=-1)


def normalized_from_rates(s: Scenario, k: int, rates, power):
    power_term = (np.asarray(power, dtype=float) / s.Pmax[k]).mean(axis=-1)
    rate_term = (_deficits(s, k, rates) / s.Rreq[k]).mean(axis=-1)
    return (power_term + s.rho * rate_term) / (s.rho + 1.0)


def voice_satisfied(s: Scenario, k: int, rates):
    frac = rate_fractions(s, k, rates)
    voice = s.voice_users(k)
    if voice.size == 0:
        return np.ones(frac.shape[:-1], dtype=bool)
    return np.all(frac[..., voice] >= 1.0 - TOL, axis=-1)


def gated_alpha_from_rates(s: Scenario, k: int, rates):
    """0 unless every voice user is served; otherwise the worst data fraction."""
    frac = rate_fractions(s, k, rates)
    data = s.data_users(k)
    value = frac[..., data].min(axis=-1) if data.size else np.ones(frac.shape[:-1])
    return np.where(voice_satisfied(s, k, rates), value, 0.0)


def surplus_from_rates(s: Scenario, k: int, rates):
    voice, data = s.voice_users(k), s.data_users(k)
    if voice.size == 0 or data.size == 0:
        raise ScenarioError(f"FC {k}: voice/data surplus needs both voice and data users")
    frac = rate_fractions(s, k, rates)
    return np.minimum(frac[..., voice], 1.0).mean(axis=-1) + frac[..., data].min(axis=-1)


def voice_penalty_from_rates(s: Scenario, k: int, rates, power):
    deficit = _deficits(s, k, rates)
    voice, data = s.voice_users(k), s.data_users(k)
    return (np.asarray(power, dtype=float).sum(axis=-1)
            + s.rho * deficit[..., data].sum(axis=-1)
            + s.rho * deficit[..., voice].sum(axis=-1))


# Cost functions for the multiplicative-weights solvers: (s, k, rates, power) -> [0, 1].

def squared_alpha_cost(s, k, rates, power):
    return squared_cost(alpha_from_rates(s, k, rates))


def normalized_penalty_cost(s, k, rates, power):
    return normalized_from_rates(s, k, rates, power)


def voice_gated_cost(s, k, rates, power):
    return squared_cost(gated_alpha_from_rates(s, k, rates))


COST_FUNCTIONS = {
    "squared_alpha": squared_alpha_cost,
    "normalized": normalized_penalty_cost,
    "voice_gated": voice_gated_cost,
    "voice_normalized": normalized_penalty_cost,
}


def shrink_caps(s: Scenario, max_alpha: float = 2.0, iters: int = 60) -> Scenario:
    """Scale each FC's caps down until no allocation reaches ``alpha > max_alpha``.

    The bound is evaluated interference-free (other FCs silent) over every
    channel-to-user map, so it is an upper bound on the reachable alpha.
    """
    import itertools

    new_caps = np.array(s.Pmax, dtype=float)
    for k in range(s.K):
        allocs = np.array(list(itertools.product(range(s.M[k]), repeat=s.N)))
        silent = np.zeros((len(allocs), s.K, s.N))

        def best_alpha(scale):
            power = np.broadcast_to(s.Pmax[k] * scale, (len(allocs), s.N))
            return alpha_from_rates(s, k, batch_user_rates(s, k, power, allocs, silent)).max()

        if best_alpha(1.0) <= max_alpha:
            continue
        lo, hi = 0.0, 1.0
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if best_alpha(mid) > max_alpha:
                hi = mid
            else:
                lo = mid
        new_caps[k] = s.Pmax[k] * lo
    return s.replace(Pmax=new_caps)
