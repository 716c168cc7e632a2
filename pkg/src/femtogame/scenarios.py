"""Random scenario generation and three fixed reference networks.

Gains are squared Gaussian draws. The reference networks fix interference,
caps and requirements; their gain matrices are drawn from a seed, so results
depend on that seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DATA, VOICE, JointStrategy, Scenario, user_rates

# B = 180 kHz, N0 = 1e-9 W/Hz, sigma^2 = N0 * B
DEFAULT_B = 180e3
DEFAULT_SIGMA2 = 1.8e-4


@dataclass(frozen=True)
class GeneratorSpec:
    K: int
    N: int
    M: tuple
    direct_mean: tuple | None = None  # per FC; default 1.0
    cross_mean: float = 0.0
    std: float = 1.0
    I: tuple | None = None            # W, per FC (N, M_k); default uniform draws
    I_range: tuple = (1e-3, 14e-3)
    Pmax: tuple | None = None         # W, (K, N)
    Rreq: tuple | None = None         # bits/s, per FC
    user_class: tuple | None = None
    B: float = DEFAULT_B
    Gamma: float = 1.0
    sigma2: float = DEFAULT_SIGMA2
    rho: float = 15.0
    beta: tuple | None = None
    alpha_hat: tuple | None = None
    c_nbs: float = 1.0
    name: str = "generated"


def generate_scenario(spec: GeneratorSpec, seed: int = 0) -> Scenario:
    """Draw gains as ``N(mean, std)**2``; same seed, same scenario."""
    rng = np.random.default_rng(seed)
    K, N, M = spec.K, spec.N, tuple(spec.M)
    means = spec.direct_mean or (1.0,) * K
    G = [(rng.normal(means[k], spec.std, size=(N, M[k]))) ** 2 for k in range(K)]
    Gc = [[None if l == k else rng.normal(spec.cross_mean, spec.std, size=(N, M[k])) ** 2
           for k in range(K)] for l in range(K)]
    if spec.I is None:
        I = [rng.uniform(*spec.I_range, size=(N, M[k])) for k in range(K)]
    else:
        I = spec.I
    Pmax = spec.Pmax if spec.Pmax is not None else np.full((K, N), 15e-3)
    Rreq = spec.Rreq if spec.Rreq is not None else [np.full(M[k], 150e3) for k in range(K)]
    return Scenario(G=G, Gc=Gc, I=I, Pmax=Pmax, Rreq=Rreq, sigma2=spec.sigma2, Gamma=spec.Gamma,
                    B=spec.B, user_class=spec.user_class, rho=spec.rho, beta=spec.beta,
                    alpha_hat=spec.alpha_hat, c_nbs=spec.c_nbs, name=spec.name, seed=seed)


def _mw(rows):
    return np.array(rows, dtype=float) * 1e-3


def _kbps(rows):
    return [np.array(r, dtype=float) * 1e3 for r in rows]


# 2 FCs x 2 users x 4 channels; requirements not jointly satisfiable.
EXAMPLE_1 = dict(
    I=[_mw([[4, 3], [11, 4], [8, 9], [9, 13]]), _mw([[10, 1], [11, 6], [6, 1], [1, 14]])],
    Pmax=_mw([[2.1, 1.2, 8.0, 1.8], [1.1, 1.5, 7.5, 1.9]]),
    Rreq=_kbps([[200, 220], [160, 180]]),
    user_class=None,
)

# Same shape with ample power; every requirement can be met.
EXAMPLE_2 = dict(
    I=[_mw([[11, 13], [3, 14], [7, 8], [10, 2]]), _mw([[2, 10], [7, 11], [6, 4], [9, 10]])],
    Pmax=_mw([[15, 15, 15, 15], [15, 15, 15, 15]]),
    Rreq=_kbps([[225, 100], [200, 150]]),
    user_class=None,
)

# Voice and data users: FC 0 has data user 0, FC 1 has data user 1.
EXAMPLE_3 = dict(
    I=[_mw([[10, 6, 6], [3, 9, 12], [1, 11, 12], [9, 5, 3]]),
       _mw([[10, 7, 5], [1, 5, 2], [7, 10, 8], [7, 11, 3]])],
    Pmax=_mw([[2.5, 1.3, 5.0, 1.6], [2.1, 1.0, 3.6, 1.7]]),
    Rreq=_kbps([[220, 25, 17], [15, 180, 30]]),
    user_class=((DATA, VOICE, VOICE), (VOICE, DATA, VOICE)),
)

EXAMPLES = {1: EXAMPLE_1, 2: EXAMPLE_2, 3: EXAMPLE_3}


def example_scenario(number: int, seed: int = 0) -> Scenario:
    """One of the three bundled reference networks with freshly drawn gains.

    Direct gains of FC 0 and FC 1 are ``N(1, 1)**2`` and ``N(0.5, 1)**2``;
    cross gains are ``N(0, 1)**2``.
    """
    ex = EXAMPLES[number]
    M = tuple(r.shape[0] for r in ex["Rreq"])
    spec = GeneratorSpec(
        K=2, N=4, M=M, direct_mean=(1.0, 0.5), cross_mean=0.0, I=ex["I"], Pmax=ex["Pmax"],
        Rreq=ex["Rreq"], user_class=ex["user_class"], rho=15.0, beta=(1.0, 1.0),
        name=f"example{number}",
    )
    return generate_scenario(spec, seed)


def ample_power_scenario(N: int = 4, M: int = 2, headroom: float = 0.9, cross: float = 0.05,
                         gains: tuple = (1.0, 0.6), interference: float = 5e-3,
                         pmax: float = 15e-3) -> Scenario:
    """Two FCs with flat gains where every requirement is met with room to spare.

    Each FC splits its channels evenly among its users; the requirement of a
    user is ``headroom`` times the rate it gets when both FCs transmit at the
    caps. Full power on every channel therefore over-serves everyone by
    ``1 / headroom`` even under worst-case interference, and the minimum-power
    point lies strictly inside the caps.
    """
    if N % M:
        raise ValueError("N must be a multiple of M")
    K = 2
    G = [np.full((N, M), float(g)) for g in gains]
    Gc = [[None if l == k else np.full((N, M), cross) for k in range(K)] for l in range(K)]
    I = [np.full((N, M), interference) for _ in range(K)]
    Pmax = np.full((K, N), pmax)
    base = Scenario(G=G, Gc=Gc, I=I, Pmax=Pmax, Rreq=[np.ones(M)] * K, sigma2=DEFAULT_SIGMA2,
                    B=DEFAULT_B, name="ample")
    alloc = np.repeat(np.arange(M), N // M)
    full = JointStrategy.from_arrays(Pmax, np.array([alloc] * K))
    return base.replace(Rreq=[headroom * user_rates(base, full, k) for k in range(K)])
