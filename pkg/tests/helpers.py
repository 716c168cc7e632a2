"""Small instances shared by the test modules."""
import numpy as np

from femtogame.model import DATA, VOICE, Scenario
from femtogame.scenarios import GeneratorSpec, generate_scenario

SIGMA2 = 1.8e-4


def flat_scenario(K=2, N=2, M=1, g=1.0, cross=0.1, i=5e-3, pmax=15e-3, rreq=100e3, **kw):
    """Every gain, interference level and requirement equal."""
    Ms = (M,) * K if np.isscalar(M) else tuple(M)
    G = [np.full((N, m), g) for m in Ms]
    Gc = [[None if l == k else np.full((N, Ms[k]), cross) for k in range(K)] for l in range(K)]
    I = [np.full((N, m), i) for m in Ms]
    Rreq = [np.full(m, rreq) for m in Ms]
    return Scenario(G=G, Gc=Gc, I=I, Pmax=np.full((K, N), pmax), Rreq=Rreq, sigma2=SIGMA2, **kw)


def desk_scenario(seed=0, N=2, M=2, rreq=150e3):
    spec = GeneratorSpec(K=2, N=N, M=(M, M), Rreq=[np.full(M, rreq)] * 2)
    return generate_scenario(spec, seed)


def voice_scenario(seed=0):
    """Three channels; per FC one data user at 150 kbps and two voice users at 20 kbps."""
    spec = GeneratorSpec(
        K=2, N=3, M=(3, 3),
        Rreq=[np.array([150e3, 20e3, 20e3]), np.array([20e3, 150e3, 20e3])],
        user_class=((DATA, VOICE, VOICE), (VOICE, DATA, VOICE)),
    )
    return generate_scenario(spec, seed)


def single_channel_pair(g=(1.0, 0.8), cross=0.02, rreq=400e3):
    """Two FCs, one channel, one user each; four strategies per FC at two levels."""
    G = [np.array([[g[0]]]), np.array([[g[1]]])]
    Gc = [[None, np.array([[cross]])], [np.array([[cross]]), None]]
    I = [np.array([[5e-3]])] * 2
    return Scenario(G=G, Gc=Gc, I=I, Pmax=np.full((2, 1), 15e-3), Rreq=[np.array([rreq])] * 2,
                    sigma2=SIGMA2)


def symmetric_pair(cross=0.6, rreq=600e3, c=0.1):
    """Identical FCs on two channels; the second channel is half as strong."""
    G = [np.array([[1.0], [0.5]])] * 2
    Gc = [[None, np.full((2, 1), cross)], [np.full((2, 1), cross), None]]
    I = [np.full((2, 1), 5e-3)] * 2
    return Scenario(G=G, Gc=Gc, I=I, Pmax=np.full((2, 2), 15e-3), Rreq=[np.array([rreq])] * 2,
                    sigma2=SIGMA2, alpha_hat=[0.0, 0.0], c_nbs=c)


def assert_monotone(trace):
    values = [rec["social_value"] for rec in trace]
    for a, b in zip(values, values[1:]):
        assert b >= a, f"social value dropped from {a} to {b}"


ACCEPTANCE_LINES = []


def report(number, passed, detail):
    """Record one acceptance verdict; conftest prints them at the end of the run."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed
