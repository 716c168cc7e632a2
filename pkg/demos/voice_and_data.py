"""Voice and data users sharing three channels across two FCs.

A voice user counts only when it reaches its full rate. The script prints,
for each cost, which users the learned allocation actually serves.
"""
import numpy as np

from femtogame import model
from femtogame.cce import run_voice_data_cce
from femtogame.model import DATA, VOICE
from femtogame.scenarios import GeneratorSpec, generate_scenario
from femtogame.strategy import enumerate_spaces

spec = GeneratorSpec(
    K=2, N=3, M=(3, 3),
    Rreq=[np.array([150e3, 20e3, 20e3]), np.array([20e3, 150e3, 20e3])],
    user_class=((DATA, VOICE, VOICE), (VOICE, DATA, VOICE)),
)
s = generate_scenario(spec, 0)
spaces = enumerate_spaces(s, 2, "all_assigned")
for cost in ("gated", "penalty"):
    rep = run_voice_data_cce(s, spaces, cost=cost)
    print(f"{cost}: status {rep.status}")
    for k in range(s.K):
        frac = model.user_rates(s, rep.profile, k) / s.Rreq[k]
        cells = [f"{c}:{min(f, 9.99):.2f}" for c, f in zip(s.user_class[k], frac)]
        print(f"  FC {k} rate/requirement  " + "  ".join(cells))
