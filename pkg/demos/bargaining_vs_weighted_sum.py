"""Compare the Nash bargaining point with the weighted-sum optimum.

On a symmetric two-FC instance the weighted sum is happy to starve one FC,
while the bargaining objective splits the channel quality evenly.
"""
from femtogame import oracle
from femtogame.model import Scenario
from femtogame.search import SearchConfig, prop1_bound, run_nbs, run_search
from femtogame.strategy import enumerate_spaces

G = [[[1.0], [0.5]], [[1.0], [0.5]]]
s = Scenario(G=G, Gc=[[None, [[0.6], [0.6]]], [[[0.6], [0.6]], None]],
             I=[[[5e-3], [5e-3]]] * 2, Pmax=[[15e-3, 15e-3]] * 2,
             Rreq=[[600e3], [600e3]], sigma2=1.8e-4, B=180e3,
             alpha_hat=[0.0, 0.0], c_nbs=0.1, name="symmetric pair")
spaces = enumerate_spaces(s, 3)
joint = oracle.JointSpace(spaces).joint_count
n1 = prop1_bound(joint, 1e-4)

nbs = run_nbs(s, spaces, SearchConfig(objective="nbs", variant="algo3M", N1=n1, seed=0))
ws = run_search(s, spaces, SearchConfig(variant="algo3M", N1=n1, seed=0))
for name, st in (("bargaining", nbs), ("weighted sum", ws)):
    a = st.alpha
    print(f"{name:>12}: alpha = {a.round(3).tolist()}, gap = {abs(a[0] - a[1]):.3f}")
