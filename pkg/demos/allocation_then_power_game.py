"""Learn channel allocations with multiplicative weights, then settle powers.

Runs the squared-alpha CCE on the bundled "ample" scenario (spare power on
every channel), extracts the most likely joint strategy and hands its
allocation map to the continuous best-response power game.
"""
import numpy as np

from femtogame.cce import run_allocation_algorithm_1
from femtogame.scenarios import ample_power_scenario
from femtogame.strategy import enumerate_spaces

s = ample_power_scenario(N=4, M=2)
spaces = enumerate_spaces(s, 2, "all_assigned")
rep = run_allocation_algorithm_1(s, spaces, epsilon=0.1)

print(f"status: {rep.status} after {rep.iterations} rounds, CCE gap {rep.gap:.2e}")
print("allocations:", [list(x.alloc) for x in rep.profile])
print("alpha per FC:", np.round(rep.alpha, 6))
print(f"power before the game: {1e3 * rep.pre_game_total_power.sum():.3f} mW")
print(f"power after the game:  {1e3 * rep.total_power.sum():.3f} mW")
