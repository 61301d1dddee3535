"""How far is one greedy sweep from the true optimum?

On a 4-element binary surface there are only 16 configurations, so the
exhaustive search is cheap. Compare it with greedy (same frozen weights)
and with the best of a handful of random configurations.
"""

# %%
import numpy as np

from risric import (DirectEvaluator, OptimizerSettings, ScenarioConfig, WeightPolicy,
                    greedy_optimize, oracle_check, random_baseline)

sc = ScenarioConfig(n_x=1, n_y=4, n_state=2, n_ue=2, thermal_noise=False)

# %%
gaps = []
for trial in range(200):
    out = oracle_check(sc, trial)
    gaps.append(out["exhaustive_objective"] - out["greedy_objective"])
gaps = np.array(gaps)
print(f"greedy hit the optimum in {np.mean(gaps == 0):.0%} of 200 draws")
print(f"worst gap {gaps.max():.2f} dB, median {np.median(gaps):.2f} dB")

# %% random search on the full 76-element surface, same budget as one sweep
big = ScenarioConfig(n_ue=1, thermal_noise=False)
node = big.build_node(0)
rnd = random_baseline(DirectEvaluator(node), 304, np.random.default_rng(0),
                      n_elements=big.n_elements, policy=WeightPolicy.equal())
print(f"best of 304 random configurations: {rnd:.2f} dBm")

# %% versus one greedy sweep on the same draw
_, trace = greedy_optimize(DirectEvaluator(big.build_node(0)), WeightPolicy.equal(),
                           OptimizerSettings(), big.n_elements)
print(f"one greedy sweep (304 measurements):  {trace.final_rsrp_ws_max:.2f} dBm")
