"""Four ways to share one surface between two UEs.

Runs short campaigns of the built-in cases 2-5 and prints the mean gain per
UE. Reference-UE weighting serves UE 0 only; equal weights split the gain;
proportional fair leans toward the weaker UE (UE 1, 8 dB down); CQI-based
weighting leans toward the stronger one. Use the acceptance suite for the
full 100/300-trial numbers; 30 trials keeps this demo quick.
"""

# %%
from dataclasses import replace

import numpy as np

from risric import CASES, calibrate, run_campaign
from risric.harness import CASE_DESCRIPTIONS

# %%
rows = []
for name in ("case2", "case3", "case4", "case5"):
    sc = replace(calibrate(CASES[name]()), trials=30)
    res = run_campaign(sc)
    imp = res.improvement_db
    rows.append((name, res.mean_improvement_db, np.mean(imp[:, 0] > imp[:, 1])))

# %%
print(f"{'case':6s} {'UE0 gain':>9s} {'UE1 gain':>9s} {'UE0 ahead':>10s}  description")
for name, mean, ahead in rows:
    print(f"{name:6s} {mean[0]:9.2f} {mean[1]:9.2f} {ahead:10.0%}  {CASE_DESCRIPTIONS[name]}")
