"""
Two familiar models as special cases
====================================

With G = 1 every meeting averages the pair: this is linear gossip averaging
and the opinions contract to a common value, up to the noise floor.  With
G(x) = 1{x <= r} and no noise we get the classic bounded confidence model:
agents only listen to those within r, and the population freezes into
clusters more than r apart.
"""

from __future__ import annotations

import numpy as np

from sbc_opinion import run_preset

for name in ("linear-special-case", "bounded-confidence-special-case"):
    s = run_preset(name, root="demo_output")
    print(f"{name}: spread {s['initial_spread']:.2f} -> {s['final_spread']:.3f}",
          end="")
    if "final_clusters" in s:
        print(f", {s['final_clusters']} clusters")
    else:
        print()

# the trajectories are in long CSV form (t, agent_id, value)
data = np.loadtxt("demo_output/bounded-confidence-special-case/opinions.csv",
                  delimiter=",", skiprows=1)
last = data[data[:, 0] == data[:, 0].max(), 2]
print("final opinions:", np.round(np.sort(last), 2))
