"""
Generating a commuting network
==============================

Commuters are placed one at a time: a residence unit is drawn among those
that still have out-commuters, then a workplace with probability
proportional to its remaining in-commuters times ``exp(-beta * distance)``.
"""

import numpy as np

from commuting import GenerationConfig, generate_network, run_replicas, validate_margins
from commuting.synthetic import synthetic_area

# A synthetic region of 200 units surrounded by 50 outside units.
area = synthetic_area(200, 50, extent_m=40_000, commuters=10_000, seed=0)
print(validate_margins(area))

# One realisation. Rows are residence units, columns every unit of the basin.
W = generate_network(area, GenerationConfig(beta=2e-4, seed=1))
print("shape", W.flows.shape, "commuters", W.total)

# Margins are respected exactly: each row sums to the out-commuters.
assert np.array_equal(W.flows.sum(axis=1), area.s_out)
assert np.all(W.flows.sum(axis=0) <= area.s_in)

# The decay parameter trades distance against job opportunities.
for beta in (0.0, 5e-5, 2e-4, 1e-3):
    W = generate_network(area, GenerationConfig(beta, seed=1))
    mean_km = (W.flows * area.distances).sum() / W.total / 1000
    print(f"beta={beta:g}/m  mean commuting distance {mean_km:.1f} km")

# Replicas use independent streams derived from one seed.
mats, mean = run_replicas(area, GenerationConfig(2e-4, seed=1, replicas=20))
spread = np.std([m.flows for m in mats], axis=0)
print("largest mean flow", mean.flows.max(), "its std over replicas",
      spread.flat[np.argmax(mean.flows)])
