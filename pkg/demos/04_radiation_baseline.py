"""
Comparison with the radiation model
===================================

The radiation model predicts flows from populations alone. With small
units and margins that do not follow population, the margin-driven
gravity generator reproduces the observed flows much better.
"""

import numpy as np

from commuting import (
    GenerationConfig,
    RadiationInputs,
    build_distance_matrix,
    compare_models,
    generate_network,
    radiation_flows,
)
from commuting.synthetic import synthetic_area

area = synthetic_area(150, 40, extent_m=25_000, commuters=8000, seed=8)
n = area.n
observed = generate_network(area, GenerationConfig(4e-4, seed=1)).flows[:, :n]
gravity = generate_network(area, GenerationConfig(4e-4, seed=2)).flows[:, :n]

units = area.units
pops = np.array([u.population for u in units])
inputs = RadiationInputs(pops, pops.sum(), float(area.s_out.sum()),
                         build_distance_matrix(units, units))
radiation = radiation_flows(inputs)[:n, :n]

report = compare_models(observed, {"gravity": gravity, "radiation": radiation},
                        log_bins=8, distances=area.distances[:, :n])
for name, r in report.models.items():
    print(f"{name:>9}: CPC = {r.cpc:.3f}")
    for lo, hi, mo, mm, k in r.binned:
        print(f"    observed in [{lo:6.1f}, {hi:6.1f}): mean observed {mo:6.1f}, "
              f"mean modelled {mm:6.1f} ({int(k)} pairs)")
