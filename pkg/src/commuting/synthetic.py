"""Synthetic study areas for demos and tests."""

from __future__ import annotations

import numpy as np

from .core import SpatialUnit, StudyArea


def ensure_room(s_in: np.ndarray, s_out: np.ndarray) -> None:
    """Raise capacities in place until every origin can place all commuters elsewhere."""
    n = s_out.size
    total = int(s_out.sum())
    for lam in range(n):
        short = total - (int(s_in.sum()) - int(s_in[lam]))
        if s_out[lam] > 0 and short > 0:
            s_in[(lam + 1) % s_in.size] += short


def synthetic_area(n: int = 400, m: int = 100, *, extent_m: float = 60_000.0,
                   commuters: int = 20_000, slack: float = 1.25, seed: int = 0,
                   clustered: bool = True) -> StudyArea:
    """Random geography with heterogeneous unit sizes and margins.

    Residence units fill a square of side ``extent_m``; outside units sit on
    a ring around it. With ``clustered`` the residence units concentrate
    around a few centres, which spreads inter-unit distances over several
    scales. Total in-commuter capacity is ``slack`` times the total
    out-commuters, so margins are always feasible. Populations are drawn
    independently of the margins.
    """
    rng = np.random.default_rng(seed)
    if clustered:
        centres = rng.uniform(0.15, 0.85, size=(5, 2)) * extent_m
        which = rng.integers(0, len(centres), size=n)
        spread = rng.uniform(0.03, 0.12, size=len(centres))[which] * extent_m
        xy = centres[which] + rng.normal(size=(n, 2)) * spread[:, None]
        xy = np.clip(xy, 0, extent_m)
    else:
        xy = rng.uniform(0, extent_m, size=(n, 2))
    angle = rng.uniform(0, 2 * np.pi, size=m)
    radius = extent_m * rng.uniform(0.75, 1.1, size=m)
    ring = extent_m / 2 + np.column_stack([np.cos(angle), np.sin(angle)]) * radius[:, None]

    weight_out = rng.lognormal(0.0, 1.0, size=n)
    s_out = rng.multinomial(commuters, weight_out / weight_out.sum())
    weight_in = rng.lognormal(0.0, 1.2, size=n + m)
    capacity = int(np.ceil(slack * commuters))
    s_in = rng.multinomial(capacity, weight_in / weight_in.sum())
    ensure_room(s_in, s_out)
    areas = rng.lognormal(np.log(extent_m**2 / n / 1e6), 0.5, size=n)
    population = np.rint(rng.lognormal(7.0, 1.0, size=n + m))

    res = [SpatialUnit(f"r{k}", float(xy[k, 0]), float(xy[k, 1]), float(areas[k]),
                       int(s_in[k]), int(s_out[k]), float(population[k])) for k in range(n)]
    out = [SpatialUnit(f"o{k}", float(ring[k, 0]), float(ring[k, 1]), None,
                       int(s_in[n + k]), None, float(population[n + k])) for k in range(m)]
    return StudyArea(res, out, "projected")
