"""Analytical radiation model used as a baseline, and model-vs-observation comparison."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Mapping

import numpy as np

from .core import FlowMatrix, InputError
from .validation import cpc

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadiationInputs:
    populations: np.ndarray
    total_population: float
    n_commuters: float
    distances: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.populations, dtype=float)
        d = np.asarray(self.distances, dtype=float)
        if m.ndim != 1 or d.shape != (m.size, m.size):
            raise InputError("distances must be a square matrix matching populations")
        if np.any(m < 0):
            raise InputError("populations must be non-negative")
        if not self.total_population > 0:
            raise InputError("total population must be positive")
        if self.n_commuters > self.total_population:
            raise InputError("more commuters than inhabitants")
        object.__setattr__(self, "populations", m)
        object.__setattr__(self, "distances", d)


def circle_population(i: int, j: int, inputs: RadiationInputs) -> float:
    """Population within distance ``D[i, j]`` of ``i``, excluding ``i`` and ``j``.

    Units exactly on the circle count as inside.
    """
    if i == j:
        raise InputError("source and destination must differ")
    d = inputs.distances[i]
    inside = d <= d[j]
    inside[[i, j]] = False
    return float(inputs.populations[inside].sum())


def circle_populations(inputs: RadiationInputs) -> np.ndarray:
    """Matrix of :func:`circle_population` for all pairs (diagonal 0)."""
    m = inputs.populations
    d = inputs.distances
    n = m.size
    s = np.zeros((n, n))
    for i in range(n):
        order = np.argsort(d[i], kind="stable")
        cum = np.cumsum(m[order])
        # population of every unit at distance <= d[i, j], ties included
        upto = cum[np.searchsorted(d[i][order], d[i], side="right") - 1]
        s[i] = upto - m - m[i]
        s[i, i] = 0.0
    return np.maximum(s, 0.0)


def radiation_flows(inputs: RadiationInputs,
                    prefactor: Literal["population", "commuters"] = "population",
                    origin_commuters=None) -> np.ndarray:
    """Expected flows ``T_ij = P_i * m_i m_j / ((m_i + s_ij)(m_i + m_j + s_ij))``.

    With ``prefactor="population"`` the origin term is ``P_i = m_i N_c / N``;
    ``prefactor="commuters"`` uses ``origin_commuters[i]`` instead. Pairs
    whose denominator vanishes (empty origin with nothing in between) get 0.
    """
    m = inputs.populations
    if prefactor == "population":
        p = m * inputs.n_commuters / inputs.total_population
    elif prefactor == "commuters":
        if origin_commuters is None:
            raise InputError("prefactor='commuters' needs origin_commuters")
        p = np.asarray(origin_commuters, dtype=float)
        if p.shape != m.shape:
            raise InputError("origin_commuters must have one entry per unit")
    else:
        raise InputError(f"unknown prefactor {prefactor!r}")
    s = circle_populations(inputs)
    mi = m[:, None]
    mj = m[None, :]
    denom = (mi + s) * (mi + mj + s)
    num = p[:, None] * mi * mj
    out = np.zeros_like(denom)
    ok = denom > 0
    out[ok] = num[ok] / denom[ok]
    np.fill_diagonal(out, 0.0)
    zero = (~ok) & ~np.eye(m.size, dtype=bool)
    if zero.any():
        log.info("%d pair(s) with zero denominator set to 0", int(zero.sum()))
    return out


def round_rows(flows) -> np.ndarray:
    """Integer flows by largest-remainder apportionment of each row total."""
    f = np.asarray(flows, dtype=float)
    base = np.floor(f)
    frac = f - base
    out = base.astype(np.int64)
    targets = np.rint(f.sum(axis=1)).astype(np.int64)
    for r in range(f.shape[0]):
        short = int(targets[r] - out[r].sum())
        if short > 0:
            order = np.argsort(-frac[r], kind="stable")[:short]
            out[r, order] += 1
    return out


@dataclass
class ModelReport:
    name: str
    cpc: float
    scatter: np.ndarray  # (observed, modelled) per pair with a positive value
    binned: np.ndarray  # (bin_lo, bin_hi, mean observed, mean modelled, pairs)
    distance_mass: np.ndarray | None = None


@dataclass
class ComparisonReport:
    models: dict[str, ModelReport] = field(default_factory=dict)
    observed_distance_mass: np.ndarray | None = None
    bin_width: float | None = None


def _log_bins(obs: np.ndarray, model: np.ndarray, edges: np.ndarray) -> np.ndarray:
    rows = []
    pos = obs > 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = pos & (obs >= lo) & (obs < hi)
        if sel.any():
            rows.append((lo, hi, obs[sel].mean(), model[sel].mean(), sel.sum()))
    return np.array(rows, dtype=float).reshape(-1, 5)


def compare_models(observed, models: Mapping[str, object], *, log_bins: int = 20,
                   distances=None, bin_width: float = 2000.0) -> ComparisonReport:
    """Flow-by-flow comparison of several models with the observed flows.

    Real-valued model flows are rounded per row (largest remainder) before
    the CPC. Log bins are geometric in the observed flow. When
    ``distances`` is given, distance distributions are included.
    """
    from .calibration import distance_distribution

    obs = np.asarray(observed.flows if isinstance(observed, FlowMatrix) else observed)
    pos = obs[obs > 0]
    hi = max(float(pos.max()) if pos.size else 1.0, 1.0)
    edges = np.geomspace(1.0, hi * (1 + 1e-9), log_bins + 1) if hi > 1 else np.array([1.0, 2.0])
    report = ComparisonReport(bin_width=bin_width if distances is not None else None)
    if distances is not None:
        report.observed_distance_mass = distance_distribution(obs, distances, bin_width).mass
    for name, model in models.items():
        arr = np.asarray(model.flows if isinstance(model, FlowMatrix) else model, dtype=float)
        if arr.shape != obs.shape:
            raise InputError(f"model {name!r} has shape {arr.shape}, expected {obs.shape}")
        ints = arr.astype(np.int64) if np.all(arr == np.round(arr)) else round_rows(arr)
        c = cpc(obs, ints) if (obs.sum() + ints.sum()) > 0 else float("nan")
        keep = (obs > 0) | (arr > 0)
        scatter = np.column_stack([obs[keep], arr[keep]]).astype(float)
        mass = None
        if distances is not None and arr.sum() > 0:
            mass = distance_distribution(arr, distances, bin_width).mass
        report.models[name] = ModelReport(name, c, scatter, _log_bins(obs, arr, edges), mass)
    return report
