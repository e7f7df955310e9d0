"""Commuting-distance distributions and KS calibration of the decay parameter."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .core import FlowMatrix, InputError, StudyArea, validate_margins
from .generator import replica_flows
from .validation import build_comparison_table, cpc

log = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH_M = 2000.0
GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class DistanceHistogram:
    bin_edges: np.ndarray
    mass: np.ndarray
    n_trips: float

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass)


def _flow_array(flows) -> np.ndarray:
    return np.asarray(flows.flows if isinstance(flows, FlowMatrix) else flows, dtype=float)


def distance_distribution(flows, distances, bin_width: float = DEFAULT_BIN_WIDTH_M) -> DistanceHistogram:
    """Share of commuters per right-open distance bin ``[k*w, (k+1)*w)``."""
    if not bin_width > 0:
        raise InputError("bin_width must be positive")
    f = _flow_array(flows)
    d = np.asarray(distances, dtype=float)
    if f.shape != d.shape:
        raise InputError(f"flows {f.shape} and distances {d.shape} are not conformable")
    total = f.sum()
    if not total > 0:
        raise InputError("cannot build a distance distribution from zero trips")
    idx = np.floor(d / bin_width).astype(np.int64).ravel()
    counts = np.bincount(idx, weights=f.ravel())
    used = np.flatnonzero(counts)
    counts = counts[: used[-1] + 1]
    edges = np.arange(counts.size + 1) * float(bin_width)
    return DistanceHistogram(edges, counts / total, float(total))


def _cdf_at(h: DistanceHistogram, points: np.ndarray) -> np.ndarray:
    # mass of the bins whose right edge is <= point
    cum = np.concatenate([[0.0], h.cdf])
    pos = np.searchsorted(h.bin_edges, points, side="right") - 1
    return cum[np.clip(pos, 0, cum.size - 1)]


def ks_distance(obs: DistanceHistogram, sim: DistanceHistogram,
                mode: Literal["cdf", "pmf"] = "cdf") -> float:
    """Largest gap between two distance distributions.

    ``mode="cdf"`` compares cumulative shares on the union of bin edges;
    ``mode="pmf"`` compares per-bin shares and needs bins sharing one grid.
    """
    if mode == "cdf":
        grid = np.union1d(obs.bin_edges, sim.bin_edges)
        return float(np.max(np.abs(_cdf_at(obs, grid) - _cdf_at(sim, grid))))
    if mode != "pmf":
        raise InputError(f"unknown KS mode {mode!r}")
    k = max(obs.mass.size, sim.mass.size)
    short, long_ = sorted((obs.bin_edges, sim.bin_edges), key=len)
    if not np.allclose(long_[: short.size], short):
        raise InputError("pmf comparison needs histograms on a common bin grid")
    a = np.zeros(k)
    b = np.zeros(k)
    a[: obs.mass.size] = obs.mass
    b[: sim.mass.size] = sim.mass
    return float(np.max(np.abs(a - b)))


@dataclass(frozen=True)
class TracePoint:
    beta: float
    ks: float
    cpc: float | None = None


@dataclass(frozen=True)
class CalibrationResult:
    beta_star: float
    ks_at_star: float
    trace: list[TracePoint] = field(default_factory=list)
    replicas: int = 1
    strategy: str = "golden"


class BetaObjective:
    """Mean KS (and mean CPC) over replicas as a function of beta.

    Replica seeds do not depend on beta, so every candidate sees the same
    random streams and the objective is smooth enough for a line search.
    Results are memoised per beta.
    """

    def __init__(self, area: StudyArea, observed, *, replicas: int = 100, seed: int = 0,
                 bin_width: float = DEFAULT_BIN_WIDTH_M, ks_mode: str = "cdf",
                 exclude_self: bool = True, with_cpc: bool = True, n_jobs: int = 1):
        self.area = area
        self.replicas = int(replicas)
        self.seed = seed
        self.bin_width = bin_width
        self.ks_mode = ks_mode
        self.exclude_self = exclude_self
        self.with_cpc = with_cpc
        self.n_jobs = n_jobs
        self.observed = _flow_array(observed)
        if self.observed.shape != area.distances.shape:
            raise InputError("observed flows must be n x N_TOT")
        self.obs_hist = distance_distribution(self.observed, area.distances, bin_width)
        self.obs_table = None
        if with_cpc:
            self.obs_table = build_comparison_table(
                self.observed.astype(np.int64), area.s_in, area.s_out)
        self.cache: dict[float, TracePoint] = {}

    def evaluate(self, beta: float) -> TracePoint:
        beta = float(beta)
        if beta in self.cache:
            return self.cache[beta]
        arrays = replica_flows(self.area, beta, self.seed, self.replicas,
                               self.exclude_self, self.n_jobs)
        ks = [ks_distance(self.obs_hist,
                          distance_distribution(a, self.area.distances, self.bin_width),
                          self.ks_mode) for a in arrays]
        c = None
        if self.with_cpc:
            c = float(np.mean([
                cpc(self.obs_table, build_comparison_table(a, self.area.s_in, self.area.s_out))
                for a in arrays]))
        point = TracePoint(beta, float(np.mean(ks)), c)
        self.cache[beta] = point
        log.debug("beta=%.6g ks=%.6f cpc=%s", beta, point.ks, c)
        return point

    __call__ = evaluate

    @property
    def trace(self) -> list[TracePoint]:
        return [self.cache[b] for b in sorted(self.cache)]


def scan_betas(objective: BetaObjective, betas) -> list[TracePoint]:
    return [objective(b) for b in betas]


def is_unimodal(trace: list[TracePoint], tol: float = 0.0) -> bool:
    """True when KS falls (weakly) up to its minimum and rises after it."""
    ks = np.array([p.ks for p in sorted(trace, key=lambda p: p.beta)])
    if ks.size < 3:
        return True
    k = int(np.argmin(ks))
    left = np.diff(ks[: k + 1])
    right = np.diff(ks[k:])
    return bool(np.all(left <= tol) and np.all(right >= -tol))


def _golden_log(f, lo: float, hi: float, rel_tol: float):
    a, b = math.log(lo), math.log(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(math.exp(c)).ks, f(math.exp(d)).ks
    while b - a > math.log1p(rel_tol):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(math.exp(c)).ks
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(math.exp(d)).ks


def _grid(lo: float, hi: float, points: int) -> np.ndarray:
    if lo > 0:
        return np.geomspace(lo, hi, points)
    return np.linspace(lo, hi, points)


def calibrate_beta(
    area: StudyArea,
    observed,
    *,
    beta_min: float = 1e-6,
    beta_max: float = 1e-2,
    strategy: Literal["golden", "grid"] = "golden",
    tolerance: float = 1e-2,
    replicas: int = 100,
    seed: int = 0,
    bin_width: float = DEFAULT_BIN_WIDTH_M,
    ks_mode: Literal["cdf", "pmf"] = "cdf",
    exclude_self: bool = True,
    grid_points: int = 31,
    unimodal_tol: float = 1e-3,
    with_cpc: bool = True,
    n_jobs: int = 1,
) -> CalibrationResult:
    """Find the beta minimising the replica-averaged KS distance.

    ``strategy="golden"`` runs a golden-section search on log beta down to a
    relative bracket of ``tolerance``. If the evaluated points are not
    unimodal a :class:`RuntimeWarning` is issued and a grid scan takes over;
    the grid scan evaluates ``grid_points`` log-spaced values and then
    refines between the neighbours of the best one.
    """
    if not (0 <= beta_min <= beta_max) or not math.isfinite(beta_max):
        raise InputError(f"need 0 <= beta_min <= beta_max, got {beta_min}, {beta_max}")
    validate_margins(area, exclude_self).raise_if_failed()
    f = BetaObjective(area, observed, replicas=replicas, seed=seed, bin_width=bin_width,
                      ks_mode=ks_mode, exclude_self=exclude_self, with_cpc=with_cpc,
                      n_jobs=n_jobs)
    if beta_min == beta_max:
        f(beta_min)
        strategy = "degenerate"
    elif strategy == "golden":
        if beta_min <= 0:
            raise InputError("golden-section search runs on log beta; beta_min must be > 0")
        _golden_log(f, beta_min, beta_max, tolerance)
        if not is_unimodal(f.trace, unimodal_tol):
            warnings.warn("KS trace is not unimodal; falling back to a grid scan",
                          RuntimeWarning, stacklevel=2)
            strategy = "grid"
    elif strategy != "grid":
        raise InputError(f"unknown search strategy {strategy!r}")
    if strategy == "grid":
        betas = _grid(beta_min, beta_max, grid_points)
        scan_betas(f, betas)
        k = int(np.argmin([f(b).ks for b in betas]))
        lo, hi = betas[max(k - 1, 0)], betas[min(k + 1, betas.size - 1)]
        if lo > 0 and hi > lo:
            _golden_log(f, lo, hi, tolerance)
    trace = f.trace
    best = min(trace, key=lambda p: p.ks)
    return CalibrationResult(best.beta, best.ks, trace, int(replicas), strategy)
