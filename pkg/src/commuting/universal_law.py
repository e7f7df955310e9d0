"""Power law between the decay parameter and the mean unit area, and its cross-validation."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .core import FlowMatrix, InputError, StudyArea
from .generator import replica_flows
from .validation import build_comparison_table, cpc

log = logging.getLogger(__name__)

# published fit over the 80 case studies (beta in 1/m, mean area in km²)
PAPER_ALPHA = 0.000315
PAPER_NU = 0.177


@dataclass(frozen=True)
class CaseStudySummary:
    case_id: str
    mean_area: float
    beta_calibrated: float
    cpc_calibrated: float = float("nan")

    def __post_init__(self):
        if not self.mean_area > 0 or not self.beta_calibrated > 0:
            raise InputError(f"case {self.case_id!r}: mean_area and beta must be positive")


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    nu: float
    adj_r2: float
    n_points: int

    def predict(self, mean_area):
        return predict_beta(mean_area, self)


PAPER_FIT = PowerLawFit(PAPER_ALPHA, PAPER_NU, 0.92, 80)


def _ols(x: np.ndarray, y: np.ndarray):
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if not sxx > 0:
        raise InputError("all mean areas are equal; the slope is undetermined")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    return slope, intercept


def fit_power_law(points) -> PowerLawFit:
    """Ordinary least squares of ``ln beta`` on ``ln <S>``.

    ``points`` is an iterable of ``(mean_area, beta)`` pairs or of
    :class:`CaseStudySummary`.
    """
    pts = [(p.mean_area, p.beta_calibrated) if isinstance(p, CaseStudySummary) else p
           for p in points]
    arr = np.asarray(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise InputError("need at least 3 (mean_area, beta) points")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise InputError("mean areas and betas must be positive and finite")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    slope, intercept = _ols(x, y)
    resid = y - (intercept + slope * x)
    sst = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / sst if sst > 0 else 1.0
    n = len(x)
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - 2) if n > 2 else float("nan")
    return PowerLawFit(float(np.exp(intercept)), float(-slope), float(adj), n)


def predict_beta(mean_area, fit: PowerLawFit = PAPER_FIT):
    """``alpha * <S> ** -nu``."""
    s = np.asarray(mean_area, dtype=float)
    if np.any(s <= 0):
        raise InputError("mean area must be positive")
    out = fit.alpha * s ** (-fit.nu)
    return float(out) if out.ndim == 0 else out


def loglog_points(summaries) -> np.ndarray:
    """``(ln <S>, ln beta)`` rows for a log-log scatter."""
    return np.log([[s.mean_area, s.beta_calibrated] for s in summaries])


@dataclass
class CrossValidation:
    case_ids: list[str]
    estimates: dict[str, np.ndarray]
    fits: list[PowerLawFit]
    skipped: int = 0

    def stats(self, case_id: str) -> tuple[int, float, float, float]:
        e = self.estimates[case_id]
        if e.size == 0:
            return 0, float("nan"), float("nan"), float("nan")
        return int(e.size), float(e.mean()), float(e.min()), float(e.max())

    @property
    def mean_count(self) -> float:
        return float(np.mean([self.estimates[c].size for c in self.case_ids]))


def cross_validate(summaries, train_size: int = 53, repeats: int = 10_000,
                   seed: int = 0) -> CrossValidation:
    """Repeated random train/test splits of the case studies.

    Every repeat fits the law on ``train_size`` random cases and predicts
    beta for the remaining ones. Repeat ``r`` draws its split from its own
    seeded stream. Estimate arrays are returned sorted.
    """
    summaries = list(summaries)
    k = len(summaries)
    if not 0 < train_size < k:
        raise InputError(f"train_size must be in (0, {k}), got {train_size}")
    if repeats < 1:
        raise InputError("repeats must be >= 1")
    ids = [s.case_id for s in summaries]
    if len(set(ids)) != k:
        raise InputError("case ids must be unique")
    x = np.log([s.mean_area for s in summaries])
    y = np.log([s.beta_calibrated for s in summaries])
    collected: list[list[float]] = [[] for _ in range(k)]
    fits = []
    skipped = 0
    if train_size < 3:
        warnings.warn(f"train_size={train_size} < 3: every repeat is skipped",
                      RuntimeWarning, stacklevel=2)
        skipped = repeats
    else:
        root = np.random.SeedSequence(int(seed))
        for child in root.spawn(repeats):
            perm = np.random.Generator(np.random.PCG64(child)).permutation(k)
            train, test = perm[:train_size], perm[train_size:]
            try:
                slope, intercept = _ols(x[train], y[train])
            except InputError:
                skipped += 1
                continue
            fits.append(PowerLawFit(float(np.exp(intercept)), float(-slope),
                                    float("nan"), train_size))
            pred = np.exp(intercept + slope * x[test])
            for j, b in zip(test, pred):
                collected[j].append(float(b))
        if skipped:
            warnings.warn(f"{skipped} degenerate repeat(s) skipped", RuntimeWarning,
                          stacklevel=2)
    estimates = {ids[j]: np.sort(np.asarray(collected[j])) for j in range(k)}
    return CrossValidation(ids, estimates, fits, skipped)


@dataclass(frozen=True)
class EstimateCPC:
    beta: float
    mean: float
    min: float
    max: float


def evaluate_estimated_beta(area: StudyArea, observed, beta_estimates, *,
                            replicas: int = 10, seed: int = 0,
                            exclude_self: bool = True) -> tuple[list[EstimateCPC], EstimateCPC]:
    """CPC of networks generated with each estimated beta against the observed one.

    Returns one record per estimate (statistics over replicas) and an
    aggregate whose ``beta`` is the mean estimate, ``mean`` the average of
    the per-estimate means and ``min``/``max`` the extremes over all runs.
    """
    betas = [float(b) for b in beta_estimates]
    if not betas:
        raise InputError("no beta estimates to evaluate")
    obs = np.asarray(observed.flows if isinstance(observed, FlowMatrix) else observed)
    obs_table = build_comparison_table(obs.astype(np.int64), area.s_in, area.s_out)
    rows = []
    for b in betas:
        vals = [cpc(obs_table, build_comparison_table(a, area.s_in, area.s_out))
                for a in replica_flows(area, b, seed, replicas, exclude_self)]
        rows.append(EstimateCPC(b, float(np.mean(vals)), float(np.min(vals)),
                                float(np.max(vals))))
    agg = EstimateCPC(float(np.mean(betas)), float(np.mean([r.mean for r in rows])),
                      min(r.min for r in rows), max(r.max for r in rows))
    return rows, agg
