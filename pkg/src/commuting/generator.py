"""Commuter-by-commuter generation of the commuting network.

Each step picks a residence unit uniformly among those that still have
out-commuters, draws a workplace with probability proportional to
``s_in[i] * exp(-beta * D[origin, i])`` on the *current* in-commuter
counts, records the trip and decrements both margins.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .core import (
    FlowMatrix,
    InputError,
    NoCapacityError,
    StudyArea,
    validate_margins,
)

log = logging.getLogger(__name__)

# uniforms drawn per chunk; bounds memory for very large commuter totals
CHUNK = 1 << 16


@dataclass(frozen=True)
class GenerationConfig:
    beta: float
    seed: int = 0
    exclude_self: bool = True
    replicas: int = 1

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise InputError(f"beta must be finite and >= 0, got {self.beta}")
        if int(self.replicas) < 1:
            raise InputError(f"replicas must be >= 1, got {self.replicas}")


class KernelUnderflowWarning(RuntimeWarning):
    """Every kernel weight of an origin underflowed; nearest capacity was used."""


def replica_seed(seed: int, replica: int) -> np.random.SeedSequence:
    """Stream for replica ``replica`` of a run seeded with ``seed``."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replica),))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def kernel_matrix(distances: np.ndarray, beta: float, exclude_self: bool = True) -> np.ndarray:
    """``exp(-beta * D)`` with the origin's own column zeroed when requested."""
    k = np.exp(-beta * np.asarray(distances, dtype=float))
    if exclude_self:
        n = k.shape[0]
        k[np.arange(n), np.arange(n)] = 0.0
    return k


def destination_probabilities(
    origin: int,
    s_in_current,
    distances,
    beta: float,
    exclude_self: bool = True,
) -> np.ndarray:
    """Workplace probabilities for one commuter living in ``origin``.

    ``distances`` is either the full ``n x N_TOT`` matrix or the origin's row.
    """
    if beta < 0:
        raise InputError("beta must be >= 0")
    s = np.asarray(s_in_current, dtype=float)
    d = np.asarray(distances, dtype=float)
    if d.ndim == 2:
        d = d[origin]
    w = s * np.exp(-beta * d)
    if exclude_self:
        w[origin] = 0.0
    total = w.sum()
    if not total > 0:
        raise NoCapacityError(f"no destination capacity left for origin {origin}")
    return w / total


@numba.njit(cache=True, nogil=True)
def _allocate(kern, dist, s_in, s_out, active, n_active, u, flows, exclude_self, fallbacks):
    """Run ``len(u)`` allocation steps in place.

    ``active[:n_active[0]]`` lists origins with commuters left. Returns the
    number of steps done, or ``-(origin + 1)`` when an origin is stuck.
    """
    n_tot = kern.shape[1]
    for step in range(u.shape[0]):
        na = n_active[0]
        if na == 0:
            return step
        a = int(u[step, 0] * na)
        if a >= na:
            a = na - 1
        lam = active[a]
        row = kern[lam]
        total = 0.0
        for i in range(n_tot):
            total += s_in[i] * row[i]
        dest = -1
        if total > 0.0:
            target = u[step, 1] * total
            acc = 0.0
            for i in range(n_tot):
                w = s_in[i] * row[i]
                if w > 0.0:
                    acc += w
                    dest = i
                    if acc > target:
                        break
        else:
            best = np.inf
            for i in range(n_tot):
                if s_in[i] > 0 and not (exclude_self and i == lam):
                    if dist[lam, i] < best:
                        best = dist[lam, i]
                        dest = i
            if dest < 0:
                return -(lam + 1)
            fallbacks[0] += 1
        flows[lam, dest] += 1
        s_in[dest] -= 1
        s_out[lam] -= 1
        if s_out[lam] == 0:
            active[a] = active[na - 1]
            n_active[0] = na - 1
    return u.shape[0]


def _generate(area: StudyArea, kern: np.ndarray, rng: np.random.Generator,
              exclude_self: bool) -> np.ndarray:
    s_in = area.s_in.copy()
    s_out = area.s_out.copy()
    dist = np.ascontiguousarray(area.distances)
    flows = np.zeros((area.n, area.n_tot), dtype=np.int64)
    active = np.flatnonzero(s_out > 0).astype(np.int64)
    n_active = np.array([active.size], dtype=np.int64)
    fallbacks = np.zeros(1, dtype=np.int64)
    remaining = int(s_out.sum())
    while remaining > 0:
        u = rng.random((min(CHUNK, remaining), 2))
        done = _allocate(kern, dist, s_in, s_out, active, n_active, u, flows,
                         exclude_self, fallbacks)
        if done < 0:
            lam = -done - 1
            raise NoCapacityError(
                f"origin {area.residence_ids[lam]!r} has {s_out[lam]} commuter(s) left "
                "but no admissible destination capacity"
            )
        remaining -= done
    if fallbacks[0]:
        warnings.warn(
            f"{fallbacks[0]} allocation(s) fell back to the nearest unit with capacity "
            "because every kernel weight underflowed",
            KernelUnderflowWarning,
            stacklevel=3,
        )
    return flows


def _check(area: StudyArea, config: GenerationConfig, force: bool):
    report = validate_margins(area, config.exclude_self)
    if not force:
        report.raise_if_failed()
    elif not report.passed:
        log.warning("generating despite failed margin check: %s", report)


def _as_matrix(area: StudyArea, flows) -> FlowMatrix:
    return FlowMatrix(flows, area.residence_ids, area.ids, "generated")


def generate_network(area: StudyArea, config: GenerationConfig, *, force: bool = False,
                     kernel: np.ndarray | None = None) -> FlowMatrix:
    """One stochastic realisation of the ``n x N_TOT`` flow matrix.

    The stream is seeded from ``config.seed`` alone, so identical inputs
    give identical flows. ``kernel`` may pass a precomputed
    :func:`kernel_matrix` to skip recomputing it.
    """
    _check(area, config, force)
    if kernel is None:
        kernel = kernel_matrix(area.distances, config.beta, config.exclude_self)
    flows = _generate(area, kernel, make_rng(config.seed), config.exclude_self)
    return _as_matrix(area, flows)


def replica_flows(area: StudyArea, beta: float, seed: int, replicas: int,
                  exclude_self: bool = True, n_jobs: int = 1) -> list[np.ndarray]:
    """Raw integer flow arrays of ``replicas`` runs; replica ``r`` uses ``replica_seed(seed, r)``."""
    kern = kernel_matrix(area.distances, beta, exclude_self)

    def one(r):
        return _generate(area, kern, make_rng(replica_seed(seed, r)), exclude_self)

    if n_jobs == 1 or replicas == 1:
        return [one(r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(one, range(replicas)))


def run_replicas(area: StudyArea, config: GenerationConfig, *, force: bool = False,
                 n_jobs: int = 1) -> tuple[list[FlowMatrix], FlowMatrix]:
    """All replicas plus their entrywise mean (a real-valued FlowMatrix)."""
    _check(area, config, force)
    arrays = replica_flows(area, config.beta, config.seed, int(config.replicas),
                           config.exclude_self, n_jobs)
    mats = [_as_matrix(area, a) for a in arrays]
    mean = np.mean(np.stack(arrays), axis=0)
    return mats, _as_matrix(area, mean)
