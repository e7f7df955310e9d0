"""Domain types, distance matrices and margin feasibility checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

EARTH_RADIUS_M = 6_371_000.0

CoordinateMode = Literal["projected", "geodetic"]
OUT_LABEL = "Out"


class CommutingError(Exception):
    """Base class for errors raised by this package."""


class InputError(CommutingError, ValueError):
    """Malformed or inconsistent input data."""


class InfeasibleMarginsError(CommutingError):
    """Out-commuters cannot all be placed with the available in-commuter capacity."""


class NoCapacityError(CommutingError):
    """An origin has commuters left but no admissible destination capacity."""


class DataInconsistencyError(CommutingError):
    """Flows contradict the margins they are supposed to respect."""


@dataclass(frozen=True)
class SpatialUnit:
    """One geographic unit.

    ``x``/``y`` are meters in projected mode; in geodetic mode ``x`` is the
    longitude and ``y`` the latitude, in degrees. Outside units may leave
    ``area`` and ``s_out`` as ``None``.
    """

    id: str
    x: float
    y: float
    area: float | None = None
    s_in: int = 0
    s_out: int | None = None
    population: float | None = None


def _coords(units: Sequence[SpatialUnit], mode: CoordinateMode) -> np.ndarray:
    xy = np.array([[u.x, u.y] for u in units], dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(xy)):
        bad = [u.id for u in units if not (math.isfinite(u.x) and math.isfinite(u.y))]
        raise InputError(f"non-finite coordinates for units {bad}")
    if mode == "geodetic":
        lat = xy[:, 1]
        if np.any(np.abs(lat) > 90):
            bad = [u.id for u in units if abs(u.y) > 90]
            raise InputError(f"latitude outside [-90, 90] for units {bad}")
    elif mode != "projected":
        raise InputError(f"unknown coordinate mode {mode!r}")
    return xy


def build_distance_matrix(
    units_res: Sequence[SpatialUnit],
    units_ext: Sequence[SpatialUnit],
    mode: CoordinateMode = "projected",
) -> np.ndarray:
    """Distances in meters between every row unit and every column unit.

    Projected mode is planar Euclidean. Geodetic mode is the haversine
    great-circle distance on a sphere of radius 6,371 km.
    """
    a = _coords(units_res, mode)
    b = _coords(units_ext, mode)
    if mode == "projected":
        dx = a[:, 0, None] - b[None, :, 0]
        dy = a[:, 1, None] - b[None, :, 1]
        return np.hypot(dx, dy)
    lon1, lat1 = np.radians(a[:, 0])[:, None], np.radians(a[:, 1])[:, None]
    lon2, lat2 = np.radians(b[:, 0])[None, :], np.radians(b[:, 1])[None, :]
    h = (
        np.sin((lat2 - lat1) / 2) ** 2
        + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    )
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StudyArea:
    """Residence units (the case study) plus the outside units of the job-search basin.

    Column ``k`` of every ``N_TOT``-long vector refers to ``units[k]``:
    residence units first, outside units after them.
    """

    residence_units: tuple[SpatialUnit, ...]
    outside_units: tuple[SpatialUnit, ...] = ()
    coordinate_mode: CoordinateMode = "projected"
    distances: np.ndarray = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        res = tuple(self.residence_units)
        out = tuple(self.outside_units)
        object.__setattr__(self, "residence_units", res)
        object.__setattr__(self, "outside_units", out)
        if not res:
            raise InputError("a study area needs at least one residence unit")
        seen: set[str] = set()
        for u in res + out:
            if u.id in seen:
                raise InputError(f"duplicate unit id {u.id!r}")
            seen.add(u.id)
        for u in res:
            if u.area is None or not u.area > 0:
                raise InputError(f"residence unit {u.id!r} needs a positive area")
            if u.s_out is None:
                raise InputError(f"residence unit {u.id!r} has no s_out")
        if self.distances is None:
            d = build_distance_matrix(res, res + out, self.coordinate_mode)
        else:
            d = np.array(self.distances, dtype=float)
            if d.shape != (len(res), len(res) + len(out)):
                raise InputError(
                    f"distance matrix shape {d.shape} does not match "
                    f"{len(res)} x {len(res) + len(out)}"
                )
            if np.any(d < 0) or not np.all(np.isfinite(d)):
                raise InputError("distances must be finite and non-negative")
        object.__setattr__(self, "distances", _readonly(d))

    @property
    def n(self) -> int:
        return len(self.residence_units)

    @property
    def m(self) -> int:
        return len(self.outside_units)

    @property
    def n_tot(self) -> int:
        return self.n + self.m

    @property
    def units(self) -> tuple[SpatialUnit, ...]:
        return self.residence_units + self.outside_units

    @property
    def ids(self) -> list[str]:
        return [u.id for u in self.units]

    @property
    def residence_ids(self) -> list[str]:
        return [u.id for u in self.residence_units]

    @property
    def s_in(self) -> np.ndarray:
        return np.array([u.s_in for u in self.units], dtype=np.int64)

    @property
    def s_out(self) -> np.ndarray:
        return np.array([u.s_out for u in self.residence_units], dtype=np.int64)

    @property
    def areas(self) -> np.ndarray:
        return np.array([u.area for u in self.residence_units], dtype=float)

    def with_margins(self, s_in: Sequence[int], s_out: Sequence[int]) -> "StudyArea":
        """Copy of the area with replaced margins; distances are reused."""
        s_in = list(s_in)
        s_out = list(s_out)
        if len(s_in) != self.n_tot or len(s_out) != self.n:
            raise InputError("margin vectors do not match the study area")
        units = [
            SpatialUnit(u.id, u.x, u.y, u.area, int(s_in[k]),
                        int(s_out[k]) if k < self.n else u.s_out, u.population)
            for k, u in enumerate(self.units)
        ]
        return StudyArea(units[: self.n], units[self.n:], self.coordinate_mode,
                         np.array(self.distances))


@dataclass(frozen=True)
class FlowMatrix:
    """Integer (or mean, real-valued) origin-destination flows with unit labels.

    ``kind`` is ``"generated"`` for ``n x N_TOT`` matrices and
    ``"comparison"`` for the square ``(n+1) x (n+1)`` tables whose last
    row and column aggregate the outside.
    """

    flows: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    kind: Literal["generated", "comparison"] = "generated"

    def __post_init__(self):
        f = np.array(self.flows)
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))
        if f.ndim != 2 or f.shape != (len(self.row_labels), len(self.col_labels)):
            raise InputError(
                f"flow shape {f.shape} does not match labels "
                f"({len(self.row_labels)}, {len(self.col_labels)})"
            )
        if np.any(f < 0):
            raise InputError("flows must be non-negative")
        if self.kind == "comparison" and f.shape[0] != f.shape[1]:
            raise InputError("comparison tables must be square")
        object.__setattr__(self, "flows", _readonly(f))

    @property
    def total(self):
        return self.flows.sum()

    def __eq__(self, other):
        if not isinstance(other, FlowMatrix):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.row_labels == other.row_labels
            and self.col_labels == other.col_labels
            and self.flows.dtype == other.flows.dtype
            and np.array_equal(self.flows, other.flows)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class FeasibilityReport:
    total_out: int
    total_in: int
    passed: bool
    negative_units: tuple[str, ...] = ()
    # origins whose s_out cannot be guaranteed a destination other than themselves
    self_blocked_units: tuple[str, ...] = ()

    def raise_if_failed(self):
        if self.passed:
            return
        parts = []
        if self.negative_units:
            parts.append(f"negative margins for {list(self.negative_units)}")
        if self.total_out > self.total_in:
            parts.append(f"total s_out {self.total_out} exceeds total s_in {self.total_in}")
        if self.self_blocked_units:
            shown = list(self.self_blocked_units[:5])
            parts.append(
                f"total s_out exceeds the capacity outside {len(self.self_blocked_units)} "
                f"origin(s), e.g. {shown}"
            )
        raise InfeasibleMarginsError("; ".join(parts))


def validate_margins(area: StudyArea, exclude_self: bool = True) -> FeasibilityReport:
    """Check that generation can place every out-commuter.

    With ``exclude_self`` the total out-commuters must also fit into the
    capacity of the units other than each origin, which is the condition
    that guarantees the allocation loop never stalls.
    """
    s_in = area.s_in
    s_out = area.s_out
    negative = tuple(
        [u.id for u in area.units if u.s_in < 0]
        + [u.id for u in area.residence_units if u.s_out < 0]
    )
    total_out = int(s_out.sum())
    total_in = int(s_in.sum())
    blocked: tuple[str, ...] = ()
    if exclude_self:
        room = total_in - s_in[: area.n]
        mask = (s_out > 0) & (total_out > room)
        blocked = tuple(area.residence_ids[k] for k in np.flatnonzero(mask))
    passed = not negative and total_out <= total_in and not blocked
    return FeasibilityReport(total_out, total_in, passed, negative, blocked)


def mean_unit_area(area: StudyArea) -> float:
    """Average surface (km²) of the residence units; outside units are excluded."""
    return float(np.mean(area.areas))
