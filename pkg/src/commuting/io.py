"""CSV readers and writers for units, OD flows and case summaries."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .core import (
    FlowMatrix,
    InputError,
    SpatialUnit,
    StudyArea,
    validate_margins,
)
from .universal_law import CaseStudySummary

log = logging.getLogger(__name__)

UNITS_HEADER = ("id", "x", "y", "area_km2", "s_in", "s_out", "zone")
OD_HEADER = ("origin_id", "dest_id", "flow")
CASES_HEADER = ("case_id", "mean_area_km2", "beta", "cpc")


class FileFormatError(InputError):
    """A CSV file does not follow its schema."""


@contextmanager
def atomic_open(path, mode="w"):
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _reader(path, required):
    fh = open(path, newline="")
    reader = csv.DictReader(fh)
    missing = [c for c in required if c not in (reader.fieldnames or [])]
    if missing:
        fh.close()
        raise FileFormatError(f"{path}:1: missing column(s) {missing}")
    return fh, reader


def _num(raw, path, line, column, kind=float, optional=False):
    raw = (raw or "").strip()
    if raw == "":
        if optional:
            return None
        raise FileFormatError(f"{path}:{line}: empty {column}")
    try:
        value = kind(raw)
    except ValueError:
        if kind is int:
            try:
                f = float(raw)
            except ValueError:
                f = math.nan
            if f.is_integer():
                return int(f)
        raise FileFormatError(f"{path}:{line}: bad {column} {raw!r}") from None
    if kind is float and not math.isfinite(value):
        raise FileFormatError(f"{path}:{line}: non-finite {column} {raw!r}")
    return value


def read_units(path) -> tuple[list[SpatialUnit], list[SpatialUnit]]:
    """Residence and outside units of a units CSV, in file order.

    An optional ``population`` column is read for the radiation model.
    """
    res, out = [], []
    seen: dict[str, int] = {}
    fh, reader = _reader(path, UNITS_HEADER)
    with fh:
        for line, row in enumerate(reader, start=2):
            uid = (row["id"] or "").strip()
            if not uid:
                raise FileFormatError(f"{path}:{line}: empty id")
            if uid in seen:
                raise FileFormatError(
                    f"{path}:{line}: duplicate id {uid!r} (first on line {seen[uid]})")
            seen[uid] = line
            zone = (row["zone"] or "").strip()
            if zone not in ("region", "outside"):
                raise FileFormatError(f"{path}:{line}: zone must be region or outside, got {zone!r}")
            outside = zone == "outside"
            unit = SpatialUnit(
                uid,
                _num(row["x"], path, line, "x"),
                _num(row["y"], path, line, "y"),
                _num(row["area_km2"], path, line, "area_km2", optional=outside),
                _num(row["s_in"], path, line, "s_in", int),
                _num(row["s_out"], path, line, "s_out", int, optional=outside),
                _num(row.get("population"), path, line, "population", optional=True),
            )
            if unit.s_in < 0 or (unit.s_out is not None and unit.s_out < 0):
                raise FileFormatError(f"{path}:{line}: negative commuter count")
            if not outside and not unit.area > 0:
                raise FileFormatError(f"{path}:{line}: area_km2 must be positive")
            (out if outside else res).append(unit)
    if not res:
        raise FileFormatError(f"{path}: no region units")
    return res, out


def write_units(path, area: StudyArea, with_population: bool = False):
    header = list(UNITS_HEADER) + (["population"] if with_population else [])
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, u in enumerate(area.units):
            zone = "region" if k < area.n else "outside"
            row = [u.id, repr(u.x), repr(u.y), "" if u.area is None else repr(u.area),
                   u.s_in, "" if u.s_out is None else u.s_out, zone]
            if with_population:
                row.append("" if u.population is None else repr(u.population))
            w.writerow(row)


def read_od(path) -> dict[tuple[str, str], float]:
    """Sparse OD flows keyed by ``(origin_id, dest_id)``."""
    flows: dict[tuple[str, str], float] = {}
    fh, reader = _reader(path, OD_HEADER)
    with fh:
        for line, row in enumerate(reader, start=2):
            key = ((row["origin_id"] or "").strip(), (row["dest_id"] or "").strip())
            if not all(key):
                raise FileFormatError(f"{path}:{line}: empty origin or destination")
            if key in flows:
                raise FileFormatError(f"{path}:{line}: duplicate pair {key}")
            raw = (row["flow"] or "").strip()
            try:
                value = int(raw)
            except ValueError:
                value = _num(raw, path, line, "flow")
            if value < 0:
                raise FileFormatError(f"{path}:{line}: negative flow")
            flows[key] = value
    return flows


def od_to_matrix(pairs, row_labels, col_labels, kind="generated",
                 ignore_unknown=True) -> FlowMatrix:
    rows = {u: k for k, u in enumerate(row_labels)}
    cols = {u: k for k, u in enumerate(col_labels)}
    integral = all(isinstance(v, int) for v in pairs.values())
    a = np.zeros((len(rows), len(cols)), dtype=np.int64 if integral else float)
    for (o, d), v in pairs.items():
        if o in rows and d in cols:
            a[rows[o], cols[d]] = v
        elif not ignore_unknown:
            raise InputError(f"OD pair ({o}, {d}) outside the matrix labels")
    return FlowMatrix(a, row_labels, col_labels, kind)


def write_flow_matrix(path, flows: FlowMatrix):
    """Long-format CSV with one line per non-zero cell, rows then columns in label order."""
    a = flows.flows
    integral = np.issubdtype(a.dtype, np.integer)
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OD_HEADER)
        for r, c in zip(*np.nonzero(a)):
            v = a[r, c]
            w.writerow([flows.row_labels[r], flows.col_labels[c],
                        int(v) if integral else repr(float(v))])


def read_flow_matrix(path, row_labels, col_labels, kind="generated") -> FlowMatrix:
    return od_to_matrix(read_od(path), row_labels, col_labels, kind, ignore_unknown=False)


def observed_flows(pairs, area: StudyArea, exclude_self: bool = True) -> FlowMatrix:
    """The ``n x N_TOT`` observed matrix (region residents only) from OD pairs."""
    pairs = dict(pairs)
    if exclude_self:
        dropped = [k for k in pairs if k[0] == k[1]]
        for k in dropped:
            del pairs[k]
        if dropped:
            log.info("dropped %d intra-unit OD entries", len(dropped))
    return od_to_matrix(pairs, area.residence_ids, area.ids)


def margins_from_od(pairs, area: StudyArea) -> tuple[np.ndarray, np.ndarray]:
    """``(s_in, s_out)`` as off-diagonal column and row sums of the OD pairs.

    In-commuters count every listed origin, including outside units, so
    inflows from outside residents are part of a region unit's capacity.
    """
    idx = {u: k for k, u in enumerate(area.ids)}
    s_in = np.zeros(area.n_tot, dtype=np.int64)
    s_out = np.zeros(area.n, dtype=np.int64)
    for (o, d), v in pairs.items():
        if o == d:
            continue
        if d in idx:
            s_in[idx[d]] += int(v)
        if o in idx and idx[o] < area.n:
            s_out[idx[o]] += int(v)
    return s_in, s_out


def load_study_area(units_path, mode="projected", *, od_path=None, exclude_self=True,
                    force=False) -> StudyArea:
    """Build a StudyArea from a units CSV.

    With ``od_path`` the margins are taken from the OD file instead of the
    units file. Infeasible margins raise unless ``force`` is set.
    """
    res, out = read_units(units_path)
    area = StudyArea(res, out, mode)
    if od_path is not None:
        s_in, s_out = margins_from_od(read_od(od_path), area)
        area = area.with_margins(s_in, s_out)
    report = validate_margins(area, exclude_self)
    if not report.passed:
        if force:
            log.warning("infeasible margins ignored (--force): %s", report)
        else:
            report.raise_if_failed()
    return area


def read_cases(path) -> list[CaseStudySummary]:
    cases = []
    fh, reader = _reader(path, CASES_HEADER[:3])
    with fh:
        for line, row in enumerate(reader, start=2):
            cpc = _num(row.get("cpc"), path, line, "cpc", optional=True)
            try:
                cases.append(CaseStudySummary(
                    (row["case_id"] or "").strip(),
                    _num(row["mean_area_km2"], path, line, "mean_area_km2"),
                    _num(row["beta"], path, line, "beta"),
                    float("nan") if cpc is None else cpc,
                ))
            except InputError as exc:
                if isinstance(exc, FileFormatError):
                    raise
                raise FileFormatError(f"{path}:{line}: {exc}") from None
    return cases


def write_cases(path, cases):
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CASES_HEADER)
        for c in cases:
            w.writerow([c.case_id, repr(c.mean_area), repr(c.beta_calibrated),
                        "" if math.isnan(c.cpc_calibrated) else repr(c.cpc_calibrated)])


def write_table(path, header, rows):
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def write_json(path, obj):
    with atomic_open(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
