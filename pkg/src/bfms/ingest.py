"""Preprocessing of irregular pressure profiles into curves on a common grid.

Raw rows ``platform,time,lat,lon,pressure,value,variable`` are grouped into
profiling cycles, short cycles are dropped, each cycle is interpolated with a
natural cubic spline (never extrapolated), and only cycles fully observed on
the analysis window are kept.

Regridding is done directly on the window sub-grid.  For cycles that survive
the window selection this gives the same values as interpolating on a wider
range and cutting afterwards.
"""

from __future__ import annotations

import csv
import gzip
import io
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import NoInput, SchemaMismatch, TooFewKnots
from .fspace import FunctionSet, GridSpec

__all__ = [
    "HEADER",
    "VARIABLES",
    "RawMeasurement",
    "ProfileCycle",
    "GriddedProfile",
    "IngestSummary",
    "DEFAULT_WINDOW",
    "read_measurements",
    "parse_rows",
    "group_cycles",
    "filter_cycles",
    "spline_regrid",
    "restrict_and_select",
    "run_pipeline",
    "write_provenance",
]

HEADER = ("platform", "time", "lat", "lon", "pressure", "value", "variable")
VARIABLES = ("temperature", "salinity")
DEFAULT_WINDOW = GridSpec(20.0, 300.0, 141)
MIN_KNOTS = 4
LATLON_DECIMALS = 4


@dataclass(frozen=True)
class RawMeasurement:
    platform: str
    time: datetime
    lat: float
    lon: float
    pressure: float
    value: float
    variable: str


@dataclass
class ProfileCycle:
    cycle_id: str
    platform: str
    time: datetime
    lat: float
    lon: float
    variable: str
    pressure: np.ndarray
    value: np.ndarray

    def __len__(self):
        return len(self.pressure)


@dataclass
class GriddedProfile:
    cycle_id: str
    values: np.ndarray
    missing: np.ndarray
    grid: GridSpec
    meta: dict = field(default_factory=dict)


@dataclass
class IngestSummary:
    rows_read: int = 0
    rows_malformed: int = 0
    cycles_grouped: int = 0
    cycles_after_filter: int = 0
    cycles_regridded: int = 0
    cycles_retained: int = 0
    malformed_examples: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _parse_time(s: str) -> datetime:
    s = s.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    t = datetime.fromisoformat(s)
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def _open_text(path: Path):
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), newline="")
    return open(path, newline="")


def parse_rows(rows: Iterable[list], summary: IngestSummary) -> Iterator[RawMeasurement]:
    """Turn CSV records into measurements, counting and skipping malformed ones."""
    for lineno, row in enumerate(rows, start=2):
        summary.rows_read += 1
        try:
            if len(row) != len(HEADER):
                raise ValueError(f"expected {len(HEADER)} fields, got {len(row)}")
            platform, t, lat, lon, p, v, var = row
            var = var.strip().lower()
            if var not in VARIABLES:
                raise ValueError(f"unknown variable {var!r}")
            m = RawMeasurement(platform.strip(), _parse_time(t), float(lat), float(lon),
                               float(p), float(v), var)
            if not (math.isfinite(m.pressure) and m.pressure >= 0):
                raise ValueError("pressure must be finite and nonnegative")
            if not (math.isfinite(m.lat) and math.isfinite(m.lon)):
                raise ValueError("non-finite location")
        except ValueError as exc:
            summary.rows_malformed += 1
            if len(summary.malformed_examples) < 20:
                summary.malformed_examples.append({"line": lineno, "reason": str(exc)})
            continue
        yield m


def read_measurements(path, summary: IngestSummary | None = None) -> list[RawMeasurement]:
    """Read a (possibly gzip-compressed) measurement CSV.

    Raises NoInput for an empty file and SchemaMismatch for a wrong header.
    """
    path = Path(path)
    summary = IngestSummary() if summary is None else summary
    if not path.exists() or path.stat().st_size == 0:
        raise NoInput(f"{path}: empty or missing input")
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise NoInput(f"{path}: no header row")
        if tuple(h.strip().lower() for h in header) != HEADER:
            raise SchemaMismatch(f"{path}: header {header} != {list(HEADER)}")
        return list(parse_rows(reader, summary))


def group_cycles(measurements: Iterable[RawMeasurement]) -> list[ProfileCycle]:
    """Group on (platform, time, rounded lat/lon, variable).

    Within a cycle measurements are sorted by pressure and duplicated
    pressures are averaged.  Non-finite values are not valid points and are
    discarded.  Output is ordered by (platform, time, lat, lon, variable).
    """
    buckets: "OrderedDict[tuple, list]" = OrderedDict()
    for m in measurements:
        if not math.isfinite(m.value):
            continue
        key = (m.platform, m.time, round(m.lat, LATLON_DECIMALS),
               round(m.lon, LATLON_DECIMALS), m.variable)
        buckets.setdefault(key, []).append((m.pressure, m.value))
    cycles = []
    for key in sorted(buckets):
        platform, t, lat, lon, var = key
        pv = np.array(buckets[key], dtype=float)
        p, inv = np.unique(pv[:, 0], return_inverse=True)
        v = np.bincount(inv, weights=pv[:, 1]) / np.bincount(inv)
        cid = f"{platform}_{t.strftime('%Y%m%dT%H%M%SZ')}_{lat:.4f}_{lon:.4f}_{var}"
        cycles.append(ProfileCycle(cid, platform, t, lat, lon, var, p, v))
    return cycles


def filter_cycles(cycles: Iterable[ProfileCycle], min_points: int = 20) -> list[ProfileCycle]:
    return [c for c in cycles if len(c) >= min_points]


def spline_regrid(cycle: ProfileCycle, grid: GridSpec) -> GriddedProfile:
    """Natural cubic spline through the cycle's knots, evaluated on ``grid``.

    Grid points outside ``[min pressure, max pressure]`` are marked missing
    and set to NaN.
    """
    if len(cycle) < MIN_KNOTS:
        raise TooFewKnots(f"cycle {cycle.cycle_id} has {len(cycle)} knots, need {MIN_KNOTS}")
    t = grid.points
    inside = (t >= cycle.pressure[0]) & (t <= cycle.pressure[-1])
    vals = np.full(grid.num_points, np.nan)
    if inside.any():
        spline = CubicSpline(cycle.pressure, cycle.value, bc_type="natural", extrapolate=False)
        vals[inside] = spline(t[inside])
    meta = {"platform": cycle.platform, "time": cycle.time.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "lat": cycle.lat, "lon": cycle.lon, "variable": cycle.variable}
    return GriddedProfile(cycle.cycle_id, vals, ~inside, grid, meta)


def restrict_and_select(profiles: Iterable[GriddedProfile], window: GridSpec):
    """Keep profiles with no missing value on ``window``.

    ``window`` must be a sub-grid of each profile's grid (same spacing,
    aligned nodes).  Returns ``(FunctionSet or None, provenance rows)``.
    """
    rows, prov = [], []
    for prof in profiles:
        idx = _subgrid_index(prof.grid, window)
        if prof.missing[idx].any():
            continue
        rows.append(prof.values[idx])
        prov.append({"cycle_id": prof.cycle_id, **{k: prof.meta.get(k) for k in
                                                     ("platform", "time", "lat", "lon")}})
    if not rows:
        return None, prov
    return FunctionSet(window, np.array(rows), [p["cycle_id"] for p in prov]), prov


def _subgrid_index(grid: GridSpec, window: GridSpec) -> np.ndarray:
    if grid == window:
        return np.arange(grid.num_points)
    pos = (window.points - grid.domain_lo) / grid.step
    idx = np.rint(pos).astype(int)
    if (np.any(np.abs(pos - idx) > 1e-9) or idx[0] < 0 or idx[-1] >= grid.num_points
            or not math.isclose(window.step, grid.step, rel_tol=1e-12)):
        raise ValueError(f"{window} is not an aligned sub-grid of {grid}")
    return idx


def run_pipeline(measurements: Iterable[RawMeasurement], window: GridSpec = DEFAULT_WINDOW,
                 min_points: int = 20, variable: str | None = "temperature",
                 summary: IngestSummary | None = None, grid: GridSpec | None = None):
    """Group, filter, regrid and select.  Returns ``(FunctionSet or None, provenance, summary)``.

    ``grid`` is the interpolation grid and defaults to ``window`` itself.
    """
    summary = IngestSummary() if summary is None else summary
    cycles = group_cycles(measurements)
    if variable is not None:
        cycles = [c for c in cycles if c.variable == variable]
    summary.cycles_grouped = len(cycles)
    kept = filter_cycles(cycles, min_points)
    summary.cycles_after_filter = len(kept)
    profiles = [spline_regrid(c, grid or window) for c in kept if len(c) >= MIN_KNOTS]
    summary.cycles_regridded = len(profiles)
    fset, prov = restrict_and_select(profiles, window)
    summary.cycles_retained = len(prov)
    return fset, prov, summary


def write_provenance(prov: list[dict], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle_id", "platform", "time", "lat", "lon"])
        for p in prov:
            w.writerow([p["cycle_id"], p["platform"], p["time"], repr(p["lat"]), repr(p["lon"])])
