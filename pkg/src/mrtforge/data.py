"""Observation records, CSV ingestion and cleaning.

CSV schema (header written exactly in this order)::

    date,time,utc_offset_min,lat,lon,alt_m,air_temp_C,rh_pct,wind_ms,svf,
    pct_trees,pct_buildings,pct_impervious,shade,S_up,S_down,S_n,S_e,S_s,S_w,
    L_up,L_down,L_n,L_e,L_s,L_w,tmrt_C,image_id

``date`` is ``YYYY-MM-DD``, ``time`` is local ``HH:MM[:SS]``, ``shade`` is
``1`` (shaded) / ``0`` (sun-exposed). Optional cells are empty strings.
"""
from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .radiation import DirectionalFluxes
from .solar import GeoTime, InvalidInput, SolarPosition, solar_position

COLUMNS = (
    "date", "time", "utc_offset_min", "lat", "lon", "alt_m",
    "air_temp_C", "rh_pct", "wind_ms", "svf", "pct_trees", "pct_buildings", "pct_impervious",
    "shade",
    "S_up", "S_down", "S_n", "S_e", "S_s", "S_w",
    "L_up", "L_down", "L_n", "L_e", "L_s", "L_w",
    "tmrt_C", "image_id",
)
S_COLS = ("S_up", "S_down", "S_n", "S_e", "S_s", "S_w")
L_COLS = ("L_up", "L_down", "L_n", "L_e", "L_s", "L_w")
FLUX_COLS = S_COLS + L_COLS
WEATHER_COLS = ("air_temp_C", "rh_pct", "wind_ms")
BUILT_COLS = ("svf", "pct_trees", "pct_buildings", "pct_impervious")
IMPUTABLE = WEATHER_COLS + BUILT_COLS + FLUX_COLS
SENSOR_COLS = WEATHER_COLS + FLUX_COLS + ("tmrt_C",)

# hard per-field limits; a value outside rejects the row
LIMITS = {
    "lat": (-90.0, 90.0), "lon": (-180.0, 180.0), "alt_m": (-500.0, 9000.0),
    "air_temp_C": (-40.0, 60.0), "rh_pct": (0.0, 100.0), "wind_ms": (0.0, 75.0),
    "svf": (0.0, 1.0), "pct_trees": (0.0, 100.0), "pct_buildings": (0.0, 100.0),
    "pct_impervious": (0.0, 100.0), "tmrt_C": (-40.0, 100.0),
    **{c: (0.0, math.inf) for c in FLUX_COLS},
}


class SchemaError(ValueError):
    pass


class UnimputableField(ValueError):
    def __init__(self, field_name, day):
        self.field = field_name
        self.day = day
        super().__init__(f"field {field_name!r} is missing in every record of {day}")


@dataclass
class ObservationRecord:
    date: str
    time: str
    utc_offset_min: int
    lat: float
    lon: float
    alt_m: float = 0.0
    air_temp_C: float | None = None
    rh_pct: float | None = None
    wind_ms: float | None = None
    svf: float | None = None
    pct_trees: float | None = None
    pct_buildings: float | None = None
    pct_impervious: float | None = None
    shade: bool | None = None
    S_up: float | None = None
    S_down: float | None = None
    S_n: float | None = None
    S_e: float | None = None
    S_s: float | None = None
    S_w: float | None = None
    L_up: float | None = None
    L_down: float | None = None
    L_n: float | None = None
    L_e: float | None = None
    L_s: float | None = None
    L_w: float | None = None
    tmrt_C: float | None = None
    image_id: str | None = None
    _solar: SolarPosition | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def geotime(self) -> GeoTime:
        return GeoTime.parse(self.date, self.time, self.utc_offset_min, self.lat, self.lon, self.alt_m)

    @property
    def solar(self) -> SolarPosition:
        if self._solar is None:
            self._solar = solar_position(self.geotime)
        return self._solar

    @property
    def local_datetime(self) -> dt.datetime:
        return dt.datetime.combine(dt.date.fromisoformat(self.date), dt.time.fromisoformat(self.time))

    @property
    def has_fluxes(self) -> bool:
        return all(getattr(self, c) is not None for c in FLUX_COLS)

    def fluxes(self) -> DirectionalFluxes | None:
        if not self.has_fluxes:
            return None
        return DirectionalFluxes([getattr(self, c) for c in S_COLS], [getattr(self, c) for c in L_COLS])

    def to_row(self) -> dict:
        out = {}
        for c in COLUMNS:
            v = getattr(self, c)
            if v is None:
                out[c] = ""
            elif c == "shade":
                out[c] = "1" if v else "0"
            elif isinstance(v, float):
                out[c] = repr(v)
            else:
                out[c] = str(v)
        return out


@dataclass
class RowError:
    row: int  # 1-based data row (header excluded)
    rule: str


@dataclass
class Dataset:
    records: list
    rejected: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def column(self, name) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else float(getattr(r, name))
                         for r in self.records])

    def summary(self) -> dict:
        t = [r.tmrt_C for r in self.records if r.tmrt_C is not None]
        times = sorted(r.time for r in self.records)
        return {
            "n": len(self.records),
            "rejected": len(self.rejected),
            "tmrt_min": min(t) if t else None,
            "tmrt_max": max(t) if t else None,
            "time_min": times[0] if times else None,
            "time_max": times[-1] if times else None,
        }

    def subset(self, indices) -> "Dataset":
        return Dataset([self.records[i] for i in indices])


def _parse_cell(name, text):
    text = text.strip()
    if text == "":
        return None
    if name in ("date", "time", "image_id"):
        return text
    if name == "utc_offset_min":
        return int(text)
    if name == "shade":
        low = text.lower()
        if low in ("1", "true", "shade", "shaded"):
            return True
        if low in ("0", "false", "sun", "exposed"):
            return False
        raise ValueError(f"unrecognised shade value {text!r}")
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("non-finite value")
    return v


def _check_record(rec: ObservationRecord):
    for name in ("date", "time", "utc_offset_min", "lat", "lon"):
        if getattr(rec, name) is None:
            return f"{name}: required value missing"
    for name, (lo, hi) in LIMITS.items():
        v = getattr(rec, name)
        if v is not None and not lo <= v <= hi:
            return f"{name}: {v} outside [{lo}, {hi}]"
    try:
        rec.geotime
    except InvalidInput as exc:
        return str(exc)
    return None


def ingest_csv(path, image_dir=None) -> Dataset:
    """Parse a CSV in the documented schema.

    Rows with unparseable cells or values outside hard limits are rejected
    and listed in ``Dataset.rejected``; a missing column raises SchemaError.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path.name}: missing column(s): {', '.join(missing)}")
        records, rejected = [], []
        for i, row in enumerate(reader, start=1):
            values = {}
            try:
                for c in COLUMNS:
                    values[c] = _parse_cell(c, row[c] or "")
            except (ValueError, TypeError) as exc:
                rejected.append(RowError(i, f"{c}: unparseable ({exc})"))
                continue
            values["alt_m"] = values["alt_m"] if values["alt_m"] is not None else 0.0
            try:
                rec = ObservationRecord(**values)
            except TypeError as exc:
                rejected.append(RowError(i, str(exc)))
                continue
            problem = _check_record(rec)
            if problem:
                rejected.append(RowError(i, problem))
                continue
            records.append(rec)
    notes = {"source": str(path)}
    if image_dir is not None:
        notes["image_dir"] = str(image_dir)
    return Dataset(records, rejected, notes)


def write_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(r.to_row())


def _minutes(rec):
    t = rec.local_datetime
    return t.hour * 60 + t.minute + t.second / 60.0


def impute_missing(ds: Dataset, fields=IMPUTABLE) -> Dataset:
    """Fill missing numeric fields from the temporally nearest record of the same day.

    Ties go to the earlier record. Fields absent from every record are left
    alone; ``tmrt_C`` is never imputed. The returned dataset carries
    ``notes['imputation']`` with per-field fill counts and the largest gap.
    """
    records = [dataclasses.replace(r) for r in ds.records]
    active = [f for f in fields if any(getattr(r, f) is not None for r in records)]
    by_day = {}
    for idx, r in enumerate(records):
        by_day.setdefault(r.date, []).append(idx)
    filled = {f: 0 for f in active}
    max_gap = 0.0
    for day, idxs in by_day.items():
        times = {i: _minutes(records[i]) for i in idxs}
        for f in active:
            donors = [i for i in idxs if getattr(ds.records[i], f) is not None]
            holes = [i for i in idxs if getattr(ds.records[i], f) is None]
            if not holes:
                continue
            if not donors:
                raise UnimputableField(f, day)
            for i in holes:
                best = min(donors, key=lambda j: (abs(times[j] - times[i]), times[j], j))
                setattr(records[i], f, getattr(ds.records[best], f))
                filled[f] += 1
                max_gap = max(max_gap, abs(times[best] - times[i]))
    notes = dict(ds.notes)
    notes["imputation"] = {"filled": filled, "max_gap_min": max_gap}
    return Dataset(records, list(ds.rejected), notes)


def remove_outliers(ds: Dataset, fields=SENSOR_COLS, n_sigma=3.0) -> Dataset:
    """Drop records more than ``n_sigma`` population standard deviations from a field mean.

    Statistics are computed once on the input; the pass is not iterated.
    ``notes['outliers']`` lists ``(record_index, field)`` for each drop.
    """
    if len(ds) < 10:
        raise ValueError("outlier removal needs at least 10 records")
    flagged = {}
    for f in fields:
        x = ds.column(f)
        ok = ~np.isnan(x)
        if ok.sum() < 2:
            continue
        mu = x[ok].mean()
        sd = x[ok].std()
        if sd == 0:
            continue
        bad = np.nonzero(ok & (np.abs(x - mu) > n_sigma * sd))[0]
        for i in bad:
            flagged.setdefault(int(i), f)
    keep = [r for i, r in enumerate(ds.records) if i not in flagged]
    notes = dict(ds.notes)
    notes["outliers"] = sorted(flagged.items())
    return Dataset(keep, list(ds.rejected), notes)
