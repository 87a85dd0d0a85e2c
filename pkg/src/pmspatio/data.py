"""Station-by-day panel data: loading, validation, distances and design matrices.

Missing responses are stored as NaN; the ``observed`` mask is derived from
them.  Covariate matrices are never missing.  The time index ``t`` is the
0-based day offset from the first date.
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DuplicateStationDay,
    InvalidDataset,
    MissingColumn,
    MissingCovariate,
    NonDailyDates,
    UnknownCovariate,
)

#: Earth mean radius in km; one degree of arc is ``KM_PER_DEGREE`` km.
EARTH_RADIUS_KM = 6371.0
KM_PER_DEGREE = 111.195

WEATHER = (
    "WE_temp_2m",
    "WE_tot_precipitation",
    "WE_rh_mean",
    "WE_wind_speed_100m_mean",
    "WE_blh_layer_max",
)
LIVESTOCK = ("LI_pigs_v2", "LI_bovine_v2")
VEGETATION = ("LA_hvi", "LA_lvi")
STANDARD_COVARIATES = ("Altitude",) + WEATHER + LIVESTOCK + VEGETATION

MONTH_LABELS = (
    "February", "March", "April", "May", "June", "July",
    "August", "September", "October", "November", "December",
)


@dataclass(frozen=True)
class Schema:
    """Map from logical fields to CSV column names."""

    station_id: str = "IDStations"
    latitude: str = "Latitude"
    longitude: str = "Longitude"
    date: str = "Time"
    response: str = "AQ_pm25"
    covariates: tuple[str, ...] = STANDARD_COVARIATES
    altitude: str | None = "Altitude"

    @classmethod
    def with_covariates(cls, covariates: Iterable[str], **kw) -> "Schema":
        covariates = tuple(covariates)
        kw.setdefault("altitude", "Altitude")
        return cls(covariates=covariates, **kw)


DEFAULT_SCHEMA = Schema()


@dataclass(frozen=True)
class Station:
    id: str
    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise InvalidDataset(f"latitude {self.latitude} out of range for station {self.id}")
        if not -180.0 <= self.longitude <= 180.0:
            raise InvalidDataset(f"longitude {self.longitude} out of range for station {self.id}")


@dataclass(frozen=True)
class ModelSpec:
    """Formula-like description of the large-scale component."""

    linear_terms: tuple[str, ...] = ()
    smooth_terms: tuple[str, ...] = ()
    include_month_dummies: bool = True
    response_name: str = "AQ_pm25"

    def __post_init__(self):
        object.__setattr__(self, "linear_terms", tuple(self.linear_terms))
        object.__setattr__(self, "smooth_terms", tuple(self.smooth_terms))
        overlap = set(self.linear_terms) & set(self.smooth_terms)
        if overlap:
            raise InvalidDataset(f"terms both linear and smooth: {sorted(overlap)}")

    @property
    def covariates(self) -> tuple[str, ...]:
        return self.linear_terms + self.smooth_terms

    def all_linear(self) -> "ModelSpec":
        """Same covariates, every one entered linearly."""
        return replace(self, linear_terms=self.covariates, smooth_terms=())

    def check(self, names: Iterable[str]) -> None:
        names = set(names)
        for c in self.covariates:
            if c not in names:
                raise UnknownCovariate(c)

    def to_dict(self) -> dict:
        return {
            "linear_terms": list(self.linear_terms),
            "smooth_terms": list(self.smooth_terms),
            "include_month_dummies": self.include_month_dummies,
            "response_name": self.response_name,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(
            linear_terms=tuple(d.get("linear_terms", ())),
            smooth_terms=tuple(d.get("smooth_terms", ())),
            include_month_dummies=bool(d.get("include_month_dummies", True)),
            response_name=d.get("response_name", "AQ_pm25"),
        )


#: HDGM / RFSTK large scale used in the comparison: everything linear.
DEFAULT_LINEAR_SPEC = ModelSpec(linear_terms=("Altitude",) + WEATHER + LIVESTOCK + VEGETATION)
#: GAMM large scale: altitude linear, every other continuous covariate smooth.
DEFAULT_GAMM_SPEC = ModelSpec(linear_terms=("Altitude",), smooth_terms=WEATHER + LIVESTOCK + VEGETATION)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Rows:
    """Flat row view of (a subset of) a Dataset's station-day cells."""

    station: np.ndarray
    day: np.ndarray
    month: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    covariates: dict[str, np.ndarray]
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.day)

    def take(self, idx) -> "Rows":
        return Rows(
            self.station[idx], self.day[idx], self.month[idx], self.lat[idx], self.lon[idx],
            {k: v[idx] for k, v in self.covariates.items()}, self.y[idx],
        )

    def with_covariate(self, name: str, values) -> "Rows":
        covs = dict(self.covariates)
        covs[name] = np.broadcast_to(np.asarray(values, dtype=float), self.y.shape).copy()
        return replace(self, covariates=covs)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable station × day panel."""

    stations: tuple[Station, ...]
    dates: np.ndarray
    response: np.ndarray
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        stations = tuple(self.stations)
        object.__setattr__(self, "stations", stations)
        ids = [s.id for s in stations]
        if len(set(ids)) != len(ids):
            raise InvalidDataset("station ids must be unique")
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        if dates.ndim != 1 or len(dates) == 0:
            raise InvalidDataset("dates must be a non-empty 1-d array")
        if len(dates) > 1 and np.any(np.diff(dates).astype(int) != 1):
            raise NonDailyDates("dates must be contiguous with a step of one day")
        dates = dates.copy()
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        shape = (len(stations), len(dates))
        resp = _freeze(self.response)
        if resp.shape != shape:
            raise InvalidDataset(f"response shape {resp.shape} != {shape}")
        object.__setattr__(self, "response", resp)
        covs = {}
        for name, m in self.covariates.items():
            m = _freeze(m)
            if m.shape != shape:
                raise InvalidDataset(f"covariate {name} shape {m.shape} != {shape}")
            if not np.all(np.isfinite(m)):
                raise MissingCovariate(name)
            covs[name] = m
        object.__setattr__(self, "covariates", covs)

    # -- basic views -------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.stations)

    @property
    def T(self) -> int:
        return len(self.dates)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.T

    @property
    def observed(self) -> np.ndarray:
        return np.isfinite(self.response)

    @property
    def station_ids(self) -> list[str]:
        return [s.id for s in self.stations]

    @property
    def covariate_names(self) -> list[str]:
        return list(self.covariates)

    @property
    def months(self) -> np.ndarray:
        """Calendar month (1-12) of every date."""
        return (self.dates.astype("datetime64[M]").astype(int) % 12) + 1

    @property
    def latlon(self) -> np.ndarray:
        return np.array([[s.latitude, s.longitude] for s in self.stations], dtype=float).reshape(-1, 2)

    def index_of(self, station_id: str) -> int:
        for i, s in enumerate(self.stations):
            if s.id == station_id:
                return i
        raise KeyError(station_id)

    # -- derived datasets --------------------------------------------------
    def select(self, station_ids: Sequence[str]) -> "Dataset":
        idx = [self.index_of(s) for s in station_ids]
        return Dataset(
            tuple(self.stations[i] for i in idx), self.dates, self.response[idx],
            {k: v[idx] for k, v in self.covariates.items()},
        )

    def drop(self, station_ids: Iterable[str]) -> "Dataset":
        drop = set(station_ids)
        return self.select([s for s in self.station_ids if s not in drop])

    def with_response(self, response: np.ndarray) -> "Dataset":
        return Dataset(self.stations, self.dates, response, self.covariates)

    def with_covariates(self, covariates: Mapping[str, np.ndarray]) -> "Dataset":
        covs = dict(self.covariates)
        covs.update(covariates)
        return Dataset(self.stations, self.dates, self.response, covs)

    def rows(self, observed_only: bool = False) -> Rows:
        """Flatten to station-major, day-minor rows."""
        n, T = self.shape
        station = np.repeat(np.arange(n), T)
        day = np.tile(np.arange(T), n)
        ll = self.latlon
        r = Rows(
            station, day, np.tile(self.months, n), ll[station, 0], ll[station, 1],
            {k: v.ravel().copy() for k, v in self.covariates.items()}, self.response.ravel().copy(),
        )
        if observed_only:
            r = r.take(np.flatnonzero(np.isfinite(r.y)))
        return r

    def equals(self, other: "Dataset") -> bool:
        return (
            self.stations == other.stations
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.response, other.response, equal_nan=True)
            and list(self.covariates) == list(other.covariates)
            and all(np.array_equal(v, other.covariates[k]) for k, v in self.covariates.items())
        )


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _parse_dates(values) -> np.ndarray:
    out = []
    for v in values:
        try:
            out.append(_dt.date.fromisoformat(str(v).strip()))
        except ValueError as exc:
            raise NonDailyDates(f"not an ISO-8601 calendar date: {v!r}") from exc
    return np.array(out, dtype="datetime64[D]")


def _fill_in_time(row: np.ndarray) -> np.ndarray:
    good = np.isfinite(row)
    if good.all():
        return row
    t = np.arange(len(row))
    return np.interp(t, t[good], row[good])


def load_csv(path, schema: Schema = DEFAULT_SCHEMA, require_positive: bool = True) -> Dataset:
    """Read a long-format station-day CSV into a rectangular Dataset.

    Station-days with no row at all become missing responses; their covariate
    cells are filled by linear interpolation along that station's own time
    series.  A row that is present but has an empty covariate raises
    ``MissingCovariate``.
    """
    df = pd.read_csv(
        path, dtype={schema.station_id: str, schema.date: str},
        na_values=["NA", ""], keep_default_na=False, float_precision="round_trip",
    )
    required = [schema.station_id, schema.latitude, schema.longitude, schema.date, schema.response]
    required += list(schema.covariates)
    for col in required:
        if col not in df.columns:
            raise MissingColumn(col)
    if df.empty:
        raise InvalidDataset("no rows")

    dates = _parse_dates(df[schema.date])
    if df.duplicated([schema.station_id, schema.date]).any():
        dup = df[df.duplicated([schema.station_id, schema.date], keep=False)].iloc[0]
        raise DuplicateStationDay(f"{dup[schema.station_id]} on {dup[schema.date]}")
    for c in schema.covariates:
        if df[c].isna().any():
            raise MissingCovariate(c)

    ids = list(dict.fromkeys(df[schema.station_id]))
    first = df.groupby(schema.station_id, sort=False).first()
    stations = []
    has_alt = bool(schema.altitude) and schema.altitude in df.columns
    for sid in ids:
        alt = float(first.loc[sid, schema.altitude]) if has_alt else 0.0
        stations.append(Station(sid, float(first.loc[sid, schema.latitude]),
                                float(first.loc[sid, schema.longitude]), alt))

    d0, d1 = dates.min(), dates.max()
    all_dates = np.arange(d0, d1 + np.timedelta64(1, "D"), dtype="datetime64[D]")
    si = pd.Index(ids).get_indexer(df[schema.station_id])
    ti = (dates - d0).astype(int)
    shape = (len(ids), len(all_dates))

    response = np.full(shape, np.nan)
    response[si, ti] = df[schema.response].to_numpy(dtype=float)
    obs = response[np.isfinite(response)]
    if require_positive and np.any(obs <= 0):
        raise InvalidDataset("observed concentrations must be > 0")

    covs = {}
    for c in schema.covariates:
        m = np.full(shape, np.nan)
        m[si, ti] = df[c].to_numpy(dtype=float)
        covs[c] = np.vstack([_fill_in_time(r) for r in m])
    return Dataset(tuple(stations), all_dates, response, covs)


def _fmt(x: float) -> str:
    return "NA" if not np.isfinite(x) else repr(float(x))


def write_csv(ds: Dataset, path, schema: Schema | None = None) -> None:
    """Write every station-day cell; float values are written with ``repr``
    so that ``load_csv`` reproduces them bit-exactly."""
    if schema is None:
        schema = Schema.with_covariates(ds.covariate_names)
    header = [schema.station_id, schema.latitude, schema.longitude, schema.date, schema.response]
    header += list(schema.covariates)
    extra_alt = bool(schema.altitude) and schema.altitude not in schema.covariates
    if extra_alt:
        header.append(schema.altitude)
    dates = [str(d) for d in ds.dates]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, s in enumerate(ds.stations):
            for t, d in enumerate(dates):
                row = [s.id, repr(float(s.latitude)), repr(float(s.longitude)), d, _fmt(ds.response[i, t])]
                row += [_fmt(ds.covariates[c][i, t]) for c in schema.covariates]
                if extra_alt:
                    row.append(repr(float(s.altitude)))
                w.writerow(row)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def _haversine_deg(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return np.degrees(2 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0))))


def great_circle_deg(a: Station, b: Station) -> float:
    """Central angle between two stations, in degrees of arc."""
    return float(_haversine_deg(a.latitude, a.longitude, b.latitude, b.longitude))


def deg_to_km(deg):
    return np.asarray(deg) * KM_PER_DEGREE


def distance_matrix(a, b=None) -> np.ndarray:
    """Pairwise great-circle distances (degrees) between two point sets.

    ``a`` and ``b`` are sequences of Station or ``(k, 2)`` lat/lon arrays.
    """
    A = _as_latlon(a)
    B = A if b is None else _as_latlon(b)
    D = _haversine_deg(A[:, None, 0], A[:, None, 1], B[None, :, 0], B[None, :, 1])
    if b is None:
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    return D


def _as_latlon(x) -> np.ndarray:
    if isinstance(x, Dataset):
        return x.latlon
    if len(x) and isinstance(x[0], Station):
        return np.array([[s.latitude, s.longitude] for s in x], dtype=float)
    return np.asarray(x, dtype=float).reshape(-1, 2)


# ---------------------------------------------------------------------------
# Design matrices
# ---------------------------------------------------------------------------

def month_dummies(month: np.ndarray) -> np.ndarray:
    """Indicator columns for February..December; January is the baseline."""
    month = np.asarray(month)
    return (month[:, None] == np.arange(2, 13)[None, :]).astype(float)


def design_rows(rows: Rows, terms: Sequence[str], include_month_dummies: bool = True):
    """Intercept, optional month dummies, then ``terms`` in order."""
    for t in terms:
        if t not in rows.covariates:
            raise UnknownCovariate(t)
    cols = [np.ones(len(rows))]
    labels = ["(Intercept)"]
    if include_month_dummies:
        cols.extend(month_dummies(rows.month).T)
        labels.extend(MONTH_LABELS)
    for t in terms:
        cols.append(rows.covariates[t])
        labels.append(t)
    return np.column_stack(cols), labels


def design_matrix(ds: Dataset, spec: ModelSpec):
    """Return ``(X, labels, observed)`` with one row per station-day cell.

    Rows are station-major, day-minor; cells with a missing response are still
    present and flagged ``False`` in ``observed``.
    """
    spec.check(ds.covariate_names)
    X, labels = design_rows(ds.rows(), spec.covariates, spec.include_month_dummies)
    return X, labels, ds.observed.ravel()
