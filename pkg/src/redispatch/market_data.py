"""Hourly zonal market data: ingestion, validation, gap-filling, calendar flags.

Input files are plain CSV with the schemas documented in the README. All
timestamps are stored internally as UTC; naive input timestamps are localised
to the timezone declared in a ``# timezone: <name>`` header comment (falling
back to the ingest config's timezone). Calendar flags and day boundaries are
evaluated in the configured local timezone.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence
from zoneinfo import ZoneInfo

import numpy as np
import pandas as pd

from .errors import (
    BoundaryError,
    CompletenessError,
    DuplicateRowError,
    GapError,
    ParseError,
)

# Canonical bidding-zone layout. Rossano is a production-only zone and is
# excluded from the "demand zone" set used by spatial smoothing.
@dataclass(frozen=True)
class Zone:
    name: str
    slug: str
    demand_zone: bool


ZONES: tuple[Zone, ...] = (
    Zone("North", "north", True),
    Zone("CenterNorth", "center_north", True),
    Zone("CenterSouth", "center_south", True),
    Zone("South", "south", True),
    Zone("Rossano", "rossano", False),
    Zone("Sardinia", "sardinia", True),
    Zone("Sicily", "sicily", True),
)

ZONE_NAMES: tuple[str, ...] = tuple(z.name for z in ZONES)
ZONE_SLUGS: tuple[str, ...] = tuple(z.slug for z in ZONES)
DEMAND_ZONE_SLUGS: tuple[str, ...] = tuple(z.slug for z in ZONES if z.demand_zone)
_ZONE_ORDER = {name: i for i, name in enumerate(ZONE_NAMES)}

ZONAL_HEADER = (
    "timestamp,zone,demand_mwh,demand_forecast_mwh,solar_mwh,solar_forecast_mwh,"
    "wind_mwh,wind_forecast_mwh,hydro_ror_mwh,net_imports_mwh"
)
NATIONAL_HEADER = "timestamp,redispatch_cost_eur,da_price_eur_mwh,gas_price_eur_mwh"

ZONAL_VALUE_COLUMNS = tuple(ZONAL_HEADER.split(",")[2:])
NATIONAL_VALUE_COLUMNS = tuple(NATIONAL_HEADER.split(",")[1:])

# Quantities that must be >= 0 whenever present (net imports may be negative).
_NONNEGATIVE_ZONAL = (
    "demand_mwh",
    "demand_forecast_mwh",
    "solar_mwh",
    "solar_forecast_mwh",
    "wind_mwh",
    "wind_forecast_mwh",
    "hydro_ror_mwh",
)

DEFAULT_WINTER_MONTHS = frozenset({10, 11, 12, 1, 2, 3, 4})


@dataclass(frozen=True)
class IngestConfig:
    """Options controlling dataset loading.

    ``max_gap`` is the longest run of consecutive missing hours (or days, for
    the daily gas series) that will be linearly interpolated; longer gaps
    abort. ``winter_months`` drives the winter indicator. ``timezone`` is the
    local timezone used for calendar flags, day boundaries and for localising
    naive input timestamps.
    """

    max_gap: int = 6
    winter_months: frozenset[int] = DEFAULT_WINTER_MONTHS
    timezone: str = "UTC"
    date_range: tuple[dt.date, dt.date] | None = None


@dataclass(frozen=True)
class HourlyZonalRecord:
    timestamp: dt.datetime
    zone: str
    demand_mwh: float
    demand_forecast_mwh: float
    solar_mwh: float
    solar_forecast_mwh: float
    wind_mwh: float
    wind_forecast_mwh: float
    hydro_ror_mwh: float
    net_imports_mwh: float


@dataclass(frozen=True)
class NationalHourlyRecord:
    timestamp: dt.datetime
    redispatch_cost_eur: float
    da_price_eur_mwh: float
    gas_price_eur_mwh: float


@dataclass(frozen=True)
class CalendarFlags:
    workday: bool
    winter: bool


@dataclass
class MarketDataset:
    """Loaded, gap-free hourly market data.

    ``zonal`` has one row per (hour, zone) sorted by timestamp then canonical
    zone order; ``national`` one row per hour. Both carry tz-aware UTC
    timestamps. Treat instances as immutable once loaded.
    """

    zonal: pd.DataFrame
    national: pd.DataFrame
    holidays: frozenset[dt.date]
    config: IngestConfig
    interpolated_cells: dict[str, int] = field(default_factory=dict)

    @property
    def hours(self) -> pd.DatetimeIndex:
        return pd.DatetimeIndex(self.national["timestamp"])

    @property
    def n_hours(self) -> int:
        return len(self.national)


# ---------------------------------------------------------------------------
# Gap interpolation
# ---------------------------------------------------------------------------

def interpolate_gaps(series: Sequence[float] | np.ndarray, max_gap: int) -> tuple[np.ndarray, int]:
    """Fill interior NaN runs of length <= max_gap by linear interpolation.

    Returns (filled array, number of filled cells). Present values are left
    untouched. Leading/trailing missing values raise ``BoundaryError``; a run
    longer than ``max_gap`` raises ``GapError``.
    """
    values = np.asarray(series, dtype=float).copy()
    missing = np.isnan(values)
    if not missing.any():
        return values, 0
    if missing.all():
        raise BoundaryError("series is entirely missing")
    if missing[0] or missing[-1]:
        raise BoundaryError("missing values at series boundary cannot be interpolated")

    idx = np.arange(len(values))
    # Locate runs of consecutive missing values.
    starts = np.where(missing & ~np.roll(missing, 1))[0]
    ends = np.where(missing & ~np.roll(missing, -1))[0]
    for start, end in zip(starts, ends):
        run = end - start + 1
        if run > max_gap:
            raise GapError(
                f"gap of {run} consecutive missing values exceeds max_gap={max_gap}"
            )
    filled = values.copy()
    filled[missing] = np.interp(idx[missing], idx[~missing], values[~missing])
    return filled, int(missing.sum())


# ---------------------------------------------------------------------------
# Calendar annotation
# ---------------------------------------------------------------------------

def annotate_calendar(
    timestamps: Iterable[dt.datetime] | pd.DatetimeIndex,
    holidays: Iterable[dt.date],
    winter_months: Iterable[int] = DEFAULT_WINTER_MONTHS,
    timezone: str = "UTC",
) -> list[CalendarFlags]:
    """Workday/winter flags for each timestamp, evaluated on local dates.

    Workday means Monday-Friday and not in ``holidays``; winter means the
    local month is in ``winter_months``.
    """
    winter_set = frozenset(winter_months)
    if not winter_set:
        raise ValueError("winter_months must be non-empty")
    holiday_set = frozenset(holidays)
    tz = ZoneInfo(timezone)
    flags = []
    for ts in timestamps:
        ts = pd.Timestamp(ts)
        if ts.tzinfo is None:
            local = ts.tz_localize(tz)
        else:
            local = ts.tz_convert(tz)
        local_date = local.date()
        workday = local.weekday() < 5 and local_date not in holiday_set
        flags.append(CalendarFlags(workday=workday, winter=local.month in winter_set))
    return flags


def local_dates(timestamps: pd.DatetimeIndex, timezone: str) -> np.ndarray:
    """Local calendar date of each (UTC) timestamp, as an object array."""
    idx = pd.DatetimeIndex(timestamps)
    if idx.tz is None:
        idx = idx.tz_localize("UTC")
    return np.asarray(idx.tz_convert(ZoneInfo(timezone)).date)


# ---------------------------------------------------------------------------
# CSV parsing helpers
# ---------------------------------------------------------------------------

def _read_csv_rows(path: Path) -> tuple[list[str], list[tuple[int, list[str]]], str | None]:
    """Raw rows with 1-based line numbers, honoring '#' comment lines.

    Returns (header fields, [(line_no, fields), ...], declared timezone or
    None). A comment of the form ``# timezone: Europe/Rome`` declares the
    timezone of naive timestamps in the file.
    """
    declared_tz: str | None = None
    header: list[str] | None = None
    rows: list[tuple[int, list[str]]] = []
    with open(path, newline="") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                body = stripped.lstrip("#").strip()
                if body.lower().startswith("timezone:"):
                    declared_tz = body.split(":", 1)[1].strip()
                continue
            fields = next(csv.reader([line]))
            if header is None:
                header = [f.strip() for f in fields]
            else:
                rows.append((line_no, fields))
    if header is None:
        raise ParseError(f"{path} contains no header row")
    return header, rows, declared_tz


def _parse_timestamp(raw: str, line: int, tz: ZoneInfo) -> pd.Timestamp:
    try:
        ts = pd.Timestamp(raw)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"invalid timestamp {raw!r}: {exc}", line) from None
    if ts.tzinfo is None:
        try:
            ts = ts.tz_localize(tz)
        except Exception as exc:  # ambiguous/nonexistent local times
            raise ParseError(f"cannot localise naive timestamp {raw!r}: {exc}", line) from None
    ts = ts.tz_convert("UTC")
    if ts != ts.floor("h"):
        raise ParseError(f"timestamp {raw!r} is not hour-aligned", line)
    return ts


def _parse_float(raw: str, column: str, line: int) -> float:
    raw = raw.strip()
    if raw == "":
        return float("nan")
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"invalid numeric value {raw!r} in column {column}", line) from None


def _format_value(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def _hour_grid(start: pd.Timestamp, end: pd.Timestamp) -> pd.DatetimeIndex:
    return pd.date_range(start, end, freq="h", tz="UTC")


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_holidays(path: str | Path) -> frozenset[dt.date]:
    """Read a newline-delimited file of ISO dates; '#' comments allowed."""
    days: set[dt.date] = set()
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            try:
                days.add(dt.date.fromisoformat(body))
            except ValueError:
                raise ParseError(f"invalid holiday date {body!r}", line_no) from None
    return frozenset(days)


def _load_zonal(path: Path, config: IngestConfig) -> tuple[pd.DataFrame, dict[str, int]]:
    header, rows, declared_tz = _read_csv_rows(path)
    expected = ZONAL_HEADER.split(",")
    if header != expected:
        raise ParseError(f"{path}: zonal header {header} does not match schema {expected}")
    tz = ZoneInfo(declared_tz or config.timezone)

    records = []
    for line_no, fields in rows:
        if len(fields) != len(expected):
            raise ParseError(f"expected {len(expected)} fields, found {len(fields)}", line_no)
        ts = _parse_timestamp(fields[0], line_no, tz)
        zone = fields[1].strip()
        if zone not in _ZONE_ORDER:
            raise ParseError(f"unknown zone {zone!r} (expected one of {ZONE_NAMES})", line_no)
        values = {
            col: _parse_float(raw, col, line_no)
            for col, raw in zip(ZONAL_VALUE_COLUMNS, fields[2:])
        }
        for col in _NONNEGATIVE_ZONAL:
            v = values[col]
            if not np.isnan(v) and v < 0:
                raise ParseError(f"negative {col} value {v}", line_no)
        records.append({"timestamp": ts, "zone": zone, **values})

    if not records:
        raise ParseError(f"{path} contains no data rows")
    frame = pd.DataFrame.from_records(records)

    dup = frame.duplicated(subset=["timestamp", "zone"])
    if dup.any():
        first = frame.loc[dup.idxmax()]
        raise DuplicateRowError(
            f"duplicate (timestamp, zone) pair: ({first['timestamp']}, {first['zone']})"
        )

    if config.date_range is not None:
        frame = _clip_to_range(frame, config, tz_aware_column="timestamp")
        if frame.empty:
            raise CompletenessError("no zonal rows inside the requested date range")

    grid = _hour_grid(frame["timestamp"].min(), frame["timestamp"].max())
    counts: dict[str, int] = {}
    pieces = []
    for zone in ZONE_NAMES:
        zf = frame[frame["zone"] == zone]
        if zf.empty:
            raise CompletenessError(f"zone {zone} has no rows")
        zf = zf.set_index("timestamp").reindex(grid)
        for col in ZONAL_VALUE_COLUMNS:
            try:
                filled, n = interpolate_gaps(zf[col].to_numpy(), config.max_gap)
            except (GapError, BoundaryError) as exc:
                raise type(exc)(f"zone {zone}, column {col}: {exc}") from None
            zf[col] = filled
            counts[f"zonal.{col}"] = counts.get(f"zonal.{col}", 0) + n
        zf["zone"] = zone
        zf = zf.rename_axis("timestamp").reset_index()
        pieces.append(zf)

    out = pd.concat(pieces, ignore_index=True)
    out["_zone_order"] = out["zone"].map(_ZONE_ORDER)
    out = out.sort_values(["timestamp", "_zone_order"]).drop(columns="_zone_order")
    out = out.reset_index(drop=True)
    return out[["timestamp", "zone", *ZONAL_VALUE_COLUMNS]], counts


def _load_national(path: Path, config: IngestConfig) -> tuple[pd.DataFrame, dict[str, int]]:
    header, rows, declared_tz = _read_csv_rows(path)
    expected = NATIONAL_HEADER.split(",")
    if header != expected:
        raise ParseError(f"{path}: national header {header} does not match schema {expected}")
    tz = ZoneInfo(declared_tz or config.timezone)

    records = []
    for line_no, fields in rows:
        if len(fields) != len(expected):
            raise ParseError(f"expected {len(expected)} fields, found {len(fields)}", line_no)
        ts = _parse_timestamp(fields[0], line_no, tz)
        values = {
            col: _parse_float(raw, col, line_no)
            for col, raw in zip(NATIONAL_VALUE_COLUMNS, fields[1:])
        }
        if not np.isnan(values["da_price_eur_mwh"]) and values["da_price_eur_mwh"] < 0:
            raise ParseError(f"negative da_price {values['da_price_eur_mwh']}", line_no)
        if not np.isnan(values["gas_price_eur_mwh"]) and values["gas_price_eur_mwh"] <= 0:
            raise ParseError(f"non-positive gas_price {values['gas_price_eur_mwh']}", line_no)
        records.append({"timestamp": ts, **values})

    if not records:
        raise ParseError(f"{path} contains no data rows")
    frame = pd.DataFrame.from_records(records)
    dup = frame.duplicated(subset=["timestamp"])
    if dup.any():
        raise DuplicateRowError(
            f"duplicate national timestamp: {frame.loc[dup.idxmax(), 'timestamp']}"
        )

    if config.date_range is not None:
        frame = _clip_to_range(frame, config, tz_aware_column="timestamp")
        if frame.empty:
            raise CompletenessError("no national rows inside the requested date range")

    grid = _hour_grid(frame["timestamp"].min(), frame["timestamp"].max())
    frame = frame.set_index("timestamp").reindex(grid).rename_axis("timestamp").reset_index()

    # Cost and day-ahead price are never fabricated: the target series and the
    # price covariate must be observed.
    for col in ("redispatch_cost_eur", "da_price_eur_mwh"):
        if frame[col].isna().any():
            first = frame.loc[frame[col].isna().idxmax(), "timestamp"]
            raise CompletenessError(f"missing {col} at {first}; cannot interpolate this series")

    counts: dict[str, int] = {}
    gas_filled, n_gas = _fill_gas_daily(frame, config)
    frame["gas_price_eur_mwh"] = gas_filled
    counts["national.gas_price_eur_mwh"] = n_gas
    return frame, counts


def _fill_gas_daily(frame: pd.DataFrame, config: IngestConfig) -> tuple[np.ndarray, int]:
    """Collapse gas price to a daily series, interpolate missing days, expand.

    The gas price is a daily value repeated across the day's hours; missing
    cells are therefore filled on the daily series (local calendar days) and
    re-expanded, keeping the price constant within each day.
    """
    dates = local_dates(pd.DatetimeIndex(frame["timestamp"]), config.timezone)
    gas = frame["gas_price_eur_mwh"].to_numpy()
    daily: dict[dt.date, float] = {}
    order: list[dt.date] = []
    for d, v in zip(dates, gas):
        if d not in daily:
            daily[d] = np.nan
            order.append(d)
        if not np.isnan(v):
            if np.isnan(daily[d]):
                daily[d] = v
            elif daily[d] != v:
                raise ParseError(f"gas price not constant within day {d}")
    series = np.array([daily[d] for d in order])
    n_missing_hours = int(np.isnan(gas).sum())
    filled, _ = interpolate_gaps(series, config.max_gap)
    by_day = dict(zip(order, filled))
    return np.array([by_day[d] for d in dates]), n_missing_hours


def _clip_to_range(frame: pd.DataFrame, config: IngestConfig, tz_aware_column: str) -> pd.DataFrame:
    start, end = config.date_range
    tz = ZoneInfo(config.timezone)
    lo = pd.Timestamp(start, tz=tz).tz_convert("UTC")
    hi = (pd.Timestamp(end, tz=tz) + pd.Timedelta(days=1)).tz_convert("UTC")
    ts = frame[tz_aware_column]
    return frame[(ts >= lo) & (ts < hi)].reset_index(drop=True)


def load_dataset(
    zonal_path: str | Path,
    national_path: str | Path,
    holidays_path: str | Path,
    config: IngestConfig | None = None,
) -> MarketDataset:
    """Load and validate the full hourly dataset.

    The result has one record per (hour, zone) and one national record per
    hour over the covered range, with interior gaps linearly interpolated and
    the counts of interpolated cells reported on the dataset.
    """
    config = config or IngestConfig()
    holidays = load_holidays(holidays_path)
    zonal, zonal_counts = _load_zonal(Path(zonal_path), config)
    national, national_counts = _load_national(Path(national_path), config)

    zonal_hours = pd.DatetimeIndex(zonal["timestamp"].unique())
    national_hours = pd.DatetimeIndex(national["timestamp"])
    if not zonal_hours.equals(national_hours):
        raise CompletenessError(
            f"zonal hours ({zonal_hours.min()}..{zonal_hours.max()}, n={len(zonal_hours)}) "
            f"and national hours ({national_hours.min()}..{national_hours.max()}, "
            f"n={len(national_hours)}) do not align"
        )

    return MarketDataset(
        zonal=zonal,
        national=national,
        holidays=holidays,
        config=config,
        interpolated_cells={**zonal_counts, **national_counts},
    )


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------

def _format_timestamp(ts: pd.Timestamp) -> str:
    return pd.Timestamp(ts).tz_convert("UTC").strftime("%Y-%m-%dT%H:%M:%SZ")


def write_dataset(
    dataset: MarketDataset,
    zonal_path: str | Path,
    national_path: str | Path,
    holidays_path: str | Path | None = None,
) -> None:
    """Write the dataset back to the canonical CSV schemas.

    Round trip with ``load_dataset`` is byte-identical for gap-free input
    produced by this writer.
    """
    with open(zonal_path, "w", newline="") as fh:
        fh.write(ZONAL_HEADER + "\n")
        for row in dataset.zonal.itertuples(index=False):
            values = ",".join(_format_value(getattr(row, c)) for c in ZONAL_VALUE_COLUMNS)
            fh.write(f"{_format_timestamp(row.timestamp)},{row.zone},{values}\n")
    with open(national_path, "w", newline="") as fh:
        fh.write(NATIONAL_HEADER + "\n")
        for row in dataset.national.itertuples(index=False):
            values = ",".join(_format_value(getattr(row, c)) for c in NATIONAL_VALUE_COLUMNS)
            fh.write(f"{_format_timestamp(row.timestamp)},{values}\n")
    if holidays_path is not None:
        with open(holidays_path, "w") as fh:
            for day in sorted(dataset.holidays):
                fh.write(day.isoformat() + "\n")


def ingestion_report(dataset: MarketDataset) -> dict:
    """Row counts, covered range and interpolation summary for a dataset."""
    hours = dataset.hours
    start, end = hours.min(), hours.max()
    expected = int((end - start) / pd.Timedelta(hours=1)) + 1
    return {
        "national_rows": int(len(dataset.national)),
        "zonal_rows": int(len(dataset.zonal)),
        "zones": len(ZONE_NAMES),
        "first_hour": _format_timestamp(start),
        "last_hour": _format_timestamp(end),
        "expected_hours": expected,
        "interpolated_cells": dict(sorted(dataset.interpolated_cells.items())),
        "holidays": len(dataset.holidays),
    }


def subset_dataset(dataset: MarketDataset, start: dt.date, end: dt.date) -> MarketDataset:
    """Restrict a dataset to local dates in [start, end] (inclusive)."""
    config = replace(dataset.config, date_range=(start, end))
    zonal = _clip_to_range(dataset.zonal, config, "timestamp")
    national = _clip_to_range(dataset.national, config, "timestamp")
    if national.empty:
        raise CompletenessError("no rows inside the requested date range")
    return MarketDataset(
        zonal=zonal,
        national=national,
        holidays=dataset.holidays,
        config=config,
        interpolated_cells=dict(dataset.interpolated_cells),
    )
