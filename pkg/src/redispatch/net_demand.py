"""Zonal and system net demand, and the day-ahead forecast analogues.

Net demand is the demand left for controllable units once intermittent
renewables, run-of-river hydro and net imports are netted out. The forecast
analogue swaps demand and renewables for their day-ahead forecasts; hydro and
net imports are firm after the day-ahead clearing and enter at their actual
values in both.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import CompletenessError
from .market_data import (
    HourlyZonalRecord,
    MarketDataset,
    ZONE_SLUGS,
    ZONES,
    annotate_calendar,
    local_dates,
)

PANEL_EXPORT_COLUMNS = (
    [f"nd_{s}" for s in ZONE_SLUGS]
    + [f"ndfc_{s}" for s in ZONE_SLUGS]
    + ["nd_system", "ndfc_system", "da_price", "gas_price", "redispatch_cost",
       "workday", "winter"]
)


def zonal_net_demand(r: HourlyZonalRecord) -> float:
    """Actual net demand for one (hour, zone): D - (solar + wind) - hydro - imports."""
    components = (r.demand_mwh, r.solar_mwh, r.wind_mwh, r.hydro_ror_mwh, r.net_imports_mwh)
    if any(v is None or np.isnan(v) for v in components):
        raise CompletenessError(f"missing net-demand component for {r.zone} at {r.timestamp}")
    return r.demand_mwh - (r.solar_mwh + r.wind_mwh) - r.hydro_ror_mwh - r.net_imports_mwh


def zonal_net_demand_forecast(r: HourlyZonalRecord) -> float:
    """Forecast net demand: D_fc - (solar_fc + wind_fc) - hydro - imports."""
    components = (
        r.demand_forecast_mwh,
        r.solar_forecast_mwh,
        r.wind_forecast_mwh,
        r.hydro_ror_mwh,
        r.net_imports_mwh,
    )
    if any(v is None or np.isnan(v) for v in components):
        raise CompletenessError(f"missing forecast component for {r.zone} at {r.timestamp}")
    return (
        r.demand_forecast_mwh
        - (r.solar_forecast_mwh + r.wind_forecast_mwh)
        - r.hydro_ror_mwh
        - r.net_imports_mwh
    )


@dataclass
class NetDemandPanel:
    """Hourly panel of net demands, covariates and the cost target.

    ``frame`` is indexed by UTC hour and carries, per zone slug ``s``:
    ``nd_s``, ``ndfc_s`` (net demand and its forecast) plus ``res_s`` /
    ``resfc_s`` (actual/forecast solar+wind, kept for counterfactual
    scenarios), the system aggregates, prices, cost and calendar flags.
    ``timezone`` is the local timezone for day boundaries.
    """

    frame: pd.DataFrame
    timezone: str = "UTC"

    @property
    def hours(self) -> pd.DatetimeIndex:
        return self.frame.index

    def local_days(self) -> np.ndarray:
        return local_dates(self.frame.index, self.timezone)

    def slice_dates(self, start: dt.date, end: dt.date) -> "NetDemandPanel":
        """Rows whose local date falls in [start, end] (inclusive)."""
        days = self.local_days()
        mask = (days >= start) & (days <= end)
        if not mask.any():
            raise CompletenessError(f"panel has no hours between {start} and {end}")
        return NetDemandPanel(self.frame.loc[mask].copy(), self.timezone)

    def to_csv(self, path) -> None:
        """Export the canonical per-hour columns (one row per hour)."""
        out = self.frame[list(PANEL_EXPORT_COLUMNS)].copy()
        out.insert(0, "timestamp", self.frame.index.strftime("%Y-%m-%dT%H:%M:%SZ"))
        out["workday"] = out["workday"].astype(int)
        out["winter"] = out["winter"].astype(int)
        with open(path, "w", newline="") as fh:
            fh.write(",".join(out.columns) + "\n")
            for row in out.itertuples(index=False):
                fields = [row.timestamp]
                fields += [repr(float(v)) for v in row[1:-2]]
                fields += [str(int(row.workday)), str(int(row.winter))]
                fh.write(",".join(fields) + "\n")


def _system_sum(frame: pd.DataFrame, prefix: str) -> np.ndarray:
    # Fixed left-to-right summation in canonical zone order, so the system
    # aggregate is bit-reproducible.
    total = frame[f"{prefix}_{ZONE_SLUGS[0]}"].to_numpy().copy()
    for slug in ZONE_SLUGS[1:]:
        total = total + frame[f"{prefix}_{slug}"].to_numpy()
    return total


def build_panel(dataset: MarketDataset) -> NetDemandPanel:
    """Assemble the hourly net-demand panel from a gap-free dataset."""
    hours = dataset.hours
    frame = pd.DataFrame(index=hours)
    frame.index.name = "timestamp"

    wide = dataset.zonal.pivot(index="timestamp", columns="zone")
    for zone in ZONES:
        cols = {c: wide[(c, zone.name)].to_numpy() for c in (
            "demand_mwh", "demand_forecast_mwh", "solar_mwh", "solar_forecast_mwh",
            "wind_mwh", "wind_forecast_mwh", "hydro_ror_mwh", "net_imports_mwh",
        )}
        if any(np.isnan(v).any() for v in cols.values()):
            raise CompletenessError(f"zone {zone.name} has missing values after gap-filling")
        res = cols["solar_mwh"] + cols["wind_mwh"]
        resfc = cols["solar_forecast_mwh"] + cols["wind_forecast_mwh"]
        frame[f"nd_{zone.slug}"] = (
            cols["demand_mwh"] - res - cols["hydro_ror_mwh"] - cols["net_imports_mwh"]
        )
        frame[f"ndfc_{zone.slug}"] = (
            cols["demand_forecast_mwh"] - resfc - cols["hydro_ror_mwh"] - cols["net_imports_mwh"]
        )
        frame[f"res_{zone.slug}"] = res
        frame[f"resfc_{zone.slug}"] = resfc

    frame["nd_system"] = _system_sum(frame, "nd")
    frame["ndfc_system"] = _system_sum(frame, "ndfc")

    national = dataset.national.set_index("timestamp")
    frame["da_price"] = national["da_price_eur_mwh"].to_numpy()
    frame["gas_price"] = national["gas_price_eur_mwh"].to_numpy()
    frame["redispatch_cost"] = national["redispatch_cost_eur"].to_numpy()

    flags = annotate_calendar(
        hours, dataset.holidays, dataset.config.winter_months, dataset.config.timezone
    )
    frame["workday"] = np.array([f.workday for f in flags], dtype=bool)
    frame["winter"] = np.array([f.winter for f in flags], dtype=bool)

    return NetDemandPanel(frame, timezone=dataset.config.timezone)


def recompute_system_columns(frame: pd.DataFrame) -> None:
    """Refresh nd_system / ndfc_system in place after zonal edits."""
    frame["nd_system"] = _system_sum(frame, "nd")
    frame["ndfc_system"] = _system_sum(frame, "ndfc")
