"""Seeded synthetic market data with a known ground-truth cost function.

Produces a full hourly dataset (all seven zones plus the national series)
whose re-dispatch cost follows a quadratic-in-net-demand rule with a
forecast-error kink, so end-to-end recovery can be verified without any
proprietary data. Magnitudes are order-of-magnitude plausible for the
documented zone layout rather than calibrated.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .market_data import (
    IngestConfig,
    MarketDataset,
    ZONE_NAMES,
    ZONE_SLUGS,
    write_dataset,
)
from .errors import SpecError

_ZONE_ORDER = {name: i for i, name in enumerate(ZONE_NAMES)}


@dataclass(frozen=True)
class ZoneScales:
    demand: float       # mean workday demand level, MWh
    solar_peak: float   # clear-sky midday output, MWh
    wind_mean: float    # mean wind output, MWh
    hydro: float        # run-of-river base, MWh
    imports: float      # mean net imports, MWh


# Renewables are concentrated in the southern zones relative to their demand,
# as in the market being mimicked; the north carries most demand and hydro.
DEFAULT_ZONE_SCALES: dict[str, ZoneScales] = {
    "north": ZoneScales(16000.0, 1300.0, 150.0, 2200.0, 2800.0),
    "center_north": ZoneScales(4600.0, 700.0, 80.0, 500.0, 300.0),
    "center_south": ZoneScales(5800.0, 1300.0, 350.0, 400.0, 200.0),
    "south": ZoneScales(3600.0, 1500.0, 1100.0, 150.0, 100.0),
    "rossano": ZoneScales(0.0, 120.0, 60.0, 10.0, 0.0),
    "sardinia": ZoneScales(1600.0, 350.0, 450.0, 80.0, 250.0),
    "sicily": ZoneScales(2600.0, 600.0, 450.0, 50.0, 150.0),
}


@dataclass(frozen=True)
class CostParams:
    beta_linear: float = 4.0          # EUR per MWh of system net demand
    beta_quadratic: float = 3.0e-4    # EUR per MWh^2
    beta_forecast_error: float = 30.0  # EUR per MWh of |nd - ndfc|
    beta_workday: float = 15000.0     # EUR level shift on workdays
    noise_std: float = 15000.0        # EUR


@dataclass(frozen=True)
class LockdownShock:
    start: dt.date = dt.date(2020, 3, 8)
    end: dt.date = dt.date(2020, 4, 26)
    demand_multiplier: float = 0.8
    cost_multiplier: float = 1.25

    def __post_init__(self):
        if not 0 < self.demand_multiplier <= 1:
            raise SpecError("demand multiplier must be in (0, 1]")


@dataclass(frozen=True)
class GeneratorConfig:
    start: dt.date = dt.date(2017, 1, 1)
    end: dt.date = dt.date(2020, 4, 26)
    seed: int = 20170101
    zone_scales: dict[str, ZoneScales] = field(
        default_factory=lambda: dict(DEFAULT_ZONE_SCALES)
    )
    cost_params: CostParams = CostParams()
    lockdown: LockdownShock | None = LockdownShock()
    demand_forecast_noise: float = 0.012   # multiplicative, common across zones
    res_forecast_noise: float = 0.08       # multiplicative, per zone
    winter_months: frozenset[int] = frozenset({10, 11, 12, 1, 2, 3, 4})

    def __post_init__(self):
        if self.end < self.start:
            raise SpecError("generator range is empty")
        if self.cost_params.noise_std < 0:
            raise SpecError("noise_std must be non-negative")


# Fixed-date holiday scheme (month, day), applied to every year in range.
HOLIDAY_DATES = ((1, 1), (1, 6), (4, 25), (5, 1), (6, 2), (8, 15),
                 (11, 1), (12, 8), (12, 25), (12, 26))


@dataclass
class GroundTruth:
    """Noiseless cost components behind the generated national series."""

    frame: pd.DataFrame  # index: hours; nd_system, ndfc_system, bau_cost, noiseless_cost
    config: GeneratorConfig

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("timestamp,nd_system,ndfc_system,bau_cost,noiseless_cost\n")
            stamps = self.frame.index.strftime("%Y-%m-%dT%H:%M:%SZ")
            for ts, row in zip(stamps, self.frame.itertuples(index=False)):
                fh.write(
                    f"{ts},{row.nd_system!r},{row.ndfc_system!r},"
                    f"{row.bau_cost!r},{row.noiseless_cost!r}\n"
                )


def _holidays_for(start: dt.date, end: dt.date) -> frozenset[dt.date]:
    days = set()
    for year in range(start.year, end.year + 1):
        for month, day in HOLIDAY_DATES:
            d = dt.date(year, month, day)
            if start <= d <= end:
                days.add(d)
    return frozenset(days)


def _ar1(rng: np.random.Generator, n: int, rho: float, sigma: float) -> np.ndarray:
    eps = rng.normal(0.0, sigma, size=n)
    out = np.empty(n)
    out[0] = eps[0] / np.sqrt(1.0 - rho * rho)
    for t in range(1, n):
        out[t] = rho * out[t - 1] + eps[t]
    return out


def generate(config: GeneratorConfig | None = None) -> tuple[MarketDataset, GroundTruth]:
    """Deterministic synthetic dataset plus its noiseless cost ground truth."""
    config = config or GeneratorConfig()
    rng = np.random.default_rng(config.seed)

    hours = pd.date_range(
        pd.Timestamp(config.start, tz="UTC"),
        pd.Timestamp(config.end, tz="UTC") + pd.Timedelta(hours=23),
        freq="h",
    )
    n = len(hours)
    hod = hours.hour.to_numpy()
    dow = hours.dayofweek.to_numpy()
    doy = hours.dayofyear.to_numpy()
    dates = np.asarray(hours.date)
    day_index = (hours.normalize().asi8 - hours.normalize().asi8[0]) // 86_400_000_000_000
    n_days = int(day_index[-1]) + 1

    holidays = _holidays_for(config.start, config.end)
    holiday_mask = np.array([d in holidays for d in dates])
    workday = (dow < 5) & ~holiday_mask

    # Shared shape factors: double-peaked diurnal profile, weekend/holiday
    # dips, mild annual seasonality with an August trough.
    diurnal = 1.0 + 0.16 * np.sin(2 * np.pi * (hod - 9) / 24) \
        + 0.05 * np.sin(4 * np.pi * (hod - 9) / 24)
    weekly = np.where(dow >= 5, 0.84, 1.0)
    holiday_factor = np.where(holiday_mask, 0.75, 1.0)
    seasonal = 1.0 + 0.06 * np.cos(2 * np.pi * (doy - 20) / 365.25) \
        - 0.10 * np.exp(-((doy - 227) / 12.0) ** 2)
    demand_shape = diurnal * weekly * holiday_factor * seasonal

    solar_bell = np.where(
        (hod >= 6) & (hod <= 18),
        np.sin(np.pi * (hod - 6) / 12.0) ** 2,
        0.0,
    )
    solar_season = 1.0 + 0.45 * np.cos(2 * np.pi * (doy - 172) / 365.25)

    # All stochastic draws happen before the lockdown multiplier is applied,
    # so the shocked and unshocked paths share identical randomness.
    cloud_daily = np.clip(rng.normal(0.9, 0.18, size=n_days), 0.35, 1.3)[day_index]
    demand_fc_factor = 1.0 + rng.normal(0.0, config.demand_forecast_noise, size=n)

    zonal_frames = []
    nd_zonal: dict[str, np.ndarray] = {}
    ndfc_zonal: dict[str, np.ndarray] = {}
    lock_mask = np.zeros(n, dtype=bool)
    if config.lockdown is not None:
        lock_mask = (dates >= config.lockdown.start) & (dates <= config.lockdown.end)

    for zone_name, slug in zip(ZONE_NAMES, ZONE_SLUGS):
        scales = config.zone_scales[slug]
        demand = scales.demand * demand_shape * (1.0 + 0.01 * _ar1(rng, n, 0.9, 0.2))
        demand = np.maximum(demand, 0.0)
        solar = scales.solar_peak * solar_bell * solar_season * cloud_daily
        solar = np.maximum(solar * (1.0 + rng.normal(0.0, 0.05, size=n)), 0.0)
        wind = scales.wind_mean * np.maximum(1.0 + _ar1(rng, n, 0.96, 0.13), 0.0)
        hydro = np.maximum(
            scales.hydro * (1.0 + 0.25 * np.cos(2 * np.pi * (doy - 130) / 365.25)), 0.0
        )
        imports = scales.imports * (1.0 + 0.3 * _ar1(rng, n, 0.95, 0.1))

        demand_fc = np.maximum(demand * demand_fc_factor, 0.0)
        solar_fc = np.maximum(
            solar * (1.0 + rng.normal(0.0, config.res_forecast_noise, size=n)), 0.0
        )
        wind_fc = np.maximum(
            wind * (1.0 + rng.normal(0.0, config.res_forecast_noise, size=n)), 0.0
        )

        if config.lockdown is not None:
            demand = np.where(lock_mask, demand * config.lockdown.demand_multiplier, demand)
            demand_fc = np.where(
                lock_mask, demand_fc * config.lockdown.demand_multiplier, demand_fc
            )

        nd_zonal[slug] = demand - (solar + wind) - hydro - imports
        ndfc_zonal[slug] = demand_fc - (solar_fc + wind_fc) - hydro - imports

        zonal_frames.append(pd.DataFrame({
            "timestamp": hours,
            "zone": zone_name,
            "demand_mwh": demand,
            "demand_forecast_mwh": demand_fc,
            "solar_mwh": solar,
            "solar_forecast_mwh": solar_fc,
            "wind_mwh": wind,
            "wind_forecast_mwh": wind_fc,
            "hydro_ror_mwh": hydro,
            "net_imports_mwh": imports,
        }))

    nd_system = np.zeros(n)
    ndfc_system = np.zeros(n)
    for slug in ZONE_SLUGS:
        nd_system = nd_system + nd_zonal[slug]
        ndfc_system = ndfc_system + ndfc_zonal[slug]

    cp = config.cost_params
    bau_cost = (
        cp.beta_linear * nd_system
        + cp.beta_quadratic * nd_system**2
        + cp.beta_forecast_error * np.abs(nd_system - ndfc_system)
        + cp.beta_workday * workday.astype(float)
    )
    noiseless = bau_cost.copy()
    if config.lockdown is not None:
        noiseless = np.where(lock_mask, bau_cost * config.lockdown.cost_multiplier, bau_cost)
    cost = noiseless + rng.normal(0.0, cp.noise_std, size=n)

    da_price = np.maximum(25.0 + 1.4e-3 * nd_system + rng.normal(0.0, 3.0, size=n), 0.0)
    gas_daily = np.clip(19.0 + _ar1(rng, n_days, 0.97, 0.8), 5.0, None)
    gas_price = gas_daily[day_index]

    zonal = pd.concat(zonal_frames, ignore_index=True)
    zonal["_zone_order"] = zonal["zone"].map(_ZONE_ORDER)
    zonal = zonal.sort_values(["timestamp", "_zone_order"]).drop(columns="_zone_order")
    zonal = zonal.reset_index(drop=True)

    national = pd.DataFrame({
        "timestamp": hours,
        "redispatch_cost_eur": cost,
        "da_price_eur_mwh": da_price,
        "gas_price_eur_mwh": gas_price,
    })

    dataset = MarketDataset(
        zonal=zonal,
        national=national,
        holidays=holidays,
        config=IngestConfig(winter_months=config.winter_months),
        interpolated_cells={},
    )
    truth = GroundTruth(
        frame=pd.DataFrame(
            {
                "nd_system": nd_system,
                "ndfc_system": ndfc_system,
                "bau_cost": bau_cost,
                "noiseless_cost": noiseless,
            },
            index=hours,
        ),
        config=config,
    )
    return dataset, truth


def write_files(
    config: GeneratorConfig,
    out_dir: str | Path,
    with_ground_truth: bool = True,
) -> dict[str, Path]:
    """Generate and write zonal.csv, national.csv, holidays.txt (and
    ground_truth.csv) under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset, truth = generate(config)
    paths = {
        "zonal": out_dir / "zonal.csv",
        "national": out_dir / "national.csv",
        "holidays": out_dir / "holidays.txt",
    }
    write_dataset(dataset, paths["zonal"], paths["national"], paths["holidays"])
    if with_ground_truth:
        paths["ground_truth"] = out_dir / "ground_truth.csv"
        truth.to_csv(paths["ground_truth"])
    return paths
