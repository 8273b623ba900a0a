"""Model-ready design matrices from a net-demand panel.

Handles the static continuous block (price, zonal net demands, zonal net
demand forecasts), multivariate polynomial expansion over that block,
dynamic lag/lead columns of the system aggregates, calendar indicators, and
train-fitted standardisation.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import SpecError, ShapeError
from .market_data import ZONE_SLUGS
from .net_demand import NetDemandPanel
from .splits import TRAIN, SplitPlan

PRICE_COLUMNS = ("da_price", "gas_price")
INDICATOR_COLUMNS = ("workday", "winter")


@dataclass(frozen=True)
class FeatureSpec:
    """Which columns enter the design matrix, and how.

    The preferred static specification (one price column, 7 zonal net
    demands, 7 zonal forecasts, 2 indicators, degree 1) has 17 columns; the
    dynamic variant adds 24 lags of system net demand and 24 leads of the
    system forecast for 65. Polynomial expansion (degree 2 or 3) applies to
    the static continuous block only; indicators and dynamic columns always
    enter linearly.
    """

    price_column: str = "da_price"
    include_zonal_nd: bool = True
    include_zonal_ndfc: bool = True
    lags_system_nd: int = 0
    leads_system_ndfc: int = 0
    poly_degree: int = 1
    indicators: tuple[str, ...] = INDICATOR_COLUMNS
    scale_target: bool = False

    def __post_init__(self):
        if self.price_column not in PRICE_COLUMNS:
            raise SpecError(f"price_column must be one of {PRICE_COLUMNS}")
        if self.poly_degree not in (1, 2, 3):
            raise SpecError(f"poly_degree must be 1, 2 or 3, got {self.poly_degree}")
        if self.lags_system_nd < 0 or self.leads_system_ndfc < 0:
            raise SpecError("lag/lead counts must be non-negative")
        for ind in self.indicators:
            if ind not in INDICATOR_COLUMNS:
                raise SpecError(f"unknown indicator {ind!r}")

    @staticmethod
    def preferred(price_column: str = "da_price") -> "FeatureSpec":
        return FeatureSpec(price_column=price_column)

    @staticmethod
    def dynamic(price_column: str = "da_price") -> "FeatureSpec":
        return FeatureSpec(price_column=price_column, lags_system_nd=24, leads_system_ndfc=24)

    def continuous_columns(self) -> list[str]:
        cols = [self.price_column]
        if self.include_zonal_nd:
            cols += [f"nd_{s}" for s in ZONE_SLUGS]
        if self.include_zonal_ndfc:
            cols += [f"ndfc_{s}" for s in ZONE_SLUGS]
        return cols

    def lag_lead_columns(self) -> list[str]:
        cols = [f"nd_system_lag{k:02d}" for k in range(1, self.lags_system_nd + 1)]
        cols += [f"ndfc_system_lead{k:02d}" for k in range(1, self.leads_system_ndfc + 1)]
        return cols

    def column_names(self) -> list[str]:
        base = self.continuous_columns()
        if self.poly_degree > 1:
            names = polynomial_column_names(base, self.poly_degree)
        else:
            names = list(base)
        names += self.lag_lead_columns()
        names += list(self.indicators)
        return names

    def to_dict(self) -> dict:
        return {
            "price_column": self.price_column,
            "include_zonal_nd": self.include_zonal_nd,
            "include_zonal_ndfc": self.include_zonal_ndfc,
            "lags_system_nd": self.lags_system_nd,
            "leads_system_ndfc": self.leads_system_ndfc,
            "poly_degree": self.poly_degree,
            "indicators": list(self.indicators),
            "scale_target": self.scale_target,
        }

    @staticmethod
    def from_dict(doc: dict) -> "FeatureSpec":
        return FeatureSpec(
            price_column=doc["price_column"],
            include_zonal_nd=doc["include_zonal_nd"],
            include_zonal_ndfc=doc["include_zonal_ndfc"],
            lags_system_nd=doc["lags_system_nd"],
            leads_system_ndfc=doc["leads_system_ndfc"],
            poly_degree=doc["poly_degree"],
            indicators=tuple(doc["indicators"]),
            scale_target=doc["scale_target"],
        )


# ---------------------------------------------------------------------------
# Polynomial expansion
# ---------------------------------------------------------------------------

def _monomials(n_cols: int, degree: int):
    """Index tuples for all monomials of total degree 1..degree, graded
    lexicographic: degree first, then lexicographic in column indices."""
    for d in range(1, degree + 1):
        yield from itertools.combinations_with_replacement(range(n_cols), d)


def polynomial_column_names(names: list[str], degree: int) -> list[str]:
    out = []
    for combo in _monomials(len(names), degree):
        parts = []
        for col, power in _exponents(combo):
            parts.append(names[col] if power == 1 else f"{names[col]}^{power}")
        out.append("*".join(parts))
    return out


def _exponents(combo: tuple[int, ...]) -> list[tuple[int, int]]:
    pairs = []
    for col in sorted(set(combo)):
        pairs.append((col, combo.count(col)))
    return pairs


def expand_polynomial(Xc: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of total degree <= degree over the columns of Xc.

    The constant is excluded; degree-1 columns come first, in their input
    order. Column order is graded lexicographic and deterministic.
    """
    if degree not in (2, 3):
        raise SpecError(f"expansion degree must be 2 or 3, got {degree}")
    Xc = np.asarray(Xc, dtype=float)
    if Xc.ndim != 2:
        raise ShapeError("continuous matrix must be 2-dimensional")
    cols = []
    for combo in _monomials(Xc.shape[1], degree):
        col = Xc[:, combo[0]].copy()
        for j in combo[1:]:
            col *= Xc[:, j]
        cols.append(col)
    return np.column_stack(cols)


def polynomial_column_count(n_cols: int, degree: int) -> int:
    """Number of monomials of total degree 1..degree over n_cols variables."""
    from math import comb

    return sum(comb(n_cols + d - 1, d) for d in range(1, degree + 1))


# ---------------------------------------------------------------------------
# Lags and leads
# ---------------------------------------------------------------------------

def add_lags_leads(
    panel: NetDemandPanel, lags: int, leads: int
) -> tuple[pd.DataFrame, pd.DatetimeIndex]:
    """Lagged system net demand and led system forecast columns.

    Column ``nd_system_lagK`` at hour t holds nd_system[t-K]; column
    ``ndfc_system_leadK`` holds ndfc_system[t+K]. Rows without a complete
    window are dropped and returned separately. Must be applied to the full
    chronological panel before any train/validation splitting.
    """
    frame = panel.frame
    n = len(frame)
    if lags >= n or leads >= n:
        raise SpecError(f"lags/leads ({lags}/{leads}) exceed panel length {n}")
    _check_contiguous(frame.index)

    nd = frame["nd_system"].to_numpy()
    ndfc = frame["ndfc_system"].to_numpy()
    out = pd.DataFrame(index=frame.index)
    for k in range(1, lags + 1):
        col = np.full(n, np.nan)
        col[k:] = nd[:-k]
        out[f"nd_system_lag{k:02d}"] = col
    for k in range(1, leads + 1):
        col = np.full(n, np.nan)
        col[:-k if k else n] = ndfc[k:]
        out[f"ndfc_system_lead{k:02d}"] = col

    keep = np.ones(n, dtype=bool)
    keep[:lags] = False
    if leads:
        keep[-leads:] = False
    dropped = frame.index[~keep]
    return out.loc[keep], dropped


def _check_contiguous(index: pd.DatetimeIndex) -> None:
    if len(index) > 1:
        deltas = np.diff(index.asi8)
        if not (deltas == 3_600_000_000_000).all():
            raise SpecError("panel is not a contiguous hourly grid")


# ---------------------------------------------------------------------------
# Standardisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scaler:
    """Per-column mean and population std, fitted on training rows only.

    Columns with zero variance get std 1 (standardising to all zeros) and
    are flagged in ``constant_columns``.
    """

    mean: np.ndarray
    std: np.ndarray
    constant_columns: tuple[int, ...] = ()

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.std + self.mean

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "constant_columns": list(self.constant_columns),
        }

    @staticmethod
    def from_dict(doc: dict) -> "Scaler":
        return Scaler(
            mean=np.asarray(doc["mean"], dtype=float),
            std=np.asarray(doc["std"], dtype=float),
            constant_columns=tuple(doc["constant_columns"]),
        )


def fit_scaler(X: np.ndarray, training_rows: np.ndarray) -> Scaler:
    """Fit per-column statistics on the selected rows.

    ``training_rows`` is a boolean mask or integer index array; it must be
    non-empty. The same scaler is then applied uniformly to every fold.
    """
    rows = X[training_rows]
    if rows.size == 0:
        raise SpecError("cannot fit a scaler on an empty training-row set")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)  # population std (ddof=0)
    constant = np.where(std == 0.0)[0]
    if constant.size:
        warnings.warn(
            f"{constant.size} constant column(s) on training rows; std set to 1",
            RuntimeWarning,
            stacklevel=2,
        )
        std = std.copy()
        std[constant] = 1.0
    return Scaler(mean=mean, std=std, constant_columns=tuple(int(i) for i in constant))


@dataclass(frozen=True)
class TargetScaler:
    mean: float
    std: float

    def transform(self, y: np.ndarray) -> np.ndarray:
        return (y - self.mean) / self.std

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}

    @staticmethod
    def from_dict(doc: dict) -> "TargetScaler":
        return TargetScaler(mean=float(doc["mean"]), std=float(doc["std"]))


# ---------------------------------------------------------------------------
# Design matrix
# ---------------------------------------------------------------------------

@dataclass
class DesignMatrix:
    """Standardised features, raw-EUR target and row bookkeeping."""

    rows: pd.DatetimeIndex
    X: np.ndarray
    y: np.ndarray
    column_names: tuple[str, ...]
    scaler: Scaler
    spec: FeatureSpec
    timezone: str
    target_scaler: TargetScaler | None = None
    dropped_rows: dict[str, pd.DatetimeIndex] = field(default_factory=dict)

    def local_days(self) -> np.ndarray:
        from .market_data import local_dates

        return local_dates(self.rows, self.timezone)

    def fold_mask(self, plan: SplitPlan, fold: str) -> np.ndarray:
        return plan.day_mask(self.local_days(), fold)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("timestamp," + ",".join(self.column_names) + ",target\n")
            stamps = self.rows.strftime("%Y-%m-%dT%H:%M:%SZ")
            for ts, xrow, yv in zip(stamps, self.X, self.y):
                fh.write(ts + "," + ",".join(repr(float(v)) for v in xrow)
                         + "," + repr(float(yv)) + "\n")


def build_design(
    panel: NetDemandPanel,
    spec: FeatureSpec,
    plan: SplitPlan | None = None,
    scaler: Scaler | None = None,
    target_scaler: TargetScaler | None = None,
) -> DesignMatrix:
    """Assemble the standardised design matrix for a feature spec.

    The scaler is fitted on the plan's training rows unless an existing one
    is supplied (as when predicting on counterfactual panels with a trained
    model's statistics). Lag/lead windowing happens on the full chronological
    panel before fold assignment; the dropped rows are recorded.
    """
    frame = panel.frame
    for col in spec.continuous_columns():
        if col not in frame.columns:
            raise SpecError(f"panel lacks required column {col!r}")

    blocks: list[np.ndarray] = []
    continuous = frame[spec.continuous_columns()].to_numpy(dtype=float)
    if spec.poly_degree > 1:
        blocks.append(expand_polynomial(continuous, spec.poly_degree))
    else:
        blocks.append(continuous)

    dropped: dict[str, pd.DatetimeIndex] = {}
    keep_index = frame.index
    if spec.lags_system_nd or spec.leads_system_ndfc:
        lag_frame, dropped_idx = add_lags_leads(
            panel, spec.lags_system_nd, spec.leads_system_ndfc
        )
        dropped["lag_lead_window"] = dropped_idx
        keep_index = lag_frame.index
        keep_mask = frame.index.isin(keep_index)
        blocks = [b[keep_mask] for b in blocks]
        blocks.append(lag_frame.to_numpy(dtype=float))

    if spec.indicators:
        indicators = frame.loc[keep_index, list(spec.indicators)].to_numpy(dtype=float)
        blocks.append(indicators)

    X_raw = np.column_stack(blocks)
    names = tuple(spec.column_names())
    if X_raw.shape[1] != len(names):
        raise ShapeError(
            f"internal column mismatch: {X_raw.shape[1]} built vs {len(names)} named"
        )
    y = frame.loc[keep_index, "redispatch_cost"].to_numpy(dtype=float)

    if scaler is None:
        if plan is None:
            raise SpecError("either a split plan (to fit) or an existing scaler is required")
        days = local_dates_of(keep_index, panel.timezone)
        train_mask = plan.day_mask(days, TRAIN)
        if not train_mask.any():
            raise SpecError("no training rows available to fit the scaler")
        scaler = fit_scaler(X_raw, train_mask)
        if spec.scale_target and target_scaler is None:
            ymean = float(y[train_mask].mean())
            ystd = float(y[train_mask].std())
            target_scaler = TargetScaler(mean=ymean, std=ystd if ystd > 0 else 1.0)
    if len(scaler.mean) != X_raw.shape[1]:
        raise ShapeError(
            f"scaler dimension {len(scaler.mean)} does not match design width {X_raw.shape[1]}"
        )

    return DesignMatrix(
        rows=keep_index,
        X=scaler.transform(X_raw),
        y=y,
        column_names=names,
        scaler=scaler,
        spec=spec,
        timezone=panel.timezone,
        target_scaler=target_scaler if spec.scale_target else None,
        dropped_rows=dropped,
    )


def local_dates_of(index: pd.DatetimeIndex, timezone: str) -> np.ndarray:
    from .market_data import local_dates

    return local_dates(index, timezone)
