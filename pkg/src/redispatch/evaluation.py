"""Out-of-sample evaluation: prediction errors, RMSE, the Wilcoxon
signed-rank test, empirical prediction bands and per-window summary ratios.

Error convention: error = predicted - actual, so a negative error means the
model underestimated the realised cost.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import norm, rankdata

from .errors import CoverageError, DegenerateInputError, SpecError
from .market_data import local_dates
from .splits import DateRange

EXACT_MODE_LIMIT = 20


def rmse(actual, predicted) -> float:
    """Root mean squared error, sqrt(mean((y - yhat)^2))."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise SpecError(f"length mismatch: {a.shape} vs {p.shape}")
    if a.size == 0:
        raise SpecError("rmse of empty sequences is undefined")
    d = a - p
    return float(np.sqrt((d @ d) / d.size))


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # W: sum of ranks of positive differences
    z: float | None   # asymptotic z value (None in exact mode)
    p_value: float
    n: int            # pairs remaining after zero-difference removal
    mode: str


def wilcoxon_signed_rank(
    a, b, mode: str = "asymptotic", continuity_correction: bool = False
) -> WilcoxonResult:
    """Paired signed-rank test of a vs b.

    Zero differences are dropped; |d| is ranked with average ranks for ties;
    W is the positive-rank sum. The asymptotic p uses the plain normal
    approximation with tie-corrected variance (optionally with the standard
    0.5 continuity correction, which tracks the exact p much more closely at
    small n); exact mode sums over all 2^n sign assignments (n <= 20).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise SpecError(f"length mismatch: {a.shape} vs {b.shape}")
    if mode not in ("asymptotic", "exact"):
        raise SpecError(f"unknown mode {mode!r}")

    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise DegenerateInputError("all paired differences are zero")

    ranks = rankdata(np.abs(d))
    w = float(ranks[d > 0].sum())

    if mode == "exact":
        if n > EXACT_MODE_LIMIT:
            raise SpecError(f"exact mode limited to n <= {EXACT_MODE_LIMIT}, got {n}")
        return WilcoxonResult(w, None, _exact_p(ranks, w), n, "exact")

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_correction(d)
    if var <= 0:
        raise DegenerateInputError("variance of W is zero (all |d| tied to one value)")
    deviation = w - mean
    if continuity_correction:
        deviation = np.sign(deviation) * max(abs(deviation) - 0.5, 0.0)
    z = deviation / np.sqrt(var)
    p = 2.0 * norm.sf(abs(z))
    return WilcoxonResult(w, float(z), float(min(p, 1.0)), n, "asymptotic")


def _tie_correction(d: np.ndarray) -> float:
    # sum(t^3 - t)/48 over groups of tied |d|
    _, counts = np.unique(np.abs(d), return_counts=True)
    t = counts.astype(float)
    return float(((t ** 3 - t).sum()) / 48.0)


def _exact_p(ranks: np.ndarray, w: float) -> float:
    """Two-sided p over all 2^n sign assignments of the ranks.

    The distribution of the positive-rank sum is accumulated by subset-sum
    counting (average ranks are half-integers, so doubling makes them exact
    integers); equivalent to full enumeration.
    """
    scaled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(scaled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in scaled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts += shifted
    w2 = int(np.rint(2.0 * w))
    n_assignments = 2.0 ** len(ranks)
    le = counts[: w2 + 1].sum()
    ge = counts[w2:].sum()
    p = 2.0 * min(le, ge) / n_assignments
    return min(p, 1.0)


def empirical_quantile(xs, q: float) -> float:
    """Order-statistic quantile with linear interpolation at position (n-1)q."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise SpecError("quantile of an empty sequence is undefined")
    if not 0.0 <= q <= 1.0:
        raise SpecError(f"quantile level must be in [0, 1], got {q}")
    return float(np.quantile(xs, q, method="linear"))


def prediction_band(
    errors_pre_lockdown, point_predictions
) -> tuple[np.ndarray, np.ndarray, tuple[float, float]]:
    """Constant-offset 95% band around point predictions.

    upper = yhat + |Q(errors, 0.025)|, lower = yhat - Q(errors, 0.975).
    Returns (lower, upper, (lower_offset, upper_offset)).
    """
    errors = np.asarray(errors_pre_lockdown, dtype=float)
    preds = np.asarray(point_predictions, dtype=float)
    q_lo = empirical_quantile(errors, 0.025)
    q_hi = empirical_quantile(errors, 0.975)
    upper_offset = abs(q_lo)
    lower_offset = q_hi
    return preds - lower_offset, preds + upper_offset, (lower_offset, upper_offset)


@dataclass
class WindowSummary:
    name: str
    start: dt.date
    end: dt.date
    n_hours: int
    mean_actual: float
    mean_predicted: float
    ratio_actual_over_predicted: float  # (mean actual)/(mean predicted) - 1
    rmse: float
    error_q025: float
    error_q975: float
    wilcoxon: WilcoxonResult | None
    wilcoxon_degenerate: bool = False
    band_coverage: float | None = None

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "start": self.start.isoformat(),
            "end": self.end.isoformat(),
            "n_hours": self.n_hours,
            "mean_actual": self.mean_actual,
            "mean_predicted": self.mean_predicted,
            "ratio_actual_over_predicted": self.ratio_actual_over_predicted,
            "rmse": self.rmse,
            "error_q025": self.error_q025,
            "error_q975": self.error_q975,
            "wilcoxon_degenerate": self.wilcoxon_degenerate,
            "band_coverage": self.band_coverage,
        }
        if self.wilcoxon is not None:
            doc["wilcoxon"] = {
                "W": self.wilcoxon.statistic,
                "z": self.wilcoxon.z,
                "p_value": self.wilcoxon.p_value,
                "n": self.wilcoxon.n,
                "mode": self.wilcoxon.mode,
            }
        else:
            doc["wilcoxon"] = None
        return doc


@dataclass
class EvaluationReport:
    """Per-hour predictions plus per-window statistics.

    ``hourly`` has columns timestamp, actual, predicted, error, band_lower,
    band_upper. The band offsets come from the designated source window's
    errors (the pre-lockdown window in the headline design).
    """

    hourly: pd.DataFrame
    windows: dict[str, WindowSummary]
    band_offsets: tuple[float, float]
    band_source: str
    quantile_method: str = "linear-interpolation-(n-1)q"

    def to_json(self) -> str:
        doc = {
            "band_lower_offset": self.band_offsets[0],
            "band_upper_offset": self.band_offsets[1],
            "band_source": self.band_source,
            "quantile_method": self.quantile_method,
            "windows": {name: w.to_dict() for name, w in self.windows.items()},
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def hourly_to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("timestamp,actual,predicted,error,band_lower,band_upper\n")
            for row in self.hourly.itertuples(index=False):
                fh.write(
                    f"{row.timestamp},{row.actual!r},{row.predicted!r},"
                    f"{row.error!r},{row.band_lower!r},{row.band_upper!r}\n"
                )


def summarize_windows(
    timestamps: pd.DatetimeIndex,
    actual,
    predicted,
    windows: dict[str, DateRange],
    band_source: str,
    timezone: str = "UTC",
    wilcoxon_mode: str = "asymptotic",
) -> EvaluationReport:
    """Window-level comparison of predictions against realised costs.

    Every window must be fully covered by the supplied hours. The prediction
    band is derived from the ``band_source`` window's errors and applied to
    all hours; coverage (share of actuals inside the band) is reported per
    window.
    """
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if not (len(timestamps) == len(actual) == len(predicted)):
        raise SpecError("timestamps, actual and predicted must have equal length")
    if band_source not in windows:
        raise SpecError(f"band source window {band_source!r} not among windows")

    errors = predicted - actual
    days = local_dates(timestamps, timezone)

    masks: dict[str, np.ndarray] = {}
    for name, window in windows.items():
        mask = (days >= window.start) & (days <= window.end)
        expected_days = np.unique(days[mask])
        if len(expected_days) < window.n_days():
            missing = window.n_days() - len(expected_days)
            raise CoverageError(
                f"window {name!r} ({window.start}..{window.end}) is missing {missing} day(s)"
            )
        masks[name] = mask

    lower, upper, offsets = prediction_band(errors[masks[band_source]], predicted)

    summaries: dict[str, WindowSummary] = {}
    for name, window in windows.items():
        mask = masks[name]
        a, p, e = actual[mask], predicted[mask], errors[mask]
        mean_a, mean_p = float(a.mean()), float(p.mean())
        try:
            wres = wilcoxon_signed_rank(p, a, mode=wilcoxon_mode)
            degenerate = False
        except DegenerateInputError:
            wres, degenerate = None, True
        inside = (a >= lower[mask]) & (a <= upper[mask])
        summaries[name] = WindowSummary(
            name=name,
            start=window.start,
            end=window.end,
            n_hours=int(mask.sum()),
            mean_actual=mean_a,
            mean_predicted=mean_p,
            ratio_actual_over_predicted=mean_a / mean_p - 1.0,
            rmse=rmse(a, p),
            error_q025=empirical_quantile(e, 0.025),
            error_q975=empirical_quantile(e, 0.975),
            wilcoxon=wres,
            wilcoxon_degenerate=degenerate,
            band_coverage=float(inside.mean()),
        )

    hourly = pd.DataFrame(
        {
            "timestamp": timestamps.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "actual": actual,
            "predicted": predicted,
            "error": errors,
            "band_lower": lower,
            "band_upper": upper,
        }
    )
    return EvaluationReport(
        hourly=hourly,
        windows=summaries,
        band_offsets=offsets,
        band_source=band_source,
    )
