"""Research-design partitions: day-level train/validation split plus the two
fixed out-of-sample windows (pre-lockdown and lockdown).

The split is by calendar day so all 24 hours of a day land in the same fold,
preventing intra-day leakage. Plans are seeded and serialise to JSON for
audit.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .errors import SpecError

# Identifies the shuffle algorithm backing a serialised plan so stored plans
# stay reproducible if the default ever changes.
RNG_ALGORITHM = "numpy-pcg64"

DEFAULT_IN_SAMPLE = (dt.date(2017, 1, 1), dt.date(2019, 12, 31))
DEFAULT_OOS_PRE_LOCKDOWN = (dt.date(2020, 1, 1), dt.date(2020, 3, 7))
DEFAULT_OOS_LOCKDOWN = (dt.date(2020, 3, 8), dt.date(2020, 4, 26))

TRAIN, VALIDATION, OOS_PRE, OOS_LOCKDOWN = "train", "validation", "oos_pre", "oos_lockdown"


@dataclass(frozen=True)
class DateRange:
    start: dt.date
    end: dt.date

    def __post_init__(self):
        if self.end < self.start:
            raise SpecError(f"empty date range: {self.start}..{self.end}")

    def __contains__(self, day: dt.date) -> bool:
        return self.start <= day <= self.end

    def days(self) -> list[dt.date]:
        n = (self.end - self.start).days + 1
        return [self.start + dt.timedelta(days=i) for i in range(n)]

    def n_days(self) -> int:
        return (self.end - self.start).days + 1

    def overlaps(self, other: "DateRange") -> bool:
        return self.start <= other.end and other.start <= self.end

    def as_list(self) -> list[str]:
        return [self.start.isoformat(), self.end.isoformat()]

    @staticmethod
    def parse(pair) -> "DateRange":
        start, end = pair
        if isinstance(start, str):
            start = dt.date.fromisoformat(start)
        if isinstance(end, str):
            end = dt.date.fromisoformat(end)
        return DateRange(start, end)


@dataclass(frozen=True)
class SplitPlan:
    train_days: frozenset[dt.date]
    validation_days: frozenset[dt.date]
    oos_pre_lockdown: DateRange
    oos_lockdown: DateRange
    seed: int
    in_sample_range: DateRange
    ratio: float = 0.7

    def fold_of_day(self, day: dt.date) -> str | None:
        if day in self.train_days:
            return TRAIN
        if day in self.validation_days:
            return VALIDATION
        if day in self.oos_pre_lockdown:
            return OOS_PRE
        if day in self.oos_lockdown:
            return OOS_LOCKDOWN
        return None

    def day_mask(self, days: np.ndarray, fold: str) -> np.ndarray:
        """Boolean mask over an array of local dates selecting one fold."""
        if fold == TRAIN:
            members = self.train_days
        elif fold == VALIDATION:
            members = self.validation_days
        elif fold == OOS_PRE:
            members = frozenset(self.oos_pre_lockdown.days())
        elif fold == OOS_LOCKDOWN:
            members = frozenset(self.oos_lockdown.days())
        else:
            raise SpecError(f"unknown fold {fold!r}")
        return np.array([d in members for d in days], dtype=bool)


def make_split(
    in_sample_range: DateRange | tuple[dt.date, dt.date] = DEFAULT_IN_SAMPLE,
    ratio: float = 0.7,
    seed: int = 0,
    oos_pre_lockdown: DateRange | tuple[dt.date, dt.date] = DEFAULT_OOS_PRE_LOCKDOWN,
    oos_lockdown: DateRange | tuple[dt.date, dt.date] = DEFAULT_OOS_LOCKDOWN,
) -> SplitPlan:
    """Randomly assign floor(ratio * N) in-sample days to training.

    Deterministic for a given seed; the remaining days form the validation
    set. The out-of-sample windows must not intersect the in-sample range.
    """
    if not 0 < ratio < 1:
        raise SpecError(f"ratio must be in (0, 1), got {ratio}")
    in_sample_range = _as_range(in_sample_range)
    oos_pre_lockdown = _as_range(oos_pre_lockdown)
    oos_lockdown = _as_range(oos_lockdown)
    for window in (oos_pre_lockdown, oos_lockdown):
        if window.overlaps(in_sample_range):
            raise SpecError(
                f"out-of-sample window {window.start}..{window.end} intersects the "
                f"in-sample range {in_sample_range.start}..{in_sample_range.end}"
            )

    days = in_sample_range.days()
    n_train = math.floor(ratio * len(days))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(days))
    train = frozenset(days[i] for i in perm[:n_train])
    validation = frozenset(days[i] for i in perm[n_train:])
    return SplitPlan(
        train_days=train,
        validation_days=validation,
        oos_pre_lockdown=oos_pre_lockdown,
        oos_lockdown=oos_lockdown,
        seed=seed,
        in_sample_range=in_sample_range,
        ratio=ratio,
    )


def restrict_in_sample(plan: SplitPlan, year: int) -> SplitPlan:
    """Re-split on the in-sample days of one year, keeping seed and ratio.

    The out-of-sample windows are unchanged. Restricting twice to the same
    year is idempotent.
    """
    lo = max(plan.in_sample_range.start, dt.date(year, 1, 1))
    hi = min(plan.in_sample_range.end, dt.date(year, 12, 31))
    if lo > hi:
        raise SpecError(f"year {year} lies outside the in-sample range")
    return make_split(
        in_sample_range=DateRange(lo, hi),
        ratio=plan.ratio,
        seed=plan.seed,
        oos_pre_lockdown=plan.oos_pre_lockdown,
        oos_lockdown=plan.oos_lockdown,
    )


def _as_range(r) -> DateRange:
    return r if isinstance(r, DateRange) else DateRange.parse(r)


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def plan_to_json(plan: SplitPlan) -> str:
    doc = {
        "version": 1,
        "rng": RNG_ALGORITHM,
        "seed": plan.seed,
        "ratio": plan.ratio,
        "in_sample_range": plan.in_sample_range.as_list(),
        "oos_pre_lockdown": plan.oos_pre_lockdown.as_list(),
        "oos_lockdown": plan.oos_lockdown.as_list(),
        "train_days": sorted(d.isoformat() for d in plan.train_days),
        "validation_days": sorted(d.isoformat() for d in plan.validation_days),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def plan_from_json(text: str) -> SplitPlan:
    doc = json.loads(text)
    return SplitPlan(
        train_days=frozenset(dt.date.fromisoformat(d) for d in doc["train_days"]),
        validation_days=frozenset(dt.date.fromisoformat(d) for d in doc["validation_days"]),
        oos_pre_lockdown=DateRange.parse(doc["oos_pre_lockdown"]),
        oos_lockdown=DateRange.parse(doc["oos_lockdown"]),
        seed=int(doc["seed"]),
        in_sample_range=DateRange.parse(doc["in_sample_range"]),
        ratio=float(doc["ratio"]),
    )
