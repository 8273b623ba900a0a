"""Renewable-expansion counterfactuals.

Three ways of removing the same total energy from net demand: scaling the
hourly zonal renewable output, smoothing it over time (per-zone sample
averages), or smoothing it over time and space (one sixth of the system
average from each demand zone, the production-only zone untouched). Costs
are then predicted on the modified panel with a model trained on the
gas-price covariate.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericError, SpecError
from .features import build_design
from .market_data import DEMAND_ZONE_SLUGS, ZONE_SLUGS
from .net_demand import NetDemandPanel, recompute_system_columns
from .splits import DateRange

SCENARIO_KINDS = ("scale", "smooth_time", "smooth_time_space")

DEFAULT_EVALUATION_RANGE = DateRange(dt.date(2017, 1, 1), dt.date(2020, 3, 7))


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    factor: float = 2.0
    price_column: str = "gas_price"
    lags_system_nd: int = 24
    leads_system_ndfc: int = 24
    evaluation_range: DateRange = DEFAULT_EVALUATION_RANGE

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise SpecError(f"scenario kind must be one of {SCENARIO_KINDS}")
        if self.factor <= 0:
            raise SpecError("factor must be positive")


def _apply_reduction(panel: NetDemandPanel, nd_cut: dict[str, np.ndarray],
                     ndfc_cut: dict[str, np.ndarray]) -> NetDemandPanel:
    frame = panel.frame.copy()
    for slug, cut in nd_cut.items():
        frame[f"nd_{slug}"] = frame[f"nd_{slug}"].to_numpy() - cut
    for slug, cut in ndfc_cut.items():
        frame[f"ndfc_{slug}"] = frame[f"ndfc_{slug}"].to_numpy() - cut
    recompute_system_columns(frame)
    return NetDemandPanel(frame, panel.timezone)


def apply_scale(panel: NetDemandPanel, factor: float) -> NetDemandPanel:
    """Scale hourly zonal renewable output by ``factor``: each zone's net
    demand drops by (factor-1) times its hourly solar+wind, forecasts by the
    same rule on forecast renewables."""
    f = factor - 1.0
    nd_cut = {s: f * panel.frame[f"res_{s}"].to_numpy() for s in ZONE_SLUGS}
    ndfc_cut = {s: f * panel.frame[f"resfc_{s}"].to_numpy() for s in ZONE_SLUGS}
    return _apply_reduction(panel, nd_cut, ndfc_cut)


def apply_smooth_time(panel: NetDemandPanel, factor: float) -> NetDemandPanel:
    """Remove each zone's sample-average renewable output uniformly over
    time (constant per zone across hours)."""
    f = factor - 1.0
    n = len(panel.frame)
    nd_cut = {}
    ndfc_cut = {}
    for s in ZONE_SLUGS:
        nd_cut[s] = np.full(n, f * float(panel.frame[f"res_{s}"].to_numpy().mean()))
        ndfc_cut[s] = np.full(n, f * float(panel.frame[f"resfc_{s}"].to_numpy().mean()))
    return _apply_reduction(panel, nd_cut, ndfc_cut)


def apply_smooth_time_space(panel: NetDemandPanel, factor: float) -> NetDemandPanel:
    """Remove one sixth of the system-average renewable output from each of
    the six demand zones, uniformly over time; the production-only zone is
    untouched."""
    f = factor - 1.0
    n = len(panel.frame)
    res_system = np.zeros(n)
    resfc_system = np.zeros(n)
    for s in ZONE_SLUGS:
        res_system = res_system + panel.frame[f"res_{s}"].to_numpy()
        resfc_system = resfc_system + panel.frame[f"resfc_{s}"].to_numpy()
    share = 1.0 / len(DEMAND_ZONE_SLUGS)
    nd_cut = {s: np.full(n, f * share * float(res_system.mean()))
              for s in DEMAND_ZONE_SLUGS}
    ndfc_cut = {s: np.full(n, f * share * float(resfc_system.mean()))
                for s in DEMAND_ZONE_SLUGS}
    return _apply_reduction(panel, nd_cut, ndfc_cut)


_APPLIERS = {
    "scale": apply_scale,
    "smooth_time": apply_smooth_time,
    "smooth_time_space": apply_smooth_time_space,
}


def apply_scenario(panel: NetDemandPanel, spec: ScenarioSpec) -> NetDemandPanel:
    return _APPLIERS[spec.kind](panel, spec.factor)


def energy_removed(baseline: NetDemandPanel, modified: NetDemandPanel) -> float:
    """Total MWh removed from zonal net demands relative to the baseline."""
    total = 0.0
    for s in ZONE_SLUGS:
        total += float(
            (baseline.frame[f"nd_{s}"].to_numpy() - modified.frame[f"nd_{s}"].to_numpy()).sum()
        )
    return total


@dataclass
class ScenarioReport:
    kind: str
    factor: float
    n_hours: int
    evaluation_range: DateRange
    mean_baseline_predicted: float
    mean_scenario_predicted: float
    delta_mean_eur: float
    relative_change_vs_predicted: float
    relative_change_vs_actual: float
    mean_actual: float
    energy_removed_mwh: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "factor": self.factor,
            "n_hours": self.n_hours,
            "evaluation_range": self.evaluation_range.as_list(),
            "mean_baseline_predicted": self.mean_baseline_predicted,
            "mean_scenario_predicted": self.mean_scenario_predicted,
            "delta_mean_eur": self.delta_mean_eur,
            "relative_change_vs_predicted": self.relative_change_vs_predicted,
            "relative_change_vs_actual": self.relative_change_vs_actual,
            "mean_actual": self.mean_actual,
            "energy_removed_mwh": self.energy_removed_mwh,
        }


def run_scenario(spec: ScenarioSpec, model, panel: NetDemandPanel) -> ScenarioReport:
    """Predict hourly costs on the baseline and the modified panel over the
    evaluation range and report the mean difference.

    The model must have been trained on a feature spec matching the
    scenario's price column and lag/lead structure; its stored scaler is
    reused so both panels are standardised identically.
    """
    if model.feature_spec is None or model.scaler is None:
        raise SpecError("model lacks feature spec / scaler metadata")
    fs = model.feature_spec
    if fs.price_column != spec.price_column:
        raise SpecError(
            f"model was trained on {fs.price_column!r}, scenario requires "
            f"{spec.price_column!r}"
        )
    if (fs.lags_system_nd, fs.leads_system_ndfc) != (spec.lags_system_nd, spec.leads_system_ndfc):
        raise SpecError(
            f"model lag/lead structure ({fs.lags_system_nd}/{fs.leads_system_ndfc}) "
            f"does not match scenario ({spec.lags_system_nd}/{spec.leads_system_ndfc})"
        )

    base = panel.slice_dates(spec.evaluation_range.start, spec.evaluation_range.end)
    modified = apply_scenario(base, spec)

    base_design = build_design(base, fs, plan=None, scaler=model.scaler,
                               target_scaler=model.target_scaler)
    mod_design = build_design(modified, fs, plan=None, scaler=model.scaler,
                              target_scaler=model.target_scaler)

    base_pred = model.predict(base_design.X)
    mod_pred = model.predict(mod_design.X)
    mean_base = float(base_pred.mean())
    mean_mod = float(mod_pred.mean())
    if mean_base == 0.0:
        raise NumericError("baseline predicted mean is zero; relative change undefined")
    mean_actual = float(base_design.y.mean())
    delta = mean_mod - mean_base

    return ScenarioReport(
        kind=spec.kind,
        factor=spec.factor,
        n_hours=len(base_design.rows),
        evaluation_range=spec.evaluation_range,
        mean_baseline_predicted=mean_base,
        mean_scenario_predicted=mean_mod,
        delta_mean_eur=delta,
        relative_change_vs_predicted=delta / mean_base,
        relative_change_vs_actual=delta / mean_actual if mean_actual != 0 else float("nan"),
        mean_actual=mean_actual,
        energy_removed_mwh=energy_removed(base, modified),
    )


def renewable_equivalence(
    avg_demand: float, avg_res: float, demand_drop: float
) -> tuple[float, float]:
    """Scale factor on renewable output equivalent to a demand drop.

    factor = 1 + demand_drop * avg_demand / avg_res; also returns the implied
    average renewable output factor * avg_res.
    """
    if avg_res <= 0:
        raise NumericError("average renewable output must be positive")
    if not 0 < demand_drop < 1:
        raise SpecError("demand_drop must be a fraction in (0, 1)")
    factor = 1.0 + demand_drop * avg_demand / avg_res
    return factor, factor * avg_res


def reports_to_csv(reports: list[ScenarioReport], path: str | Path) -> None:
    """Summary table: one row per scenario kind."""
    with open(path, "w", newline="") as fh:
        fh.write(
            "kind,factor,delta_mean_eur_per_hour,relative_change_vs_predicted,"
            "relative_change_vs_actual,energy_removed_mwh,n_hours\n"
        )
        for r in reports:
            fh.write(
                f"{r.kind},{r.factor!r},{r.delta_mean_eur!r},"
                f"{r.relative_change_vs_predicted!r},{r.relative_change_vs_actual!r},"
                f"{r.energy_removed_mwh!r},{r.n_hours}\n"
            )


def reports_to_json(reports: list[ScenarioReport], path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")
