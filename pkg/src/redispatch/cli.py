"""Command-line pipeline: synth, ingest, train, tune, evaluate, scenario.

Every command reads one YAML run-config (all settings have defaults mirroring
the reference setup), writes machine-readable artifacts plus a resolved copy
of its configuration into the output directory, and is byte-identical across
reruns with the same inputs. Diagnostics go to stderr, data to files.

Exit codes: 0 success, 1 usage/spec error, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import copy
import datetime as dt
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import evaluation, features, linreg, market_data, mlp, net_demand
from . import scenarios as scenario_mod
from . import splits as splits_mod
from . import synth as synth_mod
from . import tuner as tuner_mod
from .errors import DataError, NumericError, RedispatchError

DEFAULT_CONFIG: dict = {
    "paths": {
        "zonal": "data/zonal.csv",
        "national": "data/national.csv",
        "holidays": "data/holidays.txt",
    },
    "ingest": {
        "max_gap": 6,
        "winter_months": [10, 11, 12, 1, 2, 3, 4],
        "timezone": "UTC",
    },
    "split": {
        "seed": 20170101,
        "ratio": 0.7,
        "in_sample": ["2017-01-01", "2019-12-31"],
        "oos_pre_lockdown": ["2020-01-01", "2020-03-07"],
        "oos_lockdown": ["2020-03-08", "2020-04-26"],
        "restrict_to_year": None,
    },
    "features": {
        "price_column": "da_price",
        "poly_degree": 1,
        "lags": 0,
        "leads": 0,
        "scale_target": False,
    },
    "model": {
        "kind": "mlp",
        "mlp": {
            "n1": 48,
            "n2": 48,
            "activation": "relu",
            "dropout": 0.1,
            "learning_rate": 0.006161,
            "max_epochs": 1500,
            "patience": 5,
            "batch_size": 32,
            "seed": 0,
            "rmsprop_decay": 0.9,
            "rmsprop_epsilon": 1.0e-7,
        },
        "ols": {"degree": 1},
    },
    "tuner": {
        "R": 81,
        "eta": 3,
        "seed": 0,
        "space": {
            "activations": ["relu", "tanh", "sigmoid"],
            "learning_rate_bounds": [1.0e-4, 1.0e-2],
            "dropouts": [0.1, 0.2, 0.3, 0.4, 0.5],
            "n1": [16, 32, 48],
            "n2": [16, 32, 48],
        },
    },
    "scenarios": {
        "kinds": ["scale", "smooth_time", "smooth_time_space"],
        "factor": 2.0,
        "evaluation_range": ["2017-01-01", "2020-03-07"],
    },
    "synth": {
        "start": "2017-01-01",
        "end": "2020-04-26",
        "seed": 20170101,
        "lockdown": {
            "start": "2020-03-08",
            "end": "2020-04-26",
            "demand_multiplier": 0.8,
            "cost_multiplier": 1.25,
        },
        "cost": {
            "beta_linear": 4.0,
            "beta_quadratic": 3.0e-4,
            "beta_forecast_error": 30.0,
            "beta_workday": 15000.0,
            "noise_std": 15000.0,
        },
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    with open(path) as fh:
        user = yaml.safe_load(fh) or {}
    if not isinstance(user, dict):
        raise click.UsageError("run config must be a YAML mapping")
    return _deep_merge(DEFAULT_CONFIG, user)


def _as_date(value) -> dt.date:
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value))


def _date_pair(pair) -> tuple[dt.date, dt.date]:
    return _as_date(pair[0]), _as_date(pair[1])


def _write_resolved(config: dict, out_dir: Path) -> None:
    def normalise(obj):
        if isinstance(obj, dict):
            return {k: normalise(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [normalise(v) for v in obj]
        if isinstance(obj, dt.date):
            return obj.isoformat()
        return obj

    with open(out_dir / "resolved_config.yaml", "w") as fh:
        yaml.safe_dump(normalise(config), fh, sort_keys=True)


def _write_json(doc, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ingest_config(config: dict) -> market_data.IngestConfig:
    section = config["ingest"]
    return market_data.IngestConfig(
        max_gap=int(section["max_gap"]),
        winter_months=frozenset(int(m) for m in section["winter_months"]),
        timezone=str(section["timezone"]),
    )


def _load_panel(config: dict) -> tuple[market_data.MarketDataset, net_demand.NetDemandPanel]:
    paths = config["paths"]
    dataset = market_data.load_dataset(
        paths["zonal"], paths["national"], paths["holidays"], _ingest_config(config)
    )
    return dataset, net_demand.build_panel(dataset)


def _make_plan(config: dict) -> splits_mod.SplitPlan:
    section = config["split"]
    plan = splits_mod.make_split(
        in_sample_range=_date_pair(section["in_sample"]),
        ratio=float(section["ratio"]),
        seed=int(section["seed"]),
        oos_pre_lockdown=_date_pair(section["oos_pre_lockdown"]),
        oos_lockdown=_date_pair(section["oos_lockdown"]),
    )
    year = section.get("restrict_to_year")
    if year:
        plan = splits_mod.restrict_in_sample(plan, int(year))
    return plan


def _feature_spec(config: dict) -> features.FeatureSpec:
    section = config["features"]
    return features.FeatureSpec(
        price_column=section["price_column"],
        poly_degree=int(section["poly_degree"]),
        lags_system_nd=int(section["lags"]),
        leads_system_ndfc=int(section["leads"]),
        scale_target=bool(section["scale_target"]),
    )


def _mlp_config(config: dict, seed_override: int | None) -> mlp.MlpConfig:
    section = dict(config["model"]["mlp"])
    if seed_override is not None:
        section["seed"] = seed_override
    return mlp.MlpConfig(
        n1=int(section["n1"]),
        n2=int(section["n2"]),
        activation=section["activation"],
        dropout=float(section["dropout"]),
        learning_rate=float(section["learning_rate"]),
        max_epochs=int(section["max_epochs"]),
        patience=None if section["patience"] is None else int(section["patience"]),
        batch_size=None if section["batch_size"] is None else int(section["batch_size"]),
        seed=int(section["seed"]),
        rmsprop_decay=float(section["rmsprop_decay"]),
        rmsprop_epsilon=float(section["rmsprop_epsilon"]),
    )


def _load_model_file(path: str):
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "mlp":
        return mlp.model_from_dict(doc)
    if kind == "ols":
        return linreg.model_from_dict(doc)
    raise click.UsageError(f"unrecognised model document kind {kind!r} in {path}")


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DataError, FileNotFoundError) as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(2)
        except NumericError as exc:
            click.echo(f"numeric error: {exc}", err=True)
            sys.exit(3)
        except RedispatchError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main() -> None:
    """Re-dispatch cost prediction pipeline."""


config_option = click.option("--config", "config_path", type=click.Path(exists=True),
                             default=None, help="YAML run config (defaults built in).")
out_option = click.option("--out", "out_dir", type=click.Path(), required=True,
                          help="Output directory.")
seed_option = click.option("--seed", "seed_override", type=int, default=None,
                           help="Override the command's primary seed.")


@main.command("synth")
@config_option
@out_option
@seed_option
@handle_errors
def cmd_synth(config_path, out_dir, seed_override) -> None:
    """Generate a synthetic dataset with known ground truth."""
    config = load_config(config_path)
    section = config["synth"]
    if seed_override is not None:
        section["seed"] = seed_override
    lockdown = None
    if section.get("lockdown"):
        ld = section["lockdown"]
        lockdown = synth_mod.LockdownShock(
            start=_as_date(ld["start"]),
            end=_as_date(ld["end"]),
            demand_multiplier=float(ld["demand_multiplier"]),
            cost_multiplier=float(ld["cost_multiplier"]),
        )
    cost = section["cost"]
    generator = synth_mod.GeneratorConfig(
        start=_as_date(section["start"]),
        end=_as_date(section["end"]),
        seed=int(section["seed"]),
        cost_params=synth_mod.CostParams(
            beta_linear=float(cost["beta_linear"]),
            beta_quadratic=float(cost["beta_quadratic"]),
            beta_forecast_error=float(cost["beta_forecast_error"]),
            beta_workday=float(cost["beta_workday"]),
            noise_std=float(cost["noise_std"]),
        ),
        lockdown=lockdown,
        winter_months=frozenset(int(m) for m in config["ingest"]["winter_months"]),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = synth_mod.write_files(generator, out)
    _write_resolved(config, out)
    click.echo(f"wrote {', '.join(str(p) for p in paths.values())}", err=True)


@main.command("ingest")
@config_option
@out_option
@handle_errors
def cmd_ingest(config_path, out_dir) -> None:
    """Load, validate and gap-fill the dataset; write the net-demand panel."""
    config = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset, panel = _load_panel(config)
    panel.to_csv(out / "panel.csv")
    _write_json(market_data.ingestion_report(dataset), out / "ingestion_report.json")
    _write_resolved(config, out)
    report = market_data.ingestion_report(dataset)
    click.echo(
        f"{report['national_rows']} hours ({report['expected_hours']} expected on the "
        f"grid), {sum(report['interpolated_cells'].values())} interpolated cells",
        err=True,
    )


@main.command("train")
@config_option
@out_option
@seed_option
@handle_errors
def cmd_train(config_path, out_dir, seed_override) -> None:
    """Train the configured model (network or OLS baseline)."""
    config = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, panel = _load_panel(config)
    plan = _make_plan(config)
    kind = config["model"]["kind"]

    if kind == "mlp":
        spec = _feature_spec(config)
        design = features.build_design(panel, spec, plan)
        model = mlp.train(design, plan, _mlp_config(config, seed_override))
        mlp.save_model(model, out / "model.json")
        with open(out / "trace.csv", "w") as fh:
            fh.write("epoch,train_mse,val_mse\n")
            for epoch, train_mse, val_mse in model.training_trace:
                fh.write(f"{epoch},{train_mse!r},{val_mse!r}\n")
        click.echo(
            f"trained {len(model.training_trace)} epochs, best epoch "
            f"{model.best_epoch}, val MSE {min(t[2] for t in model.training_trace):.6g}",
            err=True,
        )
    elif kind == "ols":
        degree = int(config["model"]["ols"]["degree"])
        spec = features.FeatureSpec(
            price_column=config["features"]["price_column"],
            poly_degree=degree,
            lags_system_nd=int(config["features"]["lags"]),
            leads_system_ndfc=int(config["features"]["leads"]),
            scale_target=bool(config["features"]["scale_target"]),
        )
        design = features.build_design(panel, spec, plan)
        in_sample = design.fold_mask(plan, splits_mod.TRAIN) | design.fold_mask(
            plan, splits_mod.VALIDATION
        )
        model = linreg.fit_ols(design, in_sample)
        linreg.save_model(model, out / "model.json")
        linreg.coefficients_to_csv(model, out / "coefficients.csv")
        click.echo(
            f"fitted {model.rank} of {len(model.column_names) + 1} columns, "
            f"rss {model.rss:.6g}",
            err=True,
        )
    else:
        raise click.UsageError(f"unknown model kind {kind!r}")

    with open(out / "split.json", "w") as fh:
        fh.write(splits_mod.plan_to_json(plan))
    _write_resolved(config, out)


@main.command("tune")
@config_option
@out_option
@seed_option
@handle_errors
def cmd_tune(config_path, out_dir, seed_override) -> None:
    """Hyperband search over the network hyper-parameter space."""
    config = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, panel = _load_panel(config)
    plan = _make_plan(config)
    design = features.build_design(panel, _feature_spec(config), plan)

    section = config["tuner"]
    space_cfg = section["space"]
    space = tuner_mod.SearchSpace(
        activations=tuple(space_cfg["activations"]),
        learning_rate_bounds=tuple(float(x) for x in space_cfg["learning_rate_bounds"]),
        dropouts=tuple(float(x) for x in space_cfg["dropouts"]),
        n1_choices=tuple(int(x) for x in space_cfg["n1"]),
        n2_choices=tuple(int(x) for x in space_cfg["n2"]),
    )
    seed = seed_override if seed_override is not None else int(section["seed"])
    result = tuner_mod.run_hyperband(
        design,
        plan,
        space,
        R=int(section["R"]),
        eta=int(section["eta"]),
        seed=seed,
        base_config=_mlp_config(config, None),
    )
    result.leaderboard_to_csv(out / "leaderboard.csv")
    result.best_config_to_json(out / "best_config.json")
    if result.final_model is not None:
        mlp.save_model(result.final_model, out / "model.json")
    _write_resolved(config, out)
    click.echo(
        f"{len(result.leaderboard)} trials over {result.total_epochs} epochs; "
        f"best val MSE {result.best_val_mse:.6g}",
        err=True,
    )


@main.command("evaluate")
@config_option
@out_option
@click.option("--model", "model_path", type=click.Path(exists=True), required=True,
              help="Model JSON written by train/tune.")
@handle_errors
def cmd_evaluate(config_path, out_dir, model_path) -> None:
    """Out-of-sample evaluation over the pre-lockdown and lockdown windows."""
    config = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, panel = _load_panel(config)
    plan = _make_plan(config)
    model = _load_model_file(model_path)
    if model.feature_spec is None or model.scaler is None:
        raise click.UsageError("model file lacks feature spec / scaler metadata")

    design = features.build_design(
        panel, model.feature_spec, scaler=model.scaler,
        target_scaler=model.target_scaler,
    )
    days = design.local_days()
    oos_mask = plan.day_mask(days, splits_mod.OOS_PRE) | plan.day_mask(
        days, splits_mod.OOS_LOCKDOWN
    )
    if not oos_mask.any():
        raise DataError("no out-of-sample hours found in the panel")
    predictions = model.predict(design.X[oos_mask])
    report = evaluation.summarize_windows(
        design.rows[oos_mask],
        design.y[oos_mask],
        predictions,
        windows={
            "pre_lockdown": plan.oos_pre_lockdown,
            "lockdown": plan.oos_lockdown,
        },
        band_source="pre_lockdown",
        timezone=panel.timezone,
    )
    with open(out / "evaluation.json", "w") as fh:
        fh.write(report.to_json())
    report.hourly_to_csv(out / "hourly.csv")
    _write_resolved(config, out)
    for name, window in report.windows.items():
        p = window.wilcoxon.p_value if window.wilcoxon else float("nan")
        click.echo(
            f"{name}: rmse {window.rmse:.6g}, actual/predicted "
            f"{window.ratio_actual_over_predicted:+.1%}, wilcoxon p {p:.4g}",
            err=True,
        )


@main.command("scenario")
@config_option
@out_option
@click.option("--model", "model_path", type=click.Path(exists=True), required=True,
              help="Model JSON trained on the gas-price dynamic spec.")
@handle_errors
def cmd_scenario(config_path, out_dir, model_path) -> None:
    """Renewable-expansion counterfactuals with a trained model."""
    config = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, panel = _load_panel(config)
    model = _load_model_file(model_path)
    section = config["scenarios"]
    evaluation_range = splits_mod.DateRange.parse(
        [_as_date(d) for d in section["evaluation_range"]]
    )
    reports = []
    for kind in section["kinds"]:
        spec = scenario_mod.ScenarioSpec(
            kind=kind,
            factor=float(section["factor"]),
            lags_system_nd=model.feature_spec.lags_system_nd,
            leads_system_ndfc=model.feature_spec.leads_system_ndfc,
            evaluation_range=evaluation_range,
        )
        reports.append(scenario_mod.run_scenario(spec, model, panel))

    removed = [r.energy_removed_mwh for r in reports]
    if len(removed) > 1:
        spread = max(removed) - min(removed)
        reference = max(abs(e) for e in removed) or 1.0
        if spread > 1e-9 * reference:
            raise NumericError(
                f"energy-conservation check failed: removed {removed} MWh"
            )
        click.echo(
            f"energy conservation ok: all kinds remove {removed[0]:.6g} MWh",
            err=True,
        )

    scenario_mod.reports_to_csv(reports, out / "scenarios.csv")
    scenario_mod.reports_to_json(reports, out / "scenarios.json")
    _write_resolved(config, out)
    for r in reports:
        click.echo(
            f"{r.kind}: delta {r.delta_mean_eur:+.6g} EUR/h "
            f"({r.relative_change_vs_predicted:+.1%} vs predicted baseline)",
            err=True,
        )


if __name__ == "__main__":
    main()
