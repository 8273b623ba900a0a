import datetime as dt

import numpy as np
import pandas as pd
import pytest

from redispatch import linreg, market_data, net_demand, synth
from redispatch.features import DesignMatrix, FeatureSpec, Scaler
from redispatch.synth import CostParams, GeneratorConfig, LockdownShock


class TestDeterminism:
    def test_same_seed_identical_dataset(self):
        cfg = GeneratorConfig(start=dt.date(2019, 5, 1), end=dt.date(2019, 5, 14), seed=3)
        a, _ = synth.generate(cfg)
        b, _ = synth.generate(cfg)
        pd.testing.assert_frame_equal(a.zonal, b.zonal)
        pd.testing.assert_frame_equal(a.national, b.national)

    def test_different_seed_differs(self):
        base = dict(start=dt.date(2019, 5, 1), end=dt.date(2019, 5, 14))
        a, _ = synth.generate(GeneratorConfig(seed=3, **base))
        b, _ = synth.generate(GeneratorConfig(seed=4, **base))
        assert not a.national["redispatch_cost_eur"].equals(b.national["redispatch_cost_eur"])

    def test_written_files_differ_across_seeds(self, tmp_path):
        base = dict(start=dt.date(2019, 5, 1), end=dt.date(2019, 5, 7))
        synth.write_files(GeneratorConfig(seed=1, **base), tmp_path / "a")
        synth.write_files(GeneratorConfig(seed=2, **base), tmp_path / "b")
        assert (tmp_path / "a/national.csv").read_bytes() != (
            tmp_path / "b/national.csv"
        ).read_bytes()


class TestPhysicalInvariants:
    def test_non_negative_series(self, small_dataset):
        z = small_dataset.zonal
        for col in ("demand_mwh", "demand_forecast_mwh", "solar_mwh",
                    "solar_forecast_mwh", "wind_mwh", "wind_forecast_mwh",
                    "hydro_ror_mwh"):
            assert (z[col] >= 0).all(), col

    def test_contiguous_hourly_grid(self, small_dataset):
        hours = small_dataset.national["timestamp"]
        deltas = hours.diff().dropna()
        assert (deltas == pd.Timedelta(hours=1)).all()

    def test_load_round_trip_unchanged(self, tmp_path, small_config):
        paths = synth.write_files(small_config, tmp_path)
        ds = market_data.load_dataset(paths["zonal"], paths["national"], paths["holidays"])
        z2, n2 = tmp_path / "z2.csv", tmp_path / "n2.csv"
        market_data.write_dataset(ds, z2, n2)
        assert z2.read_bytes() == paths["zonal"].read_bytes()
        assert n2.read_bytes() == paths["national"].read_bytes()

    def test_gas_price_positive_and_daily(self, small_dataset):
        gas = small_dataset.national["gas_price_eur_mwh"]
        assert (gas > 0).all()
        by_day = gas.groupby(small_dataset.national["timestamp"].dt.date)
        assert (by_day.nunique() == 1).all()

    def test_night_hours_have_zero_solar(self, small_dataset):
        z = small_dataset.zonal
        night = z["timestamp"].dt.hour.isin([0, 1, 2, 3, 22, 23])
        assert (z.loc[night, "solar_mwh"] == 0).all()


class TestGroundTruth:
    def test_noiseless_cost_recovers_quadratic_form(self, small_config):
        dataset, truth = synth.generate(small_config)
        cp = small_config.cost_params
        nd = truth.frame["nd_system"].to_numpy()
        ndfc = truth.frame["ndfc_system"].to_numpy()
        panel = net_demand.build_panel(dataset)
        workday = panel.frame["workday"].to_numpy().astype(float)
        expected = (
            cp.beta_linear * nd
            + cp.beta_quadratic * nd**2
            + cp.beta_forecast_error * np.abs(nd - ndfc)
            + cp.beta_workday * workday
        )
        np.testing.assert_allclose(truth.frame["bau_cost"].to_numpy(), expected, rtol=1e-9)

    def test_truth_nd_matches_panel_nd(self, small_config):
        dataset, truth = synth.generate(small_config)
        panel = net_demand.build_panel(dataset)
        np.testing.assert_allclose(
            truth.frame["nd_system"].to_numpy(),
            panel.frame["nd_system"].to_numpy(),
            rtol=1e-9,
        )

    def test_noise_free_linear_cost_recovered_by_ols(self):
        # With beta2 = beta3 = beta4 = 0 and no noise the cost is exactly
        # linear in system net demand, so a one-column regression on nd_system
        # must recover beta1.
        cfg = GeneratorConfig(
            start=dt.date(2019, 1, 1),
            end=dt.date(2019, 2, 28),
            seed=11,
            lockdown=None,
            cost_params=CostParams(
                beta_linear=6.5, beta_quadratic=0.0, beta_forecast_error=0.0,
                beta_workday=0.0, noise_std=0.0,
            ),
        )
        dataset, truth = synth.generate(cfg)
        panel = net_demand.build_panel(dataset)
        nd = panel.frame["nd_system"].to_numpy()
        y = panel.frame["redispatch_cost"].to_numpy()
        n = len(nd)
        design = DesignMatrix(
            rows=panel.frame.index,
            X=nd[:, None],
            y=y,
            column_names=("nd_system",),
            scaler=Scaler(mean=np.zeros(1), std=np.ones(1)),
            spec=FeatureSpec.preferred(),
            timezone="UTC",
        )
        model = linreg.fit_ols(design, np.ones(n, dtype=bool))
        assert model.coefficients[0] == pytest.approx(6.5, abs=1e-6)
        assert model.intercept == pytest.approx(0.0, abs=1e-3)


class TestLockdownShock:
    def test_window_demand_ratio_matches_multiplier(self):
        base = dict(start=dt.date(2020, 1, 1), end=dt.date(2020, 4, 26), seed=9)
        shocked, _ = synth.generate(GeneratorConfig(
            lockdown=LockdownShock(demand_multiplier=0.8, cost_multiplier=1.0), **base
        ))
        unshocked, _ = synth.generate(GeneratorConfig(lockdown=None, **base))
        window = (
            (shocked.zonal["timestamp"] >= pd.Timestamp("2020-03-08", tz="UTC"))
            & (shocked.zonal["timestamp"] < pd.Timestamp("2020-04-27", tz="UTC"))
        )
        ratio = (
            shocked.zonal.loc[window, "demand_mwh"].mean()
            / unshocked.zonal.loc[window, "demand_mwh"].mean()
        )
        assert ratio == pytest.approx(0.8, rel=0.01)

    def test_cost_multiplier_applied_inside_window_only(self):
        base = dict(start=dt.date(2020, 2, 1), end=dt.date(2020, 4, 26), seed=9)
        shock = LockdownShock(demand_multiplier=1.0, cost_multiplier=1.25)
        shocked, truth_s = synth.generate(GeneratorConfig(lockdown=shock, **base))
        plain, truth_p = synth.generate(GeneratorConfig(lockdown=None, **base))
        inside = truth_s.frame.index >= pd.Timestamp("2020-03-08", tz="UTC")
        np.testing.assert_allclose(
            truth_s.frame.loc[inside, "noiseless_cost"].to_numpy(),
            1.25 * truth_p.frame.loc[inside, "noiseless_cost"].to_numpy(),
            rtol=1e-9,
        )
        np.testing.assert_allclose(
            truth_s.frame.loc[~inside, "noiseless_cost"].to_numpy(),
            truth_p.frame.loc[~inside, "noiseless_cost"].to_numpy(),
            rtol=1e-9,
        )

    def test_ground_truth_csv(self, tmp_path, small_config):
        paths = synth.write_files(small_config, tmp_path)
        frame = pd.read_csv(paths["ground_truth"])
        assert list(frame.columns) == [
            "timestamp", "nd_system", "ndfc_system", "bau_cost", "noiseless_cost"
        ]
        assert len(frame) == 24 * 90
