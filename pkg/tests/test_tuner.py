import datetime as dt
import math

import numpy as np
import pytest

from redispatch import features, mlp, net_demand, splits, synth, tuner
from redispatch.errors import SpecError
from redispatch.mlp import MlpConfig
from redispatch.tuner import SearchSpace


@pytest.fixture(scope="module")
def tiny_setup():
    cfg = synth.GeneratorConfig(
        start=dt.date(2019, 1, 1), end=dt.date(2019, 1, 21), seed=31, lockdown=None
    )
    dataset, _ = synth.generate(cfg)
    panel = net_demand.build_panel(dataset)
    plan = splits.make_split(
        splits.DateRange(dt.date(2019, 1, 1), dt.date(2019, 1, 21)), ratio=0.7, seed=4
    )
    design = features.build_design(
        panel, features.FeatureSpec(scale_target=True), plan
    )
    return design, plan


class TestBracketSchedule:
    def test_r9_eta3_hand_enumeration(self):
        # s_max = 2; bracket s=2: n = ceil(3*9/3) = 9 at r = 1;
        # s=1: n = ceil(3*3/2) = 5 at r = 3; s=0: n = ceil(3*1/1) = 3 at r = 9.
        assert tuner.bracket_schedule(9, 3) == [(2, 9, 1), (1, 5, 3), (0, 3, 9)]

    def test_r81_eta3(self):
        schedule = tuner.bracket_schedule(81, 3)
        assert schedule[0] == (4, 81, 1)
        assert schedule[-1] == (0, 5, 81)
        assert len(schedule) == 5

    def test_rung_sizes_r9_eta3_bracket2(self):
        # 9 configs at 1 epoch -> 3 at 3 -> 1 at 9
        assert tuner.rung_sizes(9, 1, 2, 3) == [(9, 1), (3, 3), (1, 9)]

    def test_invalid_budgets_rejected(self):
        with pytest.raises(SpecError):
            tuner.bracket_schedule(2, 3)
        with pytest.raises(SpecError):
            tuner.bracket_schedule(9, 1)


class TestSampleConfig:
    def test_degenerate_space_returns_unique_config(self):
        space = SearchSpace(
            activations=("tanh",),
            learning_rate_bounds=(1e-3, 1e-3),
            dropouts=(0.2,),
            n1_choices=(16,),
            n2_choices=(32,),
        )
        config = tuner.sample_config(space, np.random.default_rng(0))
        assert config.activation == "tanh"
        assert config.learning_rate == pytest.approx(1e-3)
        assert config.dropout == 0.2
        assert (config.n1, config.n2) == (16, 32)

    def test_learning_rate_log_uniform(self):
        # Oracle: log10(lr) uniform on [-4, -2] has mean -3.
        space = SearchSpace()
        rng = np.random.default_rng(1)
        draws = np.array([
            math.log10(tuner.sample_config(space, rng).learning_rate)
            for _ in range(10_000)
        ])
        assert draws.mean() == pytest.approx(-3.0, abs=0.02)
        assert draws.min() >= -4.0 and draws.max() <= -2.0

    def test_dropout_frequencies_uniform(self):
        space = SearchSpace()
        rng = np.random.default_rng(2)
        draws = [tuner.sample_config(space, rng).dropout for _ in range(10_000)]
        for level in (0.1, 0.2, 0.3, 0.4, 0.5):
            freq = sum(1 for d in draws if d == level) / len(draws)
            assert freq == pytest.approx(0.2, abs=0.02)

    def test_samples_inside_bounds(self):
        space = SearchSpace()
        rng = np.random.default_rng(3)
        for _ in range(500):
            c = tuner.sample_config(space, rng)
            assert 1e-4 <= c.learning_rate <= 1e-2
            assert c.activation in space.activations
            assert c.dropout in space.dropouts
            assert c.n1 in space.n1_choices and c.n2 in space.n2_choices


def fake_trial_factory(score):
    """Replace network training with a deterministic score function."""

    def fake_trial(design, plan, config, epochs):
        return score(config, epochs)

    return fake_trial


class TestRunHyperbandMechanics:
    def test_dominant_config_wins(self, tiny_setup, monkeypatch):
        design, plan = tiny_setup
        # Lower learning rate strictly dominates at every budget.
        monkeypatch.setattr(
            tuner, "_trial_val_mse",
            fake_trial_factory(lambda c, e: c.learning_rate),
        )
        result = tuner.run_hyperband(
            design, plan, SearchSpace(), R=9, eta=3, seed=5, retrain_best=False
        )
        sampled_lrs = {e.sample_index: e.config.learning_rate for e in result.leaderboard}
        assert result.best_config.learning_rate == min(sampled_lrs.values())

    def test_survivors_are_top_by_val_mse(self, tiny_setup, monkeypatch):
        design, plan = tiny_setup
        monkeypatch.setattr(
            tuner, "_trial_val_mse",
            fake_trial_factory(lambda c, e: c.learning_rate),
        )
        result = tuner.run_hyperband(
            design, plan, SearchSpace(), R=9, eta=3, seed=6, retrain_best=False
        )
        for bracket in result.brackets:
            for rung in bracket.rungs:
                rung_entries = [
                    e for e in result.leaderboard
                    if e.bracket == bracket.s and e.rung == rung.rung
                ]
                ranked = sorted(rung_entries, key=lambda e: (e.val_mse, e.sample_index))
                expected = [e.sample_index for e in ranked[: len(rung.survivors)]]
                assert rung.survivors == expected

    def test_total_epochs_match_budget_formula(self, tiny_setup, monkeypatch):
        design, plan = tiny_setup
        monkeypatch.setattr(
            tuner, "_trial_val_mse", fake_trial_factory(lambda c, e: 1.0)
        )
        for R, eta in ((9, 3), (27, 3), (16, 4)):
            result = tuner.run_hyperband(
                design, plan, SearchSpace(), R=R, eta=eta, seed=7, retrain_best=False
            )
            expected = 0
            for s, n, r in tuner.bracket_schedule(R, eta):
                for n_i, r_i in tuner.rung_sizes(n, r, s, eta):
                    expected += n_i * r_i
            assert result.total_epochs == expected

    def test_same_seed_reproduces_leaderboard(self, tiny_setup, monkeypatch, tmp_path):
        design, plan = tiny_setup
        monkeypatch.setattr(
            tuner, "_trial_val_mse",
            fake_trial_factory(lambda c, e: c.learning_rate * e),
        )
        a = tuner.run_hyperband(design, plan, SearchSpace(), R=9, eta=3, seed=8,
                                retrain_best=False)
        b = tuner.run_hyperband(design, plan, SearchSpace(), R=9, eta=3, seed=8,
                                retrain_best=False)
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        a.leaderboard_to_csv(pa)
        b.leaderboard_to_csv(pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_ties_broken_by_sample_index(self, tiny_setup, monkeypatch):
        design, plan = tiny_setup
        monkeypatch.setattr(
            tuner, "_trial_val_mse", fake_trial_factory(lambda c, e: 42.0)
        )
        result = tuner.run_hyperband(
            design, plan, SearchSpace(), R=9, eta=3, seed=9, retrain_best=False
        )
        assert result.best_config.seed == result.leaderboard[0].config.seed
        first_bracket = result.brackets[0]
        assert first_bracket.rungs[0].survivors == [0, 1, 2]


class TestRunHyperbandEndToEnd:
    def test_single_point_space_with_real_training(self, tiny_setup):
        design, plan = tiny_setup
        space = SearchSpace(
            activations=("relu",),
            learning_rate_bounds=(3e-3, 3e-3),
            dropouts=(0.1,),
            n1_choices=(8,),
            n2_choices=(8,),
        )
        base = MlpConfig(n1=8, n2=8, max_epochs=12, patience=None, seed=0)
        result = tuner.run_hyperband(
            design, plan, space, R=4, eta=2, seed=10, base_config=base
        )
        assert result.best_config.n1 == 8
        assert result.best_config.learning_rate == pytest.approx(3e-3)
        assert result.final_model is not None
        # The retrained winner uses the full budget settings.
        assert result.final_model.config.max_epochs == 12
        assert np.isfinite(result.best_val_mse)

    def test_winner_attains_minimum_recorded_mse(self, tiny_setup):
        design, plan = tiny_setup
        base = MlpConfig(n1=8, n2=8, max_epochs=8, patience=None, seed=0)
        result = tuner.run_hyperband(
            design, plan, SearchSpace(n1_choices=(8,), n2_choices=(8,)),
            R=4, eta=2, seed=11, base_config=base, retrain_best=False,
        )
        assert result.best_val_mse == min(e.val_mse for e in result.leaderboard)
