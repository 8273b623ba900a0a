"""Hyperband search over the network hyper-parameter space.

Standard bracket schedule: s_max = floor(log_eta R) brackets; bracket s
starts ceil((s_max+1) * eta^s / (s+1)) sampled configurations at
R * eta^-s epochs and keeps the top floor(n/eta) by validation MSE at each
rung. The winner is retrained with the full early-stopping budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import mlp
from .errors import SpecError
from .features import DesignMatrix
from .mlp import MlpConfig, MlpModel
from .splits import SplitPlan, VALIDATION


@dataclass(frozen=True)
class SearchSpace:
    activations: tuple[str, ...] = ("relu", "tanh", "sigmoid")
    learning_rate_bounds: tuple[float, float] = (1e-4, 1e-2)
    dropouts: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5)
    n1_choices: tuple[int, ...] = (16, 32, 48)
    n2_choices: tuple[int, ...] = (16, 32, 48)

    def __post_init__(self):
        lo, hi = self.learning_rate_bounds
        if not (0 < lo <= hi):
            raise SpecError("learning-rate bounds must satisfy 0 < lo <= hi")
        if not (self.activations and self.dropouts and self.n1_choices and self.n2_choices):
            raise SpecError("search space sets must be non-empty")


def sample_config(
    space: SearchSpace, rng: np.random.Generator, base: MlpConfig | None = None
) -> MlpConfig:
    """One draw: uniform over the discrete sets, log10-uniform in the
    learning rate. Non-searched fields come from ``base``."""
    base = base or MlpConfig()
    lo, hi = space.learning_rate_bounds
    lr = 10.0 ** rng.uniform(math.log10(lo), math.log10(hi))
    return replace(
        base,
        activation=space.activations[rng.integers(len(space.activations))],
        learning_rate=float(lr),
        dropout=float(space.dropouts[rng.integers(len(space.dropouts))]),
        n1=int(space.n1_choices[rng.integers(len(space.n1_choices))]),
        n2=int(space.n2_choices[rng.integers(len(space.n2_choices))]),
        seed=int(rng.integers(2**63 - 1)),
    )


@dataclass
class LeaderboardEntry:
    sample_index: int
    bracket: int
    rung: int
    epochs: int
    val_mse: float
    config: MlpConfig


@dataclass
class RungRecord:
    rung: int
    n_configs: int
    epochs: int
    survivors: list[int]  # sample indices promoted to the next rung


@dataclass
class BracketRecord:
    s: int
    n_initial: int
    r_initial: int
    rungs: list[RungRecord] = field(default_factory=list)


@dataclass
class TunerResult:
    best_config: MlpConfig
    best_val_mse: float
    leaderboard: list[LeaderboardEntry]
    brackets: list[BracketRecord]
    total_epochs: int
    R: int
    eta: int
    seed: int
    final_model: MlpModel | None = None

    def leaderboard_to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(
                "sample_index,bracket,rung,epochs,val_mse,"
                "activation,learning_rate,dropout,n1,n2,seed\n"
            )
            for e in self.leaderboard:
                c = e.config
                fh.write(
                    f"{e.sample_index},{e.bracket},{e.rung},{e.epochs},{e.val_mse!r},"
                    f"{c.activation},{c.learning_rate!r},{c.dropout!r},{c.n1},{c.n2},{c.seed}\n"
                )

    def best_config_to_json(self, path: str | Path) -> None:
        doc = {
            "best_val_mse": self.best_val_mse,
            "config": self.best_config.to_dict(),
            "R": self.R,
            "eta": self.eta,
            "seed": self.seed,
            "total_epochs": self.total_epochs,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def bracket_schedule(R: int, eta: int) -> list[tuple[int, int, int]]:
    """(s, n_initial, r_initial) per bracket, from s_max down to 0."""
    if eta < 2 or R < eta:
        raise SpecError(f"require R >= eta >= 2, got R={R}, eta={eta}")
    s_max = int(math.floor(math.log(R) / math.log(eta)))
    out = []
    for s in range(s_max, -1, -1):
        n = int(math.ceil((s_max + 1) * eta**s / (s + 1)))
        r = max(1, int(R * eta ** (-s)))
        out.append((s, n, r))
    return out


def rung_sizes(n: int, r: int, s: int, eta: int) -> list[tuple[int, int]]:
    """(configs evaluated, epochs each) for rungs 0..s of one bracket."""
    out = []
    for i in range(s + 1):
        n_i = int(math.floor(n * eta ** (-i)))
        r_i = max(1, int(math.floor(r * eta**i)))
        out.append((n_i, r_i))
    return out


def _trial_val_mse(
    design: DesignMatrix, plan: SplitPlan, config: MlpConfig, epochs: int
) -> float:
    """Validation MSE after training ``config`` for exactly ``epochs`` epochs
    (no early stopping during the search)."""
    trial_config = replace(config, max_epochs=epochs, patience=None)
    model = mlp.train(design, plan, trial_config)
    return model.training_trace[-1][2]


def run_hyperband(
    design: DesignMatrix,
    plan: SplitPlan,
    space: SearchSpace,
    R: int = 81,
    eta: int = 3,
    seed: int = 0,
    base_config: MlpConfig | None = None,
    retrain_best: bool = True,
) -> TunerResult:
    """Full hyperband search, deterministic per seed.

    Rung survivors are the top floor(n_i/eta) by validation MSE with ties
    broken by earlier sample index. The best configuration overall (minimum
    recorded validation MSE, same tie-break) is retrained with the full
    early-stopping budget when ``retrain_best`` is set.
    """
    base_config = base_config or MlpConfig()
    rng = np.random.default_rng(seed)
    leaderboard: list[LeaderboardEntry] = []
    brackets: list[BracketRecord] = []
    total_epochs = 0
    next_sample_index = 0

    for s, n, r in bracket_schedule(R, eta):
        configs = [(next_sample_index + i, sample_config(space, rng, base_config))
                   for i in range(n)]
        next_sample_index += n
        record = BracketRecord(s=s, n_initial=n, r_initial=r)

        for i, (n_i, r_i) in enumerate(rung_sizes(n, r, s, eta)):
            active = configs[:n_i]
            scored = []
            for sample_index, config in active:
                val_mse = _trial_val_mse(design, plan, config, r_i)
                total_epochs += r_i
                scored.append((val_mse, sample_index, config))
                leaderboard.append(LeaderboardEntry(
                    sample_index=sample_index, bracket=s, rung=i,
                    epochs=r_i, val_mse=val_mse, config=config,
                ))
            scored.sort(key=lambda t: (t[0], t[1]))
            n_keep = int(math.floor(n_i / eta))
            survivors = scored[:n_keep] if i < s else scored[:max(n_keep, 0)]
            record.rungs.append(RungRecord(
                rung=i, n_configs=n_i, epochs=r_i,
                survivors=[si for _, si, _ in survivors],
            ))
            configs = [(si, c) for _, si, c in survivors]
        brackets.append(record)

    best = min(leaderboard, key=lambda e: (e.val_mse, e.sample_index))
    result = TunerResult(
        best_config=best.config,
        best_val_mse=best.val_mse,
        leaderboard=leaderboard,
        brackets=brackets,
        total_epochs=total_epochs,
        R=R,
        eta=eta,
        seed=seed,
    )
    if retrain_best:
        final_config = replace(
            best.config,
            max_epochs=base_config.max_epochs,
            patience=base_config.patience,
        )
        result.final_model = mlp.train(design, plan, final_config)
    return result
