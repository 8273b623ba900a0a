"""Feed-forward network with two hidden layers, trained from scratch.

Forward pass, exact backpropagation, inverted dropout, RMSProp updates and
patience-based early stopping, all on numpy float64. Training is
deterministic per seed; inference is a pure function of the stored weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericError, ShapeError, SpecError
from .features import DesignMatrix, FeatureSpec, Scaler, TargetScaler
from .splits import SplitPlan, TRAIN, VALIDATION

ACTIVATIONS = ("relu", "tanh", "sigmoid")

MODEL_FORMAT = "redispatch-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class MlpConfig:
    n1: int = 48
    n2: int = 48
    activation: str = "relu"
    dropout: float = 0.1
    learning_rate: float = 0.006161
    max_epochs: int = 1500
    patience: int | None = 5
    batch_size: int | None = 32
    seed: int = 0
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-7
    # "best" restores the lowest validation MSE seen; "epoch_delta" compares
    # each epoch against the previous one instead.
    stop_mode: str = "best"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise SpecError(f"activation must be one of {ACTIVATIONS}")
        if not 0.0 <= self.dropout < 1.0:
            raise SpecError("dropout must be in [0, 1)")
        if self.learning_rate <= 0:
            raise SpecError("learning_rate must be positive")
        if self.stop_mode not in ("best", "epoch_delta"):
            raise SpecError("stop_mode must be 'best' or 'epoch_delta'")

    def to_dict(self) -> dict:
        return {
            "n1": self.n1, "n2": self.n2, "activation": self.activation,
            "dropout": self.dropout, "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs, "patience": self.patience,
            "batch_size": self.batch_size, "seed": self.seed,
            "rmsprop_decay": self.rmsprop_decay,
            "rmsprop_epsilon": self.rmsprop_epsilon,
            "stop_mode": self.stop_mode,
        }

    @staticmethod
    def from_dict(doc: dict) -> "MlpConfig":
        return MlpConfig(**doc)


# Table-derived tuning optimum, usable directly without running the tuner.
REFERENCE_CONFIG = MlpConfig(
    n1=48, n2=48, activation="relu", dropout=0.1, learning_rate=0.006161
)


def parameter_count(d: int, n1: int, n2: int) -> int:
    """Trainable parameters of a d -> n1 -> n2 -> 1 network with biases."""
    return (d + 1) * n1 + (n1 + 1) * n2 + (n2 + 1)


def _activation(name: str):
    if name == "relu":
        return lambda z: np.maximum(z, 0.0), lambda z, h: (z > 0).astype(float)
    if name == "tanh":
        return np.tanh, lambda z, h: 1.0 - h * h
    if name == "sigmoid":
        def sig(z):
            out = np.empty_like(z)
            pos = z >= 0
            out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
            ez = np.exp(z[~pos])
            out[~pos] = ez / (1.0 + ez)
            return out

        return sig, lambda z, h: h * (1.0 - h)
    raise SpecError(f"unknown activation {name!r}")


@dataclass
class MlpModel:
    """Trained network: weights, the preprocessing needed to feed it, and
    the training trace."""

    config: MlpConfig
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray
    column_names: tuple[str, ...] = ()
    scaler: Scaler | None = None
    target_scaler: TargetScaler | None = None
    feature_spec: FeatureSpec | None = None
    training_trace: list[tuple[int, float, float]] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights().values())

    def weights(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2,
                "W3": self.W3, "b3": self.b3}

    def set_weights(self, weights: dict[str, np.ndarray]) -> None:
        for name, value in weights.items():
            setattr(self, name, value.copy())

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Deterministic inference (dropout off) on standardised rows,
        returning predictions in EUR."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_dim:
            raise ShapeError(f"input has {X.shape[1]} columns, model expects {self.input_dim}")
        out = forward(self, X)
        if self.target_scaler is not None:
            out = self.target_scaler.inverse(out)
        return out


def init_model(config: MlpConfig, input_dim: int, rng: np.random.Generator) -> MlpModel:
    """Seeded uniform init: He-style fan-in scaling for ReLU, Xavier-style
    for tanh/sigmoid. Biases start at zero."""
    def limit(fan_in: int, fan_out: int) -> float:
        if config.activation == "relu":
            return float(np.sqrt(6.0 / fan_in))
        return float(np.sqrt(6.0 / (fan_in + fan_out)))

    def uniform(rows: int, cols: int) -> np.ndarray:
        lim = limit(rows, cols)
        return rng.uniform(-lim, lim, size=(rows, cols))

    return MlpModel(
        config=config,
        W1=uniform(input_dim, config.n1),
        b1=np.zeros(config.n1),
        W2=uniform(config.n1, config.n2),
        b2=np.zeros(config.n2),
        W3=uniform(config.n2, 1)[:, 0],
        b3=np.zeros(1),
    )


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def draw_masks(config: MlpConfig, batch: int, rng: np.random.Generator):
    """Inverted-dropout multipliers for both hidden layers.

    Entries are 0 (dropped) or 1/(1-p) (kept, rescaled so inference needs no
    adjustment). Forcing the masks to all-ones reproduces dropout-free
    training exactly.
    """
    p = config.dropout
    if p == 0.0:
        return (np.ones((batch, config.n1)), np.ones((batch, config.n2)))
    scale = 1.0 / (1.0 - p)
    m1 = (rng.random((batch, config.n1)) >= p).astype(float) * scale
    m2 = (rng.random((batch, config.n2)) >= p).astype(float) * scale
    return m1, m2


def forward(model: MlpModel, X: np.ndarray, masks=None) -> np.ndarray:
    """Predicted cost for each row of X.

    With ``masks`` (train mode) the hidden activations are multiplied by the
    dropout masks; without (inference) the pass is deterministic.
    """
    return _forward_cached(model, np.atleast_2d(X), masks)[0]


def _forward_cached(model: MlpModel, X: np.ndarray, masks=None):
    if X.shape[1] != model.input_dim:
        raise ShapeError(f"input has {X.shape[1]} columns, model expects {model.input_dim}")
    act, _ = _activation(model.config.activation)
    z1 = X @ model.W1 + model.b1
    a1 = act(z1)
    h1 = a1 * masks[0] if masks is not None else a1
    z2 = h1 @ model.W2 + model.b2
    a2 = act(z2)
    h2 = a2 * masks[1] if masks is not None else a2
    yhat = h2 @ model.W3 + model.b3[0]
    return yhat, (z1, a1, h1, z2, a2, h2)


def backward(model: MlpModel, X: np.ndarray, y: np.ndarray, masks=None):
    """Exact gradients of the batch-mean squared error.

    Returns (gradients dict, batch MSE). The same dropout masks used in the
    forward pass must be supplied so the gradients match it.
    """
    X = np.atleast_2d(X)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise SpecError("batch must be non-empty")
    _, act_grad = _activation(model.config.activation)

    yhat, (z1, a1, h1, z2, a2, h2) = _forward_cached(model, X, masks)
    n = len(y)
    err = yhat - y
    mse = float(err @ err) / n

    dyhat = 2.0 * err / n
    gW3 = h2.T @ dyhat
    gb3 = np.array([dyhat.sum()])
    dh2 = np.outer(dyhat, model.W3)
    da2 = dh2 * masks[1] if masks is not None else dh2
    dz2 = da2 * act_grad(z2, a2)
    gW2 = h1.T @ dz2
    gb2 = dz2.sum(axis=0)
    dh1 = dz2 @ model.W2.T
    da1 = dh1 * masks[0] if masks is not None else dh1
    dz1 = da1 * act_grad(z1, a1)
    gW1 = X.T @ dz1
    gb1 = dz1.sum(axis=0)
    grads = {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2, "W3": gW3, "b3": gb3}
    return grads, mse


# ---------------------------------------------------------------------------
# RMSProp
# ---------------------------------------------------------------------------

def init_rmsprop_state(model: MlpModel) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(w) for name, w in model.weights().items()}


def rmsprop_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: dict[str, np.ndarray],
    lr: float,
    decay: float,
    epsilon: float,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """One RMSProp update, elementwise:

        s <- decay * s + (1 - decay) * g^2
        theta <- theta - lr * g / (sqrt(s) + epsilon)

    Mutates ``params`` and ``state`` in place and returns them. Non-finite
    gradients abort with ``NumericError``.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
        s = state[name]
        s *= decay
        s += (1.0 - decay) * g * g
        params[name] -= lr * g / (np.sqrt(s) + epsilon)
    return params, state


# ---------------------------------------------------------------------------
# Early stopping
# ---------------------------------------------------------------------------

class EarlyStopper:
    """Patience-based stopping on validation MSE, keeping the best weights.

    In "best" mode the counter advances on every epoch whose validation MSE
    exceeds the best seen so far, and resets on a new best; in "epoch_delta"
    mode it compares against the previous epoch instead.
    """

    def __init__(self, patience: int | None, mode: str = "best"):
        if mode not in ("best", "epoch_delta"):
            raise SpecError("mode must be 'best' or 'epoch_delta'")
        self.patience = patience
        self.mode = mode
        self.best_mse = np.inf
        self.best_epoch = 0
        self.best_weights: dict[str, np.ndarray] | None = None
        self.counter = 0
        self._previous = np.inf
        self.stopped_epoch: int | None = None

    def observe(self, epoch: int, val_mse: float, weights: dict[str, np.ndarray]) -> bool:
        """Record one epoch; returns True when training should stop."""
        if not np.isfinite(val_mse):
            raise NumericError(f"validation MSE became non-finite at epoch {epoch}")
        if val_mse < self.best_mse:
            self.best_mse = val_mse
            self.best_epoch = epoch
            self.best_weights = {k: v.copy() for k, v in weights.items()}
        if self.mode == "epoch_delta":
            worsened = val_mse > self._previous
        else:
            worsened = val_mse > self.best_mse
        self.counter = self.counter + 1 if worsened else 0
        self._previous = val_mse
        if self.patience is not None and self.counter >= self.patience:
            self.stopped_epoch = epoch
            return True
        return False


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _mse(model: MlpModel, X: np.ndarray, y: np.ndarray) -> float:
    """Inference-mode MSE in EUR^2 (unscales predictions if needed)."""
    pred = forward(model, X)
    if model.target_scaler is not None:
        pred = model.target_scaler.inverse(pred)
    err = pred - y
    return float(err @ err) / len(y)


def train(design: DesignMatrix, plan: SplitPlan, config: MlpConfig) -> MlpModel:
    """Train on the plan's training days, early-stopping on validation MSE.

    The trace records inference-mode train and validation MSE (EUR^2) for
    every epoch; the returned model carries the best-epoch weights.
    """
    train_mask = design.fold_mask(plan, TRAIN)
    val_mask = design.fold_mask(plan, VALIDATION)
    if not train_mask.any() or not val_mask.any():
        raise SpecError("training and validation rows must both be non-empty")

    Xtr, ytr_raw = design.X[train_mask], design.y[train_mask]
    Xva, yva_raw = design.X[val_mask], design.y[val_mask]
    ytr = design.target_scaler.transform(ytr_raw) if design.target_scaler else ytr_raw

    seeds = np.random.SeedSequence(config.seed).spawn(2)
    rng_init = np.random.default_rng(seeds[0])
    rng_epoch = np.random.default_rng(seeds[1])

    model = init_model(config, Xtr.shape[1], rng_init)
    model.column_names = design.column_names
    model.scaler = design.scaler
    model.target_scaler = design.target_scaler
    model.feature_spec = design.spec

    state = init_rmsprop_state(model)
    stopper = EarlyStopper(config.patience, config.stop_mode)
    params = model.weights()
    n_train = len(ytr)
    batch = config.batch_size or n_train

    for epoch in range(1, config.max_epochs + 1):
        order = rng_epoch.permutation(n_train)
        for start in range(0, n_train, batch):
            idx = order[start:start + batch]
            masks = draw_masks(config, len(idx), rng_epoch) if config.dropout > 0 else None
            grads, _ = backward(model, Xtr[idx], ytr[idx], masks)
            rmsprop_step(params, grads, state,
                         config.learning_rate, config.rmsprop_decay, config.rmsprop_epsilon)

        train_mse = _mse(model, Xtr, ytr_raw)
        val_mse = _mse(model, Xva, yva_raw)
        model.training_trace.append((epoch, train_mse, val_mse))
        if stopper.observe(epoch, val_mse, params):
            break

    if stopper.best_weights is not None:
        model.set_weights(stopper.best_weights)
    model.best_epoch = stopper.best_epoch
    return model


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def model_to_dict(model: MlpModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": "mlp",
        "config": model.config.to_dict(),
        "feature_spec": model.feature_spec.to_dict() if model.feature_spec else None,
        "column_names": list(model.column_names),
        "scaler": model.scaler.to_dict() if model.scaler else None,
        "target_scaler": model.target_scaler.to_dict() if model.target_scaler else None,
        "weights": {
            name: {"shape": list(w.shape), "data": w.ravel().tolist()}
            for name, w in model.weights().items()
        },
        "training_trace": [list(row) for row in model.training_trace],
        "best_epoch": model.best_epoch,
    }


def save_model(model: MlpModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def model_from_dict(doc: dict) -> MlpModel:
    if doc.get("format") != MODEL_FORMAT or doc.get("kind") != "mlp":
        raise SpecError("not a serialised MLP model document")
    weights = {
        name: np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
        for name, entry in doc["weights"].items()
    }
    model = MlpModel(
        config=MlpConfig.from_dict(doc["config"]),
        W1=weights["W1"], b1=weights["b1"],
        W2=weights["W2"], b2=weights["b2"],
        W3=weights["W3"], b3=weights["b3"],
        column_names=tuple(doc["column_names"]),
        scaler=Scaler.from_dict(doc["scaler"]) if doc.get("scaler") else None,
        target_scaler=(TargetScaler.from_dict(doc["target_scaler"])
                       if doc.get("target_scaler") else None),
        feature_spec=(FeatureSpec.from_dict(doc["feature_spec"])
                      if doc.get("feature_spec") else None),
        training_trace=[tuple(row) for row in doc.get("training_trace", [])],
        best_epoch=int(doc.get("best_epoch", 0)),
    )
    return model


def load_model(path: str | Path) -> MlpModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
