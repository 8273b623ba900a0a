"""Ordinary-least-squares baselines fitted on the combined train+validation
sample.

Solved via column-pivoted QR rather than explicit normal-equation inversion;
exactly collinear columns are dropped with a warning. An intercept column is
always included.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ShapeError, SingularityError, SpecError
from .features import DesignMatrix, FeatureSpec, Scaler, TargetScaler

PIVOT_TOLERANCE = 1e-10

MODEL_FORMAT = "redispatch-model"
MODEL_VERSION = 1


@dataclass
class OlsModel:
    """Fitted linear model with audit metadata."""

    coefficients: np.ndarray  # aligned with column_names; dropped columns get 0
    intercept: float
    column_names: tuple[str, ...]
    dropped_columns: tuple[str, ...] = ()
    rss: float = 0.0
    rank: int = 0
    scaler: Scaler | None = None
    target_scaler: TargetScaler | None = None
    feature_spec: FeatureSpec | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_ols(self, X)


def fit_ols(design: DesignMatrix, rows: np.ndarray) -> OlsModel:
    """Least-squares fit on the selected rows of a design matrix.

    ``rows`` is a boolean mask or integer index array. Columns whose pivot in
    the column-pivoted QR falls below PIVOT_TOLERANCE times the leading pivot
    are treated as exactly collinear and dropped (coefficient 0, recorded).
    """
    X = design.X[rows]
    y = design.y[rows]
    if design.target_scaler is not None:
        y = design.target_scaler.transform(y)
    n, k = X.shape
    if n <= k + 1:
        raise SpecError(f"need more rows ({n}) than columns including intercept ({k + 1})")

    A = np.column_stack([np.ones(n), X])
    names = ("(intercept)",) + tuple(design.column_names)

    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0:
        raise SingularityError("design matrix is identically zero")
    rank = int((diag > PIVOT_TOLERANCE * diag[0]).sum())
    if rank == 0:
        raise SingularityError("design matrix has no independent columns")

    kept = piv[:rank]
    dropped = tuple(names[i] for i in sorted(piv[rank:]))
    if dropped:
        warnings.warn(
            f"dropping {len(dropped)} collinear column(s): {dropped}",
            RuntimeWarning,
            stacklevel=2,
        )

    beta_kept = scipy.linalg.solve_triangular(R[:rank, :rank], Q[:, :rank].T @ y)
    beta = np.zeros(k + 1)
    beta[kept] = beta_kept

    residuals = y - A @ beta
    model = OlsModel(
        coefficients=beta[1:],
        intercept=float(beta[0]),
        column_names=tuple(design.column_names),
        dropped_columns=dropped,
        rss=float(residuals @ residuals),
        rank=rank,
        scaler=design.scaler,
        target_scaler=design.target_scaler,
        feature_spec=design.spec,
    )
    return model


def predict_ols(model: OlsModel, X: np.ndarray) -> np.ndarray:
    """Predicted costs (EUR) for standardised feature rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(model.coefficients):
        raise ShapeError(
            f"input has {X.shape[1]} columns, model expects {len(model.coefficients)}"
        )
    pred = X @ model.coefficients + model.intercept
    if model.target_scaler is not None:
        pred = model.target_scaler.inverse(pred)
    return pred


def coefficients_to_csv(model: OlsModel, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("name,estimate\n")
        fh.write(f"(intercept),{model.intercept!r}\n")
        for name, value in zip(model.column_names, model.coefficients):
            fh.write(f"{name},{float(value)!r}\n")


def model_to_dict(model: OlsModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": "ols",
        "coefficients": model.coefficients.tolist(),
        "intercept": model.intercept,
        "column_names": list(model.column_names),
        "dropped_columns": list(model.dropped_columns),
        "rss": model.rss,
        "rank": model.rank,
        "scaler": model.scaler.to_dict() if model.scaler else None,
        "target_scaler": model.target_scaler.to_dict() if model.target_scaler else None,
        "feature_spec": model.feature_spec.to_dict() if model.feature_spec else None,
    }


def save_model(model: OlsModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def model_from_dict(doc: dict) -> OlsModel:
    if doc.get("format") != MODEL_FORMAT or doc.get("kind") != "ols":
        raise SpecError("not a serialised OLS model document")
    return OlsModel(
        coefficients=np.asarray(doc["coefficients"], dtype=float),
        intercept=float(doc["intercept"]),
        column_names=tuple(doc["column_names"]),
        dropped_columns=tuple(doc["dropped_columns"]),
        rss=float(doc["rss"]),
        rank=int(doc["rank"]),
        scaler=Scaler.from_dict(doc["scaler"]) if doc.get("scaler") else None,
        target_scaler=(TargetScaler.from_dict(doc["target_scaler"])
                       if doc.get("target_scaler") else None),
        feature_spec=(FeatureSpec.from_dict(doc["feature_spec"])
                      if doc.get("feature_spec") else None),
    )


def load_model(path: str | Path) -> OlsModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
