"""Minimal scikit-learn-style estimator protocol (get_params/set_params/clone)."""

from __future__ import annotations

import inspect

import numpy as np

from ..errors import DataError


class Estimator:
    """Parameter handling compatible with the scikit-learn estimator contract.

    Subclasses keep every constructor argument as an attribute of the same
    name and do no work in __init__, so get_params/set_params round-trip.
    """

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return sorted(
            p.name
            for p in sig.parameters.values()
            if p.name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        )

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"unknown parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def clone(self):
        return type(self)(**self.get_params())


class BinaryClassifier(Estimator):
    """Shared predict/threshold behaviour for the classifier families."""

    feature_count_: int

    def predict_proba(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int8)

    def _check_predict_input(self, X) -> np.ndarray:
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if not hasattr(self, "feature_count_"):
            raise DataError("model is not fitted")
        if arr.shape[1] != self.feature_count_:
            raise DataError(
                f"expected {self.feature_count_} feature columns, got {arr.shape[1]}"
            )
        if not np.isfinite(arr).all():
            raise DataError("prediction input contains non-finite values")
        return arr


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss_from_margins(margins: np.ndarray) -> float:
    """Mean logistic loss given signed margins y_pm * f(x), y_pm in {-1,+1}."""
    return float(np.mean(np.logaddexp(0.0, -margins)))
