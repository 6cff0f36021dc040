"""Classifier families behind a single spec/train/predict interface."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError
from .base import BinaryClassifier, Estimator, sigmoid
from .boosting import GradientBoosting
from .forest import RandomForest
from .logistic import LogisticRegression
from .svm import SupportVectorMachine

FAMILIES = ("logistic_regression", "svm", "random_forest", "gradient_boosting")

FAMILY_LABELS = {
    "logistic_regression": "Logistic Regression",
    "svm": "SVM",
    "random_forest": "Random Forest",
    "gradient_boosting": "Gradient Boosting",
}

_FAMILY_CLASSES = {
    "logistic_regression": LogisticRegression,
    "svm": SupportVectorMachine,
    "random_forest": RandomForest,
    "gradient_boosting": GradientBoosting,
}

# Tunable-parameter schema per family; grid keys must stay inside these.
PARAM_SCHEMAS = {
    "logistic_regression": ("C", "tol", "max_iter"),
    "svm": ("C", "kernel", "gamma", "tol", "max_epochs"),
    "random_forest": ("n_trees", "max_depth", "min_samples_leaf", "max_features", "oob_score"),
    "gradient_boosting": ("n_rounds", "learning_rate", "max_depth", "min_samples_leaf"),
}

DEFAULT_GRIDS = {
    "logistic_regression": {"C": [0.01, 0.1, 1.0, 10.0]},
    "svm": {"C": [0.1, 1.0, 10.0], "gamma": ["auto", 0.1, 1.0]},
    "random_forest": {"n_trees": [100, 300], "max_depth": [None, 8]},
    "gradient_boosting": {
        "n_rounds": [100, 300],
        "learning_rate": [0.05, 0.1],
        "max_depth": [2, 3],
    },
}


@dataclass
class ModelSpec:
    """Declarative model choice: family, fixed hyperparameters, tuning grid."""

    family: str
    hyperparameters: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    seed: int = 0

    def validate(self) -> "ModelSpec":
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        schema = set(PARAM_SCHEMAS[self.family])
        bad = set(self.hyperparameters) - schema
        if bad:
            raise ConfigError(f"unknown hyperparameters for {self.family}: {sorted(bad)}")
        bad = set(self.grid) - schema
        if bad:
            raise ConfigError(f"grid keys outside {self.family} schema: {sorted(bad)}")
        return self

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "hyperparameters": dict(self.hyperparameters),
            "grid": {k: list(v) for k, v in self.grid.items()},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        return cls(
            family=data["family"],
            hyperparameters=dict(data.get("hyperparameters", {})),
            grid={k: list(v) for k, v in data.get("grid", {}).items()},
            seed=int(data.get("seed", 0)),
        ).validate()


def default_spec(family: str, seed: int = 0, hyperparameters: dict | None = None, grid: dict | None = None) -> ModelSpec:
    """Spec with the family's default tuning grid unless a grid is given."""
    spec = ModelSpec(
        family=family,
        hyperparameters=dict(hyperparameters or {}),
        grid={k: list(v) for k, v in (DEFAULT_GRIDS[family] if grid is None else grid).items()},
        seed=seed,
    )
    return spec.validate()


def build_model(spec: ModelSpec) -> BinaryClassifier:
    """Instantiate the configured classifier (untrained)."""
    spec.validate()
    cls = _FAMILY_CLASSES[spec.family]
    return cls(seed=spec.seed, **spec.hyperparameters)


__all__ = [
    "BinaryClassifier",
    "DEFAULT_GRIDS",
    "Estimator",
    "FAMILIES",
    "FAMILY_LABELS",
    "GradientBoosting",
    "LogisticRegression",
    "ModelSpec",
    "PARAM_SCHEMAS",
    "RandomForest",
    "SupportVectorMachine",
    "build_model",
    "default_spec",
    "sigmoid",
]
