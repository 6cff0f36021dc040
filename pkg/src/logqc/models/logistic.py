"""L2-regularised logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

import numpy as np

from ..validation import check_fit_inputs
from .base import BinaryClassifier, sigmoid


class LogisticRegression(BinaryClassifier):
    """Logistic regression with the usual C convention (larger C = weaker penalty).

    The objective is mean log-loss plus ||w||^2 / (2 C n); the intercept is
    not penalised. Optimisation is plain gradient descent with backtracking
    line search, run until the gradient norm drops below `tol`.
    """

    def __init__(self, C: float = 1.0, tol: float = 1e-6, max_iter: int = 20000, seed: int = 0):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def _objective(self, X, y_pm, w, b, reg):
        margins = y_pm * (X @ w + b)
        return float(np.mean(np.logaddexp(0.0, -margins)) + 0.5 * reg * (w @ w))

    def _gradient(self, X, y01, w, b, reg):
        p = sigmoid(X @ w + b)
        resid = p - y01
        g_w = X.T @ resid / X.shape[0] + reg * w
        g_b = float(np.mean(resid))
        return g_w, g_b

    def fit(self, X, y):
        X, y = check_fit_inputs(X, y)
        n, p = X.shape
        y01 = y.astype(np.float64)
        y_pm = 2.0 * y01 - 1.0
        reg = 1.0 / (self.C * n)
        w = np.zeros(p)
        b = 0.0
        step = 1.0
        loss = self._objective(X, y_pm, w, b, reg)
        converged = False
        it = 0
        for it in range(self.max_iter):
            g_w, g_b = self._gradient(X, y01, w, b, reg)
            g_sq = float(g_w @ g_w) + g_b * g_b
            if np.sqrt(g_sq) <= self.tol:
                converged = True
                break
            # Armijo backtracking; step is warm-started from the previous iterate
            t = min(step * 2.0, 1e4)
            while True:
                new_w = w - t * g_w
                new_b = b - t * g_b
                new_loss = self._objective(X, y_pm, new_w, new_b, reg)
                if new_loss <= loss - 1e-4 * t * g_sq or t < 1e-16:
                    break
                t *= 0.5
            w, b, loss, step = new_w, new_b, new_loss, t
        self.coef_ = w
        self.intercept_ = b
        self.n_iter_ = it + 1
        self.converged_ = converged
        self.feature_count_ = p
        return self

    def decision_function(self, X) -> np.ndarray:
        X = self._check_predict_input(X)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def loss_and_gradient(self, X, y, w, b):
        """Objective and gradient at arbitrary parameters (finite-difference hook)."""
        X, y = check_fit_inputs(X, y)
        reg = 1.0 / (self.C * X.shape[0])
        y01 = y.astype(np.float64)
        y_pm = 2.0 * y01 - 1.0
        w = np.asarray(w, dtype=np.float64)
        loss = self._objective(X, y_pm, w, float(b), reg)
        g_w, g_b = self._gradient(X, y01, w, float(b), reg)
        return loss, g_w, g_b

    def to_payload(self) -> dict:
        return {
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
            "n_iter": self.n_iter_,
            "converged": self.converged_,
        }

    def restore_payload(self, payload: dict):
        self.coef_ = np.asarray(payload["coef"], dtype=np.float64)
        self.intercept_ = float(payload["intercept"])
        self.n_iter_ = int(payload["n_iter"])
        self.converged_ = bool(payload["converged"])
        self.feature_count_ = self.coef_.size
        return self
