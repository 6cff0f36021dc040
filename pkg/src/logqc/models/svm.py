"""Soft-margin SVM trained with Platt-style sequential minimal optimisation.

Probabilities are the plain sigmoid of the decision value rather than a
fitted calibration; this is a monotone transform, so AUC and ranking are
unaffected.
"""

from __future__ import annotations

import numpy as np

from ..errors import FitError
from ..validation import check_fit_inputs
from .base import BinaryClassifier, sigmoid

_ALPHA_EPS = 1e-8


def _rbf(A, B, gamma: float) -> np.ndarray:
    sq_a = np.sum(A * A, axis=1)[:, None]
    sq_b = np.sum(B * B, axis=1)[None, :]
    d2 = np.maximum(sq_a + sq_b - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * d2)


class SupportVectorMachine(BinaryClassifier):
    """RBF or linear kernel SVM solved in the dual by SMO.

    Terminates when a full pass finds no KKT violation beyond `tol`; the
    maximum violation at termination is stored in `kkt_violation_`.
    """

    def __init__(
        self,
        C: float = 1.0,
        kernel: str = "rbf",
        gamma="auto",
        tol: float = 1e-3,
        max_epochs: int = 2000,
        seed: int = 0,
    ):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_epochs = max_epochs
        self.seed = seed

    def _gamma_value(self, p: int) -> float:
        if self.gamma == "auto":
            return 1.0 / p
        return float(self.gamma)

    def _kernel(self, A, B) -> np.ndarray:
        if self.kernel == "linear":
            return A @ B.T
        if self.kernel == "rbf":
            return _rbf(A, B, self._gamma_value(A.shape[1]))
        raise ValueError(f"unknown kernel {self.kernel!r}")

    def fit(self, X, y):
        X, y = check_fit_inputs(X, y)
        n = X.shape[0]
        t = (2.0 * y - 1.0).astype(np.float64)
        K = self._kernel(X, X)
        C = float(self.C)
        alpha = np.zeros(n)
        self._b = 0.0
        # error cache: E_i = f(x_i) - t_i with f = sum_j alpha_j t_j K_ij + b
        E = -t.copy()

        def take_step(i, j):
            nonlocal E
            if i == j:
                return False
            a_i, a_j = alpha[i], alpha[j]
            t_i, t_j = t[i], t[j]
            s = t_i * t_j
            if t_i != t_j:
                L, H = max(0.0, a_j - a_i), min(C, C + a_j - a_i)
            else:
                L, H = max(0.0, a_i + a_j - C), min(C, a_i + a_j)
            if L >= H:
                return False
            eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if eta <= 1e-12:
                return False
            a_j_new = a_j + t_j * (E[i] - E[j]) / eta
            a_j_new = min(H, max(L, a_j_new))
            if abs(a_j_new - a_j) < 1e-7 * (a_j_new + a_j + 1e-7):
                return False
            a_i_new = a_i + s * (a_j - a_j_new)
            d_i = t_i * (a_i_new - a_i)
            d_j = t_j * (a_j_new - a_j)
            b1 = self._b - E[i] - d_i * K[i, i] - d_j * K[i, j]
            b2 = self._b - E[j] - d_i * K[i, j] - d_j * K[j, j]
            if _ALPHA_EPS < a_i_new < C - _ALPHA_EPS:
                b_new = b1
            elif _ALPHA_EPS < a_j_new < C - _ALPHA_EPS:
                b_new = b2
            else:
                b_new = 0.5 * (b1 + b2)
            E += d_i * K[:, i] + d_j * K[:, j] + (b_new - self._b)
            alpha[i], alpha[j] = a_i_new, a_j_new
            self._b = b_new
            return True

        def examine(j):
            r = E[j] * t[j]
            if not ((r < -self.tol and alpha[j] < C - _ALPHA_EPS) or (r > self.tol and alpha[j] > _ALPHA_EPS)):
                return 0
            non_bound = np.flatnonzero((alpha > _ALPHA_EPS) & (alpha < C - _ALPHA_EPS))
            if non_bound.size > 1:
                i = int(non_bound[np.argmax(np.abs(E[non_bound] - E[j]))])
                if take_step(i, j):
                    return 1
            for i in np.roll(non_bound, -(j + 1)):
                if take_step(int(i), j):
                    return 1
            for i in range(n):
                if take_step((i + j + 1) % n, j):
                    return 1
            return 0

        examine_all = True
        num_changed = 0
        epochs = 0
        while (num_changed > 0 or examine_all) and epochs < self.max_epochs:
            num_changed = 0
            if examine_all:
                for j in range(n):
                    num_changed += examine(j)
            else:
                for j in np.flatnonzero((alpha > _ALPHA_EPS) & (alpha < C - _ALPHA_EPS)):
                    num_changed += examine(int(j))
            if examine_all:
                examine_all = False
            elif num_changed == 0:
                examine_all = True
            epochs += 1

        r = E * t
        violation = np.where(
            alpha <= _ALPHA_EPS,
            np.maximum(0.0, -r),
            np.where(alpha >= C - _ALPHA_EPS, np.maximum(0.0, r), np.abs(r)),
        )
        self.kkt_violation_ = float(violation.max())
        self.converged_ = epochs < self.max_epochs
        if self.converged_ and self.kkt_violation_ > self.tol * 1.05 + 1e-9:
            raise FitError(
                f"SMO terminated with KKT violation {self.kkt_violation_:.3e} > tol {self.tol}"
            )

        support = alpha > _ALPHA_EPS
        self.support_vectors_ = X[support]
        self.dual_coef_ = alpha[support] * t[support]
        self.intercept_ = float(self._b)
        self.feature_count_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        X = self._check_predict_input(X)
        if self.support_vectors_.shape[0] == 0:
            return np.full(X.shape[0], self.intercept_)
        return self._kernel(X, self.support_vectors_) @ self.dual_coef_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def to_payload(self) -> dict:
        return {
            "support_vectors": self.support_vectors_.tolist(),
            "dual_coef": self.dual_coef_.tolist(),
            "intercept": self.intercept_,
            "kkt_violation": self.kkt_violation_,
            "converged": self.converged_,
            "n_features": int(self.feature_count_),
        }

    def restore_payload(self, payload: dict):
        self.support_vectors_ = np.asarray(payload["support_vectors"], dtype=np.float64).reshape(
            -1, int(payload["n_features"])
        )
        self.dual_coef_ = np.asarray(payload["dual_coef"], dtype=np.float64)
        self.intercept_ = float(payload["intercept"])
        self.kkt_violation_ = float(payload["kkt_violation"])
        self.converged_ = bool(payload["converged"])
        self.feature_count_ = int(payload["n_features"])
        return self
