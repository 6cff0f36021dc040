"""Two-phase feature selection.

Phase 1 is a model-independent screen: a feature-wise kernelized Lasso that
matches a centred label kernel with a sparse nonnegative combination of
per-feature Gaussian kernels,

    min_{beta >= 0}  0.5 * || Lbar - sum_k beta_k Kbar_k ||_F^2 + lam * sum_k beta_k,

solved by nonnegative coordinate descent. Phase 2 is model-dependent greedy
forward selection scored by mean cross-validated AUC.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import child_seed
from .errors import DataError
from .metrics import FoldPlan, auc, make_folds
from .models import ModelSpec, build_model
from .validation import as_binary_labels, as_float_matrix


def gram_gaussian(x, sigma: float = 1.0) -> np.ndarray:
    """Gaussian kernel matrix K_ij = exp(-(x_i - x_j)^2 / (2 sigma^2))."""
    if sigma <= 0:
        raise DataError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x, dtype=np.float64).ravel()
    if not np.isfinite(x).all():
        raise DataError("gram_gaussian input contains non-finite values")
    diff = x[:, None] - x[None, :]
    return np.exp(-(diff**2) / (2.0 * sigma * sigma))


def gram_delta(y) -> np.ndarray:
    """Label kernel: L_ij = 1/n_c when y_i = y_j = class c, else 0."""
    y = as_binary_labels(y)
    n = y.size
    L = np.zeros((n, n))
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if idx.size:
            L[np.ix_(idx, idx)] = 1.0 / idx.size
    return L


def center_and_normalize(K) -> np.ndarray:
    """Double-centre (HKH) then scale to unit Frobenius norm; zero stays zero."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DataError("kernel matrix must be square")
    if not np.allclose(K, K.T, atol=1e-10):
        raise DataError("kernel matrix must be symmetric")
    row = K.mean(axis=1, keepdims=True)
    col = K.mean(axis=0, keepdims=True)
    centered = K - row - col + K.mean()
    norm = np.sqrt(np.sum(centered**2))
    if norm <= 1e-300:
        return np.zeros_like(K)
    return centered / norm


@dataclass
class HsicResult:
    """Outcome of the kernelized-Lasso screen."""

    beta: np.ndarray
    lam: float
    feature_names: list[str]
    selected: list[str]  # beta > 0, ranked by beta descending (ties by name)
    solver_iters: int
    converged: bool
    objective_curve: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def csv_rows(self):
        order = _rank_order(self.beta, self.feature_names)
        return [(self.feature_names[i], float(self.beta[i])) for i in order]


def _rank_order(beta: np.ndarray, names: list[str]) -> list[int]:
    return sorted(range(beta.size), key=lambda i: (-beta[i], names[i]))


def _kernel_inner_products(X: np.ndarray, y: np.ndarray, sigma: float,
                           block_bytes: int = 1 << 27):
    """Gram-matrix inner products M_kj = <Kbar_k, Kbar_j> and c_k = <Kbar_k, Lbar>.

    Kernels are built in feature blocks so memory stays near `block_bytes`.
    """
    n, p = X.shape
    lbar = center_and_normalize(gram_delta(y)).ravel()
    block = max(1, int(block_bytes // max(1, 8 * n * n)))

    def build(indices):
        V = np.empty((len(indices), n * n))
        for row, k in enumerate(indices):
            V[row] = center_and_normalize(gram_gaussian(X[:, k], sigma)).ravel()
        return V

    M = np.empty((p, p))
    c = np.empty(p)
    starts = list(range(0, p, block))
    for si, s in enumerate(starts):
        bi = list(range(s, min(s + block, p)))
        Vi = build(bi)
        c[bi] = Vi @ lbar
        M[np.ix_(bi, bi)] = Vi @ Vi.T
        for s2 in starts[si + 1 :]:
            bj = list(range(s2, min(s2 + block, p)))
            Vj = build(bj)
            cross = Vi @ Vj.T
            M[np.ix_(bi, bj)] = cross
            M[np.ix_(bj, bi)] = cross.T
    return M, c


def _solve_nonneg_lasso(M: np.ndarray, c: np.ndarray, lam: float,
                        tol: float = 1e-8, max_sweeps: int = 10000):
    """Coordinate descent on the quadratic objective; returns (beta, iters, converged, curve).

    The objective 0.5*||Lbar||^2 - c.beta + 0.5*beta.M.beta + lam*sum(beta)
    is checked to be non-increasing after every sweep.
    """
    p = c.size
    beta = np.zeros(p)
    g = np.zeros(p)  # g = M @ beta, maintained incrementally
    diag = np.diag(M).copy()

    def objective(b, gv):
        return float(0.5 - c @ b + 0.5 * b @ gv + lam * b.sum())

    curve = [objective(beta, g)]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for k in range(p):
            if diag[k] <= 1e-300:
                continue  # zero kernel (constant column)
            old = beta[k]
            new = max(0.0, (c[k] - (g[k] - diag[k] * old) - lam) / diag[k])
            if new != old:
                beta[k] = new
                g += M[:, k] * (new - old)
        obj = objective(beta, g)
        if obj > curve[-1] + 1e-12:
            raise AssertionError(
                f"coordinate-descent objective increased: {curve[-1]:.15g} -> {obj:.15g}"
            )
        done = curve[-1] - obj <= tol
        curve.append(obj)
        if done:
            converged = True
            break
    return beta, sweeps, converged, curve


def hsic_lasso(X, y, lam: float, feature_names=None, cap: int | None = None,
               sigma: float = 1.0, tol: float = 1e-8, max_sweeps: int = 10000) -> HsicResult:
    """Run the kernelized-Lasso screen at a single regularization weight."""
    X = as_float_matrix(X)
    y = as_binary_labels(y)
    if X.shape[0] != y.size:
        raise DataError("X and y disagree on sample count")
    names = list(feature_names) if feature_names is not None else [f"f{i:04d}" for i in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise DataError("feature_names must match the number of columns")
    M, c = _kernel_inner_products(X, y, sigma)
    beta, iters, converged, curve = _solve_nonneg_lasso(M, c, lam, tol=tol, max_sweeps=max_sweeps)
    return _finish_result(beta, lam, names, cap, iters, converged, curve)


def _finish_result(beta, lam, names, cap, iters, converged, curve) -> HsicResult:
    order = _rank_order(beta, names)
    selected = [names[i] for i in order if beta[i] > 0]
    notes = []
    if cap is not None:
        selected = selected[:cap]
    if not selected:
        notes.append("empty selection: no feature kernel aligned with the label kernel")
    if not converged:
        notes.append("coordinate descent hit the sweep limit before the tolerance")
    return HsicResult(
        beta=beta,
        lam=float(lam),
        feature_names=list(names),
        selected=selected,
        solver_iters=iters,
        converged=converged,
        objective_curve=curve,
        notes=notes,
    )


def hsic_screen(X, y, feature_names=None, cap: int = 30, sigma: float = 1.0,
                n_lambdas: int = 10, tol: float = 1e-8, max_sweeps: int = 10000) -> HsicResult:
    """Sweep lam over a log grid and keep the largest lam that yields a full screen.

    The grid spans [lam_max * 1e-3, lam_max] where lam_max zeroes every
    coefficient. The chosen solve is the largest lam with at least
    min(cap, p) active features; if no grid point reaches that, the one with
    the most active features wins (larger lam on ties).
    """
    X = as_float_matrix(X)
    y = as_binary_labels(y)
    names = list(feature_names) if feature_names is not None else [f"f{i:04d}" for i in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise DataError("feature_names must match the number of columns")
    M, c = _kernel_inner_products(X, y, sigma)
    lam_max = float(c.max(initial=0.0))
    if lam_max <= 0:
        empty = _finish_result(np.zeros(X.shape[1]), 0.0, names, cap, 0, True, [0.5])
        return empty
    grid = np.geomspace(lam_max, lam_max * 1e-3, n_lambdas)
    target = min(cap, X.shape[1])
    best = None
    for lam in grid:  # descending
        beta, iters, converged, curve = _solve_nonneg_lasso(M, c, float(lam), tol=tol, max_sweeps=max_sweeps)
        nnz = int(np.sum(beta > 0))
        if best is None or nnz > best[0]:
            best = (nnz, lam, beta, iters, converged, curve)
        if nnz >= target:
            best = (nnz, lam, beta, iters, converged, curve)
            break
    nnz, lam, beta, iters, converged, curve = best
    result = _finish_result(beta, lam, names, cap, iters, converged, curve)
    if nnz < target:
        result.notes.append(
            f"lambda sweep found at most {nnz} active features (target {target})"
        )
    return result


class HsicLassoSelector:
    """Estimator-style wrapper around the screen (fit / get_support / transform)."""

    def __init__(self, cap: int = 30, sigma: float = 1.0, lam: float | None = None,
                 n_lambdas: int = 10, tol: float = 1e-8, max_sweeps: int = 10000):
        self.cap = cap
        self.sigma = sigma
        self.lam = lam
        self.n_lambdas = n_lambdas
        self.tol = tol
        self.max_sweeps = max_sweeps

    def get_params(self, deep: bool = True) -> dict:
        return {
            "cap": self.cap,
            "sigma": self.sigma,
            "lam": self.lam,
            "n_lambdas": self.n_lambdas,
            "tol": self.tol,
            "max_sweeps": self.max_sweeps,
        }

    def set_params(self, **params):
        for k, v in params.items():
            if k not in self.get_params():
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        return self

    def fit(self, X, y, feature_names=None):
        if self.lam is None:
            self.result_ = hsic_screen(X, y, feature_names, cap=self.cap, sigma=self.sigma,
                                       n_lambdas=self.n_lambdas, tol=self.tol,
                                       max_sweeps=self.max_sweeps)
        else:
            self.result_ = hsic_lasso(X, y, self.lam, feature_names, cap=self.cap,
                                      sigma=self.sigma, tol=self.tol, max_sweeps=self.max_sweeps)
        name_to_idx = {n: i for i, n in enumerate(self.result_.feature_names)}
        self.support_ = np.asarray([name_to_idx[n] for n in self.result_.selected], dtype=np.int64)
        return self

    def get_support(self) -> np.ndarray:
        return self.support_

    def transform(self, X):
        return np.asarray(X, dtype=np.float64)[:, self.support_]


@dataclass
class SelectionStep:
    """One forward-selection step: the feature added and the CV score after adding."""

    feature: str
    mean_auc: float
    fold_aucs: list[float]
    fold_scores: list = field(default_factory=list)  # (fold, test_idx, scores) triples


@dataclass
class SelectionTrace:
    """Ordered forward-selection steps; step t has exactly t features."""

    steps: list[SelectionStep]

    @property
    def best_k(self) -> int:
        """1-based feature count with the maximum mean AUC (first max on ties)."""
        if not self.steps:
            raise DataError("empty selection trace")
        scores = [s.mean_auc for s in self.steps]
        return int(np.argmax(scores)) + 1

    @property
    def max_auc(self) -> float:
        return self.steps[self.best_k - 1].mean_auc

    def selected_features(self, k: int | None = None) -> list[str]:
        k = self.best_k if k is None else k
        return [s.feature for s in self.steps[:k]]

    def csv_rows(self):
        rows = []
        for t, step in enumerate(self.steps, start=1):
            rows.append((t, step.feature, step.mean_auc) + tuple(step.fold_aucs))
        return rows


def _cv_candidate(spec: ModelSpec, X, y, cols, folds: FoldPlan):
    fold_aucs = []
    fold_scores = []
    sub = X[:, cols]
    for fold, (train_idx, test_idx) in enumerate(folds.splits()):
        model = build_model(spec)
        model.fit(sub[train_idx], y[train_idx])
        scores = model.predict_proba(sub[test_idx])
        fold_aucs.append(auc(scores, y[test_idx]))
        fold_scores.append((fold, test_idx, scores))
    return float(np.mean(fold_aucs)), [float(a) for a in fold_aucs], fold_scores


def forward_select(X, y, feature_names, candidates, model_spec: ModelSpec,
                   k_folds: int = 5, max_features: int | None = None, seed: int = 0,
                   folds: FoldPlan | None = None, n_jobs: int = 1) -> SelectionTrace:
    """Greedy forward selection scored by mean k-fold CV AUC.

    Folds are stratified and fixed once for the whole run (from `seed`, or a
    caller-supplied FoldPlan). Ties between candidates break on the feature
    name ascending. Every step up to `max_features` is recorded.
    """
    X = as_float_matrix(X)
    y = as_binary_labels(y)
    names = list(feature_names)
    if len(names) != X.shape[1]:
        raise DataError("feature_names must match the number of columns")
    index_of = {n: i for i, n in enumerate(names)}
    unknown = [c for c in candidates if c not in index_of]
    if unknown:
        raise DataError(f"candidates not in the dataset: {unknown[:5]}")
    if folds is None:
        folds = make_folds(y, k_folds, child_seed(seed, "forward-folds"))
    remaining = sorted(set(candidates))
    limit = len(remaining) if max_features is None else min(max_features, len(remaining))
    chosen_idx: list[int] = []
    steps: list[SelectionStep] = []

    def evaluate(name):
        cols = chosen_idx + [index_of[name]]
        mean_auc, fold_aucs, fold_scores = _cv_candidate(model_spec, X, y, cols, folds)
        return name, mean_auc, fold_aucs, fold_scores

    while len(steps) < limit:
        if n_jobs != 1 and len(remaining) > 1:
            from joblib import Parallel, delayed

            results = Parallel(n_jobs=n_jobs)(delayed(evaluate)(name) for name in remaining)
        else:
            results = [evaluate(name) for name in remaining]
        best = None
        for name, mean_auc, fold_aucs, fold_scores in results:  # name-ascending order
            if best is None or mean_auc > best[1]:
                best = (name, mean_auc, fold_aucs, fold_scores)
        name, mean_auc, fold_aucs, fold_scores = best
        chosen_idx.append(index_of[name])
        remaining.remove(name)
        steps.append(SelectionStep(feature=name, mean_auc=mean_auc, fold_aucs=fold_aucs,
                                   fold_scores=fold_scores))
    return SelectionTrace(steps=steps)
