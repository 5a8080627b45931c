"""Scikit-learn compatible estimators wrapping the ADMM solvers.

The solvers fit a linear model with a graph-guided fusion penalty; these
classes expose that as ``fit``/``predict`` estimators so the algorithms
compose with pipelines, grid search, and the rest of the ecosystem.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import bench
from .engine import UpdaterSpec, run
from .exceptions import ConfigError
from .graphs import FeatureGraph, chain_graph, correlation_graph, penalty_matrix
from .problems import LOGISTIC, SQUARE, LossSpec, Problem, Sample, estimate_L
from .updaters import METHODS, STOCHASTIC_METHODS, TUNED_METHODS


def _as_samples(X, y):
    X = scipy.sparse.csr_matrix(X)
    out = []
    for i in range(X.shape[0]):
        sl = slice(X.indptr[i], X.indptr[i + 1])
        out.append(Sample(X.indices[sl].astype(np.int64), X.data[sl], float(y[i])))
    return out


class _BaseGraphFusedLasso(BaseEstimator):
    """Shared fitting logic; subclasses fix the loss and prediction rule."""

    _loss_kind = LOGISTIC

    def __init__(
        self,
        method: str = "sa-iu",
        rho: float = 0.01,
        lam: float = 1e-5,
        mu_reg: float = 0.0,
        eta0: float | None = None,
        passes: int = 10,
        graph="chain",
        graph_threshold: float = 0.5,
        random_state: int = 0,
    ):
        self.method = method
        self.rho = rho
        self.lam = lam
        self.mu_reg = mu_reg
        self.eta0 = eta0
        self.passes = passes
        self.graph = graph
        self.graph_threshold = graph_threshold
        self.random_state = random_state

    def _resolve_graph(self, X, y, d) -> FeatureGraph:
        g = self.graph
        if isinstance(g, FeatureGraph):
            if g.d != d:
                raise ConfigError(f"graph has d={g.d}, data has d={d}")
            return g
        if g == "chain":
            return chain_graph(d)
        if g == "correlation":
            return correlation_graph(_as_samples(X, y), self.graph_threshold, d)
        if g is None or g == "none":
            return FeatureGraph(d=d, edges=())
        # explicit (i, j[, w]) rows
        edges = tuple(
            (int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0) for e in g
        )
        return FeatureGraph(d=d, edges=edges)

    def _fit(self, X, y_signed, raw_X, raw_y):
        if self.method not in METHODS:
            raise ConfigError(f"method {self.method!r} not in {METHODS}")
        if self.passes < 1:
            raise ConfigError("passes must be >= 1")
        d = X.shape[1]
        graph = self._resolve_graph(raw_X, raw_y, d)
        A = penalty_matrix(graph)
        problem = Problem(
            X, y_signed, LossSpec(self._loss_kind, self.mu_reg), A,
            rho=self.rho, psi_l1=self.lam,
        )
        eta0 = self.eta0
        if self.method in TUNED_METHODS and eta0 is None:
            protocol = bench.TuneProtocol(subset_size=min(500, problem.n))
            eta0 = bench.tune_stepsize(problem, self.method, protocol,
                                       self.random_state)
        stochastic = self.method in STOCHASTIC_METHODS
        T = self.passes * problem.n if stochastic else self.passes
        result = run(
            problem,
            UpdaterSpec(self.method, eta0=eta0, constants=estimate_L(problem)),
            T=T, seed=self.random_state,
        )
        self.coef_ = result.xbar
        self.n_features_in_ = d
        self.eta0_ = eta0
        self.graph_ = graph
        self.n_iter_ = T
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, accept_sparse="csr")
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.coef_


class GraphFusedLassoClassifier(_BaseGraphFusedLasso, ClassifierMixin):
    """Binary linear classifier with logistic loss and a graph-guided
    fusion penalty on the coefficients.

    Parameters mirror the solver configuration: ``method`` picks the
    x-update rule ('sa', 'sa-iu', 'sa-prox', 'stoc', 'opg', 'rda', 'batch',
    'batch-iu'), ``rho`` the augmented-Lagrangian penalty, ``lam`` the
    fusion weight, ``mu_reg`` an optional L2 term that makes the loss
    strongly convex, and ``graph`` the feature graph ('chain',
    'correlation', a FeatureGraph, an iterable of (i, j[, w]) edges, or
    None). Decaying-stepsize baselines tune ``eta0`` automatically when it
    is not given.
    """

    _loss_kind = LOGISTIC

    def fit(self, X, y):
        X_arr, y_arr = check_X_y(X, y, accept_sparse="csr")
        self.classes_ = np.unique(y_arr)
        if len(self.classes_) != 2:
            raise ConfigError(
                f"expected exactly two classes, got {len(self.classes_)}"
            )
        y_signed = np.where(y_arr == self.classes_[0], -1.0, 1.0)
        return self._fit(X_arr, y_signed, X_arr, y_arr)

    def predict(self, X):
        margin = self.decision_function(X)
        return np.where(margin >= 0, self.classes_[1], self.classes_[0])

    def predict_proba(self, X):
        p1 = expit(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])


class GraphFusedLassoRegressor(_BaseGraphFusedLasso, RegressorMixin):
    """Linear regression with square loss and a graph-guided fusion
    penalty; same solver configuration surface as the classifier."""

    _loss_kind = SQUARE

    def fit(self, X, y):
        X_arr, y_arr = check_X_y(X, y, accept_sparse="csr")
        return self._fit(X_arr, np.asarray(y_arr, dtype=np.float64), X_arr, y_arr)

    def predict(self, X):
        return self.decision_function(X)
