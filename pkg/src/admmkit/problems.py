"""Regularized-risk problem definition: losses, objective, proximal step.

A :class:`Problem` bundles the training samples, the smooth per-sample loss
(logistic or square, optionally with an L2 term folded into every sample),
a simple L1 regularizer on the weights, the L1 splitting function, and the
linear constraint ``A x + B y = c`` that couples them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.special import expit

from .exceptions import ConfigError, DegenerateProblemError, DimensionError
from .linalg import SparseMat, as_vector, power_iter_bound

__all__ = [
    "LOGISTIC",
    "SQUARE",
    "Sample",
    "LossSpec",
    "SmoothnessInfo",
    "Problem",
    "prox_l1",
    "estimate_L",
    "loss_value_grad",
    "full_objective",
]

LOGISTIC = "logistic"
SQUARE = "square"

# Strictly positive floor for the coupling-curvature bound when A == 0, so
# the inexact-Uzawa denominators never vanish.
L_A_FLOOR = 1e-8


@dataclass(frozen=True)
class Sample:
    """One training sample: sparse features plus a label."""

    indices: np.ndarray
    values: np.ndarray
    label: float


@dataclass(frozen=True)
class LossSpec:
    """Per-sample loss kind with an optional L2 coefficient ``mu_reg``.

    ``mu_reg`` is folded into every sample's loss as ``(mu_reg/2)||x||^2``,
    which keeps the empirical-mean form of the objective and shifts the
    smoothness constant by exactly ``mu_reg``.
    """

    kind: str = LOGISTIC
    mu_reg: float = 0.0

    def __post_init__(self):
        if self.kind not in (LOGISTIC, SQUARE):
            raise ConfigError(f"unknown loss kind {self.kind!r}")
        if self.mu_reg < 0:
            raise ConfigError("mu_reg must be nonnegative")


@dataclass(frozen=True)
class SmoothnessInfo:
    """Gradient smoothness constant L and eigenvalue bound L_A of rho*A'A."""

    L: float
    L_A: float

    def __post_init__(self):
        if self.L <= 0 or self.L_A <= 0:
            raise ConfigError("smoothness constants must be positive")


class Problem:
    """Immutable description of one constrained regularized-risk problem.

    ``min (1/n) sum_i loss_i(x) + omega_l1*||x||_1 + psi_l1*||y||_1``
    subject to ``A x + B y = c``.
    """

    def __init__(
        self,
        X,
        labels,
        loss: LossSpec,
        A: SparseMat,
        B: SparseMat | None = None,
        c=None,
        rho: float = 0.01,
        omega_l1: float | None = None,
        psi_l1: float = 1e-5,
    ):
        X = scipy.sparse.csr_matrix(X, dtype=np.float64)
        X.sum_duplicates()
        X.sort_indices()
        labels = as_vector(labels, X.shape[0], "labels")
        if X.shape[0] < 1:
            raise DimensionError("need at least one sample")
        if not np.all(np.isfinite(X.data)) or not np.all(np.isfinite(labels)):
            raise DimensionError("samples must be finite")
        if rho <= 0:
            raise ConfigError("rho must be positive")
        if psi_l1 < 0:
            raise ConfigError("psi_l1 must be nonnegative")
        if omega_l1 is not None and omega_l1 < 0:
            raise ConfigError("omega_l1 must be nonnegative")
        if A.cols != X.shape[1]:
            raise DimensionError(
                f"A has {A.cols} columns but the data has {X.shape[1]} features"
            )
        m = A.rows
        if B is None:
            B = SparseMat.neg_identity(m)
        if c is None:
            c = np.zeros(B.rows)
        c = as_vector(c, B.rows, "c")
        if B.rows != m:
            raise DimensionError("A and B must have the same number of rows")

        self.X = X
        self.labels = labels
        self.loss = loss
        self.A = A
        self.B = B
        self.c = c
        self.rho = float(rho)
        self.omega_l1 = omega_l1
        self.psi_l1 = float(psi_l1)
        # hot-path row views
        self._indptr = X.indptr
        self._indices = X.indices
        self._data = X.data
        # dense fast path for the (typically small) constraint matrix
        self._A_dense = A.to_dense() if A.rows * A.cols <= 262_144 else None
        self._B_neg_identity = B.is_neg_identity()
        self._c_zero = not np.any(c)

    @classmethod
    def from_samples(cls, samples, d: int, loss: LossSpec, A: SparseMat, **kw) -> "Problem":
        X = samples_to_csr(samples, d)
        labels = np.array([s.label for s in samples], dtype=np.float64)
        return cls(X, labels, loss, A, **kw)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.A.rows

    def subset(self, idx) -> "Problem":
        """Same constraints and penalties, restricted to the samples ``idx``."""
        return Problem(
            self.X[idx],
            self.labels[idx],
            self.loss,
            self.A,
            self.B,
            self.c,
            self.rho,
            self.omega_l1,
            self.psi_l1,
        )

    # -- per-sample loss ---------------------------------------------------

    def margin(self, i: int, x: np.ndarray) -> float:
        sl = slice(self._indptr[i], self._indptr[i + 1])
        return float(np.dot(self._data[sl], x[self._indices[sl]]))

    def loss_scalar(self, i: int, x: np.ndarray) -> tuple[float, float]:
        """Loss value and derivative scalar ``s`` of sample ``i`` at ``x``.

        The smooth part of the gradient is ``s * a_i`` plus the folded-in
        term ``mu_reg * x``; the value includes ``(mu_reg/2)||x||^2``.
        """
        if not 0 <= i < self.n:
            raise DimensionError(f"sample index {i} out of range [0, {self.n})")
        m = self.margin(i, x)
        y = self.labels[i]
        if self.loss.kind == LOGISTIC:
            val = float(np.logaddexp(0.0, -y * m))
            s = float(-y * expit(-y * m))
        else:
            r = m - y
            val = 0.5 * r * r
            s = r
        mu = self.loss.mu_reg
        if mu > 0.0:
            val += 0.5 * mu * float(x @ x)
        return val, s

    def sample_gradient(self, i: int, x: np.ndarray, s: float) -> np.ndarray:
        """Dense gradient ``s * a_i + mu_reg * x``."""
        sl = slice(self._indptr[i], self._indptr[i + 1])
        mu = self.loss.mu_reg
        g = mu * x if mu > 0.0 else np.zeros(self.d)
        g[self._indices[sl]] += s * self._data[sl]
        return g

    # -- vectorized full-data paths ------------------------------------------

    def margins(self, x: np.ndarray) -> np.ndarray:
        return self.X.dot(x)

    def loss_scalars(self, x: np.ndarray) -> np.ndarray:
        """Derivative scalars for all samples at once."""
        m = self.margins(x)
        y = self.labels
        if self.loss.kind == LOGISTIC:
            return -y * expit(-y * m)
        return m - y

    def mean_loss(self, x: np.ndarray, include_reg: bool = True) -> float:
        m = self.margins(x)
        y = self.labels
        if self.loss.kind == LOGISTIC:
            total = float(np.logaddexp(0.0, -y * m).sum())
        else:
            r = m - y
            total = 0.5 * float(r @ r)
        val = total / self.n
        if include_reg and self.loss.mu_reg > 0.0:
            val += 0.5 * self.loss.mu_reg * float(x @ x)
        return val

    def mean_gradient(self, x: np.ndarray) -> np.ndarray:
        """Gradient of the mean loss, ``(1/n) X's + mu_reg x``."""
        s = self.loss_scalars(x)
        g = self.X.T.dot(s) / self.n
        if self.loss.mu_reg > 0.0:
            g = g + self.loss.mu_reg * x
        return g

    # -- composite objective ---------------------------------------------------

    def objective(self, x: np.ndarray, y: np.ndarray) -> float:
        """``(1/n) sum_i loss_i(x) + omega_l1 ||x||_1 + psi_l1 ||y||_1``."""
        x = as_vector(x, self.d, "x")
        y = as_vector(y, self.B.cols, "y")
        val = self.mean_loss(x)
        if self.omega_l1 is not None:
            val += self.omega_l1 * float(np.abs(x).sum())
        val += self.psi_l1 * float(np.abs(y).sum())
        return val

    # -- constraint-side products (dense fast path when A is small) -------------

    def Ax(self, x: np.ndarray) -> np.ndarray:
        if self._A_dense is not None:
            return self._A_dense @ x
        return self.A.matvec(x)

    def ATw(self, w: np.ndarray) -> np.ndarray:
        if self._A_dense is not None:
            return self._A_dense.T @ w
        return self.A.rmatvec(w)

    def residual_term(self, y: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        """``B y - c + alpha``, the x-independent part of the penalty."""
        if self._B_neg_identity and self._c_zero:
            return alpha - y
        return self.B.matvec(y) - self.c + alpha

    def constraint_gap(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self._B_neg_identity and self._c_zero:
            return self.Ax(x) - y
        return self.Ax(x) + self.B.matvec(y) - self.c


def samples_to_csr(samples, d: int):
    """Stack sparse samples into an n-by-d CSR matrix."""
    indptr = np.zeros(len(samples) + 1, dtype=np.int64)
    for i, s in enumerate(samples):
        if len(s.indices) and s.indices[-1] >= d:
            raise DimensionError(
                f"sample {i} has feature index {int(s.indices[-1])} >= d={d}"
            )
        indptr[i + 1] = indptr[i] + len(s.indices)
    indices = np.concatenate([s.indices for s in samples]) if samples else np.zeros(0, int)
    data = np.concatenate([s.values for s in samples]) if samples else np.zeros(0)
    return scipy.sparse.csr_matrix(
        (data, indices, indptr), shape=(len(samples), d), dtype=np.float64
    )


def prox_l1(v, kappa: float) -> np.ndarray:
    """Soft threshold: ``argmin_z 0.5||z - v||^2 + kappa ||z||_1``."""
    if kappa < 0:
        raise DimensionError("kappa must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    if kappa == 0.0:
        return v.copy()
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def estimate_L(p: Problem) -> SmoothnessInfo:
    """Smoothness constants for ``p``.

    L is the conservative global bound ``max_i ||a_i||^2 / 4 + mu_reg``
    (logistic) or ``max_i ||a_i||^2 + mu_reg`` (square); one L serves every
    sample. L_A is the power-iteration bound on ``lambda_max(rho*A'A)``
    with 1.01 slack, floored at ``L_A_FLOOR`` so IU denominators stay
    positive even for A = 0.
    """
    sq = p.X.multiply(p.X).sum(axis=1)
    max_row = float(np.max(sq)) if p.n else 0.0
    if p.loss.kind == LOGISTIC:
        L = max_row / 4.0 + p.loss.mu_reg
    else:
        L = max_row + p.loss.mu_reg
    if L <= 0.0:
        raise DegenerateProblemError(
            "all features are zero and mu_reg is 0: the loss has no curvature"
        )
    L_A = power_iter_bound(p.A, p.rho, iters=100, slack=1.01)
    return SmoothnessInfo(L=L, L_A=max(L_A, L_A_FLOOR))


def loss_value_grad(p: Problem, i: int, x) -> tuple[float, np.ndarray]:
    """Value and dense gradient of sample ``i``'s loss at ``x``."""
    x = as_vector(x, p.d, "x")
    val, s = p.loss_scalar(i, x)
    return val, p.sample_gradient(i, x, s)


def full_objective(p: Problem, x, y) -> float:
    """Alias for :meth:`Problem.objective` with input validation."""
    return p.objective(x, y)
