"""The x-update rules of the ADMM variants, and the state they carry.

All seven rules minimize (exactly or via linearization) the x-subproblem of
the augmented Lagrangian

    (1/n) sum_i loss_i(x) + Omega(x) + (rho/2) ||A x + B y_t - c + alpha_t||^2

differing in how the empirical loss is approximated (one sample, a history
average, an incrementally maintained per-sample average, or the full
gradient) and in whether the quadratic coupling term is kept exact or
linearized around x_t (the inexact-Uzawa step, which avoids the cached
factorization entirely).

===========  ===================  ==================  =================
method       gradient             coupling term       stepsize
===========  ===================  ==================  =================
sa           per-sample average   exact (solve)       constant 1/L
sa-iu        per-sample average   linearized          constant
sa-prox      per-sample average   linearized + prox   constant
stoc         one sample           exact (solve)       eta0/sqrt(t+1)
opg          one sample           linearized          eta0/sqrt(t+1)
rda          history average      linearized          eta0*sqrt(t+1)
batch        full gradient        exact (solve)       constant
batch-iu     full gradient        linearized          constant
===========  ===================  ==================  =================
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConfigError, DimensionError
from .linalg import MAX_DENSE_DIM, CachedSpdSolver, SpectralCache
from .problems import Problem, SmoothnessInfo, estimate_L, prox_l1

__all__ = [
    "METHODS",
    "SWEEP_METHODS",
    "STOCHASTIC_METHODS",
    "TUNED_METHODS",
    "GradientMemory",
    "RdaState",
    "UpdaterSpec",
    "validate_spec",
    "sa_x_update",
    "sa_iu_x_update",
    "sa_prox_x_update",
    "stoc_x_update",
    "opg_x_update",
    "rda_x_update",
    "batch_x_update",
    "batch_iu_x_update",
]

METHODS = ("sa", "sa-iu", "sa-prox", "stoc", "opg", "rda", "batch", "batch-iu")
# methods accepted in sweep configs (sa-prox is API-only)
SWEEP_METHODS = ("sa", "sa-iu", "stoc", "opg", "rda", "batch", "batch-iu")
STOCHASTIC_METHODS = frozenset({"sa", "sa-iu", "sa-prox", "stoc", "opg", "rda"})
# baselines with a tuned stepsize proportionality constant
TUNED_METHODS = frozenset({"stoc", "opg", "rda"})
_MEMORY_METHODS = frozenset({"sa", "sa-iu", "sa-prox"})
_SOLVER_METHODS = frozenset({"sa", "batch"})
_SPECIAL_CASE_METHODS = frozenset({"opg", "rda"})  # require B = -I, c = 0


class GradientMemory:
    """Per-sample snapshot store behind the gradient-averaging rules.

    Keeps, for every sample, the last iterate at which its gradient was
    evaluated, and maintains the running means of those iterates
    (``snap_avg``) and gradients (``grad_avg``) incrementally. Gradients of
    the linear-model losses factor as ``s_i * a_i + mu_reg * x``, so only
    the scalar ``s_i`` is stored per sample and the full vector is
    reconstructed on demand.

    Cold start: snapshots begin at ``x0`` and every gradient contribution
    at the zero vector; both averages divide by n, not by the number of
    samples visited.
    """

    def __init__(self, problem: Problem, x0: np.ndarray):
        self.problem = problem
        n, d = problem.n, problem.d
        self.n = n
        self.snapshots = np.tile(np.asarray(x0, dtype=np.float64), (n, 1))
        self.scalars = np.zeros(n)
        self.visited = np.zeros(n, dtype=bool)
        self.snap_avg = np.array(x0, dtype=np.float64, copy=True)
        self.grad_avg = np.zeros(d)

    def update(self, i: int, x: np.ndarray, s: float) -> None:
        """Refresh sample ``i`` with iterate ``x`` and derivative scalar ``s``."""
        p = self.problem
        if self.n == 1:
            # Single sample: the averages *are* the current values. Computing
            # them directly (same code path as the batch rules) keeps SA and
            # batch iterate sequences bitwise identical.
            self.snap_avg = x.copy()
            self.grad_avg = p.mean_gradient(x)
        else:
            inv_n = 1.0 / self.n
            lo, hi = p.X.indptr[i], p.X.indptr[i + 1]
            idx = p.X.indices[lo:hi]
            vals = p.X.data[lo:hi]
            old = self.snapshots[i]
            mu = p.loss.mu_reg
            if self.visited[i]:
                self.grad_avg[idx] += (s - self.scalars[i]) * vals * inv_n
                if mu > 0.0:
                    self.grad_avg += mu * inv_n * (x - old)
            else:
                self.grad_avg[idx] += s * vals * inv_n
                if mu > 0.0:
                    self.grad_avg += mu * inv_n * x
            self.snap_avg += (x - old) * inv_n
        self.snapshots[i] = x
        self.scalars[i] = s
        self.visited[i] = True

    def gradient(self, i: int) -> np.ndarray:
        """The stored gradient of sample ``i`` (zero if never visited)."""
        if not self.visited[i]:
            return np.zeros(self.problem.d)
        return self.problem.sample_gradient(i, self.snapshots[i], self.scalars[i])


@dataclass
class RdaState:
    """Running sums of past sample gradients and iterates for the RDA rule."""

    grad_sum: np.ndarray
    x_sum: np.ndarray
    y_sum: np.ndarray
    alpha_sum: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, d: int, m: int) -> "RdaState":
        return cls(np.zeros(d), np.zeros(d), np.zeros(m), np.zeros(m))

    def push(self, g, x, y, alpha) -> None:
        self.grad_sum += g
        self.x_sum += x
        self.y_sum += y
        self.alpha_sum += alpha
        self.count += 1

    def averages(self):
        if self.count == 0:
            raise DimensionError("no iterates recorded yet")
        c = self.count
        return (self.grad_sum / c, self.x_sum / c, self.y_sum / c, self.alpha_sum / c)


@dataclass(frozen=True)
class UpdaterSpec:
    """Which x-update rule to run, its stepsize constant, and the
    smoothness constants it relies on."""

    kind: str
    eta0: float | None = None
    constants: SmoothnessInfo | None = None


def validate_spec(problem: Problem, spec: UpdaterSpec) -> UpdaterSpec:
    """Check spec/problem compatibility and fill in missing constants.

    Raises ConfigError before any iteration runs: unknown kind, missing or
    nonpositive eta0 for the decaying-stepsize baselines, a simple
    regularizer on a rule that cannot handle one, the B != -I / c != 0
    special-case restriction, and the dense-dimension limit for rules that
    form rho*A'A.
    """
    kind = spec.kind
    if kind not in METHODS:
        raise ConfigError(f"unknown method {kind!r}; expected one of {METHODS}")
    if kind in TUNED_METHODS:
        if spec.eta0 is None or spec.eta0 <= 0:
            raise ConfigError(f"method {kind!r} needs a positive eta0")
    if problem.omega_l1 is not None and kind != "sa-prox":
        raise ConfigError(
            f"method {kind!r} does not support a simple regularizer on x; "
            f"use 'sa-prox' or fold the penalty into the splitting term"
        )
    if kind in _SPECIAL_CASE_METHODS:
        if not problem.B.is_neg_identity() or np.any(problem.c != 0.0):
            raise ConfigError(
                f"method {kind!r} is only defined for B = -I and c = 0"
            )
    if kind in _SOLVER_METHODS or kind == "stoc":
        if problem.d > MAX_DENSE_DIM:
            raise ConfigError(
                f"method {kind!r} needs a dense {problem.d}x{problem.d} "
                f"factorization (limit {MAX_DENSE_DIM}); use 'sa-iu' or "
                f"'batch-iu' instead"
            )
    constants = spec.constants if spec.constants is not None else estimate_L(problem)
    return replace(spec, constants=constants)


# ---------------------------------------------------------------------------
# shared cores: the gradient-averaging and full-gradient rules are the same
# formula with different (xbar, gradbar); routing both through one code path
# makes the n = 1 equivalence exact.
# ---------------------------------------------------------------------------


def _average_solve(p: Problem, solver: CachedSpdSolver, xbar, gradbar, y, alpha):
    rhs = solver.L * xbar - p.rho * p.ATw(p.residual_term(y, alpha)) - gradbar
    return solver.solve(rhs)


def _iu_point(p: Problem, sm: SmoothnessInfo, xbar, gradbar, x_t, y, alpha):
    grad_r = p.rho * p.ATw(p.Ax(x_t) + p.residual_term(y, alpha))
    return (sm.L * xbar + sm.L_A * x_t - (gradbar + grad_r)) / (sm.L_A + sm.L)


# ---------------------------------------------------------------------------
# gradient-averaging rules
# ---------------------------------------------------------------------------


def sa_x_update(p, mem: GradientMemory, k, x_t, y_t, alpha_t, solver) -> np.ndarray:
    """Exact minimizer of the averaged-loss model plus the exact coupling term.

    Refreshes the memory at sample ``k`` with the gradient at ``x_t``, then
    returns ``(rho A'A + L I)^{-1} [L xbar - rho A'(B y - c + alpha) -
    gradbar]`` using the cached factorization.
    """
    _, s = p.loss_scalar(k, x_t)
    mem.update(k, x_t, s)
    return _average_solve(p, solver, mem.snap_avg, mem.grad_avg, y_t, alpha_t)


def sa_iu_x_update(p, mem: GradientMemory, k, x_t, y_t, alpha_t, sm: SmoothnessInfo):
    """Inexact-Uzawa variant: the coupling term is linearized at ``x_t`` with
    curvature L_A, so no system is solved."""
    _, s = p.loss_scalar(k, x_t)
    mem.update(k, x_t, s)
    return _iu_point(p, sm, mem.snap_avg, mem.grad_avg, x_t, y_t, alpha_t)


def sa_prox_x_update(p, mem: GradientMemory, k, x_t, y_t, alpha_t, sm: SmoothnessInfo):
    """Inexact-Uzawa step followed by the proximal step of the simple
    regularizer. With ``omega_l1`` unset this is exactly ``sa_iu_x_update``."""
    _, s = p.loss_scalar(k, x_t)
    mem.update(k, x_t, s)
    v = _iu_point(p, sm, mem.snap_avg, mem.grad_avg, x_t, y_t, alpha_t)
    if p.omega_l1 is None:
        return v
    return prox_l1(v, p.omega_l1 / (sm.L_A + sm.L))


# ---------------------------------------------------------------------------
# single-sample baselines
# ---------------------------------------------------------------------------


def stoc_x_update(p, k, x_t, y_t, alpha_t, t, eta0, spectral: SpectralCache):
    """One-sample linearized loss with the exact coupling term and decaying
    stepsize ``eta0/sqrt(t+1)``; the shifted system is solved through the
    cached eigendecomposition of rho*A'A."""
    if spectral.dimension != p.d:
        raise DimensionError("spectral cache dimension does not match problem")
    eta = eta0 / np.sqrt(t + 1.0)
    _, s = p.loss_scalar(k, x_t)
    g = p.sample_gradient(k, x_t, s)
    b = x_t / eta - g - p.rho * p.ATw(p.residual_term(y_t, alpha_t))
    return spectral.shifted_solve(b, 1.0 / eta)


def opg_x_update(p, k, x_t, y_t, alpha_t, t, eta0):
    """One-sample gradient step on loss plus linearized coupling term
    (requires B = -I, c = 0)."""
    eta = eta0 / np.sqrt(t + 1.0)
    _, s = p.loss_scalar(k, x_t)
    g = p.sample_gradient(k, x_t, s)
    return x_t - eta * (g + p.rho * p.ATw(p.Ax(x_t) - y_t + alpha_t))


def rda_x_update(p, k, x_t, y_t, alpha_t, rda: RdaState, eta0):
    """Dual-averaging rule (requires B = -I, c = 0).

    The current sample gradient and iterates are pushed into the running
    averages first (count m includes them), then

        x_{t+1} = -eta0*sqrt(m) * [gbar + rho A'(A xbar - ybar + abar)].

    Normalization note: the growing stepsize applied to the running means
    is pinned so that the first step from x_0 = 0 coincides with the OPG
    rule's first step at the same eta0.
    """
    _, s = p.loss_scalar(k, x_t)
    g = p.sample_gradient(k, x_t, s)
    rda.push(g, x_t, y_t, alpha_t)
    gbar, xbar, ybar, abar = rda.averages()
    eta = eta0 * np.sqrt(rda.count)
    return -eta * (gbar + p.rho * p.ATw(p.Ax(xbar) - ybar + abar))


# ---------------------------------------------------------------------------
# full-gradient (batch) rules
# ---------------------------------------------------------------------------


def batch_x_update(p, x_t, y_t, alpha_t, solver) -> np.ndarray:
    """Full-gradient counterpart of ``sa_x_update`` (n gradient
    evaluations per call)."""
    return _average_solve(p, solver, x_t, p.mean_gradient(x_t), y_t, alpha_t)


def batch_iu_x_update(p, x_t, y_t, alpha_t, sm: SmoothnessInfo) -> np.ndarray:
    """Full-gradient counterpart of ``sa_iu_x_update``."""
    return _iu_point(p, sm, x_t, p.mean_gradient(x_t), x_t, y_t, alpha_t)
