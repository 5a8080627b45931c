"""The ADMM outer loop: x-step dispatch, y-step, dual step, metrics.

Every method shares the same y and dual updates; only the x-step differs.
The experiment configuration (``B = -I``, ``c = 0``, L1 splitting term)
makes the y-step a closed-form soft threshold, and the engine rejects any
configuration whose y-step would need a nonlinear solve.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, NumericalError
from .linalg import as_vector, build_spd_solver, sym_eig
from .problems import Problem, prox_l1
from . import updaters
from .updaters import (
    GradientMemory,
    RdaState,
    STOCHASTIC_METHODS,
    UpdaterSpec,
    validate_spec,
)

__all__ = [
    "RunTrace",
    "RunResult",
    "BoundReport",
    "ReferenceSolution",
    "y_update",
    "dual_update",
    "run",
    "solve_reference",
    "theorem_bound_report",
]


@dataclass
class RunTrace:
    """Per-checkpoint metrics of one solver run.

    ``passes`` is cumulative gradient evaluations divided by n, the x-axis
    that makes batch and stochastic methods comparable. ``objective`` is
    the problem objective at the current iterate with the constraint
    substituted (y = A x), so it is bounded below by the optimum;
    ``feasibility`` is ``||A x + B y - c||`` at the current pair. The
    ergodic output averages (the quantities the convergence bounds govern)
    live on the RunResult, not the trace. ``wall_ms`` is 0.0 unless the run
    measured time.
    """

    passes: list[float] = field(default_factory=list)
    iters: list[int] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    feasibility: list[float] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)

    def append(self, passes, iters, objective, test_loss, feasibility, wall_ms):
        if self.passes and passes < self.passes[-1]:
            raise ValueError("effective passes must be nondecreasing")
        self.passes.append(float(passes))
        self.iters.append(int(iters))
        self.objective.append(float(objective))
        self.test_loss.append(float(test_loss))
        self.feasibility.append(float(feasibility))
        self.wall_ms.append(float(wall_ms))

    def __len__(self):
        return len(self.passes)

    def rows(self):
        return zip(
            self.passes, self.iters, self.objective,
            self.test_loss, self.feasibility, self.wall_ms,
        )

    def __eq__(self, other):
        if not isinstance(other, RunTrace):
            return NotImplemented
        return list(self.rows()) == list(other.rows())


@dataclass
class RunResult:
    """Output averages over t = 1..T, the trace, and the final iterates."""

    xbar: np.ndarray
    ybar: np.ndarray
    trace: RunTrace
    x_final: np.ndarray
    y_final: np.ndarray
    alpha_final: np.ndarray
    spec: UpdaterSpec


def y_update(p: Problem, x_next, alpha_t, Ax=None) -> np.ndarray:
    """Closed-form y-step for B = -I, c = 0, psi = psi_l1 * ||.||_1.

    Returns ``prox_l1(A x_next + alpha_t, psi_l1 / rho)``, the exact argmin
    of the y-subproblem in this configuration.
    """
    if not p.B.is_neg_identity() or np.any(p.c != 0.0):
        raise ConfigError(
            "the y-step is only implemented in closed form for B = -I, c = 0"
        )
    if Ax is None:
        Ax = p.A.matvec(as_vector(x_next, p.d, "x"))
    return prox_l1(Ax + alpha_t, p.psi_l1 / p.rho)


def dual_update(p: Problem, alpha_t, x_next, y_next) -> np.ndarray:
    """``alpha + (A x_next + B y_next - c)``, one add per step."""
    return alpha_t + p.constraint_gap(x_next, y_next)


def _plain_test_loss(test_set, x, kind) -> float:
    """Mean data-fit loss on held-out samples (no regularizers)."""
    if test_set is None:
        return float("nan")
    X, labels = test_set
    m = X.dot(x)
    if kind == "logistic":
        return float(np.logaddexp(0.0, -labels * m).mean())
    r = m - labels
    return 0.5 * float(r @ r) / len(labels)


def run(
    problem: Problem,
    spec: UpdaterSpec,
    T: int,
    seed: int = 0,
    checkpoint_every: int | None = None,
    test_set=None,
    x0=None,
    y0=None,
    alpha0=None,
    measure_time: bool = False,
) -> RunResult:
    """Execute T iterations of (x-step, y-step, dual step).

    Samples are drawn uniformly with replacement from a PCG64 generator
    seeded with ``seed``; with the seed fixed the whole trace is
    deterministic (bitwise, when ``measure_time`` is False). Output
    averages accumulate t = 1..T, excluding the initial point. Stochastic
    methods add 1/n effective passes per iteration, batch methods add 1;
    checkpoint objective sweeps are excluded from that accounting.
    """
    if T < 1:
        raise ConfigError("T must be >= 1")
    spec = validate_spec(problem, spec)
    if not problem.B.is_neg_identity() or np.any(problem.c != 0.0):
        raise ConfigError(
            "the engine only supports B = -I, c = 0 (closed-form y-step)"
        )
    sm = spec.constants
    kind = spec.kind
    n, d, m = problem.n, problem.d, problem.m

    x = np.zeros(d) if x0 is None else as_vector(x0, d, "x0").copy()
    y = np.zeros(m) if y0 is None else as_vector(y0, m, "y0").copy()
    alpha = np.zeros(m) if alpha0 is None else as_vector(alpha0, m, "alpha0").copy()

    solver = None
    spectral = None
    mem = None
    rda = None
    if kind in ("sa", "batch"):
        solver = build_spd_solver(problem.A, problem.rho, sm.L)
    if kind == "stoc":
        spectral = sym_eig(problem.A.gram(problem.rho))
    if kind in ("sa", "sa-iu", "sa-prox"):
        mem = GradientMemory(problem, x)
    if kind == "rda":
        rda = RdaState.zeros(d, m)

    stochastic = kind in STOCHASTIC_METHODS
    rng = np.random.default_rng(seed)
    thresh = problem.psi_l1 / problem.rho
    eta0 = spec.eta0

    out_x = np.zeros(d)
    out_y = np.zeros(m)
    grad_evals = 0
    trace = RunTrace()
    t_start = time.perf_counter() if measure_time else 0.0

    for t in range(T):
        k = int(rng.integers(n)) if stochastic else -1
        if kind == "sa":
            x1 = updaters.sa_x_update(problem, mem, k, x, y, alpha, solver)
        elif kind == "sa-iu":
            x1 = updaters.sa_iu_x_update(problem, mem, k, x, y, alpha, sm)
        elif kind == "sa-prox":
            x1 = updaters.sa_prox_x_update(problem, mem, k, x, y, alpha, sm)
        elif kind == "stoc":
            x1 = updaters.stoc_x_update(problem, k, x, y, alpha, t, eta0, spectral)
        elif kind == "opg":
            x1 = updaters.opg_x_update(problem, k, x, y, alpha, t, eta0)
        elif kind == "rda":
            x1 = updaters.rda_x_update(problem, k, x, y, alpha, rda, eta0)
        elif kind == "batch":
            x1 = updaters.batch_x_update(problem, x, y, alpha, solver)
        else:  # batch-iu
            x1 = updaters.batch_iu_x_update(problem, x, y, alpha, sm)

        Ax1 = problem.Ax(x1)
        y1 = prox_l1(Ax1 + alpha, thresh)
        alpha = alpha + (Ax1 - y1)
        x, y = x1, y1
        out_x += x
        out_y += y
        grad_evals += 1 if stochastic else n

        done = t + 1 == T
        if (checkpoint_every is not None and (t + 1) % checkpoint_every == 0) or done:
            obj = problem.objective(x, Ax1)
            feas = float(np.linalg.norm(Ax1 - y))
            tl = _plain_test_loss(test_set, x, problem.loss.kind)
            wall = (time.perf_counter() - t_start) * 1e3 if measure_time else 0.0
            trace.append(grad_evals / n, t + 1, obj, tl, feas, wall)

    return RunResult(out_x / T, out_y / T, trace, x, y, alpha, spec)


@dataclass(frozen=True)
class ReferenceSolution:
    """High-precision minimizer from a long deterministic batch run."""

    x: np.ndarray
    y: np.ndarray
    objective: float
    iterations: int


def solve_reference(
    problem: Problem,
    max_iters: int = 200_000,
    tol: float = 1e-14,
    check_every: int = 200,
    patience: int = 5,
) -> ReferenceSolution:
    """Run batch ADMM to (near) convergence and return the best iterate.

    Stops once the best objective seen has not improved by more than
    ``tol * max(1, |best|)`` over ``patience`` consecutive checks. The
    objective is evaluated at the last iterate with the constraint
    substituted, so the result lower-bounds every trace of the same problem
    up to solver accuracy.
    """
    spec = validate_spec(problem, UpdaterSpec("batch"))
    sm = spec.constants
    solver = build_spd_solver(problem.A, problem.rho, sm.L)
    d, m = problem.d, problem.m
    x = np.zeros(d)
    y = np.zeros(m)
    alpha = np.zeros(m)
    thresh = problem.psi_l1 / problem.rho

    best = np.inf
    best_x = x
    stale = 0
    it = 0
    for it in range(1, max_iters + 1):
        x = updaters.batch_x_update(problem, x, y, alpha, solver)
        Ax = problem.Ax(x)
        y = prox_l1(Ax + alpha, thresh)
        alpha = alpha + (Ax - y)
        if it % check_every == 0 or it == max_iters:
            obj = problem.objective(x, Ax)
            if not np.isfinite(best) or obj < best - tol * max(1.0, abs(best)):
                if not np.isfinite(obj):
                    raise NumericalError("reference batch run diverged")
                best, best_x, stale = obj, x.copy(), 0
            else:
                stale += 1
                if stale >= patience:
                    break
    y_best = problem.A.matvec(best_x)
    return ReferenceSolution(best_x, y_best, float(best), it)


@dataclass(frozen=True)
class BoundReport:
    """Empirical check of the ergodic convergence bounds.

    For each rule family the left-hand side is the seed-mean of
    ``objective(xbar_T, ybar_T) - objective* + gamma * ||A xbar + B ybar - c||``
    and, for the feasibility-corrected variant, of
    ``objective(xbar_T, y(xbar_T)) - objective*`` with ``y(x) = Binv(c - A x)``.
    Right-hand sides are the corresponding closed-form constants over 2T.
    """

    gamma: float
    T: int
    seeds: tuple[int, ...]
    L_tilde: float
    L_B: float
    dist_x_Hx: float          # (x*-x0)' (L_A I - rho A'A) (x*-x0)
    dist_x_sq: float          # ||x*-x0||^2
    dist_y_Hy: float          # (y*-y0)' rho B'B (y*-y0)
    alpha0_sq: float
    rhs_combined_iu: float    # averaged rule, linearized coupling
    rhs_combined_exact: float  # averaged rule, exact coupling
    rhs_corrected_iu: float
    rhs_corrected_exact: float
    lhs_combined_iu: float
    lhs_combined_exact: float
    lhs_corrected_iu: float
    lhs_corrected_exact: float

    def satisfied(self) -> dict[str, bool]:
        return {
            "combined_iu": self.lhs_combined_iu <= self.rhs_combined_iu,
            "combined_exact": self.lhs_combined_exact <= self.rhs_combined_exact,
            "corrected_iu": self.lhs_corrected_iu <= self.rhs_corrected_iu,
            "corrected_exact": self.lhs_corrected_exact <= self.rhs_corrected_exact,
        }


def theorem_bound_report(
    problem: Problem,
    x0,
    y0,
    alpha0,
    gamma: float,
    T: int,
    seeds=tuple(range(20)),
    reference: ReferenceSolution | None = None,
) -> BoundReport:
    """Compare empirical ergodic gaps against their theoretical bounds.

    Runs the gradient-averaging rules (exact-coupling and inexact-Uzawa)
    from ``(x0, y0, alpha0)`` for T iterations under each seed; the
    expectation in the bounds is approximated by the mean over the fixed
    seed list. Needs ``omega_l1`` unset (the exact-coupling rule is only
    analyzed without a simple regularizer).
    """
    if gamma <= 0:
        raise ConfigError("gamma must be positive")
    if problem.omega_l1 is not None:
        raise ConfigError("bound report requires omega_l1 = None")
    x0 = as_vector(x0, problem.d, "x0")
    y0 = as_vector(y0, problem.m, "y0")
    alpha0 = as_vector(alpha0, problem.m, "alpha0")

    spec = validate_spec(problem, UpdaterSpec("sa-iu"))
    sm = spec.constants
    rho = problem.rho
    n = problem.n

    H_x = -problem.A.gram(rho)
    H_x[np.diag_indices_from(H_x)] += sm.L_A
    min_eig = float(np.linalg.eigvalsh(H_x)[0])
    if min_eig < -1e-10 * max(1.0, sm.L_A):
        raise NumericalError(
            "L_A underestimates lambda_max(rho*A'A): L_A*I - rho*A'A is not "
            "psd; raise the power-iteration slack",
            detail=min_eig,
        )

    if reference is None:
        reference = solve_reference(problem)
    xstar, ystar = reference.x, reference.y
    fstar = problem.objective(xstar, ystar)

    dx = xstar - x0
    dy = ystar - y0
    dist_x_Hx = float(dx @ (H_x @ dx))
    dist_x_sq = float(dx @ dx)
    Bdy = problem.B.matvec(dy)
    dist_y_Hy = rho * float(Bdy @ Bdy)
    alpha0_sq = float(alpha0 @ alpha0)

    L_tilde = problem.psi_l1 * np.sqrt(problem.m)
    Binv = np.linalg.inv(problem.B.to_dense())
    L_B = float(np.linalg.eigvalsh(Binv.T @ Binv)[-1])

    combined_tail = 2.0 * rho * (gamma**2 / rho**2 + alpha0_sq)
    corrected_tail = rho * (L_tilde**2 * L_B / rho**2 + alpha0_sq)
    core = n * sm.L * dist_x_sq + dist_y_Hy
    rhs_combined_iu = (dist_x_Hx + core + combined_tail) / (2.0 * T)
    rhs_combined_exact = (core + combined_tail) / (2.0 * T)
    rhs_corrected_iu = (dist_x_Hx + core + corrected_tail) / (2.0 * T)
    rhs_corrected_exact = (core + corrected_tail) / (2.0 * T)

    def lhs_pair(kind: str) -> tuple[float, float]:
        combined, corrected = [], []
        for seed in seeds:
            res = run(
                problem, UpdaterSpec(kind, constants=sm), T,
                seed=seed, x0=x0, y0=y0, alpha0=alpha0,
            )
            gap = problem.objective(res.xbar, res.ybar) - fstar
            feas = float(np.linalg.norm(problem.constraint_gap(res.xbar, res.ybar)))
            combined.append(gap + gamma * feas)
            y_of_x = Binv @ (problem.c - problem.A.matvec(res.xbar))
            corrected.append(problem.objective(res.xbar, y_of_x) - fstar)
        return float(np.mean(combined)), float(np.mean(corrected))

    lhs_combined_iu, lhs_corrected_iu = lhs_pair("sa-iu")
    lhs_combined_exact, lhs_corrected_exact = lhs_pair("sa")

    return BoundReport(
        gamma=gamma,
        T=T,
        seeds=tuple(seeds),
        L_tilde=float(L_tilde),
        L_B=L_B,
        dist_x_Hx=dist_x_Hx,
        dist_x_sq=dist_x_sq,
        dist_y_Hy=dist_y_Hy,
        alpha0_sq=alpha0_sq,
        rhs_combined_iu=rhs_combined_iu,
        rhs_combined_exact=rhs_combined_exact,
        rhs_corrected_iu=rhs_corrected_iu,
        rhs_corrected_exact=rhs_corrected_exact,
        lhs_combined_iu=lhs_combined_iu,
        lhs_combined_exact=lhs_combined_exact,
        lhs_corrected_iu=lhs_corrected_iu,
        lhs_corrected_exact=lhs_corrected_exact,
    )
