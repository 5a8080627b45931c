"""Benchmark harness: stepsize tuning, multi-method sweeps, SVG curves.

The tuning protocol follows the experiment recipe: stochastic baselines are
tried over a log-spaced stepsize grid, several trials each, on a seeded
small subset of the training data, and the candidate with the lowest mean
final training objective wins. Methods with a constant analytic stepsize
have nothing to tune; they get a short sanity probe on the same subset.

Sweeps fan a (method x seed) grid through the engine with timing disabled,
so identical configs produce byte-identical CSV and SVG artifacts.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import dataio
from .dataio import RunConfig, read_trace_csv, write_trace_csv
from .engine import RunTrace, UpdaterSpec, run
from .exceptions import ConfigError, DimensionError, TuningError
from .graphs import chain_graph, correlation_graph, merge_graphs, penalty_matrix, random_graph
from .problems import LOGISTIC, LossSpec, Problem, Sample, estimate_L, samples_to_csr
from .updaters import SWEEP_METHODS, STOCHASTIC_METHODS, TUNED_METHODS

__all__ = [
    "DEFAULT_ETA_GRID",
    "TuneProtocol",
    "SweepResult",
    "tune_stepsize",
    "run_sweep",
    "load_sweep",
    "emit_svg",
    "passes_to_gap",
    "loglog_slope",
    "make_synthetic_samples",
    "synthetic_benchmark",
    "SUMMARY_HEADER",
]

# 9 log-spaced stepsize candidates, 1e-3 .. 1e+1
DEFAULT_ETA_GRID = tuple(float(10.0 ** e) for e in np.linspace(-3.0, 1.0, 9))

SUMMARY_HEADER = "method,seed,eta0,final_objective,final_test_loss,passes_to_1e-3_gap"

# effective passes each stochastic tuning trial runs on the subset
_TRIAL_PASSES = 1


@dataclass(frozen=True)
class TuneProtocol:
    """Stepsize-selection protocol."""

    subset_size: int = 500
    trials: int = 5
    grid: tuple[float, ...] = DEFAULT_ETA_GRID
    batch_probe_iters: int = 100

    def __post_init__(self):
        if not self.grid:
            raise ConfigError("stepsize grid must be nonempty")
        if self.subset_size < 1 or self.trials < 1 or self.batch_probe_iters < 1:
            raise ConfigError("protocol counts must be positive")


def tune_stepsize(
    problem: Problem, method: str, protocol: TuneProtocol, seed: int
) -> float | None:
    """Pick eta0 for a decaying-stepsize baseline; None for constant-step methods.

    A seeded subset of ``subset_size`` samples is drawn once; each grid
    candidate runs ``trials`` seeded trials of one effective pass over the
    subset, and the candidate minimizing the mean final training objective
    wins. Candidates whose final objective is not finite are discarded; if
    every candidate diverges the error lists the grid. Constant-stepsize
    methods run a ``batch_probe_iters``-iteration probe on the same subset
    instead and return None.
    """
    if protocol.subset_size > problem.n:
        raise ConfigError(
            f"tuning subset ({protocol.subset_size}) exceeds n={problem.n}"
        )
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(problem.n, size=protocol.subset_size, replace=False))
    sub = problem.subset(idx)
    constants = estimate_L(sub)

    if method not in TUNED_METHODS:
        res = run(sub, UpdaterSpec(method, constants=constants),
                  T=protocol.batch_probe_iters, seed=seed)
        probe = sub.objective(res.xbar, sub.A.matvec(res.xbar))
        if not math.isfinite(probe):
            raise TuningError(f"probe run of {method!r} diverged")
        return None

    T = protocol.subset_size * _TRIAL_PASSES
    scores = []
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for eta0 in protocol.grid:
            finals = []
            for trial in range(protocol.trials):
                res = run(
                    sub, UpdaterSpec(method, eta0=eta0, constants=constants),
                    T=T, seed=seed + 1 + trial,
                )
                finals.append(sub.objective(res.xbar, sub.A.matvec(res.xbar)))
            mean = float(np.mean(finals))
            scores.append(mean if math.isfinite(mean) else math.inf)
    best = int(np.argmin(scores))
    if not math.isfinite(scores[best]):
        raise TuningError(
            f"every stepsize candidate diverged for {method!r}",
            grid=protocol.grid,
        )
    return protocol.grid[best]


@dataclass
class SweepResult:
    """Traces, chosen stepsizes, and the cross-method best objective."""

    methods: list[str]
    seeds: tuple[int, ...]
    traces: dict = field(default_factory=dict)       # (method, seed) -> RunTrace
    eta0s: dict = field(default_factory=dict)        # method -> float | None
    failures: list = field(default_factory=list)     # (method, seed|None, message)
    best_objective: float = math.nan

    def mean_curve(self, method: str):
        """Checkpoint grid (passes) and seed-mean objective for one method."""
        curves = [self.traces[(method, s)] for s in self.seeds
                  if (method, s) in self.traces]
        if not curves:
            raise DimensionError(f"no traces for method {method!r}")
        grid = curves[0].passes
        for tr in curves[1:]:
            if tr.passes != grid:
                raise DimensionError("traces do not share a checkpoint grid")
        mean = np.mean([tr.objective for tr in curves], axis=0)
        return np.asarray(grid), mean


def passes_to_gap(trace: RunTrace, best: float, rel: float = 1e-3) -> float:
    """First checkpoint (in passes) whose objective is within ``rel`` of
    ``best``, relative to |best|; inf if never reached."""
    threshold = best + rel * max(abs(best), 1e-300)
    for p, obj in zip(trace.passes, trace.objective):
        if obj <= threshold:
            return p
    return math.inf


def loglog_slope(ts, gaps) -> float:
    """Least-squares slope of log(gap) against log(t)."""
    ts = np.asarray(ts, dtype=float)
    gaps = np.maximum(np.asarray(gaps, dtype=float), 1e-300)
    lx = np.log(ts)
    ly = np.log(gaps)
    lx = lx - lx.mean()
    return float((lx @ (ly - ly.mean())) / (lx @ lx))


def _build_problem(train, test, d, config: RunConfig, graph=None):
    train = dataio.map_binary_labels(train)
    test = dataio.map_binary_labels(test)
    if graph is None:
        graph = correlation_graph(train, config.graph_threshold, d)
    A = penalty_matrix(graph)
    problem = Problem.from_samples(
        train, d, LossSpec(LOGISTIC, config.mu_reg), A,
        rho=config.rho, psi_l1=config.lam,
    )
    test_set = (
        samples_to_csr(test, d),
        np.array([s.label for s in test]),
    )
    return problem, test_set, graph


def run_sweep(
    config: RunConfig,
    methods=None,
    outdir=None,
    graph=None,
    protocol: TuneProtocol | None = None,
) -> SweepResult:
    """Tune (where needed) and run every (method, seed) pair.

    Per-run failures are recorded and the sweep continues; callers decide
    the exit status from ``result.failures``. When ``outdir`` is given, one
    trace CSV per run plus a summary CSV are written; reruns of the same
    config produce byte-identical files (runs execute with timing off).
    """
    methods = list(methods) if methods is not None else list(SWEEP_METHODS)
    for m in methods:
        if m not in SWEEP_METHODS:
            raise ConfigError(f"method {m!r} is not one of {SWEEP_METHODS}")
    samples, d = dataio.parse_libsvm(config.dataset)
    train, test = dataio.split_train_test(samples, config.split, config.seeds[0])
    problem, test_set, graph = _build_problem(train, test, d, config, graph)
    constants = estimate_L(problem)
    if protocol is None:
        protocol = TuneProtocol(subset_size=min(500, problem.n))

    result = SweepResult(methods=methods, seeds=config.seeds)
    n = problem.n
    for method in methods:
        eta0 = None
        if method in TUNED_METHODS:
            try:
                eta0 = config.eta0 or tune_stepsize(
                    problem, method, protocol, config.seeds[0]
                )
            except (TuningError, ConfigError) as exc:
                result.failures.append((method, None, str(exc)))
                continue
        result.eta0s[method] = eta0
        stochastic = method in STOCHASTIC_METHODS
        T = config.passes * n if stochastic else config.passes
        cp = config.checkpoint_every * n if stochastic else config.checkpoint_every
        for seed in config.seeds:
            try:
                res = run(
                    problem,
                    UpdaterSpec(method, eta0=eta0, constants=constants),
                    T=T, seed=seed, checkpoint_every=cp, test_set=test_set,
                )
            except Exception as exc:  # per-run isolation, sweep continues
                result.failures.append((method, seed, str(exc)))
                continue
            result.traces[(method, seed)] = res.trace

    if result.traces:
        result.best_objective = min(
            min(tr.objective) for tr in result.traces.values()
        )

    if outdir is not None:
        _write_sweep(result, outdir)
    return result


def _trace_filename(method: str, seed: int) -> str:
    return f"trace_{method}_seed{seed}.csv"


def _write_sweep(result: SweepResult, outdir) -> None:
    os.makedirs(outdir, exist_ok=True)
    for (method, seed), trace in sorted(result.traces.items()):
        write_trace_csv(trace, os.path.join(outdir, _trace_filename(method, seed)))
    with open(os.path.join(outdir, "summary.csv"), "w", encoding="ascii",
              newline="\n") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for method in result.methods:
            for seed in result.seeds:
                trace = result.traces.get((method, seed))
                if trace is None:
                    continue
                eta0 = result.eta0s.get(method)
                fh.write(
                    ",".join(
                        (
                            method,
                            str(seed),
                            "" if eta0 is None else "%.17g" % eta0,
                            "%.17g" % trace.objective[-1],
                            "%.17g" % trace.test_loss[-1],
                            "%.17g" % passes_to_gap(trace, result.best_objective),
                        )
                    )
                    + "\n"
                )


def load_sweep(outdir) -> SweepResult:
    """Rebuild a SweepResult from the CSVs a sweep wrote."""
    path = os.path.join(outdir, "summary.csv")
    methods: list[str] = []
    seeds: list[int] = []
    eta0s: dict = {}
    pairs = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        if header != SUMMARY_HEADER:
            raise ConfigError(f"unexpected summary header in {path}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            method, seed, eta0, *_ = line.split(",")
            seed = int(seed)
            if method not in methods:
                methods.append(method)
            if seed not in seeds:
                seeds.append(seed)
            eta0s[method] = float(eta0) if eta0 else None
            pairs.append((method, seed))
    result = SweepResult(methods=methods, seeds=tuple(seeds), eta0s=eta0s)
    for method, seed in pairs:
        result.traces[(method, seed)] = read_trace_csv(
            os.path.join(outdir, _trace_filename(method, seed))
        )
    result.best_objective = min(min(tr.objective) for tr in result.traces.values())
    return result


# ---------------------------------------------------------------------------
# SVG emission
# ---------------------------------------------------------------------------

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)
_VIEW_W, _VIEW_H = 720.0, 440.0
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 80.0, 170.0, 20.0, 50.0
_GAP_FLOOR = 1e-16  # keeps log10 finite at the argmin checkpoint


def emit_svg(result: SweepResult, path) -> None:
    """Static convergence plot: log10(objective - best) against passes.

    One polyline per method (seed-mean objective), fixed palette, legend at
    the right. Axis ranges equal the data extent exactly; every float is
    fixed-format so identical sweeps emit identical bytes.
    """
    curves = []
    for i, method in enumerate(result.methods):
        try:
            grid, mean = result.mean_curve(method)
        except DimensionError:
            continue
        gaps = np.maximum(mean - result.best_objective, _GAP_FLOOR)
        curves.append((method, _PALETTE[i % len(_PALETTE)], grid, np.log10(gaps)))
    if not curves:
        raise DimensionError("nothing to plot")

    xs = np.concatenate([c[2] for c in curves])
    ys = np.concatenate([c[3] for c in curves])
    xmin, xmax = float(xs.min()), float(xs.max())
    ymin, ymax = float(ys.min()), float(ys.max())
    xspan = xmax - xmin or 1.0
    yspan = ymax - ymin or 1.0
    plot_w = _VIEW_W - _MARGIN_L - _MARGIN_R
    plot_h = _VIEW_H - _MARGIN_T - _MARGIN_B

    def px(x):
        return _MARGIN_L + (x - xmin) / xspan * plot_w

    def py(y):
        return _MARGIN_T + (ymax - y) / yspan * plot_h

    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{_VIEW_W:.0f}" height="{_VIEW_H:.0f}" '
        f'viewBox="0 0 {_VIEW_W:.0f} {_VIEW_H:.0f}">'
    )
    out.append(
        f'<rect x="{_MARGIN_L:.2f}" y="{_MARGIN_T:.2f}" '
        f'width="{plot_w:.2f}" height="{plot_h:.2f}" '
        f'fill="none" stroke="#000000" stroke-width="1"/>'
    )
    for method, color, grid, logs in curves:
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(grid, logs))
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{pts}"/>'
        )
    # axis extent labels: the plot rectangle spans the data exactly
    out.append(
        f'<text x="{_MARGIN_L:.2f}" y="{_VIEW_H - 28:.2f}" font-size="12" '
        f'text-anchor="middle">{xmin:.6g}</text>'
    )
    out.append(
        f'<text x="{_MARGIN_L + plot_w:.2f}" y="{_VIEW_H - 28:.2f}" font-size="12" '
        f'text-anchor="middle">{xmax:.6g}</text>'
    )
    out.append(
        f'<text x="{_MARGIN_L - 6:.2f}" y="{_MARGIN_T + plot_h:.2f}" font-size="12" '
        f'text-anchor="end">{ymin:.6g}</text>'
    )
    out.append(
        f'<text x="{_MARGIN_L - 6:.2f}" y="{_MARGIN_T + 10:.2f}" font-size="12" '
        f'text-anchor="end">{ymax:.6g}</text>'
    )
    out.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.2f}" y="{_VIEW_H - 8:.2f}" '
        f'font-size="13" text-anchor="middle">effective passes</text>'
    )
    out.append(
        f'<text x="16" y="{_MARGIN_T + plot_h / 2:.2f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 16 '
        f'{_MARGIN_T + plot_h / 2:.2f})">log10(objective - best)</text>'
    )
    legend_x = _MARGIN_L + plot_w + 14.0
    for i, (method, color, _, _) in enumerate(curves):
        ly = _MARGIN_T + 16.0 + 20.0 * i
        out.append(
            f'<line x1="{legend_x:.2f}" y1="{ly:.2f}" x2="{legend_x + 22:.2f}" '
            f'y2="{ly:.2f}" stroke="{color}" stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{legend_x + 28:.2f}" y="{ly + 4:.2f}" '
            f'font-size="12">{method}</text>'
        )
    out.append("</svg>")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# synthetic benchmark
# ---------------------------------------------------------------------------


def make_synthetic_samples(n: int, d: int, seed: int, block: int = 10,
                           label_noise: float = 0.25):
    """Binary classification data driven by a few latent block factors.

    Every feature in a block replicates that block's latent factor, so the
    d variates are an exactly low-rank view of ``d/block`` factors: all
    curvature modes of the logistic loss are comparably fast, there is no
    near-null noise spectrum for solvers to crawl through, and the fused
    penalty's job (tying together coordinates that carry the same factor)
    is genuine. The true weight vector is piecewise constant over blocks
    with alternating active blocks; labels take the margin's sign with a
    ``label_noise`` fraction flipped, leaving a visible single-sample
    gradient variance at the optimum (the noise floor that separates
    decaying-stepsize methods from gradient-averaging ones). Rows are
    scaled to unit norm, pinning the logistic smoothness constant at 1/4.
    """
    rng = np.random.default_rng(seed)
    n_blocks = (d + block - 1) // block
    factors = rng.standard_normal((n, n_blocks))
    X = np.empty((n, d))
    for j in range(d):
        X[:, j] = factors[:, j // block]
    w = np.zeros(d)
    for b in range(n_blocks):
        if b % 2 == 0:
            w[b * block:(b + 1) * block] = 1.0 if (b // 2) % 2 == 0 else -1.0
    margins = X @ w + 0.3 * rng.standard_normal(n)
    labels = np.where(margins >= 0, 1.0, -1.0)
    flips = rng.random(n) < label_noise
    labels[flips] *= -1.0
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    cols = np.arange(d, dtype=np.int64)
    return [Sample(indices=cols, values=X[i], label=float(labels[i])) for i in range(n)]


def synthetic_benchmark(
    n: int = 1000,
    d: int = 50,
    seed: int = 7,
    rho: float = 0.01,
    lam: float = 1e-5,
    mu_reg: float = 0.0,
    with_test: bool = True,
):
    """The reference desk-scale benchmark: chain + random feature graph,
    logistic loss, rho = 0.01, lambda = 1e-5 unless overridden.

    Returns ``(problem, test_set, graph)``; ``test_set`` is None when
    ``with_test`` is False (all samples train).
    """
    total = 2 * n if with_test else n
    samples = make_synthetic_samples(total, d, seed)
    graph = merge_graphs(chain_graph(d), random_graph(d, max(d // 2, 1), seed + 1))
    A = penalty_matrix(graph)
    if with_test:
        train, test = samples[:n], samples[n:]
        test_set = (
            samples_to_csr(test, d),
            np.array([s.label for s in test]),
        )
    else:
        train, test_set = samples, None
    problem = Problem.from_samples(
        train, d, LossSpec(LOGISTIC, mu_reg), A, rho=rho, psi_l1=lam
    )
    return problem, test_set, graph
