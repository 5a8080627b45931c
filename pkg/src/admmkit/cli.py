"""Command-line front end.

Subcommands: ``tune`` (stepsize selection), ``run`` (one method, one
trace), ``sweep`` (method x seed grid with CSV artifacts), ``graph``
(emit the correlation edge list a sweep would use), ``plot`` (render a
sweep directory to SVG). Flags mirror the config keys and override them.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import bench, dataio, graphs
from .dataio import RunConfig, parse_config, write_trace_csv
from .engine import UpdaterSpec, run
from .exceptions import AdmmKitError
from .problems import estimate_L
from .updaters import STOCHASTIC_METHODS, SWEEP_METHODS, TUNED_METHODS


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", help="key=value config file")
    p.add_argument("--dataset", help="LIBSVM-format dataset path")
    p.add_argument("--method", choices=SWEEP_METHODS)
    p.add_argument("--rho", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mu-reg", dest="mu_reg", type=float)
    p.add_argument("--eta0", type=float)
    p.add_argument("--passes", type=int)
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int,
                   help="checkpoint cadence in effective passes")
    p.add_argument("--split", type=float, help="train fraction in (0,1)")
    p.add_argument("--graph-threshold", dest="graph_threshold", type=float)


def _load_config(args) -> RunConfig:
    if args.config:
        config = parse_config(args.config)
    elif args.dataset:
        config = RunConfig(dataset=args.dataset)
    else:
        raise AdmmKitError("provide --config or --dataset")
    overrides = {}
    for key in ("dataset", "method", "rho", "lam", "mu_reg", "eta0", "passes",
                "checkpoint_every", "split", "graph_threshold"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "seeds", None):
        overrides["seeds"] = tuple(int(t) for t in args.seeds.split(",") if t.strip())
    return dataclasses.replace(config, **overrides)


def _prepare(config: RunConfig, graph_file=None):
    samples, d = dataio.parse_libsvm(config.dataset)
    train, test = dataio.split_train_test(samples, config.split, config.seeds[0])
    graph = graphs.read_edge_list(graph_file, d) if graph_file else None
    return bench._build_problem(train, test, d, config, graph)


def _cmd_tune(args) -> int:
    config = _load_config(args)
    problem, _, _ = _prepare(config, args.graph_file)
    protocol = bench.TuneProtocol(subset_size=min(500, problem.n))
    eta0 = bench.tune_stepsize(problem, config.method, protocol, config.seeds[0])
    if eta0 is None:
        print(f"{config.method}: constant stepsize (no eta0; probe passed)")
    else:
        print(f"{config.method}: eta0 = {eta0:.17g}")
    return 0


def _cmd_run(args) -> int:
    config = _load_config(args)
    problem, test_set, _ = _prepare(config, args.graph_file)
    eta0 = config.eta0
    if config.method in TUNED_METHODS and eta0 is None:
        protocol = bench.TuneProtocol(subset_size=min(500, problem.n))
        eta0 = bench.tune_stepsize(problem, config.method, protocol, config.seeds[0])
        print(f"tuned eta0 = {eta0:.17g}", file=sys.stderr)
    n = problem.n
    stochastic = config.method in STOCHASTIC_METHODS
    T = config.passes * n if stochastic else config.passes
    cp = config.checkpoint_every * (n if stochastic else 1)
    res = run(
        problem,
        UpdaterSpec(config.method, eta0=eta0, constants=estimate_L(problem)),
        T=T, seed=config.seeds[0], checkpoint_every=cp, test_set=test_set,
        measure_time=args.timing,
    )
    write_trace_csv(res.trace, args.out)
    print(f"wrote {args.out}: final objective {res.trace.objective[-1]:.12g}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    methods = (
        [m.strip() for m in args.methods.split(",") if m.strip()]
        if args.methods else None
    )
    graph = None
    if args.graph_file:
        _, d = dataio.parse_libsvm(config.dataset)
        graph = graphs.read_edge_list(args.graph_file, d)
    result = bench.run_sweep(config, methods=methods, outdir=args.out, graph=graph)
    if args.svg:
        bench.emit_svg(result, args.svg)
    for method, seed, message in result.failures:
        where = f"{method}" if seed is None else f"{method} seed {seed}"
        print(f"FAILED {where}: {message}", file=sys.stderr)
    done = len(result.traces)
    print(f"{done} runs completed, {len(result.failures)} failed; "
          f"best objective {result.best_objective:.12g}")
    return 0 if not result.failures else 1


def _cmd_graph(args) -> int:
    config = _load_config(args)
    samples, d = dataio.parse_libsvm(config.dataset)
    train, _ = dataio.split_train_test(samples, config.split, config.seeds[0])
    graph = graphs.correlation_graph(train, config.graph_threshold, d)
    graphs.write_edge_list(graph, args.out)
    print(f"wrote {args.out}: {graph.edge_count} edges over {d} features")
    return 0


def _cmd_plot(args) -> int:
    result = bench.load_sweep(args.dir)
    bench.emit_svg(result, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="admmkit",
        description="ADMM solver benchmarks for graph-guided fused lasso",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", help="select eta0 for the configured method")
    _add_config_flags(p)
    p.add_argument("--graph-file", help="edge-list file overriding the correlation graph")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("run", help="run one method and write its trace CSV")
    _add_config_flags(p)
    p.add_argument("--graph-file")
    p.add_argument("--out", required=True, help="trace CSV path")
    p.add_argument("--timing", action="store_true",
                   help="record wall time (breaks byte-for-byte reproducibility)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run a method x seed grid and write CSVs")
    _add_config_flags(p)
    p.add_argument("--graph-file")
    p.add_argument("--methods", help="comma-separated subset (default: all)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--svg", help="also render the convergence plot here")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("graph", help="emit the correlation edge list for a dataset")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="edge-list path")
    p.set_defaults(func=_cmd_graph)

    p = sub.add_parser("plot", help="render a sweep directory to SVG")
    p.add_argument("--dir", required=True, help="sweep output directory")
    p.add_argument("--out", required=True, help="SVG path")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AdmmKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
