"""Dataset, trace, and configuration file formats.

LIBSVM text format for samples (1-based indices on disk, 0-based in
memory), CSV for run traces, and a strict flat key=value format for run
configurations (unknown keys are errors, so typos in experiment sweeps
fail loudly instead of silently using a default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DimensionError, ParseError
from .engine import RunTrace
from .problems import Sample
from .updaters import SWEEP_METHODS

__all__ = [
    "parse_libsvm",
    "write_libsvm",
    "map_binary_labels",
    "split_train_test",
    "write_trace_csv",
    "read_trace_csv",
    "RunConfig",
    "parse_config",
    "TRACE_HEADER",
]

TRACE_HEADER = "pass,iter,objective,test_loss,feasibility,wall_ms"

# 17 significant digits: lossless round trip for binary64
_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FMT % x


def parse_libsvm(path) -> tuple[list[Sample], int]:
    """Parse a LIBSVM-format file: one ``<label> <idx>:<val> ...`` per line.

    Indices must be >= 1 and strictly ascending within a line; they are
    stored zero-based. ``d`` is the largest index seen. Malformed tokens
    raise :class:`ParseError` with the 1-based line number.
    """
    samples: list[Sample] = []
    d = 0
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise ParseError(f"bad label token {tokens[0]!r}", line=lineno) from None
            if not math.isfinite(label):
                raise ParseError(f"non-finite label {tokens[0]!r}", line=lineno)
            idx = []
            vals = []
            prev = 0
            for tok in tokens[1:]:
                head, sep, tail = tok.partition(":")
                if not sep or not head or not tail:
                    raise ParseError(f"bad feature token {tok!r}", line=lineno)
                try:
                    j = int(head)
                except ValueError:
                    raise ParseError(f"bad feature index in {tok!r}", line=lineno) from None
                try:
                    v = float(tail)
                except ValueError:
                    raise ParseError(f"bad feature value in {tok!r}", line=lineno) from None
                if j < 1:
                    raise ParseError(f"feature index {j} must be >= 1", line=lineno)
                if j <= prev:
                    raise ParseError(
                        f"feature indices must be strictly ascending, got {j} after {prev}",
                        line=lineno,
                    )
                if not math.isfinite(v):
                    raise ParseError(f"non-finite feature value in {tok!r}", line=lineno)
                prev = j
                idx.append(j - 1)
                vals.append(v)
            if prev > d:
                d = prev
            samples.append(
                Sample(
                    indices=np.asarray(idx, dtype=np.int64),
                    values=np.asarray(vals, dtype=np.float64),
                    label=label,
                )
            )
    return samples, d


def write_libsvm(samples, path) -> None:
    """Write samples in LIBSVM format (1-based indices, 17 digits)."""
    with open(path, "w", encoding="ascii") as fh:
        for s in samples:
            parts = [_fmt(s.label)]
            parts.extend(f"{int(j) + 1}:{_fmt(v)}" for j, v in zip(s.indices, s.values))
            fh.write(" ".join(parts) + "\n")


def map_binary_labels(samples) -> list[Sample]:
    """Map two-class labels onto {-1, +1} (smaller value -> -1).

    Labels already in {-1, +1} pass through untouched; anything other than
    exactly two distinct values is rejected.
    """
    values = sorted({s.label for s in samples})
    if values == [-1.0, 1.0] or values in ([-1.0], [1.0]):
        return list(samples)
    if len(values) != 2:
        raise DimensionError(
            f"expected two distinct class labels, found {len(values)}"
        )
    lo = values[0]
    return [replace_label(s, -1.0 if s.label == lo else 1.0) for s in samples]


def replace_label(s: Sample, label: float) -> Sample:
    return Sample(indices=s.indices, values=s.values, label=label)


def split_train_test(samples, fraction: float, seed: int):
    """Seeded shuffle then split; deterministic per seed.

    Returns ``(train, test)`` with ``len(train) = int(n * fraction)``.
    """
    if not 0.0 < fraction < 1.0:
        raise DimensionError("split fraction must be in (0, 1)")
    n = len(samples)
    if n < 2:
        raise DimensionError("need at least two samples to split")
    order = np.random.default_rng(seed).permutation(n)
    cut = int(n * fraction)
    if cut == 0 or cut == n:
        raise DimensionError("split leaves one side empty")
    train = [samples[i] for i in order[:cut]]
    test = [samples[i] for i in order[cut:]]
    return train, test


def write_trace_csv(trace: RunTrace, path) -> None:
    """One row per checkpoint, 17-significant-digit decimal columns."""
    if len(trace) == 0:
        raise DimensionError("refusing to write an empty trace")
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(TRACE_HEADER + "\n")
            for p, it, obj, tl, feas, wall in trace.rows():
                fh.write(
                    f"{_fmt(p)},{it},{_fmt(obj)},{_fmt(tl)},{_fmt(feas)},{_fmt(wall)}\n"
                )
    except OSError as exc:
        raise ParseError(f"cannot write trace to {path}: {exc}") from exc


def read_trace_csv(path) -> RunTrace:
    trace = RunTrace()
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        if header != TRACE_HEADER:
            raise ParseError(f"unexpected trace header {header!r}", line=1)
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ParseError(f"expected 6 columns, got {len(parts)}", line=lineno)
            try:
                trace.append(
                    float(parts[0]), int(parts[1]), float(parts[2]),
                    float(parts[3]), float(parts[4]), float(parts[5]),
                )
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
    return trace


@dataclass(frozen=True)
class RunConfig:
    """One experiment configuration.

    ``checkpoint_every`` counts effective passes, so batch and stochastic
    traces produced from one config share a checkpoint grid. ``lam`` is the
    splitting-term weight (the ``lambda`` config key).
    """

    dataset: str
    method: str = "sa-iu"
    rho: float = 0.01
    lam: float = 1e-5
    mu_reg: float = 0.0
    eta0: float | None = None
    passes: int = 50
    seeds: tuple[int, ...] = tuple(range(10))
    checkpoint_every: int = 1
    split: float = 0.5
    graph_threshold: float = 0.5

    def __post_init__(self):
        if self.method not in SWEEP_METHODS:
            raise ConfigError(
                f"method {self.method!r} is not one of {SWEEP_METHODS}"
            )
        if self.rho <= 0:
            raise ConfigError("rho must be positive")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.mu_reg < 0:
            raise ConfigError("mu_reg must be nonnegative")
        if self.eta0 is not None and self.eta0 <= 0:
            raise ConfigError("eta0 must be positive")
        if self.passes < 1:
            raise ConfigError("passes must be >= 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")
        if not 0.0 < self.split < 1.0:
            raise ConfigError("split must be in (0, 1)")
        if not 0.0 <= self.graph_threshold < 1.0:
            raise ConfigError("graph_threshold must be in [0, 1)")


_CONFIG_PARSERS = {
    "dataset": str,
    "method": str,
    "rho": float,
    "lambda": float,
    "mu_reg": float,
    "eta0": float,
    "passes": int,
    "seeds": lambda s: tuple(int(tok) for tok in s.split(",") if tok.strip()),
    "checkpoint_every": int,
    "split": float,
    "graph_threshold": float,
}
_KEY_TO_FIELD = {"lambda": "lam"}


def parse_config(path) -> RunConfig:
    """Read a flat ``key=value`` config file. Unknown keys are errors."""
    values: dict[str, object] = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ParseError(f"expected key=value, got {line!r}", line=lineno)
            key = key.strip()
            val = val.strip()
            if key not in _CONFIG_PARSERS:
                raise ParseError(f"unknown config key {key!r}", line=lineno)
            try:
                parsed = _CONFIG_PARSERS[key](val)
            except ValueError:
                raise ParseError(f"bad value for {key!r}: {val!r}", line=lineno) from None
            values[_KEY_TO_FIELD.get(key, key)] = parsed
    if "dataset" not in values:
        raise ConfigError(f"config {path} does not set 'dataset'")
    try:
        return RunConfig(**values)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
