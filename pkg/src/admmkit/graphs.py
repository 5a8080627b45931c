"""Feature graphs and the fusion penalty matrix they induce.

The splitting constraint penalizes ``sum_edges w |x_i - x_j|`` through a
matrix with one row per edge (+w at i, -w at j). Graphs come from a
thresholded-correlation rule over the training features, from an explicit
edge-list file, or from the small constructors used by the synthetic
benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, ParseError
from .linalg import SparseMat
from .problems import samples_to_csr

__all__ = [
    "FeatureGraph",
    "correlation_graph",
    "penalty_matrix",
    "chain_graph",
    "random_graph",
    "merge_graphs",
    "read_edge_list",
    "write_edge_list",
]


@dataclass(frozen=True)
class FeatureGraph:
    """Undirected weighted graph over the d variates."""

    d: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        seen = set()
        norm = []
        for i, j, w in self.edges:
            if i == j:
                raise DimensionError(f"self-loop at node {i}")
            if not 0 <= i < self.d or not 0 <= j < self.d:
                raise DimensionError(f"edge ({i},{j}) out of range for d={self.d}")
            if w <= 0:
                raise DimensionError(f"edge ({i},{j}) has nonpositive weight {w}")
            a, b = (i, j) if i < j else (j, i)
            if (a, b) in seen:
                raise DimensionError(f"duplicate edge ({a},{b})")
            seen.add((a, b))
            norm.append((a, b, float(w)))
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def correlation_graph(samples, threshold: float, d: int | None = None) -> FeatureGraph:
    """Connect feature pairs whose absolute Pearson correlation exceeds
    ``threshold``; all edges get weight 1.

    Zero-variance features carry no correlation information and are
    excluded from every edge. Needs at least two samples.
    """
    if not 0.0 <= threshold < 1.0:
        raise DimensionError("threshold must be in [0, 1)")
    if len(samples) < 2:
        raise DimensionError("need at least two samples to estimate correlations")
    if d is None:
        d = max((int(s.indices[-1]) + 1 for s in samples if len(s.indices)), default=0)
    X = samples_to_csr(samples, d).toarray()
    std = X.std(axis=0)
    active = np.flatnonzero(std > 0.0)
    edges = []
    if len(active) >= 2:
        corr = np.corrcoef(X[:, active].T)
        hit = np.abs(corr) > threshold
        for a in range(len(active)):
            for b in range(a + 1, len(active)):
                if hit[a, b]:
                    edges.append((int(active[a]), int(active[b]), 1.0))
    return FeatureGraph(d=d, edges=tuple(edges))


def penalty_matrix(g: FeatureGraph) -> SparseMat:
    """One row per edge: +w at column i, -w at column j.

    ``||A x||_1`` is then the graph-guided fusion penalty
    ``sum w |x_i - x_j|``. An empty edge set yields a 0-by-d matrix (the
    problem degenerates to plain regularized risk).
    """
    entries = []
    for r, (i, j, w) in enumerate(g.edges):
        entries.append((r, i, w))
        entries.append((r, j, -w))
    return SparseMat(g.edge_count, g.d, entries)


def chain_graph(d: int) -> FeatureGraph:
    """Nearest-neighbor chain: edges (0,1), (1,2), ..., (d-2, d-1)."""
    return FeatureGraph(d=d, edges=tuple((i, i + 1, 1.0) for i in range(d - 1)))


def random_graph(d: int, count: int, seed: int) -> FeatureGraph:
    """``count`` distinct random non-adjacent-chain edges, weight 1."""
    rng = np.random.default_rng(seed)
    chosen: set[tuple[int, int]] = set()
    limit = d * (d - 1) // 2
    if count > limit:
        raise DimensionError(f"cannot place {count} distinct edges on {d} nodes")
    while len(chosen) < count:
        i, j = rng.integers(0, d, size=2)
        if i == j:
            continue
        a, b = (int(i), int(j)) if i < j else (int(j), int(i))
        chosen.add((a, b))
    return FeatureGraph(d=d, edges=tuple((a, b, 1.0) for a, b in sorted(chosen)))


def merge_graphs(*graphs: FeatureGraph) -> FeatureGraph:
    """Union of edge sets (duplicates collapse to one edge, first weight wins)."""
    if not graphs:
        raise DimensionError("nothing to merge")
    d = graphs[0].d
    if any(g.d != d for g in graphs):
        raise DimensionError("graphs disagree on d")
    seen: dict[tuple[int, int], float] = {}
    for g in graphs:
        for i, j, w in g.edges:
            seen.setdefault((i, j), w)
    return FeatureGraph(d=d, edges=tuple((i, j, w) for (i, j), w in sorted(seen.items())))


def read_edge_list(path, d: int) -> FeatureGraph:
    """Parse lines ``i j [weight]`` (0-based); '#' starts a comment."""
    edges = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"expected 'i j [weight]', got {line!r}", line=lineno)
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise ParseError(f"bad edge line {line!r}", line=lineno) from None
            edges.append((i, j, w))
    try:
        return FeatureGraph(d=d, edges=tuple(edges))
    except DimensionError as exc:
        raise ParseError(f"invalid edge list: {exc}") from exc


def write_edge_list(g: FeatureGraph, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# {g.edge_count} edges over {g.d} features\n")
        for i, j, w in g.edges:
            if w == 1.0:
                fh.write(f"{i} {j}\n")
            else:
                fh.write(f"{i} {j} {w!r}\n")
