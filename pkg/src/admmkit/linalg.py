"""Sparse/dense linear-algebra kernels shared by the solvers.

Provides the compressed-row sparse matrix used for the constraint matrices,
a cached Cholesky solver for the fixed SPD system ``rho*A'A + L*I``, a
symmetric eigendecomposition cache that serves shifted solves
``(I/eta + rho*A'A)^{-1} b`` without refactorizing, and a power-iteration
upper bound on ``lambda_max(rho*A'A)``.

Dense factorizations are only offered up to dimension ``MAX_DENSE_DIM``;
beyond that the inexact-Uzawa solver variants (which never form ``A'A``)
are the supported path.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse

from .exceptions import ConfigError, DimensionError, NumericalError

__all__ = [
    "MAX_DENSE_DIM",
    "SparseMat",
    "CachedSpdSolver",
    "SpectralCache",
    "as_vector",
    "spmv",
    "build_spd_solver",
    "sym_eig",
    "power_iter_bound",
]

# Largest dimension for which rho*A'A is formed densely (factorized or
# eigendecomposed). Larger problems must use the matrix-free IU updaters.
MAX_DENSE_DIM = 5000

# Fixed seed for the power-iteration start vector: a deterministic random
# direction avoids the failure mode of a fixed vector lying in the null
# space of A'A (e.g. the all-ones vector for a difference matrix).
_POWER_ITER_SEED = 0x5EED


def as_vector(v, n: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce ``v`` to a 1-D float64 array, optionally checking its length."""
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


class SparseMat:
    """Immutable sparse matrix in canonical compressed-row form.

    Duplicate ``(row, col)`` entries in the input are summed at construction
    and column indices within each row are stored ascending, so products are
    deterministic (fixed reduction order).
    """

    __slots__ = ("_m",)

    def __init__(self, rows: int, cols: int, entries=()):
        if rows < 0 or cols < 0:
            raise DimensionError("matrix dimensions must be nonnegative")
        entries = list(entries)
        if entries:
            ii = np.asarray([e[0] for e in entries], dtype=np.int64)
            jj = np.asarray([e[1] for e in entries], dtype=np.int64)
            vv = np.asarray([e[2] for e in entries], dtype=np.float64)
            if ii.min() < 0 or ii.max() >= rows or jj.min() < 0 or jj.max() >= cols:
                raise DimensionError("entry index out of range")
            m = scipy.sparse.coo_matrix((vv, (ii, jj)), shape=(rows, cols)).tocsr()
        else:
            m = scipy.sparse.csr_matrix((rows, cols), dtype=np.float64)
        m.sum_duplicates()
        m.sort_indices()
        self._m = m

    @classmethod
    def from_scipy(cls, m) -> "SparseMat":
        out = cls.__new__(cls)
        csr = scipy.sparse.csr_matrix(m, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.sort_indices()
        out._m = csr
        return out

    @classmethod
    def from_dense(cls, arr) -> "SparseMat":
        return cls.from_scipy(scipy.sparse.csr_matrix(np.asarray(arr, dtype=np.float64)))

    @classmethod
    def identity(cls, n: int) -> "SparseMat":
        return cls.from_scipy(scipy.sparse.identity(n, format="csr"))

    @classmethod
    def neg_identity(cls, n: int) -> "SparseMat":
        return cls.from_scipy(-scipy.sparse.identity(n, format="csr"))

    @property
    def rows(self) -> int:
        return self._m.shape[0]

    @property
    def cols(self) -> int:
        return self._m.shape[1]

    @property
    def nnz(self) -> int:
        return self._m.nnz

    def scipy(self):
        """The backing CSR matrix. Treat as read-only."""
        return self._m

    def matvec(self, v) -> np.ndarray:
        v = as_vector(v, self.cols, "operand")
        return self._m.dot(v)

    def rmatvec(self, w) -> np.ndarray:
        """Transpose product ``M' w``."""
        w = as_vector(w, self.rows, "operand")
        return self._m.T.dot(w)

    def __matmul__(self, v):
        return self.matvec(v)

    def to_dense(self) -> np.ndarray:
        return self._m.toarray()

    def gram(self, rho: float = 1.0) -> np.ndarray:
        """Dense ``rho * M'M``. Refuses cols > MAX_DENSE_DIM."""
        if self.cols > MAX_DENSE_DIM:
            raise ConfigError(
                f"refusing to form a dense {self.cols}x{self.cols} Gram matrix "
                f"(> {MAX_DENSE_DIM}); use the inexact-Uzawa updaters "
                f"('sa-iu' / 'batch-iu'), which never form A'A"
            )
        g = (self._m.T @ self._m).toarray()
        return rho * g

    def row_entries(self, i: int):
        """(column indices, values) of row ``i``, columns ascending."""
        m = self._m
        sl = slice(m.indptr[i], m.indptr[i + 1])
        return m.indices[sl], m.data[sl]

    def is_neg_identity(self) -> bool:
        m = self._m
        if m.shape[0] != m.shape[1]:
            return False
        return (m + scipy.sparse.identity(m.shape[0], format="csr")).nnz == 0

    def __repr__(self):
        return f"SparseMat({self.rows}x{self.cols}, nnz={self.nnz})"


def spmv(M: SparseMat, v) -> np.ndarray:
    """Sparse matrix-vector product ``M v``."""
    return M.matvec(v)


class CachedSpdSolver:
    """Cholesky factorization of ``rho*A'A + L*I``, cached for repeated solves."""

    __slots__ = ("matrix", "_factor", "dimension", "rho", "L")

    def __init__(self, matrix: np.ndarray, factor, rho: float, L: float):
        self.matrix = matrix
        self._factor = factor
        self.dimension = matrix.shape[0]
        self.rho = rho
        self.L = L

    def solve(self, b) -> np.ndarray:
        b = as_vector(b, self.dimension, "right-hand side")
        return scipy.linalg.cho_solve(self._factor, b, check_finite=False)


def build_spd_solver(A: SparseMat, rho: float, L: float) -> CachedSpdSolver:
    """Factorize ``M = rho*A'A + L*I`` once for reuse across iterations.

    Parameters
    ----------
    A : SparseMat
        Constraint matrix, shape (m, d).
    rho : float
        Penalty parameter, > 0.
    L : float
        Diagonal shift (gradient smoothness constant), > 0.

    Raises
    ------
    ConfigError
        If d exceeds MAX_DENSE_DIM (the guidance names the IU updaters).
    NumericalError
        If the factorization breaks down; ``detail`` is the pivot index.
    """
    if rho <= 0:
        raise ConfigError("rho must be positive")
    if L <= 0:
        raise ConfigError("L must be positive")
    if A.cols > MAX_DENSE_DIM:
        raise ConfigError(
            f"dimension {A.cols} exceeds the dense-factorization limit "
            f"{MAX_DENSE_DIM}; use the inexact-Uzawa updaters ('sa-iu' / "
            f"'batch-iu'), which avoid the cached inverse"
        )
    M = A.gram(rho)
    M[np.diag_indices_from(M)] += L
    try:
        factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        pivot = getattr(exc, "info", None)
        # scipy reports the failing leading minor in the message only.
        if pivot is None:
            digits = [int(tok) for tok in str(exc).split() if tok.isdigit()]
            pivot = digits[0] if digits else -1
        raise NumericalError(
            f"Cholesky factorization of rho*A'A + L*I broke down at pivot {pivot}",
            detail=pivot,
        ) from exc
    return CachedSpdSolver(M, factor, rho, L)


class SpectralCache:
    """Eigendecomposition ``Q diag(eigvals) Q'`` of a symmetric matrix.

    Serves ``(shift*I + source)^{-1} b`` for arbitrary positive shifts via a
    diagonal update, so solvers with a per-iteration stepsize never
    refactorize.
    """

    __slots__ = ("eigvals", "eigvecs", "source")

    def __init__(self, eigvals: np.ndarray, eigvecs: np.ndarray, source: np.ndarray):
        self.eigvals = eigvals
        self.eigvecs = eigvecs
        self.source = source

    @property
    def dimension(self) -> int:
        return self.eigvals.shape[0]

    def shifted_solve(self, b, shift: float) -> np.ndarray:
        """Solve ``(shift*I + source) x = b``; shift must keep it SPD."""
        b = as_vector(b, self.dimension, "right-hand side")
        denom = self.eigvals + shift
        if np.any(denom <= 0):
            raise NumericalError("shifted system is not positive definite")
        return self.eigvecs @ ((self.eigvecs.T @ b) / denom)

    def max_eigval(self) -> float:
        return float(self.eigvals[-1]) if self.dimension else 0.0


def sym_eig(M) -> SpectralCache:
    """Eigendecompose a symmetric dense matrix.

    Rejects inputs that are not symmetric to within 1e-12.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] > MAX_DENSE_DIM:
        raise ConfigError(
            f"dimension {M.shape[0]} exceeds the dense eigendecomposition "
            f"limit {MAX_DENSE_DIM}"
        )
    if not np.allclose(M, M.T, rtol=1e-12, atol=1e-12):
        raise DimensionError("matrix is not symmetric within 1e-12")
    eigvals, eigvecs = np.linalg.eigh(M)
    return SpectralCache(eigvals, eigvecs, M)


def power_iter_bound(A: SparseMat, rho: float, iters: int, slack: float) -> float:
    """Upper bound on ``lambda_max(rho*A'A)`` by power iteration.

    Runs ``iters`` matrix-free iterations from a deterministic random start
    and returns ``slack`` times the final Rayleigh quotient. With
    ``slack >= 1.01`` and ``iters >= 100`` the result upper-bounds the true
    maximum eigenvalue in practice (the Rayleigh quotient itself never
    exceeds it). A zero matrix yields 0.0; callers needing a strictly
    positive bound must floor it.
    """
    if iters < 1:
        raise DimensionError("iters must be >= 1")
    if slack < 1.0:
        raise DimensionError("slack must be >= 1")
    if rho <= 0:
        raise ConfigError("rho must be positive")
    d = A.cols
    if d == 0 or A.nnz == 0:
        return 0.0
    rng = np.random.default_rng(_POWER_ITER_SEED)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = rho * A.rmatvec(A.matvec(v))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0  # start vector lies in the null space: degenerate
        v = w / norm
    rayleigh = float(v @ (rho * A.rmatvec(A.matvec(v))))
    return slack * rayleigh
