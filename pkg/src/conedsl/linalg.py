"""Sparse matrix type, quasidefinite solves, and symmetric eigensolves.

The canonicalizer and the solver exchange matrices in compressed sparse
column form. Factorization and eigendecomposition are delegated to SciPy
and NumPy; this module pins down the exact contracts the rest of the
package relies on (duplicate handling, residual bounds, eigenvalue order).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationError, NumericError, ShapeError


class Triplet(NamedTuple):
    row: int
    col: int
    val: float


class SparseMatrix:
    """Immutable CSC matrix: column pointers, row indices, values.

    Row indices are strictly increasing within each column and no stored
    value is exactly zero.
    """

    __slots__ = ("nrows", "ncols", "colptr", "rowidx", "vals", "_scipy", "_qdf")

    def __init__(self, nrows, ncols, colptr, rowidx, vals):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.colptr = np.asarray(colptr, dtype=np.int64)
        self.rowidx = np.asarray(rowidx, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=np.float64)
        if self.colptr.shape != (self.ncols + 1,):
            raise ShapeError("colptr must have ncols + 1 entries")
        if self.colptr[0] != 0 or self.colptr[-1] != self.vals.size:
            raise ShapeError("colptr must start at 0 and end at nnz")
        self._scipy = None
        self._qdf = None

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def to_scipy(self) -> sp.csc_matrix:
        if self._scipy is None:
            self._scipy = sp.csc_matrix(
                (self.vals, self.rowidx, self.colptr), shape=(self.nrows, self.ncols)
            )
        return self._scipy

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def transpose(self) -> "SparseMatrix":
        return from_scipy(self.to_scipy().T.tocsc())

    @property
    def T(self) -> "SparseMatrix":
        return self.transpose()


def from_scipy(mat) -> SparseMatrix:
    """Normalize any scipy sparse matrix into the canonical CSC layout."""
    csc = sp.csc_matrix(mat)
    csc.sum_duplicates()
    csc.eliminate_zeros()
    csc.sort_indices()
    return SparseMatrix(csc.shape[0], csc.shape[1], csc.indptr, csc.indices, csc.data)


def from_dense(arr) -> SparseMatrix:
    return from_scipy(sp.csc_matrix(np.atleast_2d(np.asarray(arr, dtype=float))))


def assemble(triplets: Iterable, nrows: int, ncols: int) -> SparseMatrix:
    """Build a SparseMatrix from (row, col, val) entries.

    Duplicate coordinates are summed; entries that are exactly zero after
    summing are dropped. Out-of-range indices raise ShapeError.
    """
    rows, cols, vals = [], [], []
    for t in triplets:
        r, c, v = t
        rows.append(r)
        cols.append(c)
        vals.append(v)
    return assemble_arrays(rows, cols, vals, nrows, ncols)


def assemble_arrays(rows, cols, vals, nrows: int, ncols: int) -> SparseMatrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if not (rows.shape == cols.shape == vals.shape):
        raise ShapeError("triplet arrays must have equal length")
    if rows.size:
        if rows.min() < 0 or rows.max() >= nrows:
            raise ShapeError("row index out of range")
        if cols.min() < 0 or cols.max() >= ncols:
            raise ShapeError("column index out of range")
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    return from_scipy(coo)


def matvec(A: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != A.ncols:
        raise ShapeError(f"matvec: expected length {A.ncols}, got {x.size}")
    return A.to_scipy() @ x


def rmatvec(A: SparseMatrix, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.size != A.nrows:
        raise ShapeError(f"rmatvec: expected length {A.nrows}, got {y.size}")
    return A.to_scipy().T @ y


_RESID_RTOL = 1e-9
_MAX_REFINE = 5


class QuasidefSolver:
    """Cached factorization of a symmetric quasidefinite matrix.

    The factorization is computed once per instance and reused for every
    right-hand side. Solves are followed by iterative refinement until the
    residual satisfies ||M z - rhs|| <= 1e-9 * (1 + ||rhs||).
    """

    def __init__(self, M):
        csc = M.to_scipy() if isinstance(M, SparseMatrix) else sp.csc_matrix(M)
        if csc.shape[0] != csc.shape[1]:
            raise ShapeError("quasidefinite solve requires a square matrix")
        self._csc = csc
        try:
            self._lu = spla.splu(csc)
        except RuntimeError as e:
            raise FactorizationError(f"factorization failed: {e}") from e

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float).ravel()
        if rhs.size != self._csc.shape[0]:
            raise ShapeError("rhs length does not match matrix")
        A = self._csc
        z = self._lu.solve(rhs)
        if not np.all(np.isfinite(z)):
            raise FactorizationError("solve produced non-finite values (singular matrix?)")
        bound = _RESID_RTOL * (1.0 + np.linalg.norm(rhs))
        for _ in range(_MAX_REFINE):
            r = rhs - A @ z
            if np.linalg.norm(r) <= bound:
                return z
            z = z + self._lu.solve(r)
        if np.linalg.norm(rhs - A @ z) > bound:
            raise NumericError("iterative refinement failed to reach residual tolerance")
        return z


def solve_quasidef(M: SparseMatrix, rhs) -> np.ndarray:
    """Solve M z = rhs, caching the factorization on the matrix object."""
    if M._qdf is None:
        M._qdf = QuasidefSolver(M)
    return M._qdf.solve(rhs)


@dataclass
class SymmetricEig:
    values: np.ndarray   # ascending
    vectors: np.ndarray  # columns are orthonormal eigenvectors


def sym_eig(S) -> SymmetricEig:
    """Eigendecomposition of (S + S^T)/2 with ascending eigenvalues."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ShapeError("sym_eig requires a square matrix")
    sym = 0.5 * (S + S.T)
    try:
        w, V = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"eigendecomposition failed: {e}") from e
    return SymmetricEig(values=w, vectors=V)


# Symmetric vectorization. Lower triangle stacked column by column with
# off-diagonal entries scaled by sqrt(2), so that <X, Y> = svec(X).svec(Y).

_SQRT2 = np.sqrt(2.0)


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def svec(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    out = np.empty(svec_dim(n))
    k = 0
    for j in range(n):
        out[k] = X[j, j]
        k += 1
        cnt = n - j - 1
        if cnt:
            out[k : k + cnt] = _SQRT2 * X[j + 1 :, j]
            k += cnt
    return out


def unsvec(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.size != svec_dim(n):
        raise ShapeError(f"unsvec: expected length {svec_dim(n)}, got {v.size}")
    X = np.zeros((n, n))
    k = 0
    for j in range(n):
        X[j, j] = v[k]
        k += 1
        cnt = n - j - 1
        if cnt:
            col = v[k : k + cnt] / _SQRT2
            X[j + 1 :, j] = col
            X[j, j + 1 :] = col
            k += cnt
    return X
