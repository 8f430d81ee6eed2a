"""Affine forms over flattened variables, plus vec-ordering helpers.

A LinForm represents an affine map z = sum_j C_j @ x_j + d where each x_j
is the column-major flattening of one variable. Atom graph implementations
compose these forms; the canonicalizer stacks them into the cone program
data. All matrix flattenings are column-major throughout the package.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ShapeError

_SQRT2 = np.sqrt(2.0)


class LinForm:
    __slots__ = ("size", "terms", "const")

    def __init__(self, size: int, terms=None, const=None):
        self.size = int(size)
        self.terms = terms if terms is not None else {}
        self.const = (np.zeros(self.size) if const is None
                      else np.asarray(const, dtype=float).ravel())
        if self.const.size != self.size:
            raise ShapeError("constant length does not match form size")

    @staticmethod
    def constant(vec) -> "LinForm":
        vec = np.asarray(vec, dtype=float).ravel()
        return LinForm(vec.size, {}, vec)

    @staticmethod
    def for_var(vid: int, n: int) -> "LinForm":
        return LinForm(n, {vid: sp.eye(n, format="csr")})

    def __add__(self, other: "LinForm") -> "LinForm":
        a, b = _broadcast_pair(self, other)
        terms = dict(a.terms)
        for vid, mat in b.terms.items():
            terms[vid] = (terms[vid] + mat).tocsr() if vid in terms else mat
        return LinForm(a.size, terms, a.const + b.const)

    def __sub__(self, other: "LinForm") -> "LinForm":
        return self + (-other)

    def __neg__(self) -> "LinForm":
        return self * -1.0

    def __mul__(self, s: float) -> "LinForm":
        s = float(s)
        return LinForm(self.size, {v: (m * s).tocsr() for v, m in self.terms.items()},
                       self.const * s)

    __rmul__ = __mul__

    def left_mul(self, M) -> "LinForm":
        """Apply a constant linear map: M @ form. M is (k x size)."""
        M = sp.csr_matrix(M)
        if M.shape[1] != self.size:
            raise ShapeError("left_mul: inner dimensions disagree")
        terms = {v: (M @ m).tocsr() for v, m in self.terms.items()}
        return LinForm(M.shape[0], terms, M @ self.const)

    def select(self, rows) -> "LinForm":
        rows = np.asarray(rows, dtype=np.int64)
        terms = {v: m[rows].tocsr() for v, m in self.terms.items()}
        return LinForm(rows.size, terms, self.const[rows])

    def scale_rows(self, d) -> "LinForm":
        d = np.asarray(d, dtype=float).ravel()
        if d.size != self.size:
            raise ShapeError("scale_rows: length mismatch")
        D = sp.diags(d)
        terms = {v: (D @ m).tocsr() for v, m in self.terms.items()}
        return LinForm(self.size, terms, self.const * d)

    def broadcast_to(self, k: int) -> "LinForm":
        if self.size == k:
            return self
        if self.size != 1:
            raise ShapeError(f"cannot broadcast form of size {self.size} to {k}")
        ones = sp.csr_matrix(np.ones((k, 1)))
        return self.left_mul(ones)

    @staticmethod
    def concat(forms) -> "LinForm":
        forms = list(forms)
        size = sum(f.size for f in forms)
        vids = {}
        for f in forms:
            for v, m in f.terms.items():
                vids.setdefault(v, m.shape[1])
        terms = {}
        for v, ncols in vids.items():
            blocks = [f.terms.get(v, sp.csr_matrix((f.size, ncols))) for f in forms]
            terms[v] = sp.vstack(blocks, format="csr")
        const = np.concatenate([f.const for f in forms]) if forms else np.zeros(0)
        return LinForm(size, terms, const)

    def eval(self, values: dict) -> np.ndarray:
        """Numeric value given flat per-variable values keyed by vid."""
        out = self.const.copy()
        for v, m in self.terms.items():
            out += m @ values[v]
        return out


def _broadcast_pair(a: LinForm, b: LinForm):
    if a.size == b.size:
        return a, b
    if a.size == 1:
        return a.broadcast_to(b.size), b
    if b.size == 1:
        return a, b.broadcast_to(a.size)
    raise ShapeError(f"form sizes {a.size} and {b.size} do not conform")


# -- column-major layout helpers ---------------------------------------------

def flat_index(i, j, rows: int):
    """Flat position of entry (i, j) in column-major order."""
    return i + j * rows


def transpose_perm(rows: int, cols: int) -> np.ndarray:
    """perm[k] = source position in vec(X) of entry k of vec(X^T)."""
    src = np.arange(rows * cols).reshape(rows, cols, order="F")
    return src.T.ravel(order="F")


def select_flat(row_sel, col_sel, rows: int) -> np.ndarray:
    row_sel = np.asarray(row_sel, dtype=np.int64)
    col_sel = np.asarray(col_sel, dtype=np.int64)
    return (row_sel[:, None] + rows * col_sel[None, :]).ravel(order="F")


def vstack_perm(row_counts, ncols: int) -> np.ndarray:
    """Row permutation mapping concatenated piece-vecs to the stacked vec."""
    total = sum(row_counts)
    perm = np.empty(total * ncols, dtype=np.int64)
    offsets = np.cumsum([0] + list(row_counts))
    piece_starts = [off * ncols for off in offsets[:-1]]
    for p, m in enumerate(row_counts):
        for j in range(ncols):
            dst = offsets[p] + j * total
            src = piece_starts[p] + j * m
            perm[dst : dst + m] = np.arange(src, src + m)
    return perm


def interleave_perm(streams: int, n: int) -> np.ndarray:
    """Source rows for grouping k parallel streams of length n into n blocks.

    Input row layout is stream-major (stream j occupies rows j*n..j*n+n-1);
    output row i*streams + j is entry i of stream j.
    """
    out = np.empty(streams * n, dtype=np.int64)
    for j in range(streams):
        out[j::streams] = np.arange(n) + j * n
    return out


def svec_map(n: int) -> sp.csr_matrix:
    """Map vec(X) of an n x n expression to svec of its symmetric part.

    Lower triangle column by column; off-diagonal rows average the (i,j)
    and (j,i) entries and scale by sqrt(2).
    """
    rows, cols, vals = [], [], []
    r = 0
    for j in range(n):
        rows.append(r)
        cols.append(flat_index(j, j, n))
        vals.append(1.0)
        r += 1
        for i in range(j + 1, n):
            rows.extend([r, r])
            cols.extend([flat_index(i, j, n), flat_index(j, i, n)])
            vals.extend([_SQRT2 / 2.0, _SQRT2 / 2.0])
            r += 1
    d = n * (n + 1) // 2
    return sp.csr_matrix((vals, (rows, cols)), shape=(d, n * n))


def diff_map(n: int, lag: int, differences: int) -> sp.csr_matrix:
    """Iterated lagged difference operator for length-n vectors."""
    D = sp.eye(n, format="csr")
    length = n
    for _ in range(differences):
        out_len = length - lag
        if out_len < 1:
            raise ShapeError("diff output would be empty")
        step = sp.csr_matrix(
            (np.concatenate([-np.ones(out_len), np.ones(out_len)]),
             (np.concatenate([np.arange(out_len), np.arange(out_len)]),
              np.concatenate([np.arange(out_len), np.arange(out_len) + lag]))),
            shape=(out_len, length))
        D = step @ D
        length = out_len
    return D.tocsr()


def matmul_left_map(M, x_rows: int, x_cols: int) -> sp.csr_matrix:
    """Map vec(X) -> vec(M @ X)."""
    M = sp.csr_matrix(M)
    if M.shape[1] != x_rows:
        raise ShapeError("matmul: inner dimensions disagree")
    return sp.kron(sp.eye(x_cols), M, format="csr")


def matmul_right_map(M, x_rows: int, x_cols: int) -> sp.csr_matrix:
    """Map vec(X) -> vec(X @ M)."""
    M = sp.csr_matrix(M)
    if M.shape[0] != x_cols:
        raise ShapeError("matmul: inner dimensions disagree")
    return sp.kron(M.T, sp.eye(x_rows), format="csr")


def sum_axis_map(rows: int, cols: int, axis) -> sp.csr_matrix:
    if axis is None:
        return sp.csr_matrix(np.ones((1, rows * cols)))
    if axis == 1:  # one total per row
        return matmul_right_map(np.ones((cols, 1)), rows, cols)
    if axis == 2:  # one total per column
        return matmul_left_map(np.ones((1, rows)), rows, cols)
    raise ShapeError(f"axis must be None, 1, or 2; got {axis!r}")


def cumsum_axis_map(rows: int, cols: int, axis: int) -> sp.csr_matrix:
    if axis == 1:  # running sums across each row
        upper = np.triu(np.ones((cols, cols)))
        return matmul_right_map(upper, rows, cols)
    if axis == 2:  # running sums down each column
        lower = np.tril(np.ones((rows, rows)))
        return matmul_left_map(lower, rows, cols)
    raise ShapeError(f"cumsum axis must be 1 or 2; got {axis!r}")


def trace_map(n: int) -> sp.csr_matrix:
    cols = [flat_index(j, j, n) for j in range(n)]
    return sp.csr_matrix((np.ones(n), (np.zeros(n, dtype=np.int64), cols)),
                         shape=(1, n * n))


def diag_vec_map(n: int) -> sp.csr_matrix:
    """vec of diag(x) from a length-n vector x."""
    rows = [flat_index(j, j, n) for j in range(n)]
    return sp.csr_matrix((np.ones(n), (rows, np.arange(n))), shape=(n * n, n))


def diag_mat_rows(n: int) -> np.ndarray:
    """Flat positions of the diagonal of an n x n matrix."""
    return np.array([flat_index(j, j, n) for j in range(n)], dtype=np.int64)
