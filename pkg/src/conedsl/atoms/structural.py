"""Affine structural atoms: arithmetic, stacking, indexing, reductions.

These atoms never create cone rows; their graph implementations are pure
linear reindexing / combination of the argument forms.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import DCPError, ShapeError
from ..expr import (AtomExpr, ConstantExpr, Curvature, Expression,
                    Monotonicity, Shape, Sign, as_expression, constant_value,
                    sign_add, sign_join, sign_mul, sign_neg, sign_of_values)
from ..lin import (LinForm, cumsum_axis_map, diag_mat_rows, diag_vec_map,
                   diff_map, matmul_left_map, matmul_right_map, select_flat,
                   sum_axis_map, trace_map, transpose_perm, vstack_perm)
from .base import AtomDescriptor, const, monos, same_shape

_INC = Monotonicity.INCREASING
_DEC = Monotonicity.DECREASING
_NONMONO = Monotonicity.NONMONOTONE


def _const_mono(values) -> Monotonicity:
    if np.all(values >= 0):
        return _INC
    if np.all(values <= 0):
        return _DEC
    return _NONMONO


# -- add / negate ------------------------------------------------------------

ADD = AtomDescriptor(
    name="add", display="+",
    shape_out=same_shape,
    sign_out=lambda s, p: sign_add(s[0], s[1]),
    base_curvature=const(Curvature.AFFINE),
    monotonicity=monos(_INC, _INC),
    evaluate=lambda v, p: v[0] + v[1],
    graph=lambda ctx, f, p: f[0] + f[1],
)

NEGATE = AtomDescriptor(
    name="negate", display="-",
    shape_out=same_shape,
    sign_out=lambda s, p: sign_neg(s[0]),
    base_curvature=const(Curvature.AFFINE),
    monotonicity=monos(_DEC),
    evaluate=lambda v, p: -v[0],
    graph=lambda ctx, f, p: -f[0],
)


def add(a, b):
    return AtomExpr(ADD, [as_expression(a), as_expression(b)])


def negate(a):
    return AtomExpr(NEGATE, [as_expression(a)])


# -- products ------------------------------------------------------------------

def _scale_params(c):
    c = float(c)
    return {"c": c}


SCALE = AtomDescriptor(
    name="scale", display="*",
    shape_out=same_shape,
    sign_out=lambda s, p: sign_mul(
        Sign.ZERO if p["c"] == 0 else (Sign.NONNEG if p["c"] > 0 else Sign.NONPOS),
        s[0]),
    base_curvature=const(Curvature.AFFINE),
    monotonicity=lambda s, p: [_INC if p["c"] >= 0 else _DEC],
    evaluate=lambda v, p: p["c"] * v[0],
    graph=lambda ctx, f, p: p["c"] * f[0],
)

MUL_ELEMWISE = AtomDescriptor(
    name="mul_elemwise", display="*",
    shape_out=lambda shapes, p: shapes[0],
    sign_out=lambda s, p: sign_mul(sign_of_values(p["c"]), s[0]),
    base_curvature=const(Curvature.AFFINE),
    monotonicity=lambda s, p: [_const_mono(p["c"])],
    evaluate=lambda v, p: p["c"] * v[0],
    graph=lambda ctx, f, p: f[0].scale_rows(p["c"].ravel(order="F")),
)


def _matmul_sign(signs, params):
    csign = sign_of_values(params["c"])
    return sign_mul(csign, signs[0]) if csign != Sign.UNKNOWN else Sign.UNKNOWN


MATMUL_LEFT = AtomDescriptor(
    name="matmul_left", display="@",
    shape_out=lambda shapes, p: Shape(p["c"].shape[0], shapes[0].cols),
    sign_out=_matmul_sign,
    base_curvature=const(Curvature.AFFINE),
    monotonicity=lambda s, p: [_const_mono(p["c"])],
    evaluate=lambda v, p: p["c"] @ v[0],
    graph=lambda ctx, f, p: f[0].left_mul(
        matmul_left_map(p["c"], p["x_rows"], p["x_cols"])),
)

MATMUL_RIGHT = AtomDescriptor(
    name="matmul_right", display="@",
    shape_out=lambda shapes, p: Shape(shapes[0].rows, p["c"].shape[1]),
    sign_out=_matmul_sign,
    base_curvature=const(Curvature.AFFINE),
    monotonicity=lambda s, p: [_const_mono(p["c"])],
    evaluate=lambda v, p: v[0] @ p["c"],
    graph=lambda ctx, f, p: f[0].left_mul(
        matmul_right_map(p["c"], p["x_rows"], p["x_cols"])),
)


def scale(x, c):
    return AtomExpr(SCALE, [as_expression(x)], _scale_params(c))


def elementwise_product(a, b):
    """R-style `*`: elementwise, requiring one constant operand; scalars
    broadcast against any shape."""
    a, b = as_expression(a), as_expression(b)
    if a.curvature == Curvature.CONSTANT:
        cexpr, x = a, b
    elif b.curvature == Curvature.CONSTANT:
        cexpr, x = b, a
    else:
        raise DCPError("cannot multiply two non-constant expressions")
    c = constant_value(cexpr)
    if c.size == 1:
        return scale(x, c.ravel()[0])
    if x.is_scalar:
        # constant vector times scalar expression: result has the constant's
        # shape, each entry c_ij * x
        ones_map = np.ones((c.size, 1))
        expanded = AtomExpr(MATMUL_LEFT, [x],
                            {"c": ones_map, "x_rows": 1, "x_cols": 1})
        reshaped = reshape_expr(expanded, c.shape[0], c.shape[1])
        return AtomExpr(MUL_ELEMWISE, [reshaped], {"c": c})
    if c.shape != (x.shape.rows, x.shape.cols):
        raise ShapeError(
            f"elementwise product shapes {c.shape} and {tuple(x.shape)} disagree")
    return AtomExpr(MUL_ELEMWISE, [x], {"c": c})


mul_elemwise = elementwise_product


def matrix_product(a, b):
    a, b = as_expression(a), as_expression(b)
    if a.is_scalar or b.is_scalar:
        return elementwise_product(a, b)
    if a.curvature == Curvature.CONSTANT:
        c = constant_value(a)
        if c.shape[1] != b.shape.rows:
            raise ShapeError(
                f"matrix product inner dimensions {c.shape[1]} and "
                f"{b.shape.rows} disagree")
        return AtomExpr(MATMUL_LEFT, [b],
                        {"c": c, "x_rows": b.shape.rows, "x_cols": b.shape.cols})
    if b.curvature == Curvature.CONSTANT:
        c = constant_value(b)
        if a.shape.cols != c.shape[0]:
            raise ShapeError(
                f"matrix product inner dimensions {a.shape.cols} and "
                f"{c.shape[0]} disagree")
        return AtomExpr(MATMUL_RIGHT, [a],
                        {"c": c, "x_rows": a.shape.rows, "x_cols": a.shape.cols})
    raise DCPError("cannot multiply two non-constant expressions")


def divide(x, c):
    x = as_expression(x)
    if isinstance(c, Expression):
        c = constant_value(c).ravel()
        if c.size != 1:
            raise ShapeError("division requires a scalar constant divisor")
        c = c[0]
    c = float(c)
    if c == 0:
        raise ZeroDivisionError("division of an expression by zero")
    return scale(x, 1.0 / c)


# -- transpose / index / reshape -------------------------------------------------

TRANSPOSE = AtomDescriptor(
    name="transpose", display="t()",
    shape_out=lambda shapes, p: Shape(shapes[0].cols, shapes[0].rows),
    sign_out=lambda s, p: s[0],
    base_curvature=const(Curvature.AFFINE),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: v[0].T,
    graph=lambda ctx, f, p: f[0].select(transpose_perm(p["rows"], p["cols"])),
)


def transpose(x):
    x = as_expression(x)
    return AtomExpr(TRANSPOSE, [x], {"rows": x.shape.rows, "cols": x.shape.cols})


def _normalize_sel(key, n):
    idx = np.arange(n)[key]
    idx = np.atleast_1d(idx)
    if idx.ndim != 1 or idx.size == 0:
        raise ShapeError("index selection must keep at least one entry")
    return idx.astype(np.int64)


INDEX = AtomDescriptor(
    name="index", display="[...]",
    shape_out=lambda shapes, p: Shape(p["rows_sel"].size, p["cols_sel"].size),
    sign_out=lambda s, p: s[0],
    base_curvature=const(Curvature.AFFINE),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: v[0][np.ix_(p["rows_sel"], p["cols_sel"])],
    graph=lambda ctx, f, p: f[0].select(
        select_flat(p["rows_sel"], p["cols_sel"], p["x_rows"])),
)


def index(x, key):
    x = as_expression(x)
    rows, cols = x.shape
    if isinstance(key, tuple):
        if len(key) != 2:
            raise ShapeError("matrix indexing takes at most two subscripts")
        rkey, ckey = key
    else:
        rkey, ckey = key, slice(None)
    try:
        rows_sel = _normalize_sel(rkey, rows)
        cols_sel = _normalize_sel(ckey, cols)
    except IndexError as e:
        raise ShapeError(f"index out of range: {e}") from e
    return AtomExpr(INDEX, [x], {"rows_sel": rows_sel, "cols_sel": cols_sel,
                                 "x_rows": rows})


RESHAPE = AtomDescriptor(
    name="reshape", display="reshape",
    shape_out=lambda shapes, p: Shape(p["rows"], p["cols"]),
    sign_out=lambda s, p: s[0],
    base_curvature=const(Curvature.AFFINE),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: v[0].reshape(p["rows"], p["cols"], order="F"),
    graph=lambda ctx, f, p: f[0],
)


def reshape_expr(x, rows, cols):
    x = as_expression(x)
    rows, cols = int(rows), int(cols)
    if rows * cols != x.size:
        raise ShapeError(
            f"cannot reshape {tuple(x.shape)} ({x.size} entries) to "
            f"({rows}, {cols})")
    return AtomExpr(RESHAPE, [x], {"rows": rows, "cols": cols})


def vec(x):
    x = as_expression(x)
    return reshape_expr(x, x.size, 1)


# -- stacking ----------------------------------------------------------------------

def _hstack_shape(shapes, params):
    rows = shapes[0].rows
    for s in shapes[1:]:
        if s.rows != rows:
            raise ShapeError("hstack arguments must share a row count")
    return Shape(rows, sum(s.cols for s in shapes))


def _vstack_shape(shapes, params):
    cols = shapes[0].cols
    for s in shapes[1:]:
        if s.cols != cols:
            raise ShapeError("vstack arguments must share a column count")
    return Shape(sum(s.rows for s in shapes), cols)


def _join_signs(signs, params):
    out = signs[0]
    for s in signs[1:]:
        out = sign_join(out, s)
    return out


HSTACK = AtomDescriptor(
    name="hstack", display="hstack",
    shape_out=_hstack_shape,
    sign_out=_join_signs,
    base_curvature=const(Curvature.AFFINE),
    monotonicity=lambda s, p: [_INC] * len(s),
    evaluate=lambda v, p: np.hstack(v),
    # vec([A B]) is just the concatenation of the piece vecs
    graph=lambda ctx, f, p: LinForm.concat(f),
)

VSTACK = AtomDescriptor(
    name="vstack", display="vstack",
    shape_out=_vstack_shape,
    sign_out=_join_signs,
    base_curvature=const(Curvature.AFFINE),
    monotonicity=lambda s, p: [_INC] * len(s),
    evaluate=lambda v, p: np.vstack(v),
    graph=lambda ctx, f, p: LinForm.concat(f).select(
        vstack_perm(p["row_counts"], p["ncols"])),
)


def hstack(*args):
    return AtomExpr(HSTACK, [as_expression(a) for a in args])


def vstack(*args):
    exprs = [as_expression(a) for a in args]
    return AtomExpr(VSTACK, exprs,
                    {"row_counts": [e.shape.rows for e in exprs],
                     "ncols": exprs[0].shape.cols})


# -- diag / diff --------------------------------------------------------------------

def _diag_shape(shapes, params):
    s = shapes[0]
    if s.cols == 1 or s.rows == 1:
        n = s.size
        return Shape(n, n)
    if s.rows == s.cols:
        return Shape(s.rows, 1)
    raise ShapeError("diag needs a vector or a square matrix")


def _diag_eval(v, p):
    x = v[0]
    if 1 in x.shape:
        return np.diag(x.ravel())
    return np.diag(x).reshape(-1, 1)


def _diag_graph(ctx, f, p):
    (x,) = f
    if p["to_matrix"]:
        return x.left_mul(diag_vec_map(x.size))
    n = int(round(np.sqrt(x.size)))
    return x.select(diag_mat_rows(n))


DIAG = AtomDescriptor(
    name="diag", display="diag",
    shape_out=_diag_shape,
    sign_out=lambda s, p: s[0],
    base_curvature=const(Curvature.AFFINE),
    monotonicity=monos(_INC),
    evaluate=_diag_eval,
    graph=_diag_graph,
)


def diag(x):
    x = as_expression(x)
    to_matrix = x.shape.cols == 1 or x.shape.rows == 1
    return AtomExpr(DIAG, [x], {"to_matrix": to_matrix})


def _diff_shape(shapes, params):
    s = shapes[0]
    if s.cols != 1:
        raise ShapeError("diff expects a column vector")
    out = s.rows - params["lag"] * params["differences"]
    if out < 1:
        raise ShapeError("diff output would be empty")
    return Shape(out, 1)


def _diff_eval(v, p):
    x = v[0].ravel()
    for _ in range(p["differences"]):
        x = x[p["lag"]:] - x[:-p["lag"]]
    return x.reshape(-1, 1)


DIFF = AtomDescriptor(
    name="diff", display="diff",
    shape_out=_diff_shape,
    # differences of same-signed entries have no fixed sign, and the mixed
    # +/- coefficients make the map nonmonotone in each entry
    sign_out=lambda s, p: Sign.ZERO if s[0] == Sign.ZERO else Sign.UNKNOWN,
    base_curvature=const(Curvature.AFFINE),
    monotonicity=monos(_NONMONO),
    evaluate=_diff_eval,
    graph=lambda ctx, f, p: f[0].left_mul(
        diff_map(f[0].size, p["lag"], p["differences"])),
)


def diff(x, lag=1, differences=1):
    lag, differences = int(lag), int(differences)
    if lag < 1 or differences < 1:
        raise ShapeError("diff lag and differences must be >= 1")
    return AtomExpr(DIFF, [as_expression(x)],
                    {"lag": lag, "differences": differences})


# -- reductions ----------------------------------------------------------------------

def _sum_shape(shapes, params):
    s = shapes[0]
    axis = params.get("axis")
    if axis is None:
        return Shape(1, 1)
    if axis == 1:
        return Shape(s.rows, 1)
    if axis == 2:
        return Shape(1, s.cols)
    raise ShapeError(f"axis must be None, 1, or 2; got {axis!r}")


def _sum_eval(v, p):
    axis = p.get("axis")
    x = v[0]
    if axis is None:
        return np.sum(x)
    if axis == 1:
        return np.sum(x, axis=1).reshape(-1, 1)
    return np.sum(x, axis=0).reshape(1, -1)


SUM_ENTRIES = AtomDescriptor(
    name="sum_entries", display="sum",
    shape_out=_sum_shape,
    sign_out=lambda s, p: s[0],
    base_curvature=const(Curvature.AFFINE),
    monotonicity=monos(_INC),
    evaluate=_sum_eval,
    graph=lambda ctx, f, p: f[0].left_mul(
        sum_axis_map(p["x_rows"], p["x_cols"], p.get("axis"))),
)


def sum_entries(x, axis=None):
    x = as_expression(x)
    return AtomExpr(SUM_ENTRIES, [x],
                    {"axis": axis, "x_rows": x.shape.rows, "x_cols": x.shape.cols})


def _trace_shape(shapes, params):
    s = shapes[0]
    if s.rows != s.cols:
        raise ShapeError("matrix_trace needs a square matrix")
    return Shape(1, 1)


MATRIX_TRACE = AtomDescriptor(
    name="matrix_trace", display="trace",
    shape_out=_trace_shape,
    sign_out=lambda s, p: s[0],
    base_curvature=const(Curvature.AFFINE),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: np.trace(v[0]),
    graph=lambda ctx, f, p: f[0].left_mul(
        trace_map(int(round(np.sqrt(f[0].size))))),
)


def matrix_trace(x):
    return AtomExpr(MATRIX_TRACE, [as_expression(x)])


def _cumsum_shape(shapes, params):
    if params["axis"] not in (1, 2):
        raise ShapeError("cumsum_axis requires axis 1 or 2; axis=None is not "
                         "accepted")
    return shapes[0]


def _cumsum_eval(v, p):
    x = v[0]
    return np.cumsum(x, axis=1) if p["axis"] == 1 else np.cumsum(x, axis=0)


CUMSUM_AXIS = AtomDescriptor(
    name="cumsum_axis", display="cumsum",
    shape_out=_cumsum_shape,
    sign_out=lambda s, p: s[0],
    base_curvature=const(Curvature.AFFINE),
    monotonicity=monos(_INC),
    evaluate=_cumsum_eval,
    graph=lambda ctx, f, p: f[0].left_mul(
        cumsum_axis_map(p["x_rows"], p["x_cols"], p["axis"])),
)


def cumsum_axis(x, axis):
    x = as_expression(x)
    return AtomExpr(CUMSUM_AXIS, [x],
                    {"axis": axis, "x_rows": x.shape.rows, "x_cols": x.shape.cols})
