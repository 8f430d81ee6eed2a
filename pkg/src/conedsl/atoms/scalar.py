"""Scalar-valued atoms: norms, extremal eigenvalues, log-det, and friends."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import DCPError, ShapeError, UnsupportedAtomError
from ..expr import (AtomExpr, Curvature, Monotonicity, Shape, Sign,
                    as_expression, constant_value)
from ..lin import LinForm, diag_mat_rows, svec_map
from .base import AtomDescriptor, const, monos, scalar_shape

_INC = Monotonicity.INCREASING
_DEC = Monotonicity.DECREASING
_NONMONO = Monotonicity.NONMONOTONE
_SIGNDEP = Monotonicity.SIGN_DEPENDENT


def _square_in(shapes, params):
    s = shapes[0]
    if s.rows != s.cols:
        raise ShapeError(f"expected a square argument, got {tuple(s)}")
    return Shape(1, 1)


def _symmetrize(X):
    return 0.5 * (X + X.T)


def _ones(n):
    return LinForm.constant(np.ones(n))


# -- lambda_max / lambda_min ---------------------------------------------------

def _diag_embed(n):
    """Map a scalar form to vec of (that scalar times the identity)."""
    diag_rows = diag_mat_rows(n)
    return sp.csr_matrix((np.ones(n), (diag_rows, np.zeros(n, dtype=np.int64))),
                         shape=(n * n, 1))


def _lambda_max_graph(ctx, forms, params):
    # epigraph: t I - sym(X) >= 0 in the semidefinite order
    (x,) = forms
    n = int(round(np.sqrt(x.size)))
    t = ctx.aux(1, lambda: np.linalg.eigvalsh(
        _symmetrize(ctx.value_of(x).reshape(n, n, order="F")))[-1:])
    ctx.psd(t.left_mul(_diag_embed(n)) - x, n)
    return t


def _lambda_min_graph(ctx, forms, params):
    # hypograph: sym(X) - t I >= 0
    (x,) = forms
    n = int(round(np.sqrt(x.size)))
    t = ctx.aux(1, lambda: np.linalg.eigvalsh(
        _symmetrize(ctx.value_of(x).reshape(n, n, order="F")))[:1])
    ctx.psd(x - t.left_mul(_diag_embed(n)), n)
    return t


def _sym_sample(rng, shapes, params):
    n = shapes[0].rows
    A = rng.normals(n, n)
    return [_symmetrize(A)]


LAMBDA_MAX = AtomDescriptor(
    name="lambda_max", display="lambda_max",
    shape_out=_square_in,
    sign_out=lambda s, p: Sign.UNKNOWN,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_NONMONO),
    evaluate=lambda v, p: np.linalg.eigvalsh(_symmetrize(v[0]))[-1],
    graph=_lambda_max_graph,
    sample=_sym_sample,
)

LAMBDA_MIN = AtomDescriptor(
    name="lambda_min", display="lambda_min",
    shape_out=_square_in,
    sign_out=lambda s, p: Sign.UNKNOWN,
    base_curvature=const(Curvature.CONCAVE),
    monotonicity=monos(_NONMONO),
    evaluate=lambda v, p: np.linalg.eigvalsh(_symmetrize(v[0]))[0],
    graph=_lambda_min_graph,
    sample=_sym_sample,
)


def lambda_max(X):
    return AtomExpr(LAMBDA_MAX, [as_expression(X)])


def lambda_min(X):
    return AtomExpr(LAMBDA_MIN, [as_expression(X)])


# -- log_det ---------------------------------------------------------------------

def _log_det_eval(v, p):
    sign, logdet = np.linalg.slogdet(_symmetrize(v[0]))
    return logdet if sign > 0 else -np.inf


def _log_det_graph(ctx, forms, params):
    # hypograph via the block [[diag(z), Z^T], [Z, sym(X)]] >= 0 with Z lower
    # triangular, z = diag(Z): then prod(z) <= det(X), so sum(log z) <= log det.
    # The lift takes X = L L^T and sets Z = L diag(L), z = diag(L)^2.
    (x,) = forms
    n = int(round(np.sqrt(x.size)))
    strict = n * (n - 1) // 2

    def chol():
        Xv = _symmetrize(ctx.value_of(x).reshape(n, n, order="F"))
        return np.linalg.cholesky(Xv)

    def z_val():
        L = chol()
        return np.diag(L) ** 2

    def zlow_val():
        Zfull = chol()
        Zfull = Zfull @ np.diag(np.diag(Zfull))
        return np.concatenate([Zfull[j + 1 :, j] for j in range(n)])

    z = ctx.aux(n, z_val)
    zlow = ctx.aux(strict, zlow_val) if strict else None
    u = ctx.aux(n, lambda: np.log(z_val()))

    # assemble vec of the 2n x 2n symmetric block matrix G
    m = 2 * n
    rows_z, cols_z = [], []
    for j in range(n):
        rows_z.append(j + j * m)                       # diag(z) block
        cols_z.append(j)
        rows_z.extend([(n + j) + j * m, j + (n + j) * m])  # Z's own diagonal
        cols_z.extend([j, j])
    G = z.left_mul(sp.csr_matrix((np.ones(3 * n), (rows_z, cols_z)),
                                 shape=(m * m, n)))
    if zlow is not None:
        rows_l, cols_l = [], []
        k = 0
        for j in range(n):
            for i in range(j + 1, n):
                # Z occupies the lower-left block; mirror into upper-right
                rows_l.extend([(n + i) + j * m, j + (n + i) * m])
                cols_l.extend([k, k])
                k += 1
        G = G + zlow.left_mul(sp.csr_matrix(
            (np.ones(2 * strict), (rows_l, cols_l)), shape=(m * m, strict)))
    # sym(X) occupies the lower-right block
    rows_x = [(n + i) + (n + j) * m for j in range(n) for i in range(n)]
    cols_x = [i + j * n for j in range(n) for i in range(n)]
    G = G + x.left_mul(sp.csr_matrix((np.ones(n * n), (rows_x, cols_x)),
                                     shape=(m * m, n * n)))
    ctx.psd(G, m)
    ctx.exp_batch(u, _ones(n), z)
    return u.left_mul(sp.csr_matrix(np.ones((1, n))))


def _pd_sample(rng, shapes, params):
    n = shapes[0].rows
    A = rng.normals(n, n) / np.sqrt(n)
    return [A @ A.T + 0.3 * np.eye(n)]


LOG_DET = AtomDescriptor(
    name="log_det", display="log_det",
    shape_out=_square_in,
    sign_out=lambda s, p: Sign.UNKNOWN,
    base_curvature=const(Curvature.CONCAVE),
    monotonicity=monos(_NONMONO),
    evaluate=_log_det_eval,
    graph=_log_det_graph,
    sample=_pd_sample,
)


def log_det(X):
    return AtomExpr(LOG_DET, [as_expression(X)])


# -- log_sum_exp -------------------------------------------------------------------

def _lse_eval(v, p):
    x = np.asarray(v[0], dtype=float).ravel()
    m = np.max(x)
    return m + np.log(np.sum(np.exp(x - m)))


def _lse_graph(ctx, forms, params):
    # t >= log sum exp(x)  <=>  sum_i e^(x_i - t) <= 1
    (x,) = forms
    n = x.size

    def t_val():
        return np.array([_lse_eval([ctx.value_of(x)], None)])

    t = ctx.aux(1, t_val)
    u = ctx.aux(n, lambda: np.exp(ctx.value_of(x) - t_val()[0]))
    ctx.exp_batch(x - t.broadcast_to(n), _ones(n), u)
    ctx.nonneg(LinForm.constant([1.0]) - u.left_mul(sp.csr_matrix(np.ones((1, n)))))
    return t


LOG_SUM_EXP = AtomDescriptor(
    name="log_sum_exp", display="log_sum_exp",
    shape_out=scalar_shape,
    sign_out=lambda s, p: Sign.UNKNOWN,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_INC),
    evaluate=_lse_eval,
    graph=_lse_graph,
)


def log_sum_exp(x):
    return AtomExpr(LOG_SUM_EXP, [as_expression(x)])


# -- max_entries / min_entries --------------------------------------------------------

def _max_entries_graph(ctx, forms, params):
    (x,) = forms
    t = ctx.aux(1, lambda: np.array([np.max(ctx.value_of(x))]))
    ctx.nonneg(t.broadcast_to(x.size) - x)
    return t


def _min_entries_graph(ctx, forms, params):
    (x,) = forms
    t = ctx.aux(1, lambda: np.array([np.min(ctx.value_of(x))]))
    ctx.nonneg(x - t.broadcast_to(x.size))
    return t


MAX_ENTRIES = AtomDescriptor(
    name="max_entries", display="max_entries",
    shape_out=scalar_shape,
    sign_out=lambda s, p: s[0],
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: np.max(v[0]),
    graph=_max_entries_graph,
)

MIN_ENTRIES = AtomDescriptor(
    name="min_entries", display="min_entries",
    shape_out=scalar_shape,
    sign_out=lambda s, p: s[0],
    base_curvature=const(Curvature.CONCAVE),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: np.min(v[0]),
    graph=_min_entries_graph,
)


def max_entries(x):
    return AtomExpr(MAX_ENTRIES, [as_expression(x)])


def min_entries(x):
    return AtomExpr(MIN_ENTRIES, [as_expression(x)])


# -- norms -----------------------------------------------------------------------------

def _norm_eval(v, p):
    x = np.asarray(v[0], dtype=float).ravel()
    kind = p["p"]
    if kind == 1:
        return np.sum(np.abs(x))
    if kind == 2:
        return np.linalg.norm(x)
    return np.max(np.abs(x))


def _norm_graph(ctx, forms, params):
    (x,) = forms
    kind = params["p"]
    n = x.size
    if kind == 1:
        w = ctx.aux(n, lambda: np.abs(ctx.value_of(x)))
        ctx.nonneg(w - x)
        ctx.nonneg(w + x)
        return w.left_mul(sp.csr_matrix(np.ones((1, n))))
    if kind == 2:
        t = ctx.aux(1, lambda: np.array([np.linalg.norm(ctx.value_of(x))]))
        ctx.soc([t, x])
        return t
    t = ctx.aux(1, lambda: np.array([np.max(np.abs(ctx.value_of(x)))]))
    tb = t.broadcast_to(n)
    ctx.nonneg(tb - x)
    ctx.nonneg(tb + x)
    return t


NORM = AtomDescriptor(
    name="cvxr_norm", display="norm",
    shape_out=scalar_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_SIGNDEP),
    evaluate=_norm_eval,
    graph=_norm_graph,
)


def cvxr_norm(x, p=2):
    if p in ("inf", "Inf", np.inf):
        p = np.inf
    elif p in ("fro", "F"):
        # Frobenius norm is the 2-norm of the vectorized argument, which is
        # how matrix arguments are treated for every order here
        p = 2
    if p not in (1, 2, np.inf):
        raise UnsupportedAtomError(
            f"norm order {p!r} is not supported; use 1, 2, inf, or fro")
    return AtomExpr(NORM, [as_expression(x)], {"p": p})


def p_norm(x, p=2):
    return cvxr_norm(x, p)


# -- quad_form ---------------------------------------------------------------------------

def _quad_form_shape(shapes, params):
    xs, ps = shapes
    if ps.rows != ps.cols:
        raise ShapeError("quad_form matrix must be square")
    if xs.cols != 1 or xs.rows != ps.rows:
        raise ShapeError("quad_form expects a column vector matching the matrix")
    return Shape(1, 1)


def _quad_form_sign(signs, params):
    mode = params["mode"]
    if mode == "psd":
        return Sign.NONNEG
    if mode == "nsd":
        return Sign.NONPOS
    c = params["c"].ravel()
    if np.all(c >= 0) or np.all(c <= 0):
        return signs[1]
    return Sign.UNKNOWN


def _quad_form_curv(signs, params):
    return {"psd": Curvature.CONVEX, "nsd": Curvature.CONCAVE,
            "const_x": Curvature.AFFINE}[params["mode"]]


def _quad_form_monos(signs, params):
    mode = params["mode"]
    if mode == "const_x":
        c = params["c"].ravel()
        outer = np.outer(c, c)
        if np.all(outer >= 0):
            return [_NONMONO, _INC]
        if np.all(outer <= 0):
            return [_NONMONO, _DEC]
        return [_NONMONO, _NONMONO]
    return [_NONMONO, _NONMONO]


def _quad_form_eval(v, p):
    x, P = v
    return float(x.ravel() @ _symmetrize(P) @ x.ravel())


def _quad_form_graph(ctx, forms, params):
    xf, pf = forms
    mode = params["mode"]
    if mode == "const_x":
        c = params["c"].ravel()
        row = sp.csr_matrix(np.outer(c, c).ravel(order="F")[None, :])
        return pf.left_mul(row)
    R = params["R"]  # symmetric square root of P (or of -P when nsd)
    n = R.shape[0]
    Rx = xf.left_mul(sp.csr_matrix(R))

    def t_val():
        return np.array([float(np.sum((R @ ctx.value_of(xf)) ** 2))])

    t = ctx.aux(1, t_val)
    one = LinForm.constant([1.0])
    ctx.soc([one + t, one - t, 2.0 * Rx])
    return t if mode == "psd" else -1.0 * t


QUAD_FORM = AtomDescriptor(
    name="quad_form", display="quad_form",
    shape_out=_quad_form_shape,
    sign_out=_quad_form_sign,
    base_curvature=_quad_form_curv,
    monotonicity=_quad_form_monos,
    evaluate=_quad_form_eval,
    graph=_quad_form_graph,
)

_PSD_CLASSIFY_RTOL = 1e-9


def quad_form(x, P):
    """x^T P x. Either x is constant (affine in P) or P is a constant
    definite matrix (convex when PSD, concave when NSD)."""
    x = as_expression(x)
    P = as_expression(P)
    if x.curvature == Curvature.CONSTANT:
        c = constant_value(x)
        return AtomExpr(QUAD_FORM, [x, P], {"mode": "const_x", "c": c})
    if P.curvature != Curvature.CONSTANT:
        raise DCPError("quad_form requires x or P to be constant")
    Pv = constant_value(P)
    if not np.allclose(Pv, Pv.T, atol=1e-9 * (1.0 + np.abs(Pv).max())):
        raise DCPError("quad_form matrix must be symmetric")
    Pv = _symmetrize(Pv)
    w, V = np.linalg.eigh(Pv)
    tol = _PSD_CLASSIFY_RTOL * max(1.0, np.abs(w).max())
    if w.min() >= -tol:
        R = V @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ V.T
        return AtomExpr(QUAD_FORM, [x, P], {"mode": "psd", "R": R})
    if w.max() <= tol:
        R = V @ np.diag(np.sqrt(np.clip(-w, 0.0, None))) @ V.T
        return AtomExpr(QUAD_FORM, [x, P], {"mode": "nsd", "R": R})
    raise DCPError("quad_form with an indefinite matrix is not DCP")


# -- quad_over_lin -------------------------------------------------------------------------

def _qol_shape(shapes, params):
    if not shapes[1].is_scalar:
        raise ShapeError("quad_over_lin denominator must be scalar")
    return Shape(1, 1)


def _qol_graph(ctx, forms, params):
    # ||(y - t, 2 vec(X))|| <= y + t encodes sum(X^2) <= t y with t, y >= 0
    xf, yf = forms

    def t_val():
        return np.array([float(np.sum(ctx.value_of(xf) ** 2)
                               / ctx.value_of(yf)[0])])

    t = ctx.aux(1, t_val)
    ctx.soc([yf + t, yf - t, 2.0 * xf])
    return t


QUAD_OVER_LIN = AtomDescriptor(
    name="quad_over_lin", display="quad_over_lin",
    shape_out=_qol_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_SIGNDEP, _DEC),
    evaluate=lambda v, p: float(np.sum(v[0] ** 2) / v[1].ravel()[0]),
    graph=_qol_graph,
    sample=lambda rng, shapes, p: [rng.normals(*shapes[0]),
                                   rng.uniforms(1, 1) * 3.0 + 0.1],
)


def quad_over_lin(x, y):
    return AtomExpr(QUAD_OVER_LIN, [as_expression(x), as_expression(y)])


# -- sum_squares ------------------------------------------------------------------------------

def _sum_squares_graph(ctx, forms, params):
    (x,) = forms

    def t_val():
        return np.array([float(np.sum(ctx.value_of(x) ** 2))])

    t = ctx.aux(1, t_val)
    one = LinForm.constant([1.0])
    ctx.soc([one + t, one - t, 2.0 * x])
    return t


SUM_SQUARES = AtomDescriptor(
    name="sum_squares", display="sum_squares",
    shape_out=scalar_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_SIGNDEP),
    evaluate=lambda v, p: float(np.sum(v[0] ** 2)),
    graph=_sum_squares_graph,
)


def sum_squares(x):
    return AtomExpr(SUM_SQUARES, [as_expression(x)])
