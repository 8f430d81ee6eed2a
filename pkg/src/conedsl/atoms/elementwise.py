"""Elementwise atoms: evaluation rules, DCP metadata, cone graphs.

Every graph implementation documents its auxiliary construction; the lift
callbacks reproduce exactly that construction numerically so tests can
check feasibility of the lowered constraints without a solve.
"""
from __future__ import annotations

import numpy as np

from ..errors import DCPError, ShapeError, UnsupportedAtomError
from ..expr import (AtomExpr, Curvature, Monotonicity, Sign, as_expression,
                    constant_value, sign_join)
from ..lin import LinForm
from .base import AtomDescriptor, const, monos, same_shape

_INC = Monotonicity.INCREASING
_DEC = Monotonicity.DECREASING
_NONMONO = Monotonicity.NONMONOTONE
_SIGNDEP = Monotonicity.SIGN_DEPENDENT


def _ones_form(n):
    return LinForm.constant(np.ones(n))


# -- abs ----------------------------------------------------------------------

def _abs_graph(ctx, forms, params):
    (x,) = forms
    t = ctx.aux(x.size, lambda: np.abs(ctx.value_of(x)))
    ctx.nonneg(t - x)
    ctx.nonneg(t + x)
    return t


ABS = AtomDescriptor(
    name="abs", display="abs",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_SIGNDEP),
    evaluate=lambda v, p: np.abs(v[0]),
    graph=_abs_graph,
)


def abs_atom(x):
    return AtomExpr(ABS, [as_expression(x)])


# -- entr: -x log x -----------------------------------------------------------

def _entr_eval(v, p):
    x = v[0]
    out = np.full_like(x, -np.inf)
    out[x == 0] = 0.0
    pos = x > 0
    out[pos] = -x[pos] * np.log(x[pos])
    return out


def _entr_graph(ctx, forms, params):
    # hypograph: t <= -x log x  <=>  (t, x, 1) in the exponential cone
    (x,) = forms
    t = ctx.aux(x.size, lambda: _entr_eval([ctx.value_of(x)], None))
    ctx.exp_batch(t, x, _ones_form(x.size))
    return t


ENTR = AtomDescriptor(
    name="entr", display="entr",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.UNKNOWN,
    base_curvature=const(Curvature.CONCAVE),
    monotonicity=monos(_NONMONO),
    evaluate=_entr_eval,
    graph=_entr_graph,
    sample=lambda rng, shapes, p: [rng.uniforms(*shapes[0]) * 2.5 + 1e-3],
)


def entr(x):
    return AtomExpr(ENTR, [as_expression(x)])


# -- exp ------------------------------------------------------------------------

def _exp_graph(ctx, forms, params):
    (x,) = forms
    t = ctx.aux(x.size, lambda: np.exp(ctx.value_of(x)))
    ctx.exp_batch(x, _ones_form(x.size), t)
    return t


EXP = AtomDescriptor(
    name="exp", display="exp",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: np.exp(v[0]),
    graph=_exp_graph,
)


def exp(x):
    return AtomExpr(EXP, [as_expression(x)])


# -- huber ---------------------------------------------------------------------

def _huber_eval(v, p):
    x, M = v[0], p["M"]
    a = np.abs(x)
    return np.where(a <= M, x * x, 2.0 * M * a - M * M)


def _huber_graph(ctx, forms, params):
    # huber(x) = min { q^2 + 2 M n : |x| <= q + n, n >= 0 }; the square is
    # lowered through its rotated-cone form w >= q^2.
    (x,) = forms
    M = params["M"]
    n = x.size

    def q_val():
        return np.clip(ctx.value_of(x), -M, M)

    def n_val():
        xv = ctx.value_of(x)
        return np.abs(xv) - np.abs(np.clip(xv, -M, M))

    q = ctx.aux(n, q_val)
    nn = ctx.aux(n, n_val)
    w = ctx.aux(n, lambda: q_val() ** 2)
    ctx.nonneg(nn)
    ctx.nonneg(q + nn - x)
    ctx.nonneg(q + nn + x)
    ctx.soc_batch([_ones_form(n) + w, _ones_form(n) - w, 2.0 * q])
    return w + 2.0 * M * nn


HUBER = AtomDescriptor(
    name="huber", display="huber",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_SIGNDEP),
    evaluate=_huber_eval,
    graph=_huber_graph,
)


def huber(x, M=1.0):
    M = float(constant_value(as_expression(M)).item()) if not np.isscalar(M) else float(M)
    if M <= 0:
        raise DCPError("huber threshold M must be a positive constant")
    return AtomExpr(HUBER, [as_expression(x)], {"M": M})


# -- inv_pos: 1/x on x > 0 ------------------------------------------------------

def _inv_pos_graph(ctx, forms, params):
    # t x >= 1, t, x >= 0 as the cone ||(x - t, 2)|| <= x + t
    (x,) = forms
    t = ctx.aux(x.size, lambda: 1.0 / ctx.value_of(x))
    ctx.soc_batch([x + t, x - t, LinForm.constant(np.full(x.size, 2.0))])
    return t


INV_POS = AtomDescriptor(
    name="inv_pos", display="inv_pos",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_DEC),
    evaluate=lambda v, p: 1.0 / v[0],
    graph=_inv_pos_graph,
    sample=lambda rng, shapes, p: [rng.uniforms(*shapes[0]) * 3.0 + 0.05],
)


def inv_pos(x):
    return AtomExpr(INV_POS, [as_expression(x)])


# -- log -------------------------------------------------------------------------

def _log_graph(ctx, forms, params):
    (x,) = forms
    t = ctx.aux(x.size, lambda: np.log(ctx.value_of(x)))
    ctx.exp_batch(t, _ones_form(x.size), x)
    return t


LOG = AtomDescriptor(
    name="log", display="log",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.UNKNOWN,
    base_curvature=const(Curvature.CONCAVE),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: np.log(v[0]),
    graph=_log_graph,
    sample=lambda rng, shapes, p: [rng.uniforms(*shapes[0]) * 3.0 + 0.05],
)


def log(x):
    return AtomExpr(LOG, [as_expression(x)])


# -- logistic: log(1 + e^x) ------------------------------------------------------

def _logistic_graph(ctx, forms, params):
    # t >= log(1 + e^x)  <=>  e^(x - t) + e^(-t) <= 1
    (x,) = forms
    n = x.size

    def t_val():
        return np.logaddexp(0.0, ctx.value_of(x))

    t = ctx.aux(n, t_val)
    u = ctx.aux(n, lambda: np.exp(ctx.value_of(x) - t_val()))
    v = ctx.aux(n, lambda: np.exp(-t_val()))
    ctx.exp_batch(x - t, _ones_form(n), u)
    ctx.exp_batch(-1.0 * t, _ones_form(n), v)
    ctx.nonneg(_ones_form(n) - u - v)
    return t


LOGISTIC = AtomDescriptor(
    name="logistic", display="logistic",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: np.logaddexp(0.0, v[0]),
    graph=_logistic_graph,
)


def logistic(x):
    return AtomExpr(LOGISTIC, [as_expression(x)])


# -- max_elemwise / min_elemwise ---------------------------------------------------

def _max_elem_sign(signs, params):
    if all(s == Sign.ZERO for s in signs):
        return Sign.ZERO
    if any(s in (Sign.ZERO, Sign.NONNEG) for s in signs):
        return Sign.NONNEG
    if all(s == Sign.NONPOS for s in signs):
        return Sign.NONPOS
    return Sign.UNKNOWN


def _min_elem_sign(signs, params):
    if all(s == Sign.ZERO for s in signs):
        return Sign.ZERO
    if any(s in (Sign.ZERO, Sign.NONPOS) for s in signs):
        return Sign.NONPOS
    if all(s == Sign.NONNEG for s in signs):
        return Sign.NONNEG
    return Sign.UNKNOWN


def _max_elem_graph(ctx, forms, params):
    n = max(f.size for f in forms)
    forms = [f.broadcast_to(n) for f in forms]

    def t_val():
        return np.max([ctx.value_of(f) for f in forms], axis=0)

    t = ctx.aux(n, t_val)
    for f in forms:
        ctx.nonneg(t - f)
    return t


def _min_elem_graph(ctx, forms, params):
    n = max(f.size for f in forms)
    forms = [f.broadcast_to(n) for f in forms]

    def t_val():
        return np.min([ctx.value_of(f) for f in forms], axis=0)

    t = ctx.aux(n, t_val)
    for f in forms:
        ctx.nonneg(f - t)
    return t


def _variadic_monos(m):
    return lambda signs, params: [m] * len(signs)


MAX_ELEMWISE = AtomDescriptor(
    name="max_elemwise", display="max_elemwise",
    shape_out=same_shape,
    sign_out=_max_elem_sign,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=_variadic_monos(_INC),
    evaluate=lambda v, p: np.max(np.broadcast_arrays(*v), axis=0),
    graph=_max_elem_graph,
)

MIN_ELEMWISE = AtomDescriptor(
    name="min_elemwise", display="min_elemwise",
    shape_out=same_shape,
    sign_out=_min_elem_sign,
    base_curvature=const(Curvature.CONCAVE),
    monotonicity=_variadic_monos(_INC),
    evaluate=lambda v, p: np.min(np.broadcast_arrays(*v), axis=0),
    graph=_min_elem_graph,
)


def max_elemwise(*args):
    if len(args) < 2:
        raise ShapeError("max_elemwise needs at least two arguments")
    return AtomExpr(MAX_ELEMWISE, [as_expression(a) for a in args])


def min_elemwise(*args):
    if len(args) < 2:
        raise ShapeError("min_elemwise needs at least two arguments")
    return AtomExpr(MIN_ELEMWISE, [as_expression(a) for a in args])


# -- pos / neg: positive and negative parts -----------------------------------------

def _pos_graph(ctx, forms, params):
    (x,) = forms
    t = ctx.aux(x.size, lambda: np.maximum(ctx.value_of(x), 0.0))
    ctx.nonneg(t - x)
    ctx.nonneg(t)
    return t


def _neg_graph(ctx, forms, params):
    (x,) = forms
    t = ctx.aux(x.size, lambda: np.maximum(-ctx.value_of(x), 0.0))
    ctx.nonneg(t + x)
    ctx.nonneg(t)
    return t


POS = AtomDescriptor(
    name="pos", display="pos",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: np.maximum(v[0], 0.0),
    graph=_pos_graph,
)

NEG = AtomDescriptor(
    name="neg", display="neg",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_DEC),
    evaluate=lambda v, p: np.maximum(-v[0], 0.0),
    graph=_neg_graph,
)


def pos(x):
    return AtomExpr(POS, [as_expression(x)])


def neg(x):
    return AtomExpr(NEG, [as_expression(x)])


# -- sqrt -----------------------------------------------------------------------

def _sqrt_graph(ctx, forms, params):
    # hypograph: t <= s with s^2 <= x, via ||(x - 1, 2 s)|| <= x + 1
    (x,) = forms
    n = x.size
    s = ctx.aux(n, lambda: np.sqrt(ctx.value_of(x)))
    t = ctx.aux(n, lambda: np.sqrt(ctx.value_of(x)))
    one = _ones_form(n)
    ctx.soc_batch([x + one, x - one, 2.0 * s])
    ctx.nonneg(s - t)
    return t


SQRT = AtomDescriptor(
    name="sqrt", display="sqrt",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONCAVE),
    monotonicity=monos(_INC),
    evaluate=lambda v, p: np.sqrt(v[0]),
    graph=_sqrt_graph,
    sample=lambda rng, shapes, p: [rng.uniforms(*shapes[0]) * 4.0],
)


def sqrt(x):
    return AtomExpr(SQRT, [as_expression(x)])


# -- square / power --------------------------------------------------------------

def _square_graph(ctx, forms, params):
    (x,) = forms
    n = x.size
    t = ctx.aux(n, lambda: ctx.value_of(x) ** 2)
    one = _ones_form(n)
    ctx.soc_batch([one + t, one - t, 2.0 * x])
    return t


SQUARE = AtomDescriptor(
    name="square", display="square",
    shape_out=same_shape,
    sign_out=lambda s, p: Sign.NONNEG,
    base_curvature=const(Curvature.CONVEX),
    monotonicity=monos(_SIGNDEP),
    evaluate=lambda v, p: v[0] ** 2,
    graph=_square_graph,
)


def square(x):
    return AtomExpr(SQUARE, [as_expression(x)])


def power(x, p):
    if p == 2:
        return square(x)
    raise UnsupportedAtomError(
        f"power exponent {p!r} is not supported; only p = 2 is available")
