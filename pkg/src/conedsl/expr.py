"""Expression trees, curvature/sign inference, and constraint types.

Expressions are immutable DAGs of variables, constants, and atom
applications. Curvature is inferred by the standard composition rule:
f(g_1, ..., g_k) is convex when f is convex and each argument is affine,
or convex where f is increasing, or concave where f is decreasing; the
concave case is the mirror image. Everything that cannot be certified
this way is reported as unknown, never guessed.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import DCPError, ShapeError, UnsupportedAtomError


class Shape(NamedTuple):
    rows: int
    cols: int

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def is_scalar(self) -> bool:
        return self.rows == 1 and self.cols == 1


def make_shape(rows: int, cols: int = 1) -> Shape:
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1:
        raise ShapeError(f"shape dimensions must be >= 1, got ({rows}, {cols})")
    return Shape(rows, cols)


class Sign(Enum):
    ZERO = "zero"
    NONNEG = "nonneg"
    NONPOS = "nonpos"
    UNKNOWN = "unknown"


def sign_neg(a: Sign) -> Sign:
    if a == Sign.NONNEG:
        return Sign.NONPOS
    if a == Sign.NONPOS:
        return Sign.NONNEG
    return a


def sign_add(a: Sign, b: Sign) -> Sign:
    if a == Sign.ZERO:
        return b
    if b == Sign.ZERO:
        return a
    if a == b:
        return a
    return Sign.UNKNOWN


def sign_mul(a: Sign, b: Sign) -> Sign:
    if a == Sign.ZERO or b == Sign.ZERO:
        return Sign.ZERO
    if a == Sign.UNKNOWN or b == Sign.UNKNOWN:
        return Sign.UNKNOWN
    return Sign.NONNEG if a == b else Sign.NONPOS


def sign_join(a: Sign, b: Sign) -> Sign:
    """Least upper bound in the lattice zero <= nonneg/nonpos <= unknown."""
    if a == b:
        return a
    if a == Sign.ZERO:
        return b
    if b == Sign.ZERO:
        return a
    return Sign.UNKNOWN


def sign_of_values(values: np.ndarray) -> Sign:
    if np.all(values == 0):
        return Sign.ZERO
    if np.all(values >= 0):
        return Sign.NONNEG
    if np.all(values <= 0):
        return Sign.NONPOS
    return Sign.UNKNOWN


class Curvature(Enum):
    CONSTANT = "constant"
    AFFINE = "affine"
    CONVEX = "convex"
    CONCAVE = "concave"
    UNKNOWN = "unknown"


def is_convex(c: Curvature) -> bool:
    return c in (Curvature.CONSTANT, Curvature.AFFINE, Curvature.CONVEX)


def is_concave(c: Curvature) -> bool:
    return c in (Curvature.CONSTANT, Curvature.AFFINE, Curvature.CONCAVE)


def is_affine(c: Curvature) -> bool:
    return c in (Curvature.CONSTANT, Curvature.AFFINE)


class Monotonicity(Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    NONMONOTONE = "nonmonotone"
    SIGN_DEPENDENT = "sign-dependent"


def resolve_monotonicity(mono: Monotonicity, arg_sign: Sign) -> Monotonicity:
    """Sign-dependent atoms are increasing on nonnegative arguments and
    decreasing on nonpositive ones; with unknown sign no direction holds."""
    if mono != Monotonicity.SIGN_DEPENDENT:
        return mono
    if arg_sign in (Sign.NONNEG, Sign.ZERO):
        return Monotonicity.INCREASING
    if arg_sign == Sign.NONPOS:
        return Monotonicity.DECREASING
    return Monotonicity.NONMONOTONE


_var_counter = itertools.count()


class Expression:
    """Base class; all nodes carry a shape and cache sign/curvature."""

    __slots__ = ("shape", "_sign", "_curvature")

    # make numpy defer to the reflected operators below instead of
    # broadcasting into object arrays
    __array_ufunc__ = None
    __array_priority__ = 100.0

    def __init__(self, shape: Shape):
        self.shape = shape
        self._sign = None
        self._curvature = None

    # -- inference ---------------------------------------------------------

    @property
    def sign(self) -> Sign:
        if self._sign is None:
            self._sign = self._compute_sign()
        return self._sign

    @property
    def curvature(self) -> Curvature:
        if self._curvature is None:
            self._curvature = self._compute_curvature()
        return self._curvature

    def _compute_sign(self) -> Sign:
        raise NotImplementedError

    def _compute_curvature(self) -> Curvature:
        raise NotImplementedError

    @property
    def size(self) -> int:
        return self.shape.size

    @property
    def is_scalar(self) -> bool:
        return self.shape.is_scalar

    def label(self) -> str:
        raise NotImplementedError

    def value(self, env=None) -> np.ndarray:
        """Numeric value under an assignment of variable values."""
        raise NotImplementedError

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        from . import atoms
        return atoms.add(self, as_expression(other))

    def __radd__(self, other):
        from . import atoms
        return atoms.add(as_expression(other), self)

    def __sub__(self, other):
        from . import atoms
        return atoms.add(self, atoms.negate(as_expression(other)))

    def __rsub__(self, other):
        from . import atoms
        return atoms.add(as_expression(other), atoms.negate(self))

    def __neg__(self):
        from . import atoms
        return atoms.negate(self)

    def __mul__(self, other):
        from . import atoms
        return atoms.elementwise_product(self, as_expression(other))

    def __rmul__(self, other):
        from . import atoms
        return atoms.elementwise_product(as_expression(other), self)

    def __matmul__(self, other):
        from . import atoms
        return atoms.matrix_product(self, as_expression(other))

    def __rmatmul__(self, other):
        from . import atoms
        return atoms.matrix_product(as_expression(other), self)

    def __truediv__(self, other):
        from . import atoms
        return atoms.divide(self, other)

    def __pow__(self, p):
        from . import atoms
        return atoms.power(self, p)

    def __getitem__(self, key):
        from . import atoms
        return atoms.index(self, key)

    @property
    def T(self):
        from . import atoms
        return atoms.transpose(self)

    # -- constraints -------------------------------------------------------

    def __le__(self, other):
        return Constraint.inequality(self, as_expression(other))

    def __ge__(self, other):
        return Constraint.inequality(as_expression(other), self)

    # Strict inequalities are accepted and treated as their closures; the
    # feasible sets of interest here are closed.
    __lt__ = __le__
    __gt__ = __ge__

    def __eq__(self, other):  # type: ignore[override]
        return Constraint.equality(self, as_expression(other))

    def __ne__(self, other):  # type: ignore[override]
        raise DCPError("!= comparisons are not valid constraints")

    __hash__ = object.__hash__


class Variable(Expression):
    """Optimization variable. attr is 'free' or 'psd-symmetric'."""

    __slots__ = ("vid", "name", "attr")

    def __init__(self, rows: int = 1, cols: int = 1, name: str | None = None,
                 attr: str = "free"):
        super().__init__(make_shape(rows, cols))
        if attr not in ("free", "psd-symmetric"):
            raise ValueError(f"unknown variable attribute: {attr!r}")
        if attr == "psd-symmetric" and rows != cols:
            raise ShapeError("psd-symmetric variables must be square")
        self.vid = next(_var_counter)
        self.name = name
        self.attr = attr

    def _compute_sign(self) -> Sign:
        return Sign.UNKNOWN

    def _compute_curvature(self) -> Curvature:
        return Curvature.AFFINE

    def label(self) -> str:
        return f"var {self.name}" if self.name else f"var v{self.vid}"

    def value(self, env=None) -> np.ndarray:
        env = env or {}
        for key in (self, self.vid, self.name):
            if key is not None and key in env:
                val = np.asarray(env[key], dtype=float)
                return to_matrix(val, self.shape)
        raise KeyError(f"no value provided for {self.label()}")


def make_variable(shape, attr: str = "free", name: str | None = None) -> Variable:
    rows, cols = (shape, 1) if np.isscalar(shape) else shape
    return Variable(rows, cols, name=name, attr=attr)


def Semidef(n: int, name: str | None = None) -> Variable:
    return Variable(n, n, name=name, attr="psd-symmetric")


def to_matrix(val, shape: Shape) -> np.ndarray:
    """Coerce a scalar / 1-D / 2-D value to the expression's 2-D shape."""
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape != (shape.rows, shape.cols):
        raise ShapeError(f"value shape {arr.shape} does not match {tuple(shape)}")
    return arr


class ConstantExpr(Expression):
    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.ndim != 2:
            raise ShapeError("constants must be at most 2-dimensional")
        super().__init__(make_shape(*arr.shape))
        self.values = arr

    def _compute_sign(self) -> Sign:
        return sign_of_values(self.values)

    def _compute_curvature(self) -> Curvature:
        return Curvature.CONSTANT

    def label(self) -> str:
        if self.is_scalar:
            return f"const {self.values[0, 0]:g}"
        return "const"

    def value(self, env=None) -> np.ndarray:
        return self.values


def Constant(values) -> ConstantExpr:
    return ConstantExpr(values)


def as_expression(obj) -> Expression:
    if isinstance(obj, Expression):
        return obj
    if isinstance(obj, (int, float, np.integer, np.floating, list, tuple, np.ndarray)):
        return ConstantExpr(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as an expression")


def constant_value(e: Expression) -> np.ndarray:
    """Numeric value of a constant subtree."""
    if e.curvature != Curvature.CONSTANT:
        raise DCPError("expression is not constant")
    return e.value({})


class AtomExpr(Expression):
    """Application of an atom to argument expressions."""

    __slots__ = ("atom", "args", "params")

    def __init__(self, atom, args, params=None):
        self.atom = atom
        self.args = tuple(args)
        self.params = params or {}
        shape = atom.shape_out([a.shape for a in self.args], self.params)
        super().__init__(shape)

    def _compute_sign(self) -> Sign:
        return self.atom.sign_out([a.sign for a in self.args], self.params)

    def _compute_curvature(self) -> Curvature:
        if all(a.curvature == Curvature.CONSTANT for a in self.args):
            return Curvature.CONSTANT
        base = self.atom.base_curvature([a.sign for a in self.args], self.params)
        monos = [
            resolve_monotonicity(m, a.sign)
            for m, a in zip(self.atom.monotonicity([a.sign for a in self.args],
                                                   self.params), self.args)
        ]
        cvx_ok = base in (Curvature.AFFINE, Curvature.CONVEX) and all(
            _arg_ok(a.curvature, m, want_convex=True)
            for a, m in zip(self.args, monos)
        )
        ccv_ok = base in (Curvature.AFFINE, Curvature.CONCAVE) and all(
            _arg_ok(a.curvature, m, want_convex=False)
            for a, m in zip(self.args, monos)
        )
        if cvx_ok and ccv_ok:
            return Curvature.AFFINE
        if cvx_ok:
            return Curvature.CONVEX
        if ccv_ok:
            return Curvature.CONCAVE
        return Curvature.UNKNOWN

    def label(self) -> str:
        return self.atom.display

    def value(self, env=None) -> np.ndarray:
        vals = [a.value(env) for a in self.args]
        out = np.asarray(self.atom.evaluate(vals, self.params), dtype=float)
        return to_matrix(out, self.shape)


def _arg_ok(curv: Curvature, mono: Monotonicity, want_convex: bool) -> bool:
    if is_affine(curv):
        return True
    if want_convex:
        return (is_convex(curv) and mono == Monotonicity.INCREASING) or (
            is_concave(curv) and mono == Monotonicity.DECREASING)
    return (is_concave(curv) and mono == Monotonicity.INCREASING) or (
        is_convex(curv) and mono == Monotonicity.DECREASING)


def sign_of(e: Expression) -> Sign:
    return as_expression(e).sign


def curvature_of(e: Expression) -> Curvature:
    return as_expression(e).curvature


# -- constraints ------------------------------------------------------------

_constr_counter = itertools.count()


class Constraint:
    """Normalized constraint: body == 0, body <= 0 (elementwise), or body
    positive semidefinite. Curvature requirements are verified by dcp_check,
    not at construction time."""

    __slots__ = ("kind", "body", "cid")

    def __init__(self, kind: str, body: Expression):
        if kind not in ("eq", "ineq", "psd"):
            raise ValueError(f"unknown constraint kind {kind!r}")
        if kind == "psd" and body.shape.rows != body.shape.cols:
            raise ShapeError("psd constraints require a square expression")
        self.kind = kind
        self.body = body
        self.cid = f"c{next(_constr_counter)}"

    @staticmethod
    def equality(lhs: Expression, rhs: Expression) -> "Constraint":
        _check_conformable(lhs, rhs)
        return Constraint("eq", lhs - rhs)

    @staticmethod
    def inequality(lhs: Expression, rhs: Expression) -> "Constraint":
        """lhs <= rhs, stored as lhs - rhs <= 0."""
        _check_conformable(lhs, rhs)
        return Constraint("ineq", lhs - rhs)

    def __repr__(self):
        op = {"eq": "== 0", "ineq": "<= 0", "psd": ">> 0"}[self.kind]
        return f"<constraint {self.cid}: {self.body.label()} {op}>"

    def violation(self, env) -> float:
        """Worst-case infeasibility of the body at the given point."""
        val = self.body.value(env)
        if self.kind == "eq":
            return float(np.max(np.abs(val))) if val.size else 0.0
        if self.kind == "ineq":
            return float(max(np.max(val), 0.0)) if val.size else 0.0
        sym = 0.5 * (val + val.T)
        w = np.linalg.eigvalsh(sym)
        return float(max(-w[0], 0.0))


def _check_conformable(lhs: Expression, rhs: Expression):
    if lhs.shape != rhs.shape and not lhs.is_scalar and not rhs.is_scalar:
        raise ShapeError(
            f"constraint sides have incompatible shapes {tuple(lhs.shape)} and "
            f"{tuple(rhs.shape)}")


def psd(expr: Expression) -> Constraint:
    """Constrain a square affine expression to be positive semidefinite."""
    return Constraint("psd", as_expression(expr))


# -- DCP verification --------------------------------------------------------

@dataclass
class DCPReport:
    accepted: bool
    messages: list = field(default_factory=list)
    paths: list = field(default_factory=list)  # list of [(label, curvature), ...]

    def render(self) -> str:
        lines = ["dcp: accepted" if self.accepted else "dcp: rejected"]
        for msg, path in itertools.zip_longest(self.messages, self.paths):
            if msg:
                lines.append(msg)
            for depth, (label, curv) in enumerate(path or []):
                lines.append("  " * (depth + 1) + f"{label}: {curv.value}")
        return "\n".join(lines)


def _need_met(curv: Curvature, need: str) -> bool:
    if need == "affine":
        return is_affine(curv)
    if need == "convex":
        return is_convex(curv)
    return is_concave(curv)


def violation_path(e: Expression, need: str):
    """Root-to-leaf chain explaining why e fails the curvature requirement.

    Returns None when the requirement holds. At each atom the first child
    that breaks every admissible composition clause is followed.
    """
    if _need_met(e.curvature, need):
        return None
    path = [(e.label(), e.curvature)]
    if not isinstance(e, AtomExpr):
        return path
    base = e.atom.base_curvature([a.sign for a in e.args], e.params)
    viable = []
    if need in ("convex", "affine") and base in (Curvature.AFFINE, Curvature.CONVEX):
        viable.append(True)
    if need in ("concave", "affine") and base in (Curvature.AFFINE, Curvature.CONCAVE):
        viable.append(False)
    monos = [
        resolve_monotonicity(m, a.sign)
        for m, a in zip(e.atom.monotonicity([a.sign for a in e.args], e.params),
                        e.args)
    ]
    for want_convex in viable:
        for child, mono in zip(e.args, monos):
            if not _arg_ok(child.curvature, mono, want_convex):
                child_need = _child_requirement(mono, want_convex)
                sub = violation_path(child, child_need)
                if sub:
                    return path + sub
    return path


def _child_requirement(mono: Monotonicity, want_convex: bool) -> str:
    if mono == Monotonicity.INCREASING:
        return "convex" if want_convex else "concave"
    if mono == Monotonicity.DECREASING:
        return "concave" if want_convex else "convex"
    return "affine"


def dcp_check(problem) -> DCPReport:
    """Verify a problem against the composition rules.

    Accepts any object with .objective (having .sense in {'minimize',
    'maximize'} and .expr) and .constraints.
    """
    messages, paths = [], []
    obj = problem.objective
    if not obj.expr.is_scalar:
        messages.append("objective: must be scalar (1 x 1)")
        paths.append([(obj.expr.label(), obj.expr.curvature)])
    need = "convex" if obj.sense == "minimize" else "concave"
    path = violation_path(obj.expr, need)
    if path:
        messages.append(
            f"objective: {obj.sense} requires a {need} expression; found "
            f"{obj.expr.curvature.value}")
        paths.append(path)
    for con in problem.constraints:
        need = {"eq": "affine", "ineq": "convex", "psd": "affine"}[con.kind]
        path = violation_path(con.body, need)
        if path:
            messages.append(
                f"constraint {con.cid} ({con.kind}): requires a {need} body; "
                f"found {con.body.curvature.value}")
            paths.append(path)
    return DCPReport(accepted=not messages, messages=messages, paths=paths)
