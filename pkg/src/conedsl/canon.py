"""Lowering of DCP problems to cone-program standard form, and back.

Standard form:

    minimize    c'x
    subject to  A x + s = b,  s in K

with K a product of cones in the fixed row order: zero rows, nonnegative
rows, second-order blocks, semidefinite blocks (in scaled-lower-triangle
svec coordinates), exponential-cone triples. Objective sense flips and
constant offsets are tracked so user-facing values can be reported in the
original sense.

Each bucket keeps lowering-traversal order (objective first, then
constraints in declaration order); symmetry and cone-membership rows for
psd-symmetric variables are appended after all constraints. This makes
repeated canonicalizations of one problem byte-identical when exported.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import SchemaError, ShapeError
from .expr import (AtomExpr, ConstantExpr, Curvature, Expression, Variable,
                   _var_counter)
from .lin import LinForm, interleave_perm, svec_map


@dataclass
class ConeSpec:
    zero: int = 0
    nonneg: int = 0
    soc: list = field(default_factory=list)
    psd: list = field(default_factory=list)
    ep: int = 0

    @property
    def total_dim(self) -> int:
        return (self.zero + self.nonneg + sum(self.soc)
                + sum(s * (s + 1) // 2 for s in self.psd) + 3 * self.ep)

    def blocks(self):
        """Yield (kind, start, stop, meta) covering all rows in order."""
        r = 0
        if self.zero:
            yield ("zero", 0, self.zero, None)
            r = self.zero
        if self.nonneg:
            yield ("nonneg", r, r + self.nonneg, None)
            r += self.nonneg
        for q in self.soc:
            yield ("soc", r, r + q, None)
            r += q
        for s in self.psd:
            d = s * (s + 1) // 2
            yield ("psd", r, r + d, s)
            r += d
        for _ in range(self.ep):
            yield ("exp", r, r + 3, None)
            r += 3

    def validate(self, m: int):
        if any(q < 1 for q in self.soc) or any(s < 1 for s in self.psd):
            raise ShapeError("cone block sizes must be positive")
        if self.zero < 0 or self.nonneg < 0 or self.ep < 0:
            raise ShapeError("cone dimensions must be nonnegative")
        if self.total_dim != m:
            raise ShapeError(
                f"cone dimensions sum to {self.total_dim} but A has {m} rows")


@dataclass
class ConeProgram:
    c: np.ndarray
    A: linalg.SparseMatrix
    b: np.ndarray
    cones: ConeSpec
    offset: float = 0.0
    flipped: bool = False

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.ncols != self.c.size or self.A.nrows != self.b.size:
            raise ShapeError("A dimensions disagree with c / b")
        self.cones.validate(self.A.nrows)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.b.size


@dataclass
class VarRecord:
    key: str
    vid: int | None
    offset: int
    rows: int
    cols: int
    psd: bool

    @property
    def size(self) -> int:
        return self.rows * self.cols


@dataclass
class ConstrRecord:
    key: str
    cid: str | None
    row: int
    length: int
    cone: str  # zero | nonneg | psd
    rows_shape: tuple


@dataclass
class VariableMap:
    n: int
    m: int
    vars: list
    constrs: list
    lift_point: np.ndarray | None = None

    def var_by_vid(self, vid):
        for r in self.vars:
            if r.vid == vid:
                return r
        raise KeyError(f"variable id {vid} not in map")

    def var_by_key(self, key):
        for r in self.vars:
            if r.key == key:
                return r
        raise KeyError(f"variable '{key}' not in map")

    def constr_by_cid(self, cid):
        for r in self.constrs:
            if r.cid == cid:
                return r
        raise KeyError(f"constraint {cid} not in map")


class GraphContext:
    """Row collector handed to atom graph implementations.

    In lift mode (used by tests) every auxiliary variable's documented
    construction is evaluated numerically as it is created, which extends a
    user-variable assignment to a full feasible point of the lowering.
    """

    def __init__(self, lift_env=None):
        self.aux_records = []  # (vid, size)
        self.zero_forms = []
        self.nonneg_forms = []
        self.soc_forms = []      # one form per cone block
        self.psd_forms = []      # (svec form, side)
        self.exp_forms = []      # interleaved (x1,y1,z1,x2,...) forms
        self.zero_rows = 0
        self.nonneg_rows = 0
        self.lifting = lift_env is not None
        self.lift_env = lift_env if lift_env is not None else {}

    def aux(self, size: int, value_fn=None) -> LinForm:
        vid = next(_var_counter)
        self.aux_records.append((vid, size))
        if self.lifting:
            if value_fn is None:
                raise ValueError("aux created without a lift construction")
            val = np.asarray(value_fn(), dtype=float).ravel()
            if val.size != size:
                raise ShapeError("lift value has wrong length")
            self.lift_env[vid] = val
        return LinForm.for_var(vid, size)

    def value_of(self, form: LinForm) -> np.ndarray:
        return form.eval(self.lift_env)

    def zero(self, form: LinForm):
        self.zero_forms.append(form)
        self.zero_rows += form.size

    def nonneg(self, form: LinForm):
        self.nonneg_forms.append(form)
        self.nonneg_rows += form.size

    def soc(self, forms):
        """One second-order block; forms concatenate to (t, x) with t first."""
        self.soc_forms.append(LinForm.concat(forms))

    def soc_batch(self, forms):
        """len(forms) parallel streams of length n -> n blocks of that size."""
        streams = len(forms)
        n = forms[0].size
        stacked = LinForm.concat(forms)
        if n == 1:
            self.soc_forms.append(stacked)
            return
        interleaved = stacked.select(interleave_perm(streams, n))
        for i in range(n):
            self.soc_forms.append(interleaved.select(
                np.arange(i * streams, (i + 1) * streams)))

    def exp_batch(self, xf: LinForm, yf: LinForm, zf: LinForm):
        n = xf.size
        stacked = LinForm.concat([xf, yf, zf])
        self.exp_forms.append(stacked.select(interleave_perm(3, n)))

    def psd(self, vec_form: LinForm, side: int):
        if vec_form.size != side * side:
            raise ShapeError("psd block form must cover the full matrix")
        self.psd_forms.append((vec_form.left_mul(svec_map(side)), side))


class Lowerer:
    def __init__(self, ctx: GraphContext):
        self.ctx = ctx
        self.memo = {}
        self.user_vars = []   # Variables in first-encounter order
        self._seen = set()

    def lower(self, e: Expression) -> LinForm:
        key = id(e)
        if key in self.memo:
            return self.memo[key]
        if isinstance(e, Variable):
            if e.vid not in self._seen:
                self._seen.add(e.vid)
                self.user_vars.append(e)
            form = LinForm.for_var(e.vid, e.size)
        elif isinstance(e, ConstantExpr):
            form = LinForm.constant(e.values.ravel(order="F"))
        elif isinstance(e, AtomExpr):
            if e.curvature == Curvature.CONSTANT:
                form = LinForm.constant(e.value({}).ravel(order="F"))
            else:
                child_forms = [self.lower(a) for a in e.args]
                form = e.atom.graph(self.ctx, child_forms, e.params)
        else:
            raise TypeError(f"cannot lower {type(e).__name__}")
        self.memo[key] = form
        return form


def canonicalize(problem, lift_values=None):
    """Lower an accepted problem to (ConeProgram, VariableMap).

    lift_values, when given, maps user Variables (or vids) to numeric
    values; auxiliary values are then derived alongside lowering and the
    full point is stored on the returned map as `.lift_point`.
    """
    lift_env = None
    if lift_values is not None:
        lift_env = {}
        for k, v in lift_values.items():
            vid = k.vid if isinstance(k, Variable) else int(k)
            arr = np.asarray(v, dtype=float)
            if arr.ndim <= 1:
                arr = arr.reshape(-1, 1)
            lift_env[vid] = arr.ravel(order="F")
    ctx = GraphContext(lift_env)
    low = Lowerer(ctx)

    obj = problem.objective
    obj_form = low.lower(obj.expr)
    flipped = obj.sense == "maximize"
    if flipped:
        obj_form = -obj_form

    constr_entries = []  # (constraint, bucket, row_start_in_bucket, length, shape)
    for con in problem.constraints:
        body_form = low.lower(con.body)
        shape = (con.body.shape.rows, con.body.shape.cols)
        if con.kind == "eq":
            constr_entries.append((con, "zero", ctx.zero_rows, body_form.size, shape))
            ctx.zero(body_form)
        elif con.kind == "ineq":
            constr_entries.append((con, "nonneg", ctx.nonneg_rows,
                                   body_form.size, shape))
            ctx.nonneg(-body_form)
        else:  # psd
            d = shape[0] * (shape[0] + 1) // 2
            psd_rows_before = sum(s * (s + 1) // 2 for _, s in ctx.psd_forms)
            constr_entries.append((con, "psd", psd_rows_before, d, shape))
            ctx.psd(body_form, shape[0])

    # symmetry and cone membership for psd-symmetric variables
    for v in low.user_vars:
        if v.attr != "psd-symmetric":
            continue
        n = v.shape.rows
        form = LinForm.for_var(v.vid, v.size)
        sym_rows, sym_cols, sym_vals = [], [], []
        r = 0
        for j in range(n):
            for i in range(j + 1, n):
                sym_rows.extend([r, r])
                sym_cols.extend([i + j * n, j + i * n])
                sym_vals.extend([1.0, -1.0])
                r += 1
        if r:
            sym_map = sp.csr_matrix((sym_vals, (sym_rows, sym_cols)),
                                    shape=(r, n * n))
            ctx.zero(form.left_mul(sym_map))
        ctx.psd(form, n)

    # column layout: user variables first, then auxiliaries
    var_records = []
    offsets = {}
    col = 0
    names_seen = set()
    for i, v in enumerate(low.user_vars):
        key = v.name if (v.name and v.name not in names_seen) else f"v{i}"
        names_seen.add(key)
        var_records.append(VarRecord(key=key, vid=v.vid, offset=col,
                                     rows=v.shape.rows, cols=v.shape.cols,
                                     psd=(v.attr == "psd-symmetric")))
        offsets[v.vid] = col
        col += v.size
    aux_offsets = {}
    for vid, size in ctx.aux_records:
        offsets[vid] = col
        aux_offsets[vid] = (col, size)
        col += size
    n = col

    zero_rows = ctx.zero_rows
    nonneg_rows = ctx.nonneg_rows
    soc_sizes = [f.size for f in ctx.soc_forms]
    psd_sides = [s for _, s in ctx.psd_forms]
    ep = sum(f.size for f in ctx.exp_forms) // 3
    cones = ConeSpec(zero=zero_rows, nonneg=nonneg_rows, soc=soc_sizes,
                     psd=psd_sides, ep=ep)

    all_forms = (ctx.zero_forms + ctx.nonneg_forms + ctx.soc_forms
                 + [f for f, _ in ctx.psd_forms] + ctx.exp_forms)
    m = sum(f.size for f in all_forms)

    sizes = {rec.vid: rec.size for rec in var_records}
    sizes.update({vid: size for vid, (_, size) in aux_offsets.items()})

    # assemble A (= -coefficients) and b (= constants) column block by block
    if all_forms:
        G = LinForm.concat(all_forms)
        b = G.const.copy()
        blocks = [(-G.terms[vid] if vid in G.terms
                   else sp.csr_matrix((m, sizes[vid])))
                  for vid in sorted(offsets, key=offsets.get)]
        A = linalg.from_scipy(sp.hstack(blocks, format="csc") if blocks
                              else sp.csc_matrix((m, 0)))
    else:
        b = np.zeros(0)
        A = linalg.from_scipy(sp.csc_matrix((0, n)))

    c = np.zeros(n)
    for vid, mat in obj_form.terms.items():
        c[offsets[vid]: offsets[vid] + mat.shape[1]] = mat.toarray().ravel()
    offset = float(obj_form.const[0])

    # global row positions for user constraints
    bucket_base = {
        "zero": 0,
        "nonneg": zero_rows,
        "soc": zero_rows + nonneg_rows,
        "psd": zero_rows + nonneg_rows + sum(soc_sizes),
    }
    constr_records = []
    for i, (con, bucket, start, length, shape) in enumerate(constr_entries):
        constr_records.append(ConstrRecord(
            key=f"c{i}", cid=con.cid, row=bucket_base[bucket] + start,
            length=length, cone=bucket, rows_shape=shape))

    vmap = VariableMap(n=n, m=m, vars=var_records, constrs=constr_records)
    if ctx.lifting:
        z = np.zeros(n)
        for vid, off in offsets.items():
            if vid not in ctx.lift_env:
                raise KeyError("missing lift value for a variable")
            z[off: off + sizes[vid]] = ctx.lift_env[vid]
        vmap.lift_point = z
    cp = ConeProgram(c=c, A=A, b=b, cones=cones,
                     offset=offset, flipped=flipped)
    return cp, vmap


# -- solution recovery --------------------------------------------------------

def recover(solution, vmap: VariableMap, var) -> np.ndarray:
    """Extract one variable's value matrix from a solver solution."""
    if isinstance(var, Variable):
        rec = vmap.var_by_vid(var.vid)
    else:
        rec = vmap.var_by_key(str(var))
    flat = solution.x[rec.offset: rec.offset + rec.size]
    out = flat.reshape(rec.rows, rec.cols, order="F")
    if rec.psd:
        out = 0.5 * (out + out.T)
    return out


def recover_dual(solution, vmap: VariableMap, constraint, flipped=False):
    """Dual multiplier for a user constraint, shaped like its body.

    Conventions: with L = f + lambda' (a - b) + nu' h, inequality duals are
    nonnegative and equality duals unrestricted; for maximize problems the
    reported duals are negated.
    """
    cid = constraint.cid if hasattr(constraint, "cid") else str(constraint)
    try:
        rec = vmap.constr_by_cid(cid)
    except KeyError:
        rec = next((r for r in vmap.constrs if r.key == cid), None)
        if rec is None:
            raise
    y = solution.y[rec.row: rec.row + rec.length]
    if rec.cone == "psd":
        out = linalg.unsvec(y, rec.rows_shape[0])
    elif rec.cone == "zero":
        out = (-y).reshape(rec.rows_shape, order="F")
    else:
        out = y.reshape(rec.rows_shape, order="F")
    if flipped:
        out = -out
    return out


# -- JSON serialization -------------------------------------------------------

def export_json(cp: ConeProgram, vmap: VariableMap) -> str:
    doc = {
        "version": 1,
        "n": int(cp.n),
        "m": int(cp.m),
        "c": [float(v) for v in cp.c],
        "b": [float(v) for v in cp.b],
        "offset": float(cp.offset),
        "flipped": bool(cp.flipped),
        "A": {
            "colptr": [int(v) for v in cp.A.colptr],
            "rowidx": [int(v) for v in cp.A.rowidx],
            "vals": [float(v) for v in cp.A.vals],
        },
        "cones": {
            "z": int(cp.cones.zero),
            "l": int(cp.cones.nonneg),
            "q": [int(v) for v in cp.cones.soc],
            "s": [int(v) for v in cp.cones.psd],
            "ep": int(cp.cones.ep),
        },
        "vars": [
            {"id": r.key, "offset": int(r.offset), "rows": int(r.rows),
             "cols": int(r.cols), "psd": bool(r.psd)}
            for r in vmap.vars
        ],
        "constrs": [
            {"id": r.key, "row": int(r.row), "len": int(r.length),
             "cone": r.cone}
            for r in vmap.constrs
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


def get_problem_data(problem):
    """Canonicalize and return (standard-form dict, VariableMap)."""
    cp, vmap = canonicalize(problem)
    return json.loads(export_json(cp, vmap)), vmap


def _expect(cond, path, msg):
    if not cond:
        raise SchemaError(f"field '{path}': {msg}")


def _as_int(doc, path, minimum=None):
    v = doc
    if not isinstance(v, int) or isinstance(v, bool):
        raise SchemaError(f"field '{path}': expected integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise SchemaError(f"field '{path}': must be >= {minimum}")
    return v


def _num_list(v, path):
    _expect(isinstance(v, list), path, "expected a list of numbers")
    out = []
    for i, x in enumerate(v):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise SchemaError(f"field '{path}[{i}]': expected number")
        if not np.isfinite(x):
            raise SchemaError(f"field '{path}[{i}]': must be finite")
        out.append(float(x))
    return np.array(out, dtype=float)


def import_json(text: str):
    """Parse exported problem data back to (ConeProgram, VariableMap)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"malformed JSON at line {e.lineno}, column {e.colno}: "
                          f"{e.msg}") from e
    _expect(isinstance(doc, dict), "$", "expected a JSON object")
    required = {"version", "n", "m", "c", "b", "offset", "flipped", "A",
                "cones", "vars", "constrs"}
    missing = required - doc.keys()
    _expect(not missing, "$", f"missing keys: {sorted(missing)}")
    version = _as_int(doc["version"], "version")
    _expect(version == 1, "version", f"unsupported version {version}")
    n = _as_int(doc["n"], "n", 0)
    m = _as_int(doc["m"], "m", 0)
    c = _num_list(doc["c"], "c")
    _expect(c.size == n, "c", f"expected {n} entries, got {c.size}")
    b = _num_list(doc["b"], "b")
    _expect(b.size == m, "b", f"expected {m} entries, got {b.size}")
    _expect(isinstance(doc["offset"], (int, float))
            and not isinstance(doc["offset"], bool), "offset", "expected number")
    _expect(isinstance(doc["flipped"], bool), "flipped", "expected boolean")

    Adoc = doc["A"]
    _expect(isinstance(Adoc, dict), "A", "expected object")
    colptr = _num_list(Adoc.get("colptr", None), "A.colptr").astype(np.int64)
    rowidx = _num_list(Adoc.get("rowidx", None), "A.rowidx").astype(np.int64)
    vals = _num_list(Adoc.get("vals", None), "A.vals")
    _expect(colptr.size == n + 1, "A.colptr", f"expected {n + 1} entries")
    _expect(colptr[0] == 0, "A.colptr", "must start at 0")
    _expect(np.all(np.diff(colptr) >= 0), "A.colptr", "must be nondecreasing")
    _expect(colptr[-1] == vals.size, "A.colptr", "must end at nnz")
    _expect(rowidx.size == vals.size, "A.rowidx", "length must match vals")
    if rowidx.size:
        _expect(rowidx.min() >= 0 and rowidx.max() < m, "A.rowidx",
                "row index out of range")
    A = linalg.SparseMatrix(m, n, colptr, rowidx, vals)

    cdoc = doc["cones"]
    _expect(isinstance(cdoc, dict), "cones", "expected object")
    for key in ("z", "l", "q", "s", "ep"):
        _expect(key in cdoc, f"cones.{key}", "missing")
    cones = ConeSpec(
        zero=_as_int(cdoc["z"], "cones.z", 0),
        nonneg=_as_int(cdoc["l"], "cones.l", 0),
        soc=[_as_int(v, f"cones.q[{i}]", 1) for i, v in enumerate(cdoc["q"])],
        psd=[_as_int(v, f"cones.s[{i}]", 1) for i, v in enumerate(cdoc["s"])],
        ep=_as_int(cdoc["ep"], "cones.ep", 0),
    )
    try:
        cones.validate(m)
    except ShapeError as e:
        raise SchemaError(f"field 'cones': {e}") from e

    var_records = []
    _expect(isinstance(doc["vars"], list), "vars", "expected list")
    for i, rec in enumerate(doc["vars"]):
        path = f"vars[{i}]"
        _expect(isinstance(rec, dict), path, "expected object")
        for key in ("id", "offset", "rows", "cols", "psd"):
            _expect(key in rec, f"{path}.{key}", "missing")
        _expect(isinstance(rec["id"], str), f"{path}.id", "expected string")
        _expect(isinstance(rec["psd"], bool), f"{path}.psd", "expected boolean")
        off = _as_int(rec["offset"], f"{path}.offset", 0)
        rows = _as_int(rec["rows"], f"{path}.rows", 1)
        cols = _as_int(rec["cols"], f"{path}.cols", 1)
        _expect(off + rows * cols <= n, f"{path}.offset",
                "variable extends past n columns")
        var_records.append(VarRecord(key=rec["id"], vid=None, offset=off,
                                     rows=rows, cols=cols, psd=rec["psd"]))

    constr_records = []
    _expect(isinstance(doc["constrs"], list), "constrs", "expected list")
    for i, rec in enumerate(doc["constrs"]):
        path = f"constrs[{i}]"
        _expect(isinstance(rec, dict), path, "expected object")
        for key in ("id", "row", "len", "cone"):
            _expect(key in rec, f"{path}.{key}", "missing")
        _expect(rec["cone"] in ("zero", "nonneg", "psd"), f"{path}.cone",
                "expected one of zero/nonneg/psd")
        row = _as_int(rec["row"], f"{path}.row", 0)
        length = _as_int(rec["len"], f"{path}.len", 1)
        _expect(row + length <= m, f"{path}.row", "rows extend past m")
        if rec["cone"] == "psd":
            side = int((np.sqrt(8 * length + 1) - 1) / 2)
            shape = (side, side)
        else:
            shape = (length, 1)
        constr_records.append(ConstrRecord(key=rec["id"], cid=None, row=row,
                                           length=length, cone=rec["cone"],
                                           rows_shape=shape))

    cp = ConeProgram(c=c, A=A, b=b, cones=cones,
                     offset=float(doc["offset"]), flipped=doc["flipped"])
    vmap = VariableMap(n=n, m=m, vars=var_records, constrs=constr_records)
    return cp, vmap
