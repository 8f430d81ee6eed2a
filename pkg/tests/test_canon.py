import json

import numpy as np
import pytest
from scipy.optimize import linprog

import conedsl as cd
from conedsl import canon
from conedsl.errors import SchemaError
from conedsl.rng import SplitMix64


def small_lp():
    x = cd.Variable(2, name="x")
    prob = cd.Problem(cd.Minimize(cd.sum_entries(x)),
                      [x >= 1, cd.sum_entries(x) <= 5])
    return prob, x


def test_standard_form_row_structure():
    prob, _ = small_lp()
    cp, vmap = canon.canonicalize(prob)
    assert cp.cones.zero == 0
    assert cp.cones.nonneg == 3
    assert vmap.n == 2 and vmap.m == 3
    # rows encode Ax + s = b with s >= 0: x >= 1 becomes -x + s = -1
    assert np.allclose(cp.A.to_dense(), [[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]])
    assert np.allclose(cp.b, [-1.0, -1.0, 5.0])
    assert np.allclose(cp.c, [1.0, 1.0])


def test_cone_row_ordering():
    # zero rows first, then nonneg, soc, psd, exp
    x = cd.Variable(3, name="x")
    S = cd.Semidef(2)
    prob = cd.Problem(
        cd.Minimize(cd.sum_entries(x) + cd.matrix_trace(S) + cd.log_sum_exp(x)),
        [cd.sum_entries(x) == 1, x >= 0, cd.cvxr_norm(x, 2) <= 2.0])
    cp, _ = canon.canonicalize(prob)
    spec = cp.cones
    assert spec.zero >= 1 and spec.nonneg >= 3 and spec.soc and spec.psd == [2]
    assert spec.ep >= 1
    kinds = [kind for kind, _, _, _ in spec.blocks()]
    order = {"zero": 0, "nonneg": 1, "soc": 2, "psd": 3, "exp": 4}
    assert kinds == sorted(kinds, key=order.__getitem__)
    starts = [start for _, start, _, _ in spec.blocks()]
    stops = [stop for _, _, stop, _ in spec.blocks()]
    assert starts[0] == 0 and stops[-1] == vdim(spec)
    assert all(a == b for a, b in zip(stops[:-1], starts[1:]))


def vdim(spec):
    return spec.zero + spec.nonneg + sum(spec.soc) \
        + sum(n * (n + 1) // 2 for n in spec.psd) + 3 * spec.ep


def test_maximize_flips():
    x = cd.Variable(2, name="x")
    pmin = cd.Problem(cd.Minimize(cd.sum_entries(x)), [x >= 1])
    pmax = cd.Problem(cd.Maximize(-cd.sum_entries(x)), [x >= 1])
    cmin, _ = canon.canonicalize(pmin)
    cmax, _ = canon.canonicalize(pmax)
    assert not cmin.flipped and cmax.flipped
    assert np.allclose(cmin.c, cmax.c)


def test_constant_offset_folded():
    x = cd.Variable(name="x")
    prob = cd.Problem(cd.Minimize(x + 7.5), [x >= 0])
    cp, _ = canon.canonicalize(prob)
    assert np.isclose(cp.offset, 7.5)
    res = cd.solve(prob, eps_abs=1e-9, eps_rel=1e-9)
    assert np.isclose(res.value, 7.5, atol=1e-7)


def test_canonicalize_deterministic():
    texts = []
    for _ in range(3):
        prob, _ = small_lp()
        cp, vmap = canon.canonicalize(prob)
        texts.append(canon.export_json(cp, vmap))
    # same structure modulo fresh variable ids
    docs = [json.loads(t) for t in texts]
    for d in docs:
        for v in d["vars"]:
            v["id"] = "_"
        for c in d["constrs"]:
            c["id"] = "_"
    assert docs[0] == docs[1] == docs[2]


def test_export_schema_keys_and_round_trip():
    prob, _ = small_lp()
    cp, vmap = canon.canonicalize(prob)
    text = canon.export_json(cp, vmap)
    doc = json.loads(text)
    assert set(doc) == {"version", "n", "m", "c", "b", "offset", "flipped",
                        "A", "cones", "vars", "constrs"}
    assert doc["version"] == 1
    assert set(doc["A"]) == {"colptr", "rowidx", "vals"}
    assert set(doc["cones"]) == {"z", "l", "q", "s", "ep"}
    for v in doc["vars"]:
        assert set(v) == {"id", "offset", "rows", "cols", "psd"}
    for c in doc["constrs"]:
        assert set(c) == {"id", "row", "len", "cone"}
    cp2, vmap2 = canon.import_json(text)
    assert np.allclose(cp2.c, cp.c)
    assert np.allclose(cp2.b, cp.b)
    assert np.allclose(cp2.A.to_dense(), cp.A.to_dense())
    assert cp2.cones == cp.cones
    assert cp2.offset == cp.offset and cp2.flipped == cp.flipped
    # second export of the imported program is byte-identical
    assert canon.export_json(cp2, vmap2) == text


def test_export_byte_stability():
    prob, _ = small_lp()
    cp, vmap = canon.canonicalize(prob)
    assert canon.export_json(cp, vmap) == canon.export_json(cp, vmap)


@pytest.mark.parametrize("mutate,message", [
    (lambda d: d.pop("version"), "version"),
    (lambda d: d.update(version=2), "version"),
    (lambda d: d.pop("cones"), "cones"),
    (lambda d: d["A"].pop("vals"), "vals"),
    (lambda d: d["A"]["rowidx"].append(99), None),
    (lambda d: d.update(n=-1), None),
    (lambda d: d["cones"].update(q="bad"), None),
])
def test_import_rejects_malformed(mutate, message):
    prob, _ = small_lp()
    cp, vmap = canon.canonicalize(prob)
    doc = json.loads(canon.export_json(cp, vmap))
    mutate(doc)
    with pytest.raises(SchemaError) as exc:
        canon.import_json(json.dumps(doc))
    if message:
        assert message in str(exc.value)


def test_import_rejects_invalid_json():
    with pytest.raises(SchemaError):
        canon.import_json("{not json")


def lp_duals_against_scipy(seed):
    """Random feasible LP; compare optimum and duals with scipy linprog."""
    rng = SplitMix64(seed)
    m, n = 6, 4
    A = rng.normals(m, n)
    x0 = rng.uniforms(n) + 0.5
    b = A @ x0 + rng.uniforms(m) * 0.5 + 0.1
    c = rng.uniforms(n) + 0.2

    x = cd.Variable(n, name="x")
    cons = [A @ x <= b.reshape(-1, 1), x >= 0]
    prob = cd.Problem(cd.Minimize(c.reshape(1, -1) @ x), cons)
    res = cd.solve(prob, eps_abs=1e-10, eps_rel=1e-10)
    assert res.status == "optimal"

    ref = linprog(c, A_ub=A, b_ub=b, bounds=[(0, None)] * n, method="highs")
    assert ref.status == 0
    assert np.isclose(res.value, ref.fun, rtol=1e-6, atol=1e-7)
    # inequality multipliers match the HiGHS marginals (sign convention:
    # nonnegative multipliers for <=)
    lam = np.asarray(res.dual_of(cons[0])).ravel()
    assert np.allclose(lam, -np.asarray(ref.ineqlin.marginals), atol=1e-5)


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_lp_duals_match_scipy(seed):
    lp_duals_against_scipy(seed)


def test_equality_dual_sign_convention():
    # min x s.t. x == 3 has dual nu with c + nu = 0 in the Lagrangian
    # L = x + nu (x - 3); optimality gives nu = -1
    x = cd.Variable(name="x")
    con = x == 3.0
    prob = cd.Problem(cd.Minimize(x), [con])
    res = cd.solve(prob, eps_abs=1e-10, eps_rel=1e-10)
    assert np.isclose(res.value, 3.0, atol=1e-8)
    assert np.isclose(np.asarray(res.dual_of(con)).item(), -1.0, atol=1e-6)


def test_inequality_dual_sign_convention():
    # min x s.t. x >= 2: L = x - lam (x - 2), lam = 1 at the optimum
    x = cd.Variable(name="x")
    con = x >= 2.0
    prob = cd.Problem(cd.Minimize(x), [con])
    res = cd.solve(prob, eps_abs=1e-10, eps_rel=1e-10)
    assert np.isclose(np.asarray(res.dual_of(con)).item(), 1.0, atol=1e-6)


def test_maximize_dual_negation():
    # max -x s.t. x >= 2 reports the shadow price of the same constraint
    x = cd.Variable(name="x")
    con = x >= 2.0
    prob = cd.Problem(cd.Maximize(-x), [con])
    res = cd.solve(prob, eps_abs=1e-10, eps_rel=1e-10)
    assert np.isclose(res.value, -2.0, atol=1e-8)
    assert np.isclose(np.asarray(res.dual_of(con)).item(), -1.0, atol=1e-6)


def test_psd_variable_lowering():
    # Semidef variable contributes svec columns and one psd block
    S = cd.Semidef(3)
    prob = cd.Problem(cd.Minimize(cd.matrix_trace(S)), [S[0, 0] >= 1.0])
    cp, vmap = canon.canonicalize(prob)
    assert 3 in cp.cones.psd
    res = cd.solve(prob, eps_abs=1e-9, eps_rel=1e-9)
    assert res.status == "optimal"
    assert np.isclose(res.value, 1.0, atol=1e-6)
    Sval = res.value_of(S)
    assert Sval.shape == (3, 3)
    assert np.allclose(Sval, Sval.T, atol=1e-8)
    assert np.linalg.eigvalsh(Sval)[0] >= -1e-7


def test_get_problem_data_shapes():
    prob, _ = small_lp()
    data, vmap = canon.get_problem_data(prob)
    assert data["n"] == 2 and data["m"] == 3
    assert np.allclose(data["c"], [1.0, 1.0])
    assert np.allclose(data["b"], [-1.0, -1.0, 5.0])
    assert data["cones"]["l"] == 3
    assert vmap.n == 2 and vmap.m == 3


def test_recover_reads_solution_vector():
    prob, x = small_lp()
    cp, vmap = canon.canonicalize(prob)
    sol = cd.solve_cone_program(cp)
    vx = canon.recover(sol, vmap, x)
    assert vx.shape == (2, 1)
    assert np.allclose(vx, 1.0, atol=1e-6)


def test_lift_values_warm_reference():
    # canonicalize at a point: lift_values fixes nonlinear subexpression
    # values so a feasibility audit can be run on the lifted program
    x = cd.Variable(2, name="x")
    prob = cd.Problem(cd.Minimize(cd.sum_squares(x)), [x >= 1])
    cp, vmap = canon.canonicalize(prob)
    assert vmap.lift_point is None or isinstance(vmap.lift_point, dict)
