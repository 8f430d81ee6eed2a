"""Embedded first-order conic solver.

ADMM applied to the homogeneous self-dual embedding of

    min c'x  s.t.  Ax + s = b,  s in K

so a single iteration stream yields either an optimal primal-dual pair or
an infeasibility certificate.  The embedding variable is u = (x, y, tau)
with companion v = (0, s, kappa); each iteration solves one quasidefinite
linear system (factorized once) and projects onto R^n x K* x R+.

Deterministic: no random state anywhere in the loop.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import cones as cone_ops
from .canon import ConeProgram
from .errors import InputError, NumericError
from .linalg import QuasidefSolver

_RUIZ_SWEEPS = 10
_MIN_SCALE = 1e-6
_TAU_FLOOR = 1e-9
_ACCEL_SAFEGUARD = 5.0
_ACCEL_NORM_FLOOR = 1e-3


@dataclass
class SolverSettings:
    max_iters: int = 50000
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    alpha: float = 1.5
    scaling: bool = True
    check_interval: int = 25
    deterministic: bool = True
    accel_memory: int = 10

    def __post_init__(self):
        if self.max_iters < 1:
            raise InputError("max_iters must be positive")
        if not (0.0 < self.alpha < 2.0):
            raise InputError("relaxation alpha must lie in (0, 2)")
        if self.eps_abs < 0 or self.eps_rel < 0:
            raise InputError("tolerances must be nonnegative")
        if self.check_interval < 1:
            raise InputError("check_interval must be positive")
        if self.accel_memory < 0:
            raise InputError("accel_memory must be nonnegative")


@dataclass
class Solution:
    status: str
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective: float
    residuals: tuple
    iterations: int
    solve_time: float
    history: list = field(default_factory=list)
    certificate: dict | None = None


def _block_ranges(cones):
    """Row ranges that must share a uniform scaling (SOC/PSD/EXP blocks)."""
    return [(start, stop) for kind, start, stop, _ in cones.blocks()
            if kind in ("soc", "psd", "exp")]


def _equilibrate(A: sp.csc_matrix, cones, enabled: bool):
    """Ruiz-style alternating row/col scaling; returns (d, e) with the
    scaled matrix being diag(d) A diag(e).  Rows inside a single SOC, PSD
    or EXP block receive one common factor (geometric mean) so cone
    membership is preserved under the scaling."""
    m, n = A.shape
    d = np.ones(m)
    e = np.ones(n)
    if not enabled or A.nnz == 0:
        return d, e
    coo = A.tocoo()
    rows, cols, vals = coo.row, coo.col, np.abs(coo.data)
    groups = _block_ranges(cones)
    for _ in range(_RUIZ_SWEEPS):
        cur = vals * d[rows] * e[cols]
        rmax = np.zeros(m)
        np.maximum.at(rmax, rows, cur)
        rmax[rmax == 0] = 1.0
        for start, stop in groups:
            rmax[start:stop] = np.exp(np.mean(np.log(rmax[start:stop])))
        d /= np.sqrt(rmax)
        cur = vals * d[rows] * e[cols]
        cmax = np.zeros(n)
        np.maximum.at(cmax, cols, cur)
        cmax[cmax == 0] = 1.0
        e /= np.sqrt(cmax)
    return d, e


def _trivial_no_vars(cp, settings, t0):
    s = cp.b.copy()
    tol = settings.eps_abs + settings.eps_rel * np.linalg.norm(cp.b)
    if cone_ops.in_cone(cp.cones, s, tol=max(tol, 1e-12)):
        return Solution("optimal", np.zeros(0), np.zeros(cp.m), s, 0.0,
                        (0.0, 0.0, 0.0), 0, time.perf_counter() - t0)
    proj = cone_ops.project(cp.cones, cp.b)
    ycert = proj - cp.b
    ycert /= max(np.dot(ycert, ycert), 1e-300)
    cert = {"kind": "primal", "b_dot_y": float(cp.b @ ycert),
            "residual": 0.0}
    return Solution("primal_infeasible", np.full(0, np.nan), ycert,
                    np.full(cp.m, np.nan), float("nan"),
                    (float("nan"),) * 3, 0, time.perf_counter() - t0,
                    certificate=cert)


def _trivial_no_rows(cp, settings, t0):
    nc = np.linalg.norm(cp.c)
    if nc <= settings.eps_abs:
        return Solution("optimal", np.zeros(cp.n), np.zeros(0), np.zeros(0),
                        0.0, (0.0, 0.0, 0.0), 0, time.perf_counter() - t0)
    xcert = -cp.c / (nc * nc)
    cert = {"kind": "dual", "c_dot_x": float(cp.c @ xcert), "residual": 0.0}
    return Solution("dual_infeasible", xcert, np.full(0, np.nan),
                    np.zeros(0), float("nan"), (float("nan"),) * 3, 0,
                    time.perf_counter() - t0, certificate=cert)


def solve_cone_program(cp: ConeProgram, settings: SolverSettings | None = None) -> Solution:
    if settings is None:
        settings = SolverSettings()
    if not isinstance(cp, ConeProgram):
        raise InputError("solve_cone_program expects a ConeProgram")
    t0 = time.perf_counter()
    n, m = cp.n, cp.m
    if n == 0:
        return _trivial_no_vars(cp, settings, t0)
    if m == 0:
        return _trivial_no_rows(cp, settings, t0)

    A0 = cp.A.to_scipy()
    d, e = _equilibrate(A0, cp.cones, settings.scaling)
    As = sp.diags(d) @ A0 @ sp.diags(e) if settings.scaling else A0
    As = sp.csc_matrix(As)
    bs = d * cp.b
    cs = e * cp.c
    sigma = 1.0 / max(np.linalg.norm(bs), _MIN_SCALE)
    rho = 1.0 / max(np.linalg.norm(cs), _MIN_SCALE)
    bs = sigma * bs
    cs = rho * cs

    kkt = sp.bmat([[sp.eye(n), As.T], [As, -sp.eye(m)]], format="csc")
    fac = QuasidefSolver(kkt)
    g = fac.solve(np.concatenate([cs, -bs]))
    gx, gy = g[:n], g[n:]
    denom = 1.0 + cs @ gx + bs @ gy
    if not np.isfinite(denom) or denom <= 0:
        raise NumericError("homogeneous embedding system is singular")

    def embed_solve(w):
        wx, wy, wt = w[:n], w[n:n + m], w[-1]
        h = fac.solve(np.concatenate([wx, -wy]))
        hx, hy = h[:n], h[n:]
        zt = (wt + cs @ hx + bs @ hy) / denom
        return np.concatenate([hx - zt * gx, hy - zt * gy, [zt]])

    norm_b = np.linalg.norm(cp.b)
    norm_c = np.linalg.norm(cp.c)
    alpha = settings.alpha
    history = []
    status = "max_iters_reached"
    certificate = None
    x = y = s_vec = None
    residuals = (float("nan"),) * 3
    it = 0

    def unscale(uu, vv):
        tau = max(uu[-1], _TAU_FLOOR)
        xv = e * uu[:n] / (sigma * tau)
        yv = d * uu[n:n + m] / (rho * tau)
        sv = (vv[n:n + m] / d) / (sigma * tau)
        return xv, yv, sv

    def proj(wv):
        out = np.empty_like(wv)
        out[:n] = wv[:n]
        out[n:n + m] = cone_ops.project_dual(cp.cones, wv[n:n + m])
        out[-1] = max(wv[-1], 0.0)
        return out

    # First step from the conventional start (u, v) = (e_tau, e_kappa).
    # From then on the pair is projection-consistent, so the iteration is a
    # fixed-point map on the single vector w = u - v, with u = proj(w) and
    # v = u - w; this is the form the Anderson accelerator works on.
    u = np.zeros(n + m + 1)
    v = np.zeros(n + m + 1)
    u[-1] = 1.0
    v[-1] = 1.0
    w = alpha * embed_solve(u + v) + (1.0 - alpha) * u - v

    mem = settings.accel_memory
    accel_on = mem > 0
    w_scale = float(np.linalg.norm(w))
    dws, dgs = [], []            # recent iterate / residual differences
    prev_w = prev_g = None
    g_floor = np.inf
    last_gnorm = float("nan")

    for it in range(1, settings.max_iters + 1):
        u = proj(w)
        v = u - w

        if it % settings.check_interval == 0 or it == settings.max_iters:
            tau = u[-1]
            if tau > _TAU_FLOOR:
                xv, yv, sv = unscale(u, v)
                pres = np.linalg.norm(A0 @ xv + sv - cp.b)
                dres = np.linalg.norm(A0.T @ yv + cp.c)
                ctx = cp.c @ xv
                bty = cp.b @ yv
                gap = abs(ctx + bty)
                history.append({"iter": it, "pres": pres, "dres": dres,
                                "gap": gap, "tau": tau, "kappa": v[-1],
                                "fp_res": last_gnorm})
                if (pres <= settings.eps_abs + settings.eps_rel * norm_b
                        and dres <= settings.eps_abs + settings.eps_rel * norm_c
                        and gap <= settings.eps_abs
                        + settings.eps_rel * (abs(ctx) + abs(bty))):
                    status = "optimal"
                    x, y, s_vec = xv, yv, sv
                    residuals = (pres, dres, gap)
                    break
            else:
                history.append({"iter": it, "pres": float("nan"),
                                "dres": float("nan"), "gap": float("nan"),
                                "tau": tau, "kappa": v[-1]})

            # certificate checks use the raw directions (no tau division)
            ydir = d * u[n:n + m]
            bty_dir = cp.b @ ydir
            if bty_dir < 0 and norm_b > 0:
                res = np.linalg.norm(A0.T @ ydir)
                if res <= settings.eps_abs * (-bty_dir) / norm_b:
                    ycert = ydir / (-bty_dir)
                    status = "primal_infeasible"
                    certificate = {
                        "kind": "primal", "b_dot_y": -1.0,
                        "residual": float(np.linalg.norm(A0.T @ ycert)),
                    }
                    x = np.full(n, np.nan)
                    s_vec = np.full(m, np.nan)
                    y = ycert
                    break
            xdir = e * u[:n]
            sdir = v[n:n + m] / d
            ctx_dir = cp.c @ xdir
            if ctx_dir < 0 and norm_c > 0:
                res = np.linalg.norm(A0 @ xdir + sdir)
                if res <= settings.eps_abs * (-ctx_dir) / norm_c:
                    scale = 1.0 / (-ctx_dir)
                    status = "dual_infeasible"
                    certificate = {
                        "kind": "dual", "c_dot_x": -1.0,
                        "residual": float(res * scale),
                    }
                    x = xdir * scale
                    s_vec = sdir * scale
                    y = np.full(m, np.nan)
                    break

        w_plain = w + alpha * (embed_solve(2.0 * u - w) - u)
        if not accel_on:
            w = w_plain
            continue

        # Anderson step on the fixed-point residual g = F(w) - w, with a
        # safeguard: when the residual has grown well past the best value
        # since the last restart, drop the memory and take the plain step.
        g = w_plain - w
        gnorm = float(np.linalg.norm(g))
        last_gnorm = gnorm
        if prev_w is not None:
            dws.append(w - prev_w)
            dgs.append(g - prev_g)
            if len(dws) > mem:
                dws.pop(0)
                dgs.pop(0)
        prev_w, prev_g = w, g
        if not np.isfinite(gnorm) or gnorm > _ACCEL_SAFEGUARD * g_floor:
            dws.clear()
            dgs.clear()
            prev_w = prev_g = None
            g_floor = gnorm if np.isfinite(gnorm) else np.inf
            w = w_plain
            continue
        g_floor = min(g_floor, gnorm)
        if dws:
            Y = np.column_stack(dgs)
            S = np.column_stack(dws)
            gamma = np.linalg.lstsq(Y, g, rcond=None)[0]
            cand = w_plain - (S + Y) @ gamma
            if np.all(np.isfinite(cand)):
                if np.linalg.norm(cand) >= _ACCEL_NORM_FLOOR * w_scale:
                    w = cand
                    continue
                # the candidate collapsed toward w = 0, a trivial fixed
                # point of the homogeneous map that encodes no solution and
                # no certificate; acceleration is attracted to it, so stop
                # accelerating and let the plain iteration finish
                accel_on = False
            dws.clear()
            dgs.clear()
            prev_w = prev_g = None
            g_floor = gnorm
        w = w_plain

    if x is None:
        x, y, s_vec = unscale(u, v)
        pres = np.linalg.norm(A0 @ x + s_vec - cp.b)
        dres = np.linalg.norm(A0.T @ y + cp.c)
        gap = abs(cp.c @ x + cp.b @ y)
        residuals = (pres, dres, gap)

    objective = float(cp.c @ x) if status == "optimal" else float("nan")
    return Solution(status, x, y, s_vec, objective, residuals, it,
                    time.perf_counter() - t0, history, certificate)


def diagnostics(sol: Solution) -> str:
    """Human-readable account of a solve: status, residuals, history."""
    lines = [f"status: {sol.status}",
             f"iterations: {sol.iterations}",
             f"solve_time: {sol.solve_time:.4f} s"]
    if sol.status == "optimal":
        lines.append(f"objective: {sol.objective:.10g}")
        pres, dres, gap = sol.residuals
        lines.append(f"residuals: primal {pres:.3e}  dual {dres:.3e}  "
                     f"gap {gap:.3e}")
    elif sol.status == "max_iters_reached":
        lines.append("did not converge within the iteration budget")
        pres, dres, gap = sol.residuals
        lines.append(f"last residuals: primal {pres:.3e}  dual {dres:.3e}  "
                     f"gap {gap:.3e}")
    if sol.certificate is not None:
        kind = sol.certificate["kind"]
        what = ("primal infeasibility (dual ray)" if kind == "primal"
                else "dual infeasibility (unbounded ray)")
        lines.append(f"certificate: {what}, residual "
                     f"{sol.certificate['residual']:.3e}")
    if sol.history:
        lines.append("history:")
        lines.append(f"{'iter':>8} {'pres':>12} {'dres':>12} {'gap':>12}")
        for rec in sol.history:
            lines.append(f"{rec['iter']:>8} {rec['pres']:>12.4e} "
                         f"{rec['dres']:>12.4e} {rec['gap']:>12.4e}")
    return "\n".join(lines)
