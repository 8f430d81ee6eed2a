"""Problem construction and solve orchestration.

The modeling surface is Problem(Minimize(expr) | Maximize(expr),
constraints); solve() runs the ruleset check, lowers to a cone program,
and dispatches to the embedded solver.  Maximization is handled here by a
sense flag; the canonicalizer always minimizes.
"""
from __future__ import annotations

import json

import numpy as np

from .canon import canonicalize, export_json, recover, recover_dual
from .errors import DCPError, InputError, ShapeError
from .expr import Constraint, as_expression, dcp_check
from .solver import SolverSettings, solve_cone_program

_EMBEDDED = "embedded-splitting"
_EXPORT_ONLY = "export-only"


def installed_solvers():
    return [_EMBEDDED]


class Objective:
    sense = "minimize"

    def __init__(self, expr):
        e = as_expression(expr)
        if not e.is_scalar:
            raise ShapeError(
                f"objective must be scalar, got {e.shape.rows}x{e.shape.cols}")
        self.expr = e

    def __repr__(self):
        return f"{type(self).__name__}({self.expr.label()})"


class Minimize(Objective):
    sense = "minimize"


class Maximize(Objective):
    sense = "maximize"


class Problem:
    """Immutable pairing of an objective with a constraint list."""

    def __init__(self, objective, constraints=None):
        if not isinstance(objective, Objective):
            raise InputError("objective must be Minimize(...) or Maximize(...)")
        constraints = list(constraints) if constraints is not None else []
        for con in constraints:
            if not isinstance(con, Constraint):
                raise InputError(
                    f"constraints must be comparisons, got {type(con).__name__}")
        self.objective = objective
        self.constraints = tuple(constraints)

    def is_dcp(self) -> bool:
        return dcp_check(self).accepted


class Result:
    """Outcome of a solve: status, user-sense value, and recovery handles."""

    def __init__(self, problem, status, value, solution, vmap, cone_program,
                 metrics, export=None):
        self.problem = problem
        self.status = status
        self.value = value
        self.solution = solution
        self.vmap = vmap
        self.cone_program = cone_program
        self.metrics = metrics
        self.export = export
        self._env = None

    def _require_solution(self):
        if self.solution is None:
            raise InputError("no solution attached (export-only run)")

    def _environment(self):
        if self._env is None:
            self._require_solution()
            env = {}
            for rec in self.vmap.vars:
                if rec.vid is None:
                    continue
                env[rec.vid] = recover(self.solution, self.vmap, rec.key)
            self._env = env
        return self._env

    def value_of(self, expr):
        """Numeric value of any expression over this problem's variables."""
        self._require_solution()
        e = as_expression(expr)
        try:
            return e.value(self._environment())
        except KeyError as err:
            raise InputError(
                "expression references a variable outside this problem") from err

    def dual_of(self, constraint):
        self._require_solution()
        return recover_dual(self.solution, self.vmap, constraint,
                            flipped=self.cone_program.flipped)

    def __repr__(self):
        return f"Result(status={self.status!r}, value={self.value!r})"


def value_of(result: Result, expr):
    return result.value_of(expr)


def dual_of(result: Result, constraint):
    return result.dual_of(constraint)


def _make_settings(settings, options):
    if settings is not None:
        if options:
            raise InputError("pass either a settings object or keyword "
                             "overrides, not both")
        if not isinstance(settings, SolverSettings):
            raise InputError("settings must be a SolverSettings")
        return settings
    try:
        return SolverSettings(**options)
    except TypeError as err:
        raise InputError(f"unknown solver option: {err}") from err


def solve(problem: Problem, solver: str | None = None, settings=None,
          **options) -> Result:
    """Check the ruleset, lower, and solve (or export) a problem."""
    if not isinstance(problem, Problem):
        raise InputError("solve() expects a Problem")
    name = solver if solver is not None else _EMBEDDED
    if name not in (_EMBEDDED, _EXPORT_ONLY):
        raise InputError(
            f"unknown solver {name!r}; installed solvers: "
            f"{', '.join(installed_solvers())} (plus '{_EXPORT_ONLY}')")

    report = dcp_check(problem)
    if not report.accepted:
        raise DCPError("problem does not follow the composition ruleset:\n"
                       + report.render(), report=report)

    cp, vmap = canonicalize(problem)
    if name == _EXPORT_ONLY:
        payload = json.loads(export_json(cp, vmap))
        return Result(problem, "export_only", float("nan"), None, vmap, cp,
                      {}, export=payload)

    sol = solve_cone_program(cp, _make_settings(settings, options))
    sign = -1.0 if cp.flipped else 1.0
    if sol.status in ("optimal", "max_iters_reached") and np.all(
            np.isfinite(sol.x)):
        value = sign * (float(cp.c @ sol.x) + cp.offset)
    else:
        value = float("nan")
    metrics = {"iterations": sol.iterations,
               "solve_time": sol.solve_time,
               "residuals": sol.residuals}
    return Result(problem, sol.status, value, sol, vmap, cp, metrics)
