"""Incremental linear constraint solver for declarative object placement.

Programs declare Required and Weak linear constraints over position
variables, call solve(), read intermediate values, and may declare more
constraints before solving again. Solving minimizes the total absolute
violation of Weak constraints subject to every Required constraint holding
exactly; every variable carries an implicit Weak "stay" at its last solved
value (0.0 before the first solve), so underdetermined systems are pinned
deterministically.

The engine is a dense two-phase simplex with Bland's rule. Free variables
are split into nonnegative pairs, each Weak constraint contributes
nonnegative violation slacks, and re-solves run from scratch (problem sizes
here are tens of variables, so incrementality buys nothing).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEASIBILITY_TOL = 1e-6
_PIVOT_TOL = 1e-9
_INFEASIBLE_TOL = 1e-7
_MAX_ITERATIONS = 20_000

REQUIRED = "required"
WEAK = "weak"
_RELATIONS = ("==", "<=", ">=")


class SolverError(Exception):
    pass


class UnknownVariable(SolverError):
    pass


class Infeasible(SolverError):
    """Required constraints are jointly unsatisfiable."""


@dataclass(frozen=True)
class Variable:
    """Opaque handle; identity is (owning solver, id)."""

    id: int
    label: str
    _owner: int = field(repr=False, default=0)

    def __hash__(self):
        return hash((self._owner, self.id))


class LinearExpr:
    """Sum of coefficient*variable terms plus a constant."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms=None, constant: float = 0.0):
        self.terms = {}
        if terms:
            for var, coef in terms.items():
                coef = float(coef)
                if coef != 0.0:
                    self.terms[var] = coef
        self.constant = float(constant)

    @staticmethod
    def from_variable(var: Variable, coef: float = 1.0) -> "LinearExpr":
        return LinearExpr({var: coef})

    @staticmethod
    def const(value: float) -> "LinearExpr":
        return LinearExpr({}, value)

    def copy(self) -> "LinearExpr":
        return LinearExpr(dict(self.terms), self.constant)

    def scaled(self, k: float) -> "LinearExpr":
        return LinearExpr({v: c * k for v, c in self.terms.items()}, self.constant * k)

    def plus(self, other: "LinearExpr") -> "LinearExpr":
        terms = dict(self.terms)
        for v, c in other.terms.items():
            terms[v] = terms.get(v, 0.0) + c
        return LinearExpr(terms, self.constant + other.constant)

    def minus(self, other: "LinearExpr") -> "LinearExpr":
        return self.plus(other.scaled(-1.0))

    def value_at(self, assignment) -> float:
        return self.constant + sum(
            c * assignment.get(v, 0.0) for v, c in self.terms.items()
        )

    def __repr__(self):
        parts = [f"{c:+g}*{v.label}" for v, c in self.terms.items()]
        parts.append(f"{self.constant:+g}")
        return " ".join(parts)


@dataclass(frozen=True)
class Constraint:
    """lhs REL 0 with strength Required or Weak.

    A Weak equality contributes |lhs| to the objective; a Weak inequality
    contributes only its one-sided excess.
    """

    lhs: LinearExpr
    relation: str
    strength: str = REQUIRED

    def __post_init__(self):
        if self.relation not in _RELATIONS:
            raise SolverError(f"bad relation {self.relation!r}")
        if self.strength not in (REQUIRED, WEAK):
            raise SolverError(f"bad strength {self.strength!r}")

    def violation(self, assignment) -> float:
        v = self.lhs.value_at(assignment)
        if self.relation == "==":
            return abs(v)
        if self.relation == "<=":
            return max(0.0, v)
        return max(0.0, -v)


def eq(lhs: LinearExpr, rhs: LinearExpr, strength: str = REQUIRED) -> Constraint:
    return Constraint(lhs.minus(rhs), "==", strength)


def le(lhs: LinearExpr, rhs: LinearExpr, strength: str = REQUIRED) -> Constraint:
    return Constraint(lhs.minus(rhs), "<=", strength)


def ge(lhs: LinearExpr, rhs: LinearExpr, strength: str = REQUIRED) -> Constraint:
    return Constraint(lhs.minus(rhs), ">=", strength)


@dataclass(frozen=True)
class Solution:
    """Assignment produced by one solve, plus the weak-violation objective."""

    values: dict
    objective: float

    def value(self, var: Variable) -> float:
        if var not in self.values:
            raise UnknownVariable(f"variable {var.label!r} not in solution")
        return self.values[var]


class Solver:
    """Single-owner mutable solver state.

    Constraints queue until solve(); value() reads the last solution (stay
    targets, i.e. 0.0, before the first solve).
    """

    def __init__(self):
        self._variables: list[Variable] = []
        self._constraints: list[Constraint] = []
        self._stay_targets: dict[Variable, float] = {}

    def add_variable(self, label: str = "") -> Variable:
        var = Variable(len(self._variables), label or f"v{len(self._variables)}", id(self))
        self._variables.append(var)
        self._stay_targets[var] = 0.0
        return var

    def add_constraint(self, constraint: Constraint) -> int:
        for var in constraint.lhs.terms:
            if var not in self._stay_targets:
                raise UnknownVariable(f"variable {var.label!r} is not registered")
        self._constraints.append(constraint)
        return len(self._constraints) - 1

    @property
    def constraints(self):
        return tuple(self._constraints)

    def value(self, var: Variable) -> float:
        if var not in self._stay_targets:
            raise UnknownVariable(f"variable {var.label!r} is not registered")
        return self._stay_targets[var]

    def solve(self) -> Solution:
        assignment = dict(self._stay_targets)
        referenced = [
            v for v in self._variables
            if any(v in c.lhs.terms for c in self._constraints)
        ]
        if referenced:
            solved = _solve_lp(referenced, self._constraints, self._stay_targets)
            assignment.update(solved)

        for c in self._constraints:
            if c.strength == REQUIRED and c.violation(assignment) > FEASIBILITY_TOL:
                raise Infeasible(f"required constraint violated at optimum: {c.lhs!r} {c.relation} 0")

        objective = sum(
            c.violation(assignment) for c in self._constraints if c.strength == WEAK
        )
        objective += sum(
            abs(assignment[v] - self._stay_targets[v]) for v in referenced
        )
        self._stay_targets = dict(assignment)
        return Solution(assignment, objective)


def _solve_lp(variables, constraints, stay_targets):
    """Assemble and solve the phase-1/phase-2 LP for the referenced variables."""
    col_of = {v: 2 * i for i, v in enumerate(variables)}  # v+ at 2i, v- at 2i+1
    rows = []       # (coeff dict col->a, rhs)
    costs = {}      # col -> phase-2 cost
    basis_seed = [] # preferred initial basic column per row, or None
    next_col = 2 * len(variables)

    def new_col(cost=0.0):
        nonlocal next_col
        col = next_col
        next_col += 1
        if cost:
            costs[col] = cost
        return col

    def base_row(expr):
        coeffs = {}
        for var, a in expr.terms.items():
            coeffs[col_of[var]] = coeffs.get(col_of[var], 0.0) + a
            coeffs[col_of[var] + 1] = coeffs.get(col_of[var] + 1, 0.0) - a
        return coeffs, -expr.constant

    def add_constraint_row(c: Constraint):
        coeffs, rhs = base_row(c.lhs)
        if not any(abs(a) > _PIVOT_TOL for a in coeffs.values()):
            # Constant-only constraint: no row; check or charge it directly.
            if c.strength == REQUIRED and c.violation({}) > FEASIBILITY_TOL:
                raise Infeasible(f"constant constraint violated: {c.lhs!r} {c.relation} 0")
            return
        if c.strength == REQUIRED:
            if c.relation == "<=":
                coeffs[new_col()] = 1.0
            elif c.relation == ">=":
                coeffs[new_col()] = -1.0
            rows.append((coeffs, rhs))
            basis_seed.append(None)
        else:
            # lhs - e_plus + e_minus = 0 ; e_plus carries the '>' excess.
            if c.relation == "==":
                ep, em = new_col(1.0), new_col(1.0)
            elif c.relation == "<=":
                ep, em = new_col(1.0), new_col(0.0)
            else:
                ep, em = new_col(0.0), new_col(1.0)
            coeffs[ep] = -1.0
            coeffs[em] = 1.0
            rows.append((coeffs, rhs))
            basis_seed.append((ep, em))

    for c in constraints:
        add_constraint_row(c)
    for v in variables:  # stay rows: v - target == 0, weak
        stay = Constraint(
            LinearExpr({v: 1.0}, -stay_targets[v]), "==", WEAK
        )
        add_constraint_row(stay)

    m = len(rows)
    if m == 0:
        return {v: stay_targets[v] for v in variables}

    n_struct = next_col
    art_cols = []
    tableau = np.zeros((m, n_struct + m + 1))
    basis = np.full(m, -1, dtype=int)

    for i, (coeffs, rhs) in enumerate(rows):
        sign = 1.0 if rhs >= 0 else -1.0
        for col, a in coeffs.items():
            tableau[i, col] = sign * a
        tableau[i, -1] = sign * rhs
        if basis_seed[i] is not None:
            ep, em = basis_seed[i]
            pick = em if tableau[i, em] > 0.5 else ep
            basis[i] = pick
        else:
            art = n_struct + len(art_cols)
            art_cols.append(art)
            tableau[i, art] = 1.0
            basis[i] = art

    n_total = n_struct + len(art_cols)
    tableau = tableau[:, list(range(n_total)) + [n_struct + m]]

    if art_cols:
        obj1 = np.zeros(n_total + 1)
        for art in art_cols:
            obj1[art] = 1.0
        _canonicalize(tableau, basis, obj1)
        _simplex(tableau, basis, obj1, allowed=np.ones(n_total, dtype=bool))
        if obj1[-1] < -_INFEASIBLE_TOL:
            raise Infeasible("required constraints are jointly unsatisfiable")
        _drive_out_artificials(tableau, basis, set(art_cols), n_struct)

    allowed = np.ones(n_total, dtype=bool)
    for art in art_cols:
        allowed[art] = False
    obj2 = np.zeros(n_total + 1)
    for col, cost in costs.items():
        obj2[col] = cost
    _canonicalize(tableau, basis, obj2)
    _simplex(tableau, basis, obj2, allowed)

    values = np.zeros(n_total)
    for i, b in enumerate(basis):
        values[b] = tableau[i, -1]
    return {
        v: float(values[col_of[v]] - values[col_of[v] + 1]) for v in variables
    }


def _canonicalize(tableau, basis, obj):
    """Zero the objective row over the current basic columns."""
    for i, b in enumerate(basis):
        if obj[b] != 0.0:
            obj -= obj[b] * tableau[i, :]


def _simplex(tableau, basis, obj, allowed):
    """Minimize obj on the canonical tableau in place, Bland's rule throughout."""
    n = tableau.shape[1] - 1
    for _ in range(_MAX_ITERATIONS):
        entering = -1
        for j in range(n):
            if allowed[j] and obj[j] < -_PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return
        leaving = -1
        best_ratio = np.inf
        for i in range(tableau.shape[0]):
            a = tableau[i, entering]
            if a > _PIVOT_TOL:
                ratio = tableau[i, -1] / a
                if ratio < best_ratio - _PIVOT_TOL or (
                    abs(ratio - best_ratio) <= _PIVOT_TOL
                    and (leaving < 0 or basis[i] < basis[leaving])
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            # Weak-violation objectives are bounded below by zero; reaching
            # here means the tableau is numerically corrupt.
            raise SolverError("unbounded pivot in a bounded objective")
        _pivot(tableau, basis, obj, leaving, entering)
    raise SolverError("simplex iteration limit exceeded")


def _pivot(tableau, basis, obj, row, col):
    tableau[row, :] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and tableau[i, col] != 0.0:
            tableau[i, :] -= tableau[i, col] * tableau[row, :]
    if obj[col] != 0.0:
        obj -= obj[col] * tableau[row, :]
    basis[row] = col


def _drive_out_artificials(tableau, basis, art_cols, n_struct):
    """Pivot zero-level artificials out of the basis where possible."""
    for i in range(tableau.shape[0]):
        if basis[i] in art_cols:
            for j in range(n_struct):
                if abs(tableau[i, j]) > _PIVOT_TOL:
                    dummy = np.zeros(tableau.shape[1])
                    _pivot(tableau, basis, dummy, i, j)
                    break
