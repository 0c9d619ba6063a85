"""Independent oracles used by the test suite.

These deliberately avoid the production solver's code path: the grid oracle
minimizes the weak-violation objective by refining lattice search, and the
scipy oracle hands the same LP to an unrelated solver (HiGHS).
"""

from __future__ import annotations

import numpy as np

from roboscript import solver as S

BIG = 1e6  # penalty weight that makes required-constraint violations dominate


def system_objective(constraints, stay_targets, var_order):
    """Vectorized objective over points: columns of X are candidate solutions.

    Returns (penalized objective, weak objective) per point, where the
    penalized form charges BIG per unit of required violation.
    """
    rows = []
    for c in constraints:
        coeffs = np.array([c.lhs.terms.get(v, 0.0) for v in var_order])
        rows.append((coeffs, c.lhs.constant, c.relation, c.strength))
    for i, v in enumerate(var_order):
        coeffs = np.zeros(len(var_order))
        coeffs[i] = 1.0
        rows.append((coeffs, -stay_targets[v], "==", S.WEAK))

    def evaluate(X):
        weak = np.zeros(X.shape[1])
        req = np.zeros(X.shape[1])
        for coeffs, const, rel, strength in rows:
            val = coeffs @ X + const
            if rel == "==":
                viol = np.abs(val)
            elif rel == "<=":
                viol = np.maximum(0.0, val)
            else:
                viol = np.maximum(0.0, -val)
            if strength == S.REQUIRED:
                req += viol
            else:
                weak += viol
        return weak + BIG * req, weak

    return evaluate


def grid_search_objective(constraints, stay_targets, var_order,
                          lo=-1.0, hi=1.0, target_step=1e-3, top_k=16):
    """Minimum weak-violation objective by coarse-to-fine lattice search.

    The initial grid and every refinement use power-of-two steps so lattice
    -aligned optima are visited exactly; top_k best points seed each
    refinement round to avoid stalling on flat valleys.
    """
    n = len(var_order)
    evaluate = system_objective(constraints, stay_targets, var_order)

    step = (hi - lo) / 16.0  # 0.125 for the [-1, 1] box
    axes = [np.arange(lo, hi + step / 2, step) for _ in range(n)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=0).reshape(n, -1)
    pen, weak = evaluate(pts)
    order = np.argsort(pen, kind="stable")[:top_k]
    centers = pts[:, order]
    best_pen = float(pen[order[0]])
    best_weak = float(weak[order[0]])

    while step > target_step:
        step /= 4.0
        offsets = np.arange(-4, 5) * step  # radius = previous step
        grids = []
        for k in range(centers.shape[1]):
            local_axes = [centers[d, k] + offsets for d in range(n)]
            grids.append(
                np.stack(np.meshgrid(*local_axes, indexing="ij"), axis=0).reshape(n, -1)
            )
        pts = np.concatenate(grids, axis=1)
        np.clip(pts, lo, hi, out=pts)
        pen, weak = evaluate(pts)
        order = np.argsort(pen, kind="stable")[:top_k]
        centers = pts[:, order]
        if pen[order[0]] < best_pen:
            best_pen = float(pen[order[0]])
            best_weak = float(weak[order[0]])
    return best_weak, best_pen


def linprog_objective(constraints, stay_targets, var_order):
    """Weak-violation minimum via scipy's HiGHS LP solver. Returns None if
    the required constraints are infeasible."""
    from scipy.optimize import linprog

    n = len(var_order)
    all_rows = [(c.lhs, c.relation, c.strength) for c in constraints]
    for i, v in enumerate(var_order):
        expr = S.LinearExpr({v: 1.0}, -stay_targets[v])
        all_rows.append((expr, "==", S.WEAK))

    def coeff_vec(expr):
        return np.array([expr.terms.get(v, 0.0) for v in var_order])

    n_weak = sum(1 for _, _, s in all_rows if s == S.WEAK)
    n_cols = n + 2 * n_weak  # x (free), then (e+, e-) per weak row
    c_obj = np.zeros(n_cols)
    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    wi = 0
    for expr, rel, strength in all_rows:
        a = np.zeros(n_cols)
        a[:n] = coeff_vec(expr)
        if strength == S.REQUIRED:
            if rel == "==":
                A_eq.append(a); b_eq.append(-expr.constant)
            elif rel == "<=":
                A_ub.append(a); b_ub.append(-expr.constant)
            else:
                A_ub.append(-a); b_ub.append(expr.constant)
        else:
            ep, em = n + 2 * wi, n + 2 * wi + 1
            wi += 1
            a[ep], a[em] = -1.0, 1.0
            A_eq.append(a); b_eq.append(-expr.constant)
            if rel in ("==", "<="):
                c_obj[ep] = 1.0
            if rel in ("==", ">="):
                c_obj[em] = 1.0
    bounds = [(None, None)] * n + [(0, None)] * (2 * n_weak)
    res = linprog(
        c_obj,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )
    if not res.success:
        return None
    return float(res.fun)


def random_lattice_system(rng, max_vars=4, max_constraints=6):
    """Random feasible constraint system whose optima lie on a 1/8 lattice.

    Builds a solver, variables, and constraints around a lattice witness
    point: tree-structured +/- couplings between variables plus per-variable
    pins and bounds, so the arrangement's vertices stay lattice-aligned and
    the grid oracle is exact. Variables are confined to the [-1, 1] table
    box (required bounds), which keeps every optimum inside the oracle's
    search region.
    """
    n = int(rng.integers(1, max_vars + 1))
    solver = S.Solver()
    vs = [solver.add_variable(f"x{i}") for i in range(n)]
    witness = rng.integers(-8, 9, size=n) / 8.0

    cons = []
    for v in vs:
        cons.append(S.le(S.LinearExpr({v: 1.0}), S.LinearExpr.const(1.0)))
        cons.append(S.ge(S.LinearExpr({v: 1.0}), S.LinearExpr.const(-1.0)))
    n_cons = int(rng.integers(1, max_constraints + 1))
    for _ in range(n_cons):
        kind = rng.choice(["pin", "bound", "couple", "weak_pin", "weak_bound"])
        i = int(rng.integers(0, n))
        if kind == "pin":
            cons.append(S.eq(S.LinearExpr({vs[i]: 1.0}), S.LinearExpr.const(witness[i])))
        elif kind == "bound":
            slack = rng.integers(0, 5) / 8.0
            if rng.integers(0, 2):
                cons.append(S.le(S.LinearExpr({vs[i]: 1.0}),
                                 S.LinearExpr.const(min(1.0, witness[i] + slack))))
            else:
                cons.append(S.ge(S.LinearExpr({vs[i]: 1.0}),
                                 S.LinearExpr.const(max(-1.0, witness[i] - slack))))
        elif kind == "couple" and n >= 2:
            j = int(rng.integers(0, n - 1))
            j = j if j < i else j + 1
            sign = 1.0 if rng.integers(0, 2) else -1.0
            target = witness[i] + sign * witness[j]
            cons.append(S.eq(S.LinearExpr({vs[i]: 1.0, vs[j]: sign}),
                             S.LinearExpr.const(target)))
        else:
            target = rng.integers(-8, 9) / 8.0
            rel = rng.choice(["==", "<=", ">="])
            cons.append(S.Constraint(
                S.LinearExpr({vs[i]: 1.0}, -target), rel, S.WEAK))
    for c in cons:
        solver.add_constraint(c)
    return solver, vs, cons
