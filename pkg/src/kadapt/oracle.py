"""Brute-force ground truth for tiny instances.

Exhaustively enumerates first-stage vectors and K-subsets of feasible
recourses; the inner worst case over the scenario polytope is exact (an
epigraph LP, or the indicator MILP under constraint uncertainty). Only
the MILP backend is reused -- never the double-oracle or Benders code
paths -- so agreement between the two is a genuine cross-check.

This is a test fixture, not a solver: budgets refuse anything beyond
desk-enumerable sizes rather than silently truncating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from kadapt.instances import KAdaptInstance, KPolicy, Polytope
from kadapt.milp import ModelBuilder, Status, solve_lp, solve_milp


class BudgetError(RuntimeError):
    """Requested enumeration exceeds the oracle budget."""


@dataclass(frozen=True)
class OracleBudget:
    max_first_stage_points: int = 4096
    max_recourse_points: int = 64
    max_k_subsets: int = 100000

    def __post_init__(self):
        if min(self.max_first_stage_points, self.max_recourse_points,
               self.max_k_subsets) <= 0:
            raise ValueError("budgets must be positive")


def enumerate_feasible_binary(poly: Polytope, dim: int, tol: float = 1e-7):
    """All binary points of the polytope, in lexicographic order.

    Lexicographic over (x_0, ..., x_{dim-1}) with x_0 most significant.
    """
    if dim > 20:
        raise BudgetError(f"enumeration over {dim} binaries refused")
    out = []
    for mask in range(2 ** dim):
        x = np.array([(mask >> (dim - 1 - j)) & 1 for j in range(dim)], dtype=float)
        if poly.contains(x, tol):
            out.append(x)
    return out


def exact_inner_value(recourses, inst: KAdaptInstance,
                      x: np.ndarray | None = None) -> float:
    """max over Xi of min_k of the scenario-linear cost of the k-th recourse.

    Exact: the min of linear functions is concave, so its maximum over the
    polytope is one epigraph LP. With dependent first-stage uncertainty
    and `x` given, the cost of every recourse gains the xi'C x term.
    """
    extra = np.zeros(inst.q)
    if x is not None and inst.first_stage is not None and inst.first_stage.omega is None:
        extra = inst.first_stage.C @ x
    M = inst.bilinear_bound() + float(np.abs(extra).sum()) + 1.0
    mb = ModelBuilder(sense="max", name="oracle-inner")
    eta = mb.add_var(lo=-M, hi=M, obj=1.0)
    ids = inst.xi.add_vars_to(mb)
    for y in recourses:
        coeff = inst.Q @ y + extra
        mb.add_constr([(eta, 1.0)] + [(ids[l], -coeff[l]) for l in range(inst.q)],
                      "<=", 0.0)
    sol = solve_lp(mb.build())
    if sol.status != Status.OPTIMAL:
        raise RuntimeError("inner evaluation LP failed")
    return float(sol.objective)


def cu_inner_value(recourses, inst: KAdaptInstance, x: np.ndarray):
    """Adversary value under constraint uncertainty, or inf if the
    adversary can render every recourse infeasible (indicator MILP)."""
    K = len(recourses)
    M_q = inst.bilinear_bound()
    rhs = inst.b - (inst.T @ x if inst.n else np.zeros(inst.s))
    box = np.maximum(np.abs(inst.xi.lo), np.abs(inst.xi.hi))
    mag = np.abs(inst.W).sum(axis=1).astype(float)
    for l, Wl in enumerate(inst.W_l):
        mag += box[l] * np.abs(Wl).sum(axis=1)
    eps_rows = 1e-4 * (1.0 + mag + np.abs(rhs))
    M_eta = 2.0 * M_q + 1.0

    mb = ModelBuilder(sense="max", name="oracle-inner-cu")
    eta = mb.add_var(lo=-M_q, hi=M_q + M_eta + 1.0, obj=1.0)
    ids = inst.xi.add_vars_to(mb)
    lam = []
    for y in recourses:
        lk = mb.add_binary()
        lam.append(lk)
        qy = inst.Q @ y
        mb.add_constr([(eta, 1.0)] + [(ids[l], -qy[l]) for l in range(inst.q)]
                      + [(lk, -M_eta)], "<=", 0.0)
        deltas = []
        w0y = inst.W @ y
        coeff = np.array([Wl @ y for Wl in inst.W_l])
        for si in range(inst.s):
            d = mb.add_binary()
            deltas.append(d)
            lin_lo = float(np.minimum(coeff[:, si] * inst.xi.lo,
                                      coeff[:, si] * inst.xi.hi).sum())
            c0 = rhs[si] + eps_rows[si] - w0y[si]
            M_row = max(c0 - lin_lo, 0.0) + 1.0
            row = [(ids[l], coeff[l, si]) for l in range(inst.q)]
            row.append((d, -M_row))
            mb.add_constr(row, ">=", c0 - M_row)
            mb.add_constr([(lk, 1.0), (d, -1.0)], ">=", 0.0)
        mb.add_constr([(lk, 1.0)] + [(d, -1.0) for d in deltas], "<=", 0.0)

    sol = solve_milp(mb.build())
    if sol.status != Status.OPTIMAL:
        raise RuntimeError("inner evaluation MILP failed")
    if all(sol.values[lk] > 0.5 for lk in lam):
        return math.inf
    return float(sol.objective)


def feasible_recourses(inst: KAdaptInstance, x: np.ndarray,
                       budget: OracleBudget = OracleBudget()):
    """Recourse vectors available at x.

    Objective-only variant: members of Y satisfying W y <= b - T x.
    Constraint uncertainty: all of Y (feasibility is per scenario).
    """
    ys = enumerate_feasible_binary(inst.Y, inst.m)
    if inst.variant == "objective":
        rhs = inst.b - (inst.T @ x if inst.n else np.zeros(inst.s))
        ys = [y for y in ys if np.all(inst.W @ y <= rhs + 1e-7)]
    if len(ys) > budget.max_recourse_points:
        raise BudgetError(f"{len(ys)} feasible recourses exceed the budget")
    return ys


def first_stage_worst_case(inst: KAdaptInstance, x: np.ndarray) -> float:
    """max over Omega of w'C x for independent first-stage uncertainty."""
    fs = inst.first_stage
    if fs is None or fs.omega is None:
        return 0.0
    a = fs.C @ x
    mb = ModelBuilder(sense="max", name="omega-worst")
    ids = fs.omega.add_vars_to(mb)
    for l, al in enumerate(a):
        mb.set_obj(ids[l], al)
    sol = solve_lp(mb.build())
    if sol.status != Status.OPTIMAL:
        raise RuntimeError("first-stage worst case is unbounded or empty")
    return float(sol.objective)


def brute_force_solve(inst: KAdaptInstance, K: int | None = None,
                      budget: OracleBudget = OracleBudget()):
    """Exact optimum by full enumeration. Returns (value, KPolicy | None).

    Minimum over first-stage points of X admitting a recourse, of the
    minimum over K-subsets of the feasible recourses, of the exact inner
    worst case. Infeasible instances yield (inf, None).
    """
    if K is None:
        K = inst.K
    if 2 ** inst.n > budget.max_first_stage_points:
        raise BudgetError(f"2^{inst.n} first-stage points exceed the budget")
    xs = enumerate_feasible_binary(inst.X, inst.n)

    best = math.inf
    best_policy = None
    subsets_seen = 0
    for x in xs:
        ys = feasible_recourses(inst, x, budget)
        if not ys:
            continue
        k_eff = min(K, len(ys))
        base = float(inst.c @ x) if inst.n else 0.0
        base += first_stage_worst_case(inst, x)
        num = math.comb(len(ys), k_eff)
        subsets_seen += num
        if subsets_seen > budget.max_k_subsets:
            raise BudgetError(f"{subsets_seen} K-subsets exceed the budget")
        inner_best = math.inf
        inner_sel = None
        for subset in combinations(range(len(ys)), k_eff):
            rec = [ys[j] for j in subset]
            if inst.variant == "constraint":
                val = cu_inner_value(rec, inst, x)
            else:
                val = exact_inner_value(rec, inst, x)
            if val < inner_best:
                inner_best, inner_sel = val, rec
        if inner_sel is None or math.isinf(inner_best):
            continue
        total = base + inner_best
        if total < best:
            best = total
            best_policy = KPolicy(x=x.copy(), recourses=[y.copy() for y in inner_sel],
                                  value=total, gap=0.0,
                                  stats={"oracle": True, "k_eff": k_eff})
    return best, best_policy
