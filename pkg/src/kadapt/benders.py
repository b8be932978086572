"""Outer logic-based Benders decomposition over the first-stage binaries.

The master minimizes c'x + theta over X, with theta pushed up by
combinatorial optimality cuts built from subproblem values and a global
subproblem lower bound; first stages whose subproblem is infeasible
(possible under constraint uncertainty) are excluded by no-good
feasibility cuts. A recourse-witness copy embedded in the master keeps
every proposed x recourse-feasible. Iterate: solve the subproblem at the
incumbent x, refresh the global lower bound from the accumulated scenario
pool, cut, re-solve the master, until the relative gap closes.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from kadapt.double_oracle import (
    ScenarioPool,
    SolutionPool,
    SubproblemInfeasible,
    solve_subproblem,
)
from kadapt.instances import (
    InstanceError,
    KAdaptInstance,
    KPolicy,
    lift_dependent_first_stage,
    nominal_scenario,
)
from kadapt.milp import ModelBuilder, SolveError, Status, solve_lp, solve_milp

logger = logging.getLogger("kadapt.benders")

MAX_ITERS = 100000


@dataclass(frozen=True)
class OptimalityCut:
    """theta >= (theta_r - L_r) (sum_{i in S} x_i - sum_{i not in S} x_i)
    - (theta_r - L_r)(|S| - 1) + L_r, keyed by the support S of x^r."""

    support: frozenset
    theta: float
    lower: float

    def rhs_at(self, x: np.ndarray) -> float:
        d = self.theta - self.lower
        lin = sum(x[i] for i in self.support) \
            - sum(x[i] for i in range(len(x)) if i not in self.support)
        return d * lin - d * (len(self.support) - 1) + self.lower


@dataclass(frozen=True)
class FeasibilityCut:
    """sum_{i in S} x_i - sum_{i not in S} x_i <= |S| - 1: excludes exactly
    the binary point with support S."""

    support: frozenset

    def lhs_at(self, x: np.ndarray) -> float:
        return sum(x[i] for i in self.support) \
            - sum(x[i] for i in range(len(x)) if i not in self.support)


@dataclass
class MasterState:
    opt_cuts: list = field(default_factory=list)
    feas_cuts: list = field(default_factory=list)
    ub: float = math.inf
    lb: float = -math.inf
    incumbent: KPolicy | None = None
    iteration: int = 0


def make_optimality_cut(x_r: np.ndarray, theta_r: float, L_r: float,
                        n: int) -> OptimalityCut:
    if theta_r < L_r - 1e-6:
        raise SolveError(f"subproblem value {theta_r} below its global bound {L_r}")
    support = frozenset(i for i in range(n) if x_r[i] > 0.5)
    return OptimalityCut(support=support, theta=theta_r, lower=min(L_r, theta_r))


def _omega_dual_rows(fs) -> tuple[np.ndarray, np.ndarray]:
    """Fold Omega's rows and finite box bounds into H w <= h form."""
    om = fs.omega
    rows = []
    rhs = []
    for i in range(om.poly.num_rows):
        a, s, r = om.poly.A[i], om.poly.senses[i], float(om.poly.rhs[i])
        if s in ("<=", "="):
            rows.append(a.copy()); rhs.append(r)
        if s in (">=", "="):
            rows.append(-a.copy()); rhs.append(-r)
    dim = om.dim
    for l in range(dim):
        if math.isfinite(om.hi[l]):
            e = np.zeros(dim); e[l] = 1.0
            rows.append(e); rhs.append(float(om.hi[l]))
        if math.isfinite(om.lo[l]):
            e = np.zeros(dim); e[l] = -1.0
            rows.append(e); rhs.append(float(-om.lo[l]))
    return np.array(rows), np.array(rhs)


def robustify_master_objective(mb: ModelBuilder, xs: list[int],
                               inst: KAdaptInstance) -> list[int]:
    """Replace max_w w'C x by its LP dual inside the master.

    Adds multipliers pi >= 0 with H'pi = C x and objective term h'pi,
    where H w <= h folds Omega's rows and box. Returns the pi indices so
    callers can sanity-check the synthesized upper bound did not bind.
    """
    fs = inst.first_stage
    if fs is None or fs.omega is None:
        return []
    H, h = _omega_dual_rows(fs)
    big = 1e6 * (1.0 + float(np.abs(fs.C).sum()))
    pis = [mb.add_var(lo=0.0, hi=big, obj=float(h[r])) for r in range(H.shape[0])]
    for l in range(fs.omega.dim):
        row = [(pis[r], H[r, l]) for r in range(H.shape[0]) if H[r, l]]
        row += [(xs[i], -fs.C[l, i]) for i in range(inst.n) if fs.C[l, i]]
        mb.add_constr(row, "=", 0.0)
    return pis


def worst_case_first_stage(inst: KAdaptInstance, x: np.ndarray) -> float:
    """max over Omega of w'C x, for the upper-bound bookkeeping."""
    fs = inst.first_stage
    if fs is None or fs.omega is None:
        return 0.0
    a = fs.C @ x
    mb = ModelBuilder(sense="max", name="omega-worst")
    ids = fs.omega.add_vars_to(mb)
    for l, al in enumerate(a):
        mb.set_obj(ids[l], float(al))
    sol = solve_lp(mb.build())
    if sol.status != Status.OPTIMAL:
        raise SolveError("first-stage worst case is unbounded over Omega")
    return float(sol.objective)


def solve_master(state: MasterState, inst: KAdaptInstance,
                 xi_nom: np.ndarray, include_theta: bool = True,
                 milp_gap: float = 0.0):
    """Master MILP: min c'x (+ dualized Omega term) + theta over the cuts.

    A recourse-witness block (one y copy satisfying the coupling at the
    nominal scenario plus the Y rows) keeps x recourse-feasible; under
    constraint uncertainty that witness is necessary only, and
    feasibility cuts close the gap. Returns (x, objective, bound) or
    None when the master is infeasible.
    """
    M_q = inst.bilinear_bound()
    mb = ModelBuilder(name="master")
    xs = [mb.add_binary(obj=float(inst.c[i])) for i in range(inst.n)]
    inst.X.add_rows_to(mb, xs)

    wit = [mb.add_binary() for _ in range(inst.m)]
    inst.Y.add_rows_to(mb, wit)
    W_nom = inst.W_of(xi_nom)
    for si in range(inst.s):
        row = [(xs[i], inst.T[si, i]) for i in range(inst.n)]
        row += [(wit[j], W_nom[si, j]) for j in range(inst.m)]
        mb.add_constr(row, "<=", float(inst.b[si]))

    pis = robustify_master_objective(mb, xs, inst)

    if include_theta:
        theta = mb.add_var(lo=-M_q - 1.0, hi=M_q + 1.0, obj=1.0)
        for cut in state.opt_cuts:
            d = cut.theta - cut.lower
            row = [(theta, 1.0)]
            row += [(xs[i], -d if i in cut.support else d) for i in range(inst.n)]
            mb.add_constr(row, ">=", -d * (len(cut.support) - 1) + cut.lower)
    for cut in state.feas_cuts:
        row = [(xs[i], 1.0 if i in cut.support else -1.0) for i in range(inst.n)]
        mb.add_constr(row, "<=", float(len(cut.support) - 1))

    sol = solve_milp(mb.build(), gap=milp_gap)
    if sol.status != Status.OPTIMAL:
        return None
    if pis and any(sol.values[p] > 0.999 * 1e6 * (1.0 + float(np.abs(inst.first_stage.C).sum()))
                   for p in pis):
        raise SolveError("Omega dual multiplier hit its synthesized bound")
    x = np.round(sol.values[: inst.n]) if inst.n else np.zeros(0)
    return x, float(sol.objective), float(sol.bound)


def compute_global_lower_bound(scen: ScenarioPool, inst: KAdaptInstance,
                               milp_gap: float = 0.0) -> float:
    """Joint MILP over x, K recourses and assignments, restricted to the
    pooled scenarios: a lower bound on the subproblem value at every
    feasible x, refreshed each Benders iteration as the pool grows."""
    H = len(scen)
    K = inst.K
    M_q = inst.bilinear_bound()
    S = scen.matrix()
    costs = S @ inst.Q

    mb = ModelBuilder(name="global-lower-bound")
    gamma = mb.add_var(lo=-M_q, hi=M_q, obj=1.0)
    xs = [mb.add_binary() for _ in range(inst.n)]
    inst.X.add_rows_to(mb, xs)
    ys = [[mb.add_binary() for _ in range(inst.m)] for _ in range(K)]
    u = [[mb.add_binary() for _ in range(H)] for _ in range(K)]
    W_h = [inst.W_of(xi) for xi in scen.scenarios] if inst.variant == "constraint" else None
    for k in range(K):
        inst.Y.add_rows_to(mb, ys[k])
        for h in range(H):
            M_cost = float(np.maximum(costs[h], 0.0).sum()) + M_q + 1.0
            row = [(ys[k][j], costs[h, j]) for j in range(inst.m)]
            row += [(gamma, -1.0), (u[k][h], M_cost)]
            mb.add_constr(row, "<=", M_cost)
        if inst.variant == "constraint":
            for h in range(H):
                for si in range(inst.s):
                    bound = float(np.maximum(W_h[h][si], 0.0).sum()
                                  + np.maximum(-inst.T[si], 0.0).sum()
                                  - inst.b[si])
                    M_row = max(bound, 0.0) + 1.0
                    crow = [(ys[k][j], W_h[h][si, j]) for j in range(inst.m)]
                    crow += [(xs[i], inst.T[si, i]) for i in range(inst.n)]
                    crow.append((u[k][h], M_row))
                    mb.add_constr(crow, "<=", float(inst.b[si]) + M_row)
        else:
            for si in range(inst.s):
                row = [(ys[k][j], inst.W[si, j]) for j in range(inst.m)]
                row += [(xs[i], inst.T[si, i]) for i in range(inst.n)]
                mb.add_constr(row, "<=", float(inst.b[si]))
    for h in range(H):
        mb.add_constr([(u[k][h], 1.0) for k in range(K)], "=", 1.0)

    sol = solve_milp(mb.build(), gap=milp_gap)
    if sol.status != Status.OPTIMAL:
        raise SubproblemInfeasible(scenario_pool=scen)
    return float(sol.bound)


def solve(inst: KAdaptInstance, eps: float = 0.05,
          time_limit: float = 7200.0, warm_start: bool = False,
          milp_gap: float = 0.0) -> KPolicy:
    """Full Benders solve (Algorithm 1). Returns a KPolicy whose stats
    carry the status, per-iteration records, and counters.

    The gap is relative against |UB| with an absolute fallback below
    magnitude one; eps=0 solves exactly. Instances with dependent
    first-stage uncertainty are lifted automatically and the x-copies
    stripped from the returned recourses.
    """
    t0 = time.perf_counter()
    lifted = inst.first_stage is not None and inst.first_stage.omega is None
    work = lift_dependent_first_stage(inst) if lifted else inst

    xi_nom = nominal_scenario(work)
    state = MasterState()
    records: list[dict] = []
    seen: dict[frozenset, float] = {}
    scenarios_total = 0
    pool_size = 0
    sp_pools = None

    def finish(status: str) -> KPolicy:
        wall = time.perf_counter() - t0
        gap = (state.ub - state.lb) / max(1.0, abs(state.ub)) \
            if math.isfinite(state.ub) and math.isfinite(state.lb) else math.inf
        if status == "Optimal":
            gap = max(gap, 0.0)
        pol = state.incumbent
        if pol is None:
            pol = KPolicy(x=np.zeros(inst.n), recourses=[], value=math.inf, gap=math.inf)
        pol.gap = gap if status != "Infeasible" else math.inf
        pol.stats.update({
            "status": status,
            "iterations": records,
            "benders_iters": state.iteration,
            "opt_cuts": len(state.opt_cuts),
            "feas_cuts": len(state.feas_cuts),
            "scenarios": scenarios_total,
            "pool": pool_size,
            "wall_time": wall,
            "ub": state.ub,
            "lb": state.lb,
            "lifted": lifted,
        })
        return pol

    first = solve_master(state, work, xi_nom, include_theta=False, milp_gap=milp_gap)
    if first is None:
        return finish("Infeasible")
    x_bar = first[0]

    eps_sp = 0.1 * eps
    while state.iteration < MAX_ITERS:
        state.iteration += 1
        r = state.iteration
        iter_t0 = time.perf_counter()
        if time.perf_counter() - t0 > time_limit:
            return finish("TimeLimit")

        support = frozenset(i for i in range(work.n) if x_bar[i] > 0.5)
        if support in seen:
            # revisited support: its cut already prices this x exactly, so
            # the last master bound certifies the incumbent (Lemma 1)
            logger.info("support revisited at iteration %d; closing", r)
            return finish("Optimal")

        kind = "optimality"
        theta_r = math.nan
        L_r = math.nan
        sp_iters = 0
        sp = None
        try:
            sp = solve_subproblem(work, x_bar, eps=eps_sp, milp_gap=milp_gap,
                                  pools=sp_pools)
        except SubproblemInfeasible:
            kind = "feasibility"
            state.feas_cuts.append(FeasibilityCut(support=support))
        if sp is not None:
            theta_r = sp.theta
            sp_iters = sp.state.outer_iters
            scenarios_total += sp.state.scenarios_generated
            pool_size = max(pool_size, len(sp.pool))
            if warm_start:
                sp_pools = (sp.pool, sp.scen)
            try:
                L_r = compute_global_lower_bound(sp.scen, work, milp_gap=milp_gap)
            except SubproblemInfeasible as exc:
                # impossible once some x covers the pooled scenarios
                raise SolveError("global bound became infeasible after a "
                                 "feasible subproblem") from exc
            if L_r > theta_r + 1e-6:
                raise SolveError(f"global bound {L_r} above subproblem value {theta_r}")
            L_r = min(L_r, theta_r)
            state.opt_cuts.append(make_optimality_cut(x_bar, theta_r, L_r, work.n))
            seen[support] = theta_r
            cand = float(work.c @ x_bar) + worst_case_first_stage(work, x_bar) + theta_r
            if cand < state.ub:
                state.ub = cand
                recourses = [y[inst.n:].copy() if lifted else y.copy()
                             for y in sp.recourses]
                state.incumbent = KPolicy(x=x_bar.copy(), recourses=recourses,
                                          value=cand, gap=math.inf,
                                          stats={"k_eff": len(recourses)})

        master = solve_master(state, work, xi_nom, include_theta=True,
                              milp_gap=milp_gap)
        if master is None:
            if state.incumbent is None:
                return finish("Infeasible")
            state.lb = state.ub
            return finish("Optimal")
        x_next, obj, bound = master
        state.lb = max(state.lb, bound)

        records.append({
            "r": r, "support": sorted(support), "theta": theta_r, "L": L_r,
            "UB": state.ub, "LB": state.lb, "kind": kind,
            "sp_iterations": sp_iters,
            "wall": time.perf_counter() - iter_t0,
        })
        logger.info("iter %d: kind=%s theta=%.6g L=%.6g UB=%.6g LB=%.6g",
                    r, kind, theta_r, L_r, state.ub, state.lb)

        if math.isfinite(state.ub) and \
                state.ub - state.lb <= max(eps * max(1.0, abs(state.ub)), 1e-9):
            return finish("Optimal")
        x_bar = x_next
    raise SolveError("Benders loop failed to terminate")
