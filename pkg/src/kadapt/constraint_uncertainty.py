"""Subproblem pipeline when scenarios also hit the coupling constraints.

With W(xi) = W0 + sum_l xi_l W_l, whether a prepared recourse is feasible
depends on the realized scenario, so every step of the double oracle
changes: the p-center assignment must block recourse/scenario pairs that
violate the coupling, scenario generation gets violation indicators that
let the adversary discount recourses it can render infeasible, and
recourse generation activates the coupling rows only on assigned pairs.
When no K recourses can cover the pooled scenarios the subproblem is
infeasible at this first stage and the caller emits a feasibility cut.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from kadapt.double_oracle import (
    DoState,
    PoolError,
    ScenarioPool,
    SolutionPool,
    SubproblemInfeasible,
    SubproblemResult,
    initial_pools,
    solve_p_center,
)
from kadapt.instances import KAdaptInstance
from kadapt.milp import ModelBuilder, Status, solve_milp

logger = logging.getLogger("kadapt.constraint_uncertainty")

IMPROVE_TOL = 1e-6
MAX_OUTER = 10000
MAX_INNER = 100000


class PoolExhausted(PoolError):
    """Some pooled scenario cannot be covered by the pooled recourses."""


@dataclass(frozen=True)
class AffineConstraintMap:
    """Coupling matrix as an affine map of the scenario: W0 + sum xi_l W_l."""

    W0: np.ndarray
    W_l: tuple[np.ndarray, ...]

    @staticmethod
    def from_instance(inst: KAdaptInstance) -> "AffineConstraintMap":
        if len(inst.W_l) != inst.q:
            raise ValueError("need one W_l matrix per scenario coordinate")
        return AffineConstraintMap(W0=inst.W, W_l=inst.W_l)

    def at(self, xi: np.ndarray) -> np.ndarray:
        out = self.W0.copy()
        for l, Wl in enumerate(self.W_l):
            if xi[l]:
                out = out + xi[l] * Wl
        return out


def _coupling_rhs(inst, x_bar):
    return inst.b - (inst.T @ x_bar if inst.n else np.zeros(inst.s))


def _row_magnitudes(inst: KAdaptInstance, x_bar: np.ndarray) -> np.ndarray:
    """Interval bound per coupling row on |W(xi) y - (b - T x)| over the
    scenario box and binary y."""
    box = np.maximum(np.abs(inst.xi.lo), np.abs(inst.xi.hi))
    mag = np.abs(inst.W).sum(axis=1).astype(float)
    for l, Wl in enumerate(inst.W_l):
        mag += box[l] * np.abs(Wl).sum(axis=1)
    return mag + np.abs(_coupling_rhs(inst, x_bar))


def pair_feasibility(inst: KAdaptInstance, pool: SolutionPool,
                     scen: ScenarioPool, x_bar: np.ndarray,
                     tol: float = 1e-7) -> np.ndarray:
    """ok[j, h] = recourse j satisfies W(xi_h) y_j <= b - T x_bar."""
    rhs = _coupling_rhs(inst, x_bar)
    ok = np.ones((len(pool), len(scen)), dtype=bool)
    for h, xi in enumerate(scen.scenarios):
        W = inst.W_of(xi)
        for j, y in enumerate(pool.solutions):
            lhs = W @ y
            if np.any(lhs > rhs + tol * np.maximum(1.0, np.abs(rhs))):
                ok[j, h] = False
    return ok


def solve_p_center_cu(pool: SolutionPool, scen: ScenarioPool,
                      inst: KAdaptInstance, x_bar: np.ndarray,
                      K: int | None = None):
    """p-center with infeasible recourse/scenario pairs blocked.

    Raises PoolExhausted when some pooled scenario has no feasible pooled
    recourse, or when no K-selection can cover every scenario.
    """
    ok = pair_feasibility(inst, pool, scen, x_bar)
    uncovered = np.where(~ok.any(axis=0))[0]
    if uncovered.size:
        raise PoolExhausted(f"scenario {int(uncovered[0])} has no feasible pooled recourse")
    try:
        return solve_p_center(pool, scen, inst, x_bar, K, forbidden=~ok)
    except PoolExhausted:
        raise
    except PoolError as exc:
        if len(pool) < (K or inst.K):
            raise
        raise PoolExhausted(str(exc)) from exc


def generate_scenario_cu(recourses: list[np.ndarray], inst: KAdaptInstance,
                         x_bar: np.ndarray):
    """Worst scenario when the adversary may also break feasibility.

    MILP with one violation indicator per recourse and coupling row;
    lambda^k aggregates them ("any row violated"), and only recourses
    with lambda^k = 0 bound the adversary's objective. An epsilon slack
    keeps exact-boundary rows counted as feasible. Returns
    (eta, scenario, lambda values).
    """
    K = len(recourses)
    M_q = inst.bilinear_bound()
    rhs = _coupling_rhs(inst, x_bar)
    eps_rows = 1e-4 * (1.0 + _row_magnitudes(inst, x_bar))
    M_eta = 2.0 * M_q + 1.0

    mb = ModelBuilder(sense="max", name="scenario-gen-cu")
    eta = mb.add_var(lo=-M_q, hi=M_q + M_eta + 1.0, obj=1.0)
    ids = inst.xi.add_vars_to(mb)
    lam = [mb.add_binary() for _ in range(K)]
    box_lo, box_hi = inst.xi.lo, inst.xi.hi
    for k, y in enumerate(recourses):
        qy = inst.Q @ y
        mb.add_constr([(eta, 1.0)] + [(ids[l], -qy[l]) for l in range(inst.q)]
                      + [(lam[k], -M_eta)], "<=", 0.0)
        deltas = []
        w0y = inst.W @ y
        coeff = np.array([Wl @ y for Wl in inst.W_l])     # (q, s)
        for si in range(inst.s):
            d = mb.add_binary()
            deltas.append(d)
            # delta = 1 forces row si violated by eps at the chosen scenario:
            # sum_l coeff[l,si] xi_l + w0y[si] >= rhs[si] + eps - M (1 - delta)
            lin_lo = float(np.minimum(coeff[:, si] * box_lo,
                                      coeff[:, si] * box_hi).sum())
            c0 = rhs[si] + eps_rows[si] - w0y[si]
            M_row = max(c0 - lin_lo, 0.0) + 1.0
            row = [(ids[l], coeff[l, si]) for l in range(inst.q)]
            row.append((d, -M_row))
            mb.add_constr(row, ">=", c0 - M_row)
            mb.add_constr([(lam[k], 1.0), (d, -1.0)], ">=", 0.0)
        mb.add_constr([(lam[k], 1.0)] + [(d, -1.0) for d in deltas], "<=", 0.0)

    sol = solve_milp(mb.build())
    if sol.status != Status.OPTIMAL:
        raise PoolError("constraint-uncertainty scenario generation failed")
    xi_new = sol.values[np.array(ids)].copy()
    lambdas = np.array([round(sol.values[l]) for l in lam])
    return float(sol.objective), xi_new, lambdas


def generate_solutions_cu(scen: ScenarioPool, inst: KAdaptInstance,
                          x_bar: np.ndarray, K: int | None = None,
                          milp_gap: float = 0.0):
    """K fresh recourses with coupling rows active on assigned pairs only.

    Raises SubproblemInfeasible when no K recourses cover the pooled
    scenarios; the Benders layer then cuts off this first stage.
    """
    if K is None:
        K = inst.K
    H = len(scen)
    if H < 1:
        raise PoolError("scenario pool is empty")
    M_q = inst.bilinear_bound()
    rhs = _coupling_rhs(inst, x_bar)
    S = scen.matrix()
    costs = S @ inst.Q

    mb = ModelBuilder(name="solution-gen-cu")
    gamma = mb.add_var(lo=-M_q, hi=M_q, obj=1.0)
    ys = [[mb.add_binary() for _ in range(inst.m)] for _ in range(K)]
    u = [[mb.add_binary() for _ in range(H)] for _ in range(K)]
    W_h = [inst.W_of(xi) for xi in scen.scenarios]
    for k in range(K):
        inst.Y.add_rows_to(mb, ys[k])
        for h in range(H):
            M_cost = float(np.maximum(costs[h], 0.0).sum()) + M_q + 1.0
            row = [(ys[k][j], costs[h, j]) for j in range(inst.m)]
            row += [(gamma, -1.0), (u[k][h], M_cost)]
            mb.add_constr(row, "<=", M_cost)
            for si in range(inst.s):
                M_row = max(float(np.maximum(W_h[h][si], 0.0).sum()) - rhs[si], 0.0) + 1.0
                crow = [(ys[k][j], W_h[h][si, j]) for j in range(inst.m)]
                crow.append((u[k][h], M_row))
                mb.add_constr(crow, "<=", rhs[si] + M_row)
    for h in range(H):
        mb.add_constr([(u[k][h], 1.0) for k in range(K)], "=", 1.0)

    sol = solve_milp(mb.build(), gap=milp_gap)
    if sol.status != Status.OPTIMAL:
        raise SubproblemInfeasible(scenario_pool=scen)
    recourses = [np.round(sol.values[np.array(ys[k])]) for k in range(K)]
    assignment = {h: next(k for k in range(K) if sol.values[u[k][h]] > 0.5)
                  for h in range(H)}
    return float(sol.objective), recourses, assignment, float(sol.bound), sol.node_count


def run_inner_loop_cu(pool: SolutionPool, scen: ScenarioPool,
                      inst: KAdaptInstance, x_bar: np.ndarray,
                      K: int, state: DoState, milp_gap: float = 0.0):
    """Inner loop with pool-exhaustion repaired by recourse generation."""
    for _ in range(MAX_INNER):
        state.inner_iters += 1
        try:
            w, selected, assignment, nodes = solve_p_center_cu(pool, scen, inst, x_bar, K)
        except PoolExhausted:
            gamma, recourses, _, lb_value, nodes = generate_solutions_cu(
                scen, inst, x_bar, K, milp_gap)
            state.milp_nodes += nodes
            state.lb = max(state.lb, lb_value)
            added = False
            for y in recourses:
                added |= pool.add(y)
            if not added:
                raise RuntimeError("pool exhausted but recourse generation was stale")
            continue
        state.milp_nodes += nodes
        eta, xi_new, lambdas = generate_scenario_cu(
            [pool.solutions[j] for j in selected], inst, x_bar)
        logger.debug("inner-cu: w=%.6g eta=%.6g lambda=%s |pool|=%d |scen|=%d",
                     w, eta, lambdas.tolist(), len(pool), len(scen))
        if lambdas.all():
            # found a scenario killing every selected recourse; pool it and
            # let p-center / recourse generation react
            if scen.add(xi_new):
                state.scenarios_generated += 1
                continue
            raise RuntimeError("all-infeasible scenario already pooled")
        if eta > w + IMPROVE_TOL:
            if scen.add(xi_new):
                state.scenarios_generated += 1
                continue
            logger.warning("violating scenario duplicates a pooled one; stopping inner loop")
        return w, selected, assignment
    raise RuntimeError("inner loop failed to terminate")


def solve_subproblem_cu(inst: KAdaptInstance, x_bar: np.ndarray,
                        eps: float = 0.0, milp_gap: float = 0.0,
                        pools=None) -> SubproblemResult:
    """Double oracle under constraint uncertainty.

    Same bound logic as the objective-only loop; SubproblemInfeasible
    propagates to the Benders layer, which answers with a feasibility cut.
    """
    K = inst.K
    if pools is None:
        pool, scen = initial_pools(inst, x_bar, K)
    else:
        pool, scen = pools
        if len(pool) < K:
            try:
                seed_pool, seed_scen = initial_pools(inst, x_bar, K)
            except SubproblemInfeasible as exc:
                exc.scenario_pool = scen if len(scen) else exc.scenario_pool
                raise
            for y in seed_pool.solutions:
                pool.add(y)
            for xi in seed_scen.scenarios:
                scen.add(xi)
    K_eff = min(K, len(pool))

    state = DoState()
    best_subset: tuple[int, ...] = ()
    best_assignment: dict = {}
    for _ in range(MAX_OUTER):
        state.outer_iters += 1
        w, selected, assignment = run_inner_loop_cu(
            pool, scen, inst, x_bar, K_eff, state, milp_gap)
        if w < state.ub:
            state.ub = w
            best_subset, best_assignment = selected, assignment
        gamma, recourses, _, lb_value, nodes = generate_solutions_cu(
            scen, inst, x_bar, K_eff, milp_gap)
        state.milp_nodes += nodes
        state.lb = max(state.lb, lb_value)
        state.history.append((state.ub, state.lb))
        logger.debug("outer-cu %d: UB=%.6g LB=%.6g |pool|=%d |scen|=%d",
                     state.outer_iters, state.ub, state.lb, len(pool), len(scen))
        added = False
        for y in recourses:
            added |= pool.add(y)
        if state.ub - state.lb <= max(eps * max(1.0, abs(state.ub)), 1e-9):
            break
        if not added:
            logger.info("double oracle (cu) stalled at gap %.3g", state.ub - state.lb)
            break
    else:
        raise RuntimeError("double oracle failed to terminate")

    state.subset = best_subset
    state.assignment = best_assignment
    recourse_vecs = [pool.solutions[j].copy() for j in best_subset]
    return SubproblemResult(theta=state.ub, recourses=recourse_vecs,
                            pool=pool, scen=scen, state=state)
