"""Double-oracle solver for the min-max-min subproblem at a fixed first stage.

For a fixed x the remaining problem is: pick K recourse vectors minimizing
the worst case over the scenario polytope of the cheapest prepared
recourse. The loop alternates

  1. a p-center assignment over the finite pools (choose K of the pooled
     recourses, assign each pooled scenario to one of them),
  2. adversarial scenario generation (LP: worst scenario for the chosen
     K-subset), growing the scenario pool until no violation remains, and
  3. recourse generation over the pooled scenarios (big-M MILP), growing
     the recourse pool and producing the lower bound,

until the bounds meet. Upper bounds come from step 2 (value of an
implementable subset over the whole polytope), lower bounds from step 3.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from kadapt.instances import KAdaptInstance, nominal_scenario
from kadapt.milp import ModelBuilder, Status, solve_lp, solve_milp

logger = logging.getLogger("kadapt.double_oracle")

DUP_TOL = 1e-9
IMPROVE_TOL = 1e-6
MAX_OUTER = 10000
MAX_INNER = 100000


class PoolError(ValueError):
    """Pool precondition violated (fewer pooled recourses than K)."""


class SubproblemInfeasible(Exception):
    """No K recourses cover the scenario set at this first stage."""

    def __init__(self, scenario_pool=None):
        super().__init__("subproblem infeasible at this first stage")
        self.scenario_pool = scenario_pool


@dataclass
class ScenarioPool:
    """Ordered scenario vectors, duplicate-free within inf-norm 1e-9."""

    scenarios: list[np.ndarray] = field(default_factory=list)

    def __len__(self):
        return len(self.scenarios)

    def add(self, xi: np.ndarray) -> bool:
        for old in self.scenarios:
            if np.max(np.abs(old - xi)) <= DUP_TOL:
                return False
        self.scenarios.append(xi.copy())
        return True

    def matrix(self) -> np.ndarray:
        return np.array(self.scenarios)


@dataclass
class SolutionPool:
    """Ordered 0/1 recourse vectors, duplicate-free."""

    solutions: list[np.ndarray] = field(default_factory=list)

    def __len__(self):
        return len(self.solutions)

    def add(self, y: np.ndarray) -> bool:
        y = np.round(y)
        for old in self.solutions:
            if np.array_equal(old, y):
                return False
        self.solutions.append(y)
        return True

    def matrix(self) -> np.ndarray:
        return np.array(self.solutions)


@dataclass
class DoState:
    """Bounds and bookkeeping of one subproblem solve."""

    ub: float = math.inf
    lb: float = -math.inf
    subset: tuple[int, ...] = ()
    assignment: dict = field(default_factory=dict)
    outer_iters: int = 0
    inner_iters: int = 0
    scenarios_generated: int = 0
    milp_nodes: int = 0
    history: list = field(default_factory=list)   # (ub, lb) per outer iteration


@dataclass
class SubproblemResult:
    theta: float
    recourses: list[np.ndarray]
    pool: SolutionPool
    scen: ScenarioPool
    state: DoState


def _coupling_rhs(inst: KAdaptInstance, x_bar: np.ndarray) -> np.ndarray:
    return inst.b - (inst.T @ x_bar if inst.n else np.zeros(inst.s))


def pool_cost_table(inst: KAdaptInstance, pool: SolutionPool,
                    scen: ScenarioPool) -> np.ndarray:
    """cost[j, h] = xi_h' Q y_j."""
    S = scen.matrix()                      # (H, q)
    Y = pool.matrix()                      # (J, m)
    return (S @ inst.Q @ Y.T).T


def solve_p_center(pool: SolutionPool, scen: ScenarioPool, inst: KAdaptInstance,
                   x_bar: np.ndarray, K: int | None = None,
                   forbidden: np.ndarray | None = None):
    """Best K-subset of the pool against the pooled scenarios.

    Returns (w, selected recourse indices, scenario -> index assignment).
    `forbidden[j, h]` True blocks assigning scenario h to recourse j (used
    by the constraint-uncertainty pipeline). Assignment variables are
    continuous: with the selection binary, each scenario's optimal mass
    sits on its cheapest selected recourse, so the optimum is unchanged
    and the returned assignment is integral by construction.
    """
    if K is None:
        K = inst.K
    J, H = len(pool), len(scen)
    if J < K:
        raise PoolError(f"pool has {J} recourses, need at least K={K}")
    if H < 1:
        raise PoolError("scenario pool is empty")
    cost = pool_cost_table(inst, pool, scen)
    M = inst.bilinear_bound()

    mb = ModelBuilder(name="p-center")
    w = mb.add_var(lo=-M, hi=M, obj=1.0)
    z = [mb.add_binary() for _ in range(J)]
    v = {}
    for j in range(J):
        for h in range(H):
            if forbidden is not None and forbidden[j, h]:
                continue
            v[j, h] = mb.add_var(lo=0.0, hi=1.0)
    for h in range(H):
        cols = [(v[j, h], cost[j, h]) for j in range(J) if (j, h) in v]
        if not cols and forbidden is not None:
            raise PoolError(f"scenario {h} has no feasible pooled recourse")
        mb.add_constr([(w, 1.0)] + [(idx, -c) for idx, c in cols], ">=", 0.0)
        mb.add_constr([(idx, 1.0) for idx, _ in cols], "=", 1.0)
    mb.add_constr([(zj, 1.0) for zj in z], "=", float(K))
    for (j, h), idx in v.items():
        mb.add_constr([(idx, 1.0), (z[j], -1.0)], "<=", 0.0)

    sol = solve_milp(mb.build())
    if sol.status != Status.OPTIMAL:
        raise PoolError("p-center assignment is infeasible for this pool")
    selected = tuple(j for j in range(J) if sol.values[z[j]] > 0.5)
    assignment = {}
    for h in range(H):
        allowed = [j for j in selected if (j, h) in v]
        assignment[h] = min(allowed, key=lambda j: (cost[j, h], j))
    return float(sol.objective), selected, assignment, sol.node_count


def generate_scenario(recourses: list[np.ndarray], inst: KAdaptInstance):
    """Worst scenario for fixed recourses: max over Xi of min_k xi'Q y^k.

    One LP: eta maximized under an epigraph row per recourse.
    """
    M = inst.bilinear_bound()
    mb = ModelBuilder(sense="max", name="scenario-gen")
    eta = mb.add_var(lo=-M, hi=M, obj=1.0)
    ids = inst.xi.add_vars_to(mb)
    for y in recourses:
        qy = inst.Q @ y
        mb.add_constr([(eta, 1.0)] + [(ids[l], -qy[l]) for l in range(inst.q)],
                      "<=", 0.0)
    sol = solve_lp(mb.build())
    if sol.status != Status.OPTIMAL:
        raise PoolError("scenario polytope is empty or unbounded")
    xi_new = sol.values[np.array(ids)].copy()
    return float(sol.objective), xi_new


def generate_solutions(scen: ScenarioPool, inst: KAdaptInstance,
                       x_bar: np.ndarray, K: int | None = None,
                       milp_gap: float = 0.0):
    """Optimal K fresh recourses for the pooled scenarios (big-M MILP).

    Returns (gamma, recourses, scenario -> slot assignment, valid lower
    bound, node count). Raises SubproblemInfeasible when no K recourses
    cover the pooled scenarios (possible under constraint uncertainty;
    precluded by recourse-feasible first stages otherwise).
    """
    if K is None:
        K = inst.K
    H = len(scen)
    if H < 1:
        raise PoolError("scenario pool is empty")
    M_q = inst.bilinear_bound()
    rhs = _coupling_rhs(inst, x_bar)
    S = scen.matrix()
    costs = S @ inst.Q                    # (H, m) row h = xi_h'Q

    mb = ModelBuilder(name="solution-gen")
    gamma = mb.add_var(lo=-M_q, hi=M_q, obj=1.0)
    ys = [[mb.add_binary() for _ in range(inst.m)] for _ in range(K)]
    u = [[mb.add_binary() for _ in range(H)] for _ in range(K)]
    for k in range(K):
        inst.Y.add_rows_to(mb, ys[k])
        for si in range(inst.s):
            mb.add_constr([(ys[k][j], inst.W[si, j]) for j in range(inst.m)],
                          "<=", rhs[si])
        for h in range(H):
            M_h = float(np.maximum(costs[h], 0.0).sum()) + M_q + 1.0
            row = [(ys[k][j], costs[h, j]) for j in range(inst.m)]
            row += [(gamma, -1.0), (u[k][h], M_h)]
            mb.add_constr(row, "<=", M_h)
    for h in range(H):
        mb.add_constr([(u[k][h], 1.0) for k in range(K)], "=", 1.0)

    sol = solve_milp(mb.build(), gap=milp_gap)
    if sol.status != Status.OPTIMAL:
        raise SubproblemInfeasible()
    recourses = [np.round(sol.values[np.array(ys[k])]) for k in range(K)]
    assignment = {}
    for h in range(H):
        assignment[h] = next(k for k in range(K) if sol.values[u[k][h]] > 0.5)
    return float(sol.objective), recourses, assignment, float(sol.bound), sol.node_count


def run_inner_loop(pool: SolutionPool, scen: ScenarioPool, inst: KAdaptInstance,
                   x_bar: np.ndarray, K: int | None = None,
                   state: DoState | None = None):
    """Alternate p-center and scenario generation until no scenario violates.

    Returns (w, selected indices, assignment). Scenarios are appended only
    on a strict improvement (eta > w + 1e-6); ties add nothing.
    """
    if state is None:
        state = DoState()
    for _ in range(MAX_INNER):
        state.inner_iters += 1
        w, selected, assignment, nodes = solve_p_center(pool, scen, inst, x_bar, K)
        state.milp_nodes += nodes
        eta, xi_new = generate_scenario([pool.solutions[j] for j in selected], inst)
        logger.debug("inner: w=%.6g eta=%.6g |pool|=%d |scen|=%d",
                     w, eta, len(pool), len(scen))
        if eta > w + IMPROVE_TOL:
            if scen.add(xi_new):
                state.scenarios_generated += 1
                continue
            logger.warning("violating scenario duplicates a pooled one; stopping inner loop")
        return w, selected, assignment
    raise RuntimeError("inner loop failed to terminate")


def initial_pools(inst: KAdaptInstance, x_bar: np.ndarray, K: int):
    """Nominal scenario plus up to K distinct nominal-optimal recourses.

    The recourse pool is seeded by re-solving the deterministic second
    stage under the nominal scenario with no-good cuts; if fewer than K
    distinct feasible recourses exist the effective K shrinks to the
    count found. Raises SubproblemInfeasible when there are none.
    """
    xi_nom = nominal_scenario(inst)
    scen = ScenarioPool()
    scen.add(xi_nom)
    pool = SolutionPool()
    rhs = _coupling_rhs(inst, x_bar)
    W_nom = inst.W_of(xi_nom)
    cost_nom = xi_nom @ inst.Q
    excluded: list[np.ndarray] = []
    while len(pool) < K:
        mb = ModelBuilder(name="pool-init")
        ys = [mb.add_binary(obj=cost_nom[j]) for j in range(inst.m)]
        inst.Y.add_rows_to(mb, ys)
        for si in range(inst.s):
            mb.add_constr([(ys[j], W_nom[si, j]) for j in range(inst.m)], "<=", rhs[si])
        for y_old in excluded:
            row = [(ys[j], -1.0 if y_old[j] > 0.5 else 1.0) for j in range(inst.m)]
            mb.add_constr(row, ">=", 1.0 - float(y_old.sum()))
        sol = solve_milp(mb.build())
        if sol.status != Status.OPTIMAL:
            break
        y = np.round(sol.values[: inst.m])
        pool.add(y)
        excluded.append(y)
    if len(pool) == 0:
        raise SubproblemInfeasible(scenario_pool=scen)
    return pool, scen


def solve_subproblem(inst: KAdaptInstance, x_bar: np.ndarray,
                     eps: float = 0.0, milp_gap: float = 0.0,
                     pools: tuple[SolutionPool, ScenarioPool] | None = None
                     ) -> SubproblemResult:
    """Full double-oracle solve of the subproblem at x_bar (Algorithm 2).

    `eps` is a relative gap with an absolute fallback below magnitude 1:
    the loop exits once UB - LB <= max(eps * max(1, |UB|), 1e-9). Pools
    may be passed in for warm starts; the recourse pool is filtered for
    feasibility at the new x_bar by the caller.
    """
    if inst.variant == "constraint":
        from kadapt.constraint_uncertainty import solve_subproblem_cu
        return solve_subproblem_cu(inst, x_bar, eps, milp_gap, pools)

    K = inst.K
    if pools is None:
        pool, scen = initial_pools(inst, x_bar, K)
    else:
        carried, scen = pools
        rhs = _coupling_rhs(inst, x_bar)
        pool = SolutionPool()
        for y in carried.solutions:        # re-filter feasibility at the new x
            if np.all(inst.W @ y <= rhs + 1e-7):
                pool.add(y)
        if len(pool) < K:
            seed_pool, seed_scen = initial_pools(inst, x_bar, K)
            for y in seed_pool.solutions:
                pool.add(y)
            for xi in seed_scen.scenarios:
                scen.add(xi)
        if len(scen) == 0:
            scen.add(nominal_scenario(inst))
    K_eff = min(K, len(pool))

    state = DoState()
    best_subset: tuple[int, ...] = ()
    best_assignment: dict = {}
    for _ in range(MAX_OUTER):
        state.outer_iters += 1
        w, selected, assignment = run_inner_loop(pool, scen, inst, x_bar, K_eff, state)
        if w < state.ub:
            state.ub = w
            best_subset, best_assignment = selected, assignment
        gamma, recourses, _, lb_value, nodes = generate_solutions(
            scen, inst, x_bar, K_eff, milp_gap)
        state.milp_nodes += nodes
        state.lb = max(state.lb, lb_value)
        state.history.append((state.ub, state.lb))
        logger.debug("outer %d: UB=%.6g LB=%.6g |pool|=%d |scen|=%d",
                     state.outer_iters, state.ub, state.lb, len(pool), len(scen))
        added = False
        for y in recourses:
            added |= pool.add(y)
        if state.ub - state.lb <= max(eps * max(1.0, abs(state.ub)), 1e-9):
            break
        if not added:
            # pools are saturated; bounds can no longer move (Lemma 3)
            logger.info("double oracle stalled at gap %.3g", state.ub - state.lb)
            break
    else:
        raise RuntimeError("double oracle failed to terminate")

    state.subset = best_subset
    state.assignment = best_assignment
    recourse_vecs = [pool.solutions[j].copy() for j in best_subset]
    return SubproblemResult(theta=state.ub, recourses=recourse_vecs,
                            pool=pool, scen=scen, state=state)
