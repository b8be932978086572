"""Benchmark instance generators: shortest path, knapsack, generic two-stage.

All randomness flows from one 64-bit seed through numpy's SeedSequence,
so identical seeds reproduce identical instances byte for byte.
"""

from __future__ import annotations

import math

import numpy as np

from kadapt.instances import (
    InstanceError,
    KAdaptInstance,
    Polytope,
    XiSet,
)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def _budget_xi(num_dev: int, gamma: float) -> XiSet:
    """xi0 = 1 frozen, deviations in [0,1]^num_dev with sum <= gamma."""
    q = 1 + num_dev
    row = np.zeros((1, q))
    row[0, 1:] = 1.0
    lo = np.zeros(q)
    hi = np.ones(q)
    lo[0] = 1.0
    return XiSet(Polytope(row, ("<=",), np.array([float(gamma)])), lo, hi)


def generate_shortest_path(num_nodes: int, gamma: float, seed: int,
                           K: int = 2, max_retries: int = 20) -> KAdaptInstance:
    """Adaptive shortest path on a random layered digraph.

    Arc costs are nominal + deviation (c_bar in U(1,100), c_hat = c_bar/2)
    under a budgeted scenario set of size gamma. Pure MMMRCO: no actual
    first-stage decision; recourse vectors are s-t unit flows.
    """
    if num_nodes < 2:
        raise InstanceError("need at least source and sink")
    if gamma < 0:
        raise InstanceError("gamma must be nonnegative")
    rng = _rng(seed)
    for _ in range(max_retries):
        arcs = _sample_layered_arcs(num_nodes, rng)
        if _has_path(num_nodes, arcs):
            break
    else:
        raise InstanceError("no s-t path after resampling")

    num_arcs = len(arcs)
    c_bar = rng.uniform(1.0, 100.0, num_arcs)
    c_hat = c_bar / 2.0

    # flow conservation: inflow - outflow = -1 at source, +1 at sink, 0 else
    A = np.zeros((num_nodes, num_arcs))
    for a, (u, v) in enumerate(arcs):
        A[v, a] += 1.0
        A[u, a] -= 1.0
    rhs = np.zeros(num_nodes)
    rhs[0] = -1.0
    rhs[num_nodes - 1] = 1.0
    Y = Polytope(A, ("=",) * num_nodes, rhs)

    q = 1 + num_arcs
    Q = np.zeros((q, num_arcs))
    Q[0, :] = c_bar
    Q[1:, :] = np.diag(c_hat)

    inst = KAdaptInstance(
        name=f"sp-v{num_nodes}-g{gamma:g}-s{seed}",
        variant="objective",
        n=0, m=num_arcs, q=q, s=0, K=K,
        c=np.zeros(0),
        Q=Q,
        T=np.zeros((0, 0)),
        W=np.zeros((0, num_arcs)),
        b=np.zeros(0),
        X=Polytope.empty(0),
        Y=Y,
        xi=_budget_xi(num_arcs, gamma),
        xi0=True,
        seed=seed,
    )
    inst.validate()
    return inst


def _sample_layered_arcs(num_nodes: int, rng: np.random.Generator):
    """Layered digraph from node 0 to node num_nodes-1; interior nodes are
    split into roughly sqrt-sized layers, consecutive layers densely but
    randomly wired, every node kept on some s-t path."""
    interior = list(range(1, num_nodes - 1))
    if not interior:
        return [(0, num_nodes - 1)]
    num_layers = max(1, int(round(math.sqrt(len(interior)))))
    layers = [list() for _ in range(num_layers)]
    for idx, node in enumerate(interior):
        layers[idx % num_layers].append(node)
    chain = [[0]] + [lay for lay in layers if lay] + [[num_nodes - 1]]

    arcs = set()
    for left, right in zip(chain[:-1], chain[1:]):
        for u in left:
            for v in right:
                if rng.random() < 0.7:
                    arcs.add((u, v))
        for u in left:                       # every node reaches the next layer
            if not any((u, v) in arcs for v in right):
                arcs.add((u, right[int(rng.integers(0, len(right)))]))
        for v in right:
            if not any((u, v) in arcs for u in left):
                arcs.add((left[int(rng.integers(0, len(left)))], v))
    return sorted(arcs)


def _has_path(num_nodes: int, arcs) -> bool:
    adj: dict[int, list[int]] = {}
    for u, v in arcs:
        adj.setdefault(u, []).append(v)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return (num_nodes - 1) in seen


def generate_knapsack(n: int, seed: int, K: int = 2,
                      num_factors: int | None = None,
                      weight_range: tuple[float, float] = (10.0, 100.0),
                      profit_range: tuple[float, float] = (10.0, 100.0),
                      budget_fraction: float = 0.35) -> KAdaptInstance:
    """Adaptive knapsack with factor-model profit uncertainty.

    Profits follow p_i = (1 + sum_j Phi_ij xi_j / 2) p_bar_i with factor
    loadings L1-normalized per item and xi in the [-1,1] factor hypercube,
    so each realized profit stays within [p_bar/2, 3 p_bar/2]. Stored as a
    minimization with negated profits; pure MMMRCO (no first stage).
    """
    if n < 1:
        raise InstanceError("need at least one item")
    rng = _rng(seed)
    if num_factors is None:
        num_factors = max(1, math.ceil(n / 10))
    weights = np.round(rng.uniform(*weight_range, n))
    budget = math.floor(budget_fraction * weights.sum())
    p_bar = rng.uniform(*profit_range, n)
    phi = rng.uniform(-1.0, 1.0, (n, num_factors))
    phi /= np.abs(phi).sum(axis=1, keepdims=True)

    Y = Polytope(weights.reshape(1, n), ("<=",), np.array([float(budget)]))

    q = 1 + num_factors
    Q = np.zeros((q, n))
    Q[0, :] = -p_bar
    Q[1:, :] = -(phi * p_bar[:, None]).T / 2.0

    lo = np.concatenate([[1.0], -np.ones(num_factors)])
    hi = np.ones(q)
    xi = XiSet(Polytope.empty(q), lo, hi)

    inst = KAdaptInstance(
        name=f"kp-n{n}-s{seed}",
        variant="objective",
        n=0, m=n, q=q, s=0, K=K,
        c=np.zeros(0),
        Q=Q,
        T=np.zeros((0, 0)),
        W=np.zeros((0, n)),
        b=np.zeros(0),
        X=Polytope.empty(0),
        Y=Y,
        xi=xi,
        xi0=True,
        seed=seed,
    )
    inst.validate()
    return inst


def generate_generic_two_stage(n: int, m: int, gamma: float, seed: int,
                               K: int = 2, b: int | None = None,
                               l: float = 0.0,
                               dev_sign: float = -1.0) -> KAdaptInstance:
    """Two-stage instance with cardinality first stage and one coupling row.

    First-stage costs a_i ~ U(8,12); recourse costs c_j = c_bar_j +
    dev_sign * xi_j * c_hat_j with c_bar ~ U(8,12) and deviations at 25%
    of nominal; sum_i x_i = b (default min(10, n)); coupling row
    sum_i d_i x_i + sum_j f_j y_j >= l with d ~ U(50,100), f ~ U(80,90).
    """
    if n < 1 or m < 1:
        raise InstanceError("need n, m >= 1")
    if b is None:
        b = min(10, n)
    if b > n or b < 0:
        raise InstanceError(f"cardinality b={b} infeasible for n={n}")
    rng = _rng(seed)
    c_bar = rng.uniform(8.0, 12.0, m)
    c_hat = 0.25 * c_bar
    a = rng.uniform(8.0, 12.0, n)
    d = rng.uniform(50.0, 100.0, n)
    f = rng.uniform(80.0, 90.0, m)

    X = Polytope(np.ones((1, n)), ("=",), np.array([float(b)]))
    Y = Polytope.empty(m)

    # coupling sum d_i x_i + sum f_j y_j >= l as T x + W y <= b_row
    T = -d.reshape(1, n)
    W = -f.reshape(1, m)
    b_row = np.array([-float(l)])

    q = 1 + m
    Q = np.zeros((q, m))
    Q[0, :] = c_bar
    Q[1:, :] = dev_sign * np.diag(c_hat)

    inst = KAdaptInstance(
        name=f"gen-n{n}-m{m}-g{gamma:g}-s{seed}",
        variant="objective",
        n=n, m=m, q=q, s=1, K=K,
        c=a,
        Q=Q,
        T=T,
        W=W,
        b=b_row,
        X=X,
        Y=Y,
        xi=_budget_xi(m, gamma),
        xi0=True,
        seed=seed,
    )
    inst.validate()
    return inst


FAMILIES = {
    "shortest-path": generate_shortest_path,
    "knapsack": generate_knapsack,
    "generic": generate_generic_two_stage,
}
