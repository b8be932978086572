"""Command-line surface: generate instances, solve, benchmark, oracle-check.

    kadapt generate shortest-path --size 20 --gamma 3 --seed 1 --out sp.json
    kadapt solve sp.json --k 2 --epsilon 0.05 --time-limit 7200
    kadapt bench manifest.json --out-dir results/
    kadapt oracle-check --count 20 --seed 7

Exit codes for `solve`: 0 Optimal, 2 TimeLimit, 3 Infeasible, 1 bad input.
One JSON run record per solve goes to stdout; per-iteration trace records
go to the log (verbosity via the KADAPT_LOG environment variable).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from kadapt import benders
from kadapt.generators import (
    generate_generic_two_stage,
    generate_knapsack,
    generate_shortest_path,
)
from kadapt.instances import (
    InstanceError,
    KAdaptInstance,
    load_instance,
    save_instance,
    save_policy,
    with_constraint_uncertainty,
)
from kadapt.oracle import BudgetError, OracleBudget, brute_force_solve

logger = logging.getLogger("kadapt.cli")

CSV_COLUMNS = ["name", "family", "n", "m", "q", "K", "gamma", "status", "value",
               "gap", "time_s", "iters", "opt_cuts", "feas_cuts", "scenarios", "pool"]

DEFAULT_EPSILON = 0.05
DEFAULT_TIME_LIMIT = 7200.0


@dataclass
class RunRecord:
    name: str
    family: str
    n: int
    m: int
    q: int
    K: int
    gamma: float
    status: str
    value: float
    gap: float
    time_s: float
    iters: int
    opt_cuts: int
    feas_cuts: int
    scenarios: int
    pool: int

    def csv_row(self) -> list:
        row = asdict(self)
        out = []
        for col in CSV_COLUMNS:
            v = row[col]
            if isinstance(v, float) and math.isnan(v):
                v = ""
            out.append(v)
        return out


def _family_of(inst: KAdaptInstance) -> str:
    prefix = inst.name.split("-", 1)[0]
    return {"sp": "shortest-path", "kp": "knapsack", "gen": "generic"}.get(prefix, "custom")


def _gamma_of(inst: KAdaptInstance) -> float:
    # budget row over the deviation coordinates, if the instance has one
    for i in range(inst.xi.poly.num_rows):
        row = inst.xi.poly.A[i]
        if inst.xi.poly.senses[i] == "<=" and np.all(row >= 0) and row.sum() > 0:
            return float(inst.xi.poly.rhs[i])
    return math.nan


def _configure_logging() -> None:
    level_name = os.environ.get("KADAPT_LOG", "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(name)s %(levelname)s %(message)s")


def _solve_one(inst: KAdaptInstance, K: int | None, epsilon: float,
               time_limit: float, warm_start: bool) -> tuple[RunRecord, object]:
    from dataclasses import replace
    if K is not None and K != inst.K:
        inst = replace(inst, K=K)
        inst.validate()
    t0 = time.perf_counter()
    policy = benders.solve(inst, eps=epsilon, time_limit=time_limit,
                           warm_start=warm_start)
    elapsed = time.perf_counter() - t0
    stats = policy.stats
    record = RunRecord(
        name=inst.name, family=_family_of(inst), n=inst.n, m=inst.m, q=inst.q,
        K=inst.K, gamma=_gamma_of(inst), status=stats["status"],
        value=policy.value, gap=policy.gap, time_s=round(elapsed, 6),
        iters=stats["benders_iters"], opt_cuts=stats["opt_cuts"],
        feas_cuts=stats["feas_cuts"], scenarios=stats["scenarios"],
        pool=stats["pool"],
    )
    return record, policy


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    try:
        if args.family == "shortest-path":
            inst = generate_shortest_path(args.size, args.gamma, args.seed, K=args.k)
        elif args.family == "knapsack":
            inst = generate_knapsack(args.size, args.seed, K=args.k)
        else:
            n = args.n or args.size
            m = args.m or args.size
            inst = generate_generic_two_stage(n, m, args.gamma, args.seed, K=args.k,
                                              b=args.b, l=args.l)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = args.out or f"{inst.name}.json"
    save_instance(inst, out)
    print(out)
    return 0


def cmd_solve(args) -> int:
    try:
        inst = load_instance(args.instance)
    except (OSError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.variant is not None and args.variant != inst.variant:
        if args.variant == "constraint":
            inst = with_constraint_uncertainty(inst)
        else:
            if any(np.any(Wl) for Wl in inst.W_l):
                print("error: cannot drop nonzero constraint uncertainty",
                      file=sys.stderr)
                return 1
            from dataclasses import replace
            inst = replace(inst, variant="objective", W_l=())
            inst.validate()
    try:
        record, policy = _solve_one(inst, args.k, args.epsilon, args.time_limit,
                                    args.warm_start)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(asdict(record)))
    out = args.out or f"{args.instance}.policy.json"
    if record.status != "Infeasible" and policy.recourses:
        save_policy(policy, out)
    return {"Optimal": 0, "TimeLimit": 2, "Infeasible": 3}[record.status]


def cmd_bench(args) -> int:
    try:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out_dir, exist_ok=True)
    rows = []
    for entry in manifest:
        family = entry["family"]
        size = entry.get("size")
        gamma = float(entry.get("gamma", 0.0))
        K = int(entry.get("K", 2))
        epsilon = float(entry.get("epsilon", DEFAULT_EPSILON))
        time_limit = float(entry.get("time_limit", DEFAULT_TIME_LIMIT))
        for seed in entry["seeds"]:
            try:
                if family == "shortest-path":
                    inst = generate_shortest_path(size, gamma, seed, K=K)
                elif family == "knapsack":
                    inst = generate_knapsack(size, seed, K=K)
                elif family == "generic":
                    inst = generate_generic_two_stage(
                        entry.get("n", size), entry.get("m", size), gamma, seed,
                        K=K, b=entry.get("b"), l=entry.get("l", 0.0))
                else:
                    raise InstanceError(f"unknown family {family!r}")
                record, _ = _solve_one(inst, None, epsilon, time_limit, False)
            except Exception as exc:     # a failed row must not abort the sweep
                logger.error("row failed (family=%s seed=%s): %s", family, seed, exc)
                record = RunRecord(name=f"{family}-s{seed}", family=family,
                                   n=0, m=0, q=0, K=K, gamma=gamma, status="Error",
                                   value=math.nan, gap=math.nan, time_s=math.nan,
                                   iters=0, opt_cuts=0, feas_cuts=0, scenarios=0,
                                   pool=0)
            rows.append(record)
            print(json.dumps(asdict(record)))

    csv_path = os.path.join(args.out_dir, "results.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in rows:
            writer.writerow(rec.csv_row())

    # percent solved and mean time over solved runs, per (family, size-proxy, K)
    cells: dict = {}
    for rec in rows:
        key = (rec.family, rec.n + rec.m, rec.K)
        cells.setdefault(key, []).append(rec)
    summary = []
    for (family, size, K), recs in sorted(cells.items()):
        solved = [r for r in recs if r.status == "Optimal"]
        summary.append({
            "family": family, "size": size, "K": K, "runs": len(recs),
            "percent_solved": round(100.0 * len(solved) / len(recs), 1),
            "mean_time_solved_s": round(float(np.mean([r.time_s for r in solved])), 4)
            if solved else None,
        })
    summary_path = os.path.join(args.out_dir, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    print(csv_path)
    print(summary_path)
    return 0


def _oracle_check_cases(count: int, max_dim: int, seed: int):
    """Deterministic stream of tiny instances across families and variants."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    families = ["shortest-path", "knapsack", "generic"]
    for i in range(count):
        family = families[i % 3]
        K = int(rng.integers(1, 4))
        sub_seed = int(rng.integers(0, 2 ** 31))
        if family == "shortest-path":
            size = int(rng.integers(3, min(6, max_dim) + 1))
            inst = generate_shortest_path(size, float(rng.integers(0, 3)), sub_seed, K=K)
        elif family == "knapsack":
            size = int(rng.integers(2, min(5, max_dim) + 1))
            inst = generate_knapsack(size, sub_seed, K=K)
        else:
            n = int(rng.integers(2, min(4, max_dim) + 1))
            m = int(rng.integers(2, min(4, max_dim) + 1))
            inst = generate_generic_two_stage(
                n, m, float(rng.integers(0, 3)), sub_seed, K=K,
                b=int(rng.integers(1, n + 1)), l=float(rng.integers(0, 200)),
                dev_sign=float(rng.choice([-1.0, 1.0])))
        if i % 2 == 1:
            inst = with_constraint_uncertainty(inst)
        yield inst


def cmd_oracle_check(args) -> int:
    budget = OracleBudget(max_recourse_points=1024, max_k_subsets=2_000_000)
    failures = 0
    checked = 0
    for inst in _oracle_check_cases(args.count, args.max_dim, args.seed):
        try:
            oracle_value, _ = brute_force_solve(inst, budget=budget)
        except BudgetError as exc:
            logger.warning("oracle refused %s: %s", inst.name, exc)
            continue
        policy = benders.solve(inst, eps=args.inject_eps)
        solver_value = policy.value
        if math.isinf(oracle_value):
            ok = policy.stats["status"] == "Infeasible"
        else:
            ok = abs(solver_value - oracle_value) <= 1e-6
        checked += 1
        status = "pass" if ok else "FAIL"
        print(f"{status} {inst.name} variant={inst.variant} K={inst.K} "
              f"solver={solver_value:.9g} oracle={oracle_value:.9g}")
        if not ok:
            failures += 1
    print(f"{checked - failures}/{checked} checks passed")
    return 0 if failures == 0 else 4


def main(argv=None) -> int:
    _configure_logging()
    parser = argparse.ArgumentParser(prog="kadapt", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a benchmark instance file")
    g.add_argument("family", choices=["shortest-path", "knapsack", "generic"])
    g.add_argument("--size", type=int, default=20)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--m", type=int, default=None)
    g.add_argument("--gamma", type=float, default=3.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--b", type=int, default=None, help="first-stage cardinality (generic)")
    g.add_argument("--l", type=float, default=0.0, help="coupling threshold (generic)")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--k", type=int, default=None)
    s.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    s.add_argument("--time-limit", type=float, default=DEFAULT_TIME_LIMIT)
    s.add_argument("--seed", type=int, default=0, help="reserved; solves are deterministic")
    s.add_argument("--warm-start", action="store_true")
    s.add_argument("--variant", choices=["objective", "constraint"], default=None)
    s.add_argument("--out", default=None, help="policy file path")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run the sweep described by a manifest")
    b.add_argument("manifest")
    b.add_argument("--out-dir", default="bench-out")
    b.set_defaults(func=cmd_bench)

    o = sub.add_parser("oracle-check", help="cross-check the solver against brute force")
    o.add_argument("--count", type=int, default=20)
    o.add_argument("--max-dim", type=int, default=5)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--inject-eps", type=float, default=0.0,
                   help="negative control: loosen the solver gap to force mismatches")
    o.set_defaults(func=cmd_oracle_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
