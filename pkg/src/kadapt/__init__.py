"""K-adaptability two-stage robust optimization with binary recourse.

Solves min_x c'x + max_xi min_k xi'Q y^k over K prepared recourse
decisions via logic-based Benders decomposition; the min-max-min
subproblem is handled by a double-oracle loop of p-center assignment,
adversarial scenario generation and recourse-solution generation.

    from kadapt import generate_shortest_path, solve

    inst = generate_shortest_path(20, gamma=3.0, seed=1, K=2)
    policy = solve(inst, eps=0.05)
    print(policy.value, policy.stats["status"])
"""

from kadapt.benders import solve
from kadapt.generators import (
    generate_generic_two_stage,
    generate_knapsack,
    generate_shortest_path,
)
from kadapt.instances import (
    FirstStageUncertainty,
    InstanceError,
    KAdaptInstance,
    KPolicy,
    Polytope,
    XiSet,
    binary_expand,
    lift_dependent_first_stage,
    load_instance,
    load_policy,
    save_instance,
    save_policy,
    with_constraint_uncertainty,
)
from kadapt.milp import (
    BINARY,
    CONTINUOUS,
    MilpModel,
    MilpSolution,
    ModelBuilder,
    ModelError,
    Status,
    export_lp_text,
    solve_lp,
    solve_milp,
)
from kadapt.oracle import OracleBudget, brute_force_solve

__all__ = [
    "BINARY",
    "CONTINUOUS",
    "FirstStageUncertainty",
    "InstanceError",
    "KAdaptInstance",
    "KPolicy",
    "MilpModel",
    "MilpSolution",
    "ModelBuilder",
    "ModelError",
    "OracleBudget",
    "Polytope",
    "Status",
    "XiSet",
    "binary_expand",
    "brute_force_solve",
    "export_lp_text",
    "generate_generic_two_stage",
    "generate_knapsack",
    "generate_shortest_path",
    "lift_dependent_first_stage",
    "load_instance",
    "load_policy",
    "save_instance",
    "save_policy",
    "solve",
    "solve_lp",
    "solve_milp",
    "with_constraint_uncertainty",
]

__version__ = "0.1.0"
