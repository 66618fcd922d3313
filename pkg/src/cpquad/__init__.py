"""Approximation schemes for binary programs with low cp-rank quadratic constraints."""
from .convex import FractionalSolution, Infeasible, RelaxationSpec, solve_relaxation
from .coverlin import cover_bound, cover_lin_qptas, greedy_cover
from .factorize import (
    CPFactorization,
    FactorizeBudget,
    NotFound,
    adjust_capacities,
    cp_factorize,
    ensure_factors,
    shift_factorization,
)
from .geometry import (
    InscribedPolytope,
    KnapsackSystem,
    build_inscribed_polytope,
    find_improving_bfs,
    knapsack_reduction,
    project,
    space_partition,
)
from .instance import (
    BinarySolution,
    CoverageObjective,
    InstanceSpec,
    LinearObjective,
    ProblemInstance,
    ProductObjective,
    QuadraticConstraint,
    QuadraticObjective,
    SumRatioObjective,
    evaluate_objective,
    generate_instance,
    load_instance,
    save_instance,
)
from .multiobj import bmpp_ptas, bqcqp_ptas, pareto_opt, sum_ratio_ptas
from .oracle import brute_force_opt, brute_force_pareto
from .packlin import pack_lin_ptas
from .packsub import drop_choice, mdks_solve, pack_partition, pack_sub_approx, qc_construct

__all__ = [
    "BinarySolution", "CPFactorization", "CoverageObjective", "FactorizeBudget", "FractionalSolution",
    "Infeasible", "InscribedPolytope", "InstanceSpec", "KnapsackSystem", "LinearObjective", "NotFound",
    "ProblemInstance", "ProductObjective", "QuadraticConstraint", "QuadraticObjective", "RelaxationSpec",
    "SumRatioObjective", "adjust_capacities", "bmpp_ptas", "bqcqp_ptas", "brute_force_opt",
    "brute_force_pareto", "build_inscribed_polytope", "cover_bound", "cover_lin_qptas", "cp_factorize",
    "drop_choice", "ensure_factors", "evaluate_objective", "find_improving_bfs", "generate_instance",
    "greedy_cover", "knapsack_reduction", "load_instance", "mdks_solve", "pack_lin_ptas", "pack_partition",
    "pack_sub_approx", "pareto_opt", "project", "qc_construct", "save_instance", "shift_factorization",
    "solve_relaxation", "space_partition", "sum_ratio_ptas",
]
