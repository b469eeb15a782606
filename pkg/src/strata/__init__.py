"""Trait-based modeling and task assignment for heterogeneous agent teams.

The package models a team as species with stochastic trait summaries,
propagates task assignments as continuous-time population dynamics on a
task graph, optimizes switching rates so the aggregated traits meet a
target distribution, and measures team diversity.  See the README for the
CLI and file formats.
"""

from .baseline import BinaryBootstrap, binary_target, binary_trait_matrix, solve_baseline
from .diversity import (
    CombinationRelation,
    MinspeciesResult,
    coverspecies,
    eigenspecies,
    nonneg_integer_combination,
)
from .dynamics import (
    TOL,
    AbstractState,
    RatePlan,
    TaskGraph,
    Tolerances,
    TraitDistribution,
    build_rate_matrix,
    build_task_graph,
    matrix_exponential,
    propagate,
    simulate_agents,
    trait_covariance,
    trait_distribution,
    trait_mean,
    trait_variance,
)
from .errors import (
    BoundTooLarge,
    DefectiveMatrix,
    DimensionMismatch,
    EmptyTeam,
    IndexOutOfRange,
    InvalidScenario,
    InvariantViolation,
    NegativeEntry,
    NegativeRate,
    NumericalFailure,
    ParseError,
    RateAboveCeiling,
    SchemaVersionMismatch,
    StrataError,
    UnknownEdge,
    ZeroMeanTrait,
    ZeroTarget,
)
from .experiments import (
    BenchParams,
    BenchReport,
    MetricSeries,
    mismatch_metrics,
    random_scenario,
    run_benchmark,
)
from .model import (
    TraitKind,
    TraitModel,
    binarize_noncumulative,
    build_trait_model,
    sample_trait_matrix,
)
from .optimizer import (
    ConstraintGradients,
    GoalFunction,
    GradientWorkspace,
    OptimizerConfig,
    SolveReport,
    constraint_gradients,
    error_exact,
    error_minimum,
    error_steady,
    solve,
    variance_norm,
)
from .scenario import Scenario, fixture_path, load_scenario, save_scenario

__version__ = "0.1.0"

__all__ = [
    "AbstractState",
    "BenchParams",
    "BenchReport",
    "BinaryBootstrap",
    "BoundTooLarge",
    "CombinationRelation",
    "ConstraintGradients",
    "DefectiveMatrix",
    "DimensionMismatch",
    "EmptyTeam",
    "GoalFunction",
    "GradientWorkspace",
    "IndexOutOfRange",
    "InvalidScenario",
    "InvariantViolation",
    "MetricSeries",
    "MinspeciesResult",
    "NegativeEntry",
    "NegativeRate",
    "NumericalFailure",
    "OptimizerConfig",
    "ParseError",
    "RateAboveCeiling",
    "RatePlan",
    "Scenario",
    "SchemaVersionMismatch",
    "SolveReport",
    "StrataError",
    "TaskGraph",
    "TOL",
    "Tolerances",
    "TraitDistribution",
    "TraitKind",
    "TraitModel",
    "UnknownEdge",
    "ZeroMeanTrait",
    "ZeroTarget",
    "binarize_noncumulative",
    "binary_target",
    "binary_trait_matrix",
    "build_rate_matrix",
    "build_task_graph",
    "build_trait_model",
    "constraint_gradients",
    "coverspecies",
    "eigenspecies",
    "error_exact",
    "error_minimum",
    "error_steady",
    "fixture_path",
    "load_scenario",
    "matrix_exponential",
    "mismatch_metrics",
    "nonneg_integer_combination",
    "propagate",
    "random_scenario",
    "run_benchmark",
    "sample_trait_matrix",
    "save_scenario",
    "simulate_agents",
    "solve",
    "solve_baseline",
    "trait_covariance",
    "trait_distribution",
    "trait_mean",
    "trait_variance",
    "variance_norm",
]
