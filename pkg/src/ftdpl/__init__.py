"""Online optimization with long-term non-convex constraints by a double-perturbed leader."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DomainError,
    DualPerturbationSchedule,
    InstanceSpec,
    ParameterError,
    PerturbationVector,
    PrimalBox,
    cumulative_perturbed_objective,
    evaluate_lagrangian,
    evaluate_perturbed,
    sample_perturbation,
)
from .oracle import (  # noqa: E402
    GlobalSearchConfig,
    MinimaxSolution,
    dual_argmax,
    hindsight_solve,
    minimize_primal,
    primal_objective,
)
from .online import (  # noqa: E402
    AlgorithmParams,
    OnlineTrace,
    binary_search_select,
    ftdpl_step,
    ftpl_baseline_step,
    run_online,
    run_replication,
    sesc_regret,
    wesc_regret,
)
