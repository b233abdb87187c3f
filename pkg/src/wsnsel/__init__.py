"""Sparse sensor, relay, and link selection for multihop sensor networks.

Pipelines: generate a Scenario, run a reweighted-l1 selection method
(ssls / ssrls / linksel) on a structured interior-point solver, verify the
output independently, and validate it in a slotted-time routing simulator.
"""

from .model import (
    GenConfig,
    ReliabilityParams,
    Scenario,
    SingularInformation,
    build_edges,
    generate_scenario,
    info_matrix,
    mse_rate,
    mse_rate_grad,
    mse_rate_hess,
    reliability,
)
from .selection import (
    SelectConfig,
    SelectionInfeasible,
    Solution,
    linksel,
    reweight_update,
    ssls,
    ssrls,
    threshold,
)
from .simulate import SimConfig, SimReport, blue_estimate, simulate_routing
from .solver import (
    NumericalBreakdown,
    SolveResult,
    SolverConfig,
    Status,
    StructuredProblem,
    solve,
)
from .verify import VerifyReport, check_connectivity, flow_residuals, verify_all
from .metrics import (
    MCConfig,
    MetricsRow,
    active_percentages,
    band_percentages,
    monte_carlo,
    p_alp,
    p_trr,
)

__all__ = [
    "GenConfig",
    "MCConfig",
    "MetricsRow",
    "NumericalBreakdown",
    "ReliabilityParams",
    "Scenario",
    "SelectConfig",
    "SelectionInfeasible",
    "SimConfig",
    "SimReport",
    "SingularInformation",
    "Solution",
    "SolveResult",
    "SolverConfig",
    "Status",
    "StructuredProblem",
    "VerifyReport",
    "active_percentages",
    "band_percentages",
    "blue_estimate",
    "build_edges",
    "check_connectivity",
    "flow_residuals",
    "generate_scenario",
    "info_matrix",
    "linksel",
    "monte_carlo",
    "mse_rate",
    "mse_rate_grad",
    "mse_rate_hess",
    "p_alp",
    "p_trr",
    "reliability",
    "reweight_update",
    "simulate_routing",
    "solve",
    "ssls",
    "ssrls",
    "threshold",
    "verify_all",
]

__version__ = "0.1.0"
