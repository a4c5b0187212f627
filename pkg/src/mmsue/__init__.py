"""Multi-modal stochastic user equilibrium, incentive design and profit sharing."""

from .bargaining import ProviderMap, SharingResult, asymmetric_nash, equal_split, provider_profits
from .demand_choice import (
    AssignmentModel,
    LinkCostModel,
    LinkProfitModel,
    NonlinearProfitModel,
    PassengerClass,
    SatisfactionMode,
    TableDemand,
    TanhDemand,
    assign,
    demand,
    link_cost,
    logit_probs,
    route_utility,
    satisfaction,
)
from .equilibrium import (
    EquilibriumResult,
    MsaConfig,
    StepSchedule,
    msa_solve,
    property_continuity,
    property_monotonicity,
    residual,
)
from .errors import (
    DomainError,
    InvalidHyperpath,
    MmsueError,
    NoSurplus,
    NotConverged,
    NumericalFailure,
    SchemaError,
    Unreachable,
    Unsupported,
)
from .generators import GeneratorConfig, barabasi_albert, chengdu_fixture, k_shortest_hyperpaths, random_scenario
from .incentive import (
    IncentiveBox,
    IncentiveResult,
    QpConfig,
    TwoTimescaleConfig,
    assignment_jacobian,
    psi_qp,
    total_profit,
    two_timescale,
)
from .network import (
    ElementaryPath,
    Hyperpath,
    IncidenceData,
    Link,
    Mode,
    Network,
    Node,
    build_incidence,
    enumerate_paths,
    validate_network,
)
from .scenario import Scenario, SolverSettings

__version__ = "0.1.0"
