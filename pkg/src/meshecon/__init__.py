"""Economics of peer-to-peer wireless relaying.

Closed-form expected utilities per role under no-peering, unpriced peering,
and competitively priced peering; free-entry and club-optimal density
solvers; and a torus-lattice Monte Carlo simulator that realizes the same
model discretely for cross-validation.
"""

from .errors import (
    BoundaryOptimum,
    NoCrossing,
    NumericsError,
    ParamError,
    SimulationError,
)
from .model import (
    CostFunction,
    ModelParams,
    RadioParams,
    channels_per_cell,
    connect_probability,
    default_params,
    distance_cdf,
    distance_pdf,
    hop_distance,
    intermediate_count,
    max_peers,
    nodes_within,
    params_from_dict,
    params_from_json,
    params_from_kv,
    params_to_dict,
    params_to_json,
    params_to_kv,
    path_loss,
    read_params_file,
    shannon_capacity,
    validate,
)
from .regimes import (
    Choice,
    ConnectionChoice,
    Regime,
    RegimeUtilities,
    REGIME_ORDER,
    competitive_price,
    eu_no_peering,
    eu_peering_no_transfers,
    eu_peering_perfcomp,
    integrate,
    intermediate_best_response,
    leapfrog_profitable,
    leapfrog_threshold,
    originator_choice,
    originator_savings,
    price_bounds,
    regime_utilities,
    social_cost,
    value_added,
)
from .equilibrium import (
    DensityBracket,
    EquilibriumKind,
    EquilibriumResult,
    RegimeComparison,
    club_optimal_density,
    compare_regimes,
    congestion_scaling_exponent,
    default_bracket,
    free_entry_density,
    total_eu,
)
from .simulator import (
    ComparisonRecord,
    ConnectionEvent,
    Lattice,
    SimConfig,
    SimOutcome,
    build_lattice,
    estimate_vs_analytic,
    lattice_exact_means,
    route_greedy,
    run_instant,
    sample_demand,
)

__version__ = "0.1.0"
