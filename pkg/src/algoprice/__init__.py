"""Equilibrium engine for duopoly pricing algorithms.

Submodules:

- ``demand``: profit models, price grids, regularity checks, calibration
- ``dynamics``: coupled price iteration and cycle handling
- ``two_price``: analytic classification and brute-force enumeration of
  Markov equilibria in the two-price game
- ``multi_price``: transition-policy verification on larger price grids
- ``spe``: subgame-perfect payoff sets by set-valued fixed-point iteration
- ``market_sim``: continuous-time Monte Carlo validation of the reduction
- ``cli``: the ``algoprice`` command-line interface
"""

__version__ = "0.1.0"

from .demand import (
    DiscreteChoiceDemand,
    ExplicitMatrix,
    LinearDemand,
    PriceGrid,
    calibrate_discrete_choice,
    normalized_table,
    payoff_matrix,
    pd_normalize,
    profit,
    regularity_report,
)
from .dynamics import (
    Algorithm,
    Cycle,
    CyclePolicy,
    FixedPair,
    consistent_pairs,
    cycle_value,
    iterate,
    select_pair,
)
from .market_sim import (
    SimConfig,
    effective_beta,
    effective_beta_discrete,
    experimentation_bound,
    monte_carlo,
)
from .multi_price import (
    PayoffTables,
    TransitionMatrix,
    payoffs_from_transitions,
    verify_equilibrium,
)
from .two_price import (
    EquilibriumType,
    MarkovProfile,
    classify_mpe,
    enumerate_mpe,
    kernel_backend,
    monopoly_unique_sufficient,
    outcome_of,
    scan_region,
    type3_beta_window,
)

__all__ = [
    "__version__",
    "Algorithm", "Cycle", "CyclePolicy", "FixedPair",
    "DiscreteChoiceDemand", "ExplicitMatrix", "LinearDemand", "PriceGrid",
    "EquilibriumType", "MarkovProfile", "PayoffTables", "SimConfig",
    "TransitionMatrix",
    "calibrate_discrete_choice", "classify_mpe", "consistent_pairs",
    "cycle_value", "effective_beta", "effective_beta_discrete",
    "enumerate_mpe", "experimentation_bound", "iterate", "kernel_backend",
    "monopoly_unique_sufficient", "monte_carlo", "normalized_table",
    "outcome_of", "payoff_matrix", "payoffs_from_transitions",
    "pd_normalize", "profit", "regularity_report", "scan_region",
    "select_pair", "type3_beta_window", "verify_equilibrium",
]
