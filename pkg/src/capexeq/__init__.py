"""Capacity-expansion equilibria for electricity markets.

Pipeline: simulate market clearing for sampled buildouts, train tree-ensemble
surrogates mapping installed capacity to per-technology operational profit,
then search each producer's profit-maximizing investment with differential
evolution inside a best-response (diagonalization) loop.  An exact-dispatch
evaluator provides the benchmark the surrogate route is validated against.
"""

__version__ = "0.1.0"

from .auction import AuctionResult, CapacityOffer, DemandSegment, clear_auction
from .dispatch import DispatchResult, PeriodResult, clear_period, payout_sweep, simulate
from .equilibrium import (
    EquilibriumResult,
    ExactProfitEvaluator,
    GencoStrategy,
    HybridProfitEvaluator,
    NashReport,
    best_response,
    diagonalize,
    exact_profit,
    hybrid_profit,
    verify_nash,
)
from .optimizer import DeConfig, SearchResult, minimize, multi_start
from .sampler import Dataset, generate_dataset, read_dataset, sample_buildouts, split_dataset, write_dataset
from .scenario import (
    Buildout,
    LoadProfile,
    Scenario,
    ScenarioError,
    Technology,
    load_scenario,
    parse_scenario,
    save_scenario,
    total_buildout,
)
from .surrogate import (
    GbtRegressor,
    ModelFormatError,
    evaluate,
    load_model,
    relative_error,
    save_model,
    scale_normalized_error,
    with_total_feature,
)

__all__ = [
    "AuctionResult",
    "Buildout",
    "CapacityOffer",
    "Dataset",
    "DeConfig",
    "DemandSegment",
    "DispatchResult",
    "EquilibriumResult",
    "ExactProfitEvaluator",
    "GbtRegressor",
    "GencoStrategy",
    "HybridProfitEvaluator",
    "LoadProfile",
    "ModelFormatError",
    "NashReport",
    "PeriodResult",
    "Scenario",
    "ScenarioError",
    "SearchResult",
    "Technology",
    "best_response",
    "clear_auction",
    "clear_period",
    "diagonalize",
    "evaluate",
    "exact_profit",
    "generate_dataset",
    "hybrid_profit",
    "load_model",
    "load_scenario",
    "minimize",
    "multi_start",
    "parse_scenario",
    "payout_sweep",
    "read_dataset",
    "relative_error",
    "sample_buildouts",
    "save_model",
    "save_scenario",
    "scale_normalized_error",
    "simulate",
    "split_dataset",
    "total_buildout",
    "verify_nash",
    "with_total_feature",
    "write_dataset",
]
