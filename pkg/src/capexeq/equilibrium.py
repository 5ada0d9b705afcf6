"""Investment equilibrium search: best responses and Gauss-Seidel sweeps.

Each producer's investment problem is a box-constrained maximization of its
profit given everybody else's capacity.  Profit comes from one of two
interchangeable evaluators:

* ``benchmark`` - exact dispatch of the candidate system; each technology's
  energy margin is allocated to producers pro-rata by owned capacity.
* ``hybrid`` - trained tree-ensemble surrogates predict each technology's
  total margin from the capacity vector; a producer receives its ownership
  share of the prediction.

A Nash equilibrium is searched by diagonalization: producers are visited in
index order, each replacing its strategy with a best response found by
multi-start differential evolution, until no strategy moves by more than a
tolerance over a full sweep.  The DE seed of each producer is held fixed
across sweeps, so an unchanged environment reproduces the same best response
exactly and fixed points are detected crisply.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .dispatch import DispatchKernel
from .optimizer import DeConfig, derived_seed, multi_start
from .scenario import Scenario
from .surrogate import TOTAL_FEATURE as surrogate_total_name
from .surrogate import GbtRegressor, with_total_feature


@dataclass(frozen=True)
class GencoStrategy:
    """Invested MW per (region, technology) for one producer."""

    invest: dict[tuple[str, str], float]

    def as_array(self, pairs: Sequence[tuple[str, str]]) -> np.ndarray:
        return np.array([self.invest[p] for p in pairs], dtype=float)

    @staticmethod
    def from_array(pairs: Sequence[tuple[str, str]], values) -> "GencoStrategy":
        return GencoStrategy(dict(zip(pairs, (float(v) for v in values))))

    def total_mw(self) -> float:
        return float(sum(self.invest.values()))


@dataclass(frozen=True)
class TracePoint:
    sweep: int
    objectives: tuple[float, ...]
    total_mw: float


@dataclass
class EquilibriumResult:
    strategies: tuple[GencoStrategy, ...]
    converged: bool
    sweeps: int
    trace: tuple[TracePoint, ...]
    evaluator_kind: str

    def invest_matrix(self, pairs: Sequence[tuple[str, str]]) -> np.ndarray:
        return np.array([s.as_array(pairs) for s in self.strategies])

    def total_invested_mw(self) -> float:
        return float(sum(s.total_mw() for s in self.strategies))


@dataclass
class NashReport:
    incumbent_profits: tuple[float, ...]
    best_response_profits: tuple[float, ...]
    gains: tuple[float, ...]
    relative_gains: tuple[float, ...]
    certified: bool
    deviations: tuple[GencoStrategy, ...]

    def max_relative_gain(self) -> float:
        return max(self.relative_gains)


class _Negated:
    """Minimization view of a profit function; keeps any batch fast path."""

    def __init__(self, inner):
        self._inner = inner
        batch = getattr(inner, "evaluate_batch", None)
        if batch is not None:
            self.evaluate_batch = lambda X: -np.asarray(batch(X))

    def __call__(self, x):
        return -float(self._inner(x))


class ExactProfitEvaluator:
    """Producer profit from exact dispatch of the candidate system."""

    kind = "benchmark"

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.kernel = DispatchKernel(scenario)
        pairs = scenario.pairs
        self.capex = np.array([scenario.technology(g).capex for _, g in pairs])
        self.fom = np.array([scenario.technology(g).fom for _, g in pairs])
        self.existing = np.array(scenario.existing, dtype=float)
        tech_ids = [t.id for t in scenario.technologies]
        self.tech_index = np.array([tech_ids.index(g) for _, g in pairs])
        self.n_tech = len(tech_ids)

    def bind(self, genco: int, all_invest: np.ndarray):
        all_invest = np.asarray(all_invest, dtype=float)
        rivals_owned = self.existing.sum(axis=0) + all_invest.sum(axis=0) \
            - self.existing[genco] - all_invest[genco]
        own_existing = self.existing[genco]

        def profit(x: np.ndarray) -> float:
            x = np.asarray(x, dtype=float)
            owned = own_existing + x
            total = rivals_owned + owned
            tech_caps = np.bincount(self.tech_index, weights=total, minlength=self.n_tech)
            margins = self.kernel.tech_profits(tech_caps.tolist())
            value = 0.0
            for p, t in enumerate(self.tech_index):
                if tech_caps[t] > 0.0 and owned[p] > 0.0:
                    value += margins[t] * owned[p] / tech_caps[t]
            return float(value - self.capex @ x - self.fom @ owned)

        return profit

    def profit(self, genco: int, invest, all_invest) -> float:
        return self.bind(genco, np.asarray(all_invest, dtype=float))(invest)


class HybridProfitEvaluator:
    """Producer profit from surrogate-predicted technology margins.

    ``models`` maps every (region, technology) pair to a fitted
    :class:`GbtRegressor` whose features are the scenario's capacity vector.
    A producer's value from a pair with zero total capacity is zero (its
    owned share is zero as well, so there is nothing to divide).
    """

    kind = "hybrid"

    def __init__(self, scenario: Scenario, models: Mapping[tuple[str, str], GbtRegressor]):
        self.scenario = scenario
        pairs = scenario.pairs
        missing = [p for p in pairs if p not in models]
        if missing:
            raise ValueError(f"no surrogate model for (region, technology) pairs: {missing}")
        base_names = scenario.feature_names
        aug_names = base_names + (surrogate_total_name,)
        self._augmented = None
        for p in pairs:
            names = tuple(models[p].feature_names_)
            if names == base_names:
                augmented = False
            elif names == aug_names:
                augmented = True
            else:
                raise ValueError(
                    f"model for {p} was trained on features {names}, "
                    f"scenario expects {base_names} (optionally plus '{surrogate_total_name}')"
                )
            if self._augmented is None:
                self._augmented = augmented
            elif self._augmented != augmented:
                raise ValueError("surrogate models disagree on the derived total feature")
        self.models = [models[p] for p in pairs]
        self._heads = [(m.base_score_, m.learning_rate, m._packed) for m in self.models]
        self.capex = np.array([scenario.technology(g).capex for _, g in pairs])
        self.fom = np.array([scenario.technology(g).fom for _, g in pairs])
        self.existing = np.array(scenario.existing, dtype=float)

    def bind(self, genco: int, all_invest: np.ndarray):
        all_invest = np.asarray(all_invest, dtype=float)
        rivals_owned = self.existing.sum(axis=0) + all_invest.sum(axis=0) \
            - self.existing[genco] - all_invest[genco]
        own_existing = self.existing[genco]
        heads = self._heads
        capex = self.capex
        fom = self.fom
        augmented = self._augmented

        class _Objective:
            @staticmethod
            def evaluate_batch(X: np.ndarray) -> np.ndarray:
                X = np.asarray(X, dtype=float)
                owned = own_existing + X
                total = rivals_owned + owned
                share = np.zeros_like(total)
                np.divide(owned, total, out=share, where=total > 0.0)
                design = with_total_feature(total) if augmented else total
                value = np.zeros(X.shape[0])
                for p, (base, lr, packed) in enumerate(heads):
                    theta = base + lr * packed.leaf_sum(design)
                    value += theta * share[:, p]
                return value - X @ capex - owned @ fom

            def __call__(self, x) -> float:
                return float(self.evaluate_batch(np.asarray(x, dtype=float)[None, :])[0])

        return _Objective()

    def profit(self, genco: int, invest, all_invest) -> float:
        return self.bind(genco, np.asarray(all_invest, dtype=float))(invest)


def best_response(
    evaluator,
    genco: int,
    all_invest: np.ndarray,
    de_config: DeConfig,
    n_starts: int = 3,
) -> tuple[np.ndarray, float]:
    """Maximize one producer's profit with rivals frozen; returns (invest, profit)."""
    objective = _Negated(evaluator.bind(genco, all_invest))
    result = multi_start(objective, de_config, n_starts)
    return result.best_x, -result.best_f


def _resolve_de(scenario: Scenario, de_config: DeConfig | None) -> DeConfig:
    bounds = scenario.invest_bounds()
    if de_config is None:
        return DeConfig(bounds=bounds)
    return replace(de_config, bounds=bounds)


def diagonalize(
    scenario: Scenario,
    evaluator,
    initial: np.ndarray | Sequence[GencoStrategy] | None = None,
    epsilon: float = 0.5,
    max_sweeps: int = 20,
    de_config: DeConfig | None = None,
    n_starts: int = 3,
    seed: int = 0,
) -> EquilibriumResult:
    """Best-response sweeps in producer index order until strategies settle.

    Convergence means no coordinate of any producer's strategy moved by
    ``epsilon`` MW or more during the last sweep.  Running out of sweeps is
    reported through ``converged=False``, never raised.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    pairs = scenario.pairs
    J = scenario.genco_count
    if initial is None:
        X = np.zeros((J, len(pairs)))
    elif isinstance(initial, np.ndarray):
        X = initial.astype(float).copy()
    else:
        X = np.array([s.as_array(pairs) for s in initial])
    if X.shape != (J, len(pairs)):
        raise ValueError(f"initial strategies must have shape {(J, len(pairs))}")

    base_cfg = _resolve_de(scenario, de_config)
    existing_mw = float(np.array(scenario.existing).sum())

    trace = []
    converged = False
    sweeps = 0
    for sweep in range(1, max_sweeps + 1):
        sweeps = sweep
        previous = X.copy()
        for j in range(J):
            cfg = replace(base_cfg, seed=derived_seed(seed, j))
            X[j], _ = best_response(evaluator, j, X, cfg, n_starts=n_starts)
        objectives = tuple(evaluator.bind(j, X)(X[j]) for j in range(J))
        trace.append(TracePoint(sweep, objectives, existing_mw + float(X.sum())))
        if float(np.max(np.abs(X - previous))) < epsilon:
            converged = True
            break

    return EquilibriumResult(
        strategies=tuple(GencoStrategy.from_array(pairs, row) for row in X),
        converged=converged,
        sweeps=sweeps,
        trace=tuple(trace),
        evaluator_kind=evaluator.kind,
    )


def verify_nash(
    scenario: Scenario,
    evaluator,
    strategies: np.ndarray | Sequence[GencoStrategy],
    delta: float = 1e-3,
    de_config: DeConfig | None = None,
    n_starts: int = 3,
    seed: int = 0,
) -> NashReport:
    """Re-solve every producer's problem; certify if nobody gains more than ``delta``.

    ``delta`` is relative: a producer's improvement is measured against the
    magnitude of its incumbent profit (floored at one currency unit).
    """
    pairs = scenario.pairs
    if isinstance(strategies, np.ndarray):
        X = strategies.astype(float)
    else:
        X = np.array([s.as_array(pairs) for s in strategies])
    base_cfg = _resolve_de(scenario, de_config)

    incumbents = []
    bests = []
    deviations = []
    for j in range(scenario.genco_count):
        incumbents.append(evaluator.bind(j, X)(X[j]))
        cfg = replace(base_cfg, seed=derived_seed(seed, 7000 + j))
        dev, val = best_response(evaluator, j, X, cfg, n_starts=n_starts)
        bests.append(val)
        deviations.append(GencoStrategy.from_array(pairs, dev))

    gains = tuple(b - i for b, i in zip(bests, incumbents))
    rel = tuple(g / max(abs(i), 1.0) for g, i in zip(gains, incumbents))
    return NashReport(
        incumbent_profits=tuple(incumbents),
        best_response_profits=tuple(bests),
        gains=gains,
        relative_gains=rel,
        certified=all(r <= delta for r in rel),
        deviations=tuple(deviations),
    )


def exact_profit(scenario: Scenario, genco: int, invest, all_invest) -> float:
    """One-off benchmark profit; builds a fresh evaluator (fine outside loops)."""
    return ExactProfitEvaluator(scenario).profit(genco, invest, all_invest)


def hybrid_profit(
    scenario: Scenario,
    models: Mapping[tuple[str, str], GbtRegressor],
    genco: int,
    invest,
    all_invest,
) -> float:
    """One-off surrogate profit; builds a fresh evaluator (fine outside loops)."""
    return HybridProfitEvaluator(scenario, models).profit(genco, invest, all_invest)
