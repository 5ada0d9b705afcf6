"""Differential evolution over box-constrained continuous vectors.

DE/rand/1/bin with generation-synchronous (deferred) selection: mutation
v = x_a + F * (x_b - x_c), binomial crossover with one forced coordinate,
greedy replacement.  Out-of-box trial coordinates are clipped to the
boundary, which also lets the population settle exactly on bound-active
optima.  Everything is driven by one integer seed, so results are

reproducible regardless of how objective evaluations are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np


@dataclass
class DeConfig:
    """Search settings; ``population`` defaults to 10x the dimension (min 4)."""

    bounds: Sequence[tuple[float, float]]
    population: int | None = None
    weight: float = 0.8
    crossover: float = 0.9
    max_generations: int = 1000
    tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if len(self.bounds) == 0:
            raise ValueError("bounds must not be empty")
        for lo, hi in self.bounds:
            if lo > hi:
                raise ValueError(f"bound [{lo}, {hi}] has lo > hi")
        if self.population is not None and self.population < 4:
            raise ValueError("population must be >= 4")
        if not 0.0 < self.weight <= 2.0:
            raise ValueError("weight must lie in (0, 2]")
        if not 0.0 <= self.crossover <= 1.0:
            raise ValueError("crossover must lie in [0, 1]")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")

    def resolved_population(self) -> int:
        if self.population is not None:
            return self.population
        return max(4, 10 * len(self.bounds))


@dataclass
class SearchResult:
    best_x: np.ndarray
    best_f: float
    generations_used: int
    history: list[float] = field(default_factory=list)


def _evaluate(objective: Callable, points: np.ndarray) -> np.ndarray:
    """Evaluate a batch of points; uses ``objective.evaluate_batch`` when offered."""
    batch = getattr(objective, "evaluate_batch", None)
    if batch is not None:
        return np.asarray(batch(points), dtype=float)
    return np.array([float(objective(x)) for x in points], dtype=float)


def minimize(objective: Callable[[np.ndarray], float], config: DeConfig) -> SearchResult:
    """Minimize a deterministic objective over the configured box.

    Terminates at ``max_generations`` or as soon as the spread of population
    objective values drops below ``tolerance``; running out of budget is a
    normal return, not an error.
    """
    rng = np.random.default_rng(config.seed)
    lo = np.array([b[0] for b in config.bounds], dtype=float)
    hi = np.array([b[1] for b in config.bounds], dtype=float)
    dim = len(config.bounds)
    np_size = config.resolved_population()

    pop = rng.uniform(lo, hi, size=(np_size, dim))
    fvals = _evaluate(objective, pop)
    history = [float(fvals.min())]

    generations = 0
    for _ in range(config.max_generations):
        generations += 1
        trials = np.empty_like(pop)
        for i in range(np_size):
            choices = [j for j in range(np_size) if j != i]
            a, b, c = rng.choice(choices, size=3, replace=False)
            mutant = pop[a] + config.weight * (pop[b] - pop[c])
            np.clip(mutant, lo, hi, out=mutant)
            cross = rng.random(dim) < config.crossover
            cross[rng.integers(dim)] = True  # at least one coordinate from the mutant
            trials[i] = np.where(cross, mutant, pop[i])
        trial_f = _evaluate(objective, trials)
        better = trial_f <= fvals
        pop[better] = trials[better]
        fvals[better] = trial_f[better]
        history.append(float(fvals.min()))
        if float(fvals.max() - fvals.min()) < config.tolerance:
            break

    best = int(np.argmin(fvals))
    return SearchResult(
        best_x=pop[best].copy(),
        best_f=float(fvals[best]),
        generations_used=generations,
        history=history,
    )


def derived_seed(seed: int, *key: int) -> int:
    """Deterministic child seed for independent sub-searches."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *key])
    return int(ss.generate_state(1, np.uint64)[0])


def multi_start(
    objective: Callable[[np.ndarray], float],
    config: DeConfig,
    n_starts: int = 1,
) -> SearchResult:
    """Best result over independent DE runs with derived seeds.

    Start 0 reuses ``config.seed`` unchanged, so ``n_starts=1`` is exactly
    :func:`minimize`.  Runs are independent, hence safe to execute in any
    order or in parallel without changing the outcome.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    best: SearchResult | None = None
    for k in range(n_starts):
        cfg = config if k == 0 else replace(config, seed=derived_seed(config.seed, k))
        result = minimize(objective, cfg)
        if best is None or result.best_f < best.best_f:
            best = result
    return best
