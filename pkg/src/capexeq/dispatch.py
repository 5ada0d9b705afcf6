"""Merit-order clearing of the single-balance economic dispatch market.

Each period solves the linear program

    min   sum_g C_g * q_g  +  VoLL * unmet
    s.t.  sum_g q_g + unmet = demand,   0 <= q_g <= cap_g,   unmet >= 0

whose optimum is reached by dispatching technologies in ascending marginal
cost order.  The reported price is the dual of the balance constraint; where
that dual is an interval (demand exactly equal to total capacity) we pick the
upper endpoint, i.e. VoLL.  This convention makes the market payout curve peak
exactly at the minimum load level, which is what drives capacity withholding
in the investment game.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .scenario import Buildout, Scenario

#: tolerance on the power balance identity, in MW
BALANCE_TOL = 1e-9


@dataclass(frozen=True)
class PeriodResult:
    """Outcome of one dispatch period: quantities per technology, shortfall, price."""

    quantities: dict[str, float]
    unmet: float
    price: float


@dataclass(frozen=True)
class DispatchResult:
    periods: tuple[PeriodResult, ...]
    operational_profit: dict[tuple[str, str], float]

    def total_operational_profit(self) -> float:
        return sum(self.operational_profit.values())

    def revenue(self, demands: Sequence[float]) -> float:
        """Total market payout sum_t price * served."""
        return sum(p.price * (d - p.unmet) for p, d in zip(self.periods, demands))


def clear_period(
    capacities: Mapping[str, float],
    demand: float,
    costs: Mapping[str, float],
    voll: float,
) -> PeriodResult:
    """Clear one period by merit order.

    Cost ties are broken by the iteration order of ``capacities``.  Shortage is
    a feasible outcome (priced at ``voll``), so valid inputs never fail.

    Price convention when demand is exactly met:
      * if the most expensive running technology still has headroom, it sets
        the price at its marginal cost;
      * otherwise the cheapest technology with headroom (the resource that
        would serve one more MW) sets it;
      * if no headroom remains anywhere, the price is ``voll``.
    """
    if demand <= 0:
        raise ValueError(f"demand must be > 0, got {demand}")
    for g, cap in capacities.items():
        if cap < 0:
            raise ValueError(f"capacity must be >= 0 ({g} is {cap})")
    max_cost = max(costs[g] for g in capacities) if capacities else 0.0
    if voll <= max_cost:
        raise ValueError("voll must exceed every marginal cost")

    order = sorted(capacities, key=lambda g: costs[g])  # stable: ties keep declaration order
    remaining = demand
    dispatched: dict[str, float] = {}
    for g in order:
        take = min(capacities[g], remaining)
        dispatched[g] = take
        remaining -= take
    unmet = max(remaining, 0.0)

    if unmet > 0.0:
        price = voll
    else:
        running = [g for g in order if dispatched[g] > 0.0]
        marginal = running[-1]
        if dispatched[marginal] < capacities[marginal]:
            price = costs[marginal]
        else:
            headroom = [g for g in order if capacities[g] - dispatched[g] > 0.0]
            price = costs[headroom[0]] if headroom else voll

    quantities = {g: dispatched[g] for g in capacities}
    return PeriodResult(quantities=quantities, unmet=unmet, price=price)


def simulate(scenario: Scenario, buildout: Buildout) -> DispatchResult:
    """Clear every load period for the given buildout.

    Capacity is pooled per technology across regions (there is no network in
    this model); each technology's energy margin sum_t (price - cost) * q is
    then attributed to (region, technology) pairs pro-rata by capacity.
    """
    pairs = scenario.pairs
    missing = [p for p in pairs if p not in buildout.capacity]
    if missing:
        raise ScenarioKeyError(missing)

    tech_caps = {t.id: 0.0 for t in scenario.technologies}
    for (region, tech), mw in buildout.capacity.items():
        if (region, tech) not in pairs:
            raise ScenarioKeyError([(region, tech)])
        tech_caps[tech] += mw
    costs = {t.id: t.marginal_cost for t in scenario.technologies}

    periods = []
    tech_profit = {t.id: 0.0 for t in scenario.technologies}
    for d in scenario.load.demand:
        res = clear_period(tech_caps, d, costs, scenario.voll)
        periods.append(res)
        for g, q in res.quantities.items():
            tech_profit[g] += (res.price - costs[g]) * q

    op_profit: dict[tuple[str, str], float] = {}
    for region, tech in pairs:
        cap = tech_caps[tech]
        share = buildout.capacity[(region, tech)] / cap if cap > 0 else 0.0
        op_profit[(region, tech)] = tech_profit[tech] * share
    return DispatchResult(periods=tuple(periods), operational_profit=op_profit)


class ScenarioKeyError(KeyError):
    def __init__(self, missing):
        super().__init__(f"buildout does not cover (region, technology) pairs: {missing}")


# --- fast kernel for optimization loops ------------------------------------

class DispatchKernel:
    """Precompiled view of a scenario for cheap repeated dispatch evaluations.

    Works on plain float lists in technology declaration order and avoids all
    dict handling; results are identical to :func:`simulate`.
    """

    def __init__(self, scenario: Scenario):
        self.costs = [t.marginal_cost for t in scenario.technologies]
        self.order = sorted(range(len(self.costs)), key=lambda i: self.costs[i])
        self.demands = scenario.load.demand
        self.voll = scenario.voll

    def tech_profits(self, caps: Sequence[float]) -> list[float]:
        """Energy margin per technology for the given per-technology MW."""
        profits = [0.0] * len(caps)
        for d in self.demands:
            price, quantities = self._clear(caps, d)
            for i, q in enumerate(quantities):
                if q > 0.0:
                    profits[i] += (price - self.costs[i]) * q
        return profits

    def period_prices(self, caps: Sequence[float]) -> list[float]:
        return [self._clear(caps, d)[0] for d in self.demands]

    def revenue(self, caps: Sequence[float]) -> float:
        total = 0.0
        for d in self.demands:
            price, quantities = self._clear(caps, d)
            total += price * sum(quantities)
        return total

    def _clear(self, caps: Sequence[float], demand: float) -> tuple[float, list[float]]:
        remaining = demand
        quantities = [0.0] * len(caps)
        for i in self.order:
            take = caps[i] if caps[i] < remaining else remaining
            quantities[i] = take
            remaining -= take
        if remaining > 0.0:
            return self.voll, quantities
        marginal = -1
        for i in self.order:
            if quantities[i] > 0.0:
                marginal = i
        if marginal >= 0 and quantities[marginal] < caps[marginal]:
            return self.costs[marginal], quantities
        for i in self.order:
            if caps[i] - quantities[i] > 0.0:
                return self.costs[i], quantities
        return self.voll, quantities


def payout_sweep(
    scenario: Scenario,
    totals: Sequence[float],
    weights: Sequence[float] | None = None,
) -> list[tuple[float, float, float]]:
    """Market payout along a ray of increasing total capacity.

    ``totals`` are system-wide MW figures; each is split across technologies
    by ``weights`` (default: proportional to the sampling upper bounds).  The
    technology dispatched last in merit order receives the residual, computed
    with the same sequence of subtractions the dispatch loop performs, so a
    sweep point equal to a load level balances that period exactly.  Returns
    (total, revenue, operational_profit) rows.
    """
    kern = DispatchKernel(scenario)
    n_tech = len(scenario.technologies)
    if weights is None:
        hi_per_tech = [0.0] * n_tech
        for i, (_, tech) in enumerate(scenario.pairs):
            t_idx = [t.id for t in scenario.technologies].index(tech)
            hi_per_tech[t_idx] += scenario.sampling_bounds[i][1]
        weights = hi_per_tech
    total_w = sum(weights)
    if total_w <= 0:
        raise ValueError("sweep weights must have a positive sum")
    frac = [w / total_w for w in weights]

    rows = []
    for total in totals:
        caps = [total * frac[i] for i in range(n_tech)]
        residual = total
        for i in kern.order[:-1]:
            residual -= caps[i]
        caps[kern.order[-1]] = max(residual, 0.0)
        profits = kern.tech_profits(caps)
        rows.append((total, kern.revenue(caps), sum(profits)))
    return rows


def write_periods_csv(result: DispatchResult, demands: Sequence[float], path: str | Path) -> None:
    """Dump per-period dispatch results: period, demand, price, unmet, q_<tech>..."""
    techs = list(result.periods[0].quantities) if result.periods else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "demand", "price", "unmet"] + [f"q_{g}" for g in techs])
        for t, (p, d) in enumerate(zip(result.periods, demands), start=1):
            writer.writerow([t, repr(float(d)), repr(p.price), repr(p.unmet)] + [repr(p.quantities[g]) for g in techs])
