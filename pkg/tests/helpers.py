"""Independent oracles and instance generators shared by the test modules.

Everything here deliberately avoids the library's own algorithms: dispatch is
checked by exhaustive integer enumeration, the auction by incremental greedy
filling on a fine quantity grid.
"""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np

from capexeq.auction import CapacityOffer, DemandSegment
from capexeq.scenario import LoadProfile, Scenario, Technology

REPO_ROOT = Path(__file__).resolve().parent.parent
STYLIZED_PATH = REPO_ROOT / "scenarios" / "stylized.yaml"


def brute_force_dispatch_cost(caps: dict, demand: float, costs: dict, voll: float) -> float:
    """Exhaustive search over all integer dispatch allocations (small instances)."""
    names = list(caps)
    best = voll * demand  # serve nothing
    for alloc in itertools.product(*(range(int(caps[g]) + 1) for g in names)):
        served = sum(alloc)
        if served > demand:
            continue
        cost = sum(q * costs[g] for q, g in zip(alloc, names)) + voll * (demand - served)
        best = min(best, cost)
    return best


def random_dispatch_instance(rng: np.random.Generator):
    n_tech = int(rng.integers(1, 4))
    names = [f"t{i}" for i in range(n_tech)]
    caps = {g: float(rng.integers(0, 11)) for g in names}
    costs = {g: float(np.round(rng.uniform(0.0, 50.0), 3)) for g in names}
    demand = float(rng.integers(1, 21))
    voll = 100.0
    return caps, demand, costs, voll


def dispatch_objective(result, costs: dict, voll: float) -> float:
    return sum(q * costs[g] for g, q in result.quantities.items()) + voll * result.unmet


def auction_welfare_oracle(segments, offers, step: float = 0.01) -> float:
    """Welfare maximum from incremental greedy filling on a 0.01-MW grid.

    The demand side is filled greedily by marginal value and the supply side
    by ascending effective ask, which is optimal for this separable concave
    problem.  Welfare is integrated exactly inside every stretch where the
    active segment and offer stay the same, and the running maximum also
    checks each stretch's interior stationary point, so breakpoints between
    grid nodes cannot hide the optimum.
    """
    supply = sorted(
        ((o.bid / o.derate, o.derate * o.pmax) for o in offers if o.derate > 0),
        key=lambda t: t[0],
    )
    q_max = min(sum(w for _, w in supply), sum(s.max_quantity for s in segments))
    filled = [0.0] * len(segments)
    demand_value = 0.0
    supply_cost = 0.0
    supply_idx = 0
    supply_used = 0.0
    best = 0.0

    def advance(dq: float) -> None:
        nonlocal demand_value, supply_cost, supply_idx, supply_used, best
        while dq > 1e-15:
            cand, cand_v = None, -np.inf
            for c, seg in enumerate(segments):
                if filled[c] < seg.max_quantity - 1e-15:
                    v = seg.price_intercept + seg.slope * filled[c]
                    if v > cand_v:
                        cand, cand_v = c, v
            if cand is None or supply_idx >= len(supply):
                return
            seg = segments[cand]
            d = filled[cand]
            ask, width = supply[supply_idx]
            if width - supply_used <= 1e-15:
                if supply_idx + 1 >= len(supply):
                    return
                supply_idx += 1
                supply_used = 0.0
                continue
            take = min(dq, seg.max_quantity - d, width - supply_used)
            welfare_now = demand_value - supply_cost
            if seg.slope < 0.0 and cand_v > ask:
                u = (cand_v - ask) / (-seg.slope)  # interior stationary point
                if u < take:
                    best = max(
                        best,
                        welfare_now + (cand_v - ask) * u + seg.slope * u * u / 2.0,
                    )
            demand_value += seg.price_intercept * take + seg.slope * (d * take + take * take / 2.0)
            supply_cost += ask * take
            filled[cand] = d + take
            supply_used += take
            best = max(best, demand_value - supply_cost)
            dq -= take

    q = 0.0
    while q + step <= q_max + 1e-12:
        advance(step)
        q += step
    if q_max - q > 1e-12:
        advance(q_max - q)
    return best


def random_auction_instance(rng: np.random.Generator):
    n_seg = int(rng.integers(1, 4))
    n_off = int(rng.integers(0, 5))
    segments = []
    for _ in range(n_seg):
        a = float(np.round(rng.uniform(5.0, 100.0), 2))
        slope = 0.0 if rng.random() < 0.3 else -float(np.round(rng.uniform(0.01, 2.0), 3))
        width = float(np.round(rng.uniform(0.0, 40.0), 1))
        segments.append(DemandSegment(a, slope, width))
    offers = []
    for _ in range(n_off):
        offers.append(
            CapacityOffer(
                bid=float(np.round(rng.uniform(0.0, 80.0), 2)),
                pmax=float(np.round(rng.uniform(1.0, 40.0), 1)),
                derate=float(np.round(rng.uniform(0.3, 1.0), 2)),
            )
        )
    return segments, offers


def stylized_scenario() -> Scenario:
    """The three-producer system from ``scenarios/stylized.yaml``, built in code."""
    return Scenario(
        technologies=(
            Technology("ST", 2.0, 15.0, 300.0),
            Technology("CT", 3.0, 9.9, 200.0),
            Technology("CCGT", 4.0, 10.0, 100.0),
        ),
        genco_count=3,
        regions=("main",),
        load=LoadProfile((1493.0, 1471.0, 1440.0, 1421.0, 1428.0, 1462.0,
                          1507.0, 1529.0, 1549.0, 1581.0, 1593.0, 1597.0)),
        voll=1000.0,
        name="stylized",
    )


def mini_scenario() -> Scenario:
    """Tiny two-producer system for fast CLI / integration tests."""
    return Scenario(
        technologies=(
            Technology("A", 1.0, 5.0, 60.0),
            Technology("B", 2.0, 4.0, 40.0),
        ),
        genco_count=2,
        regions=("main",),
        load=LoadProfile((100.0, 120.0, 90.0, 110.0)),
        voll=50.0,
        name="mini",
    )
