"""Game definition: technologies, producers, regions, loads and economics.

A :class:`Scenario` is the immutable description of one capacity-expansion
game.  It is normally loaded from a YAML file (see ``scenarios/stylized.yaml``
in the repository root for a complete example) and shared read-only by every
other module.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml


class ScenarioError(ValueError):
    """Configuration could not be parsed or violates a model invariant."""


@dataclass(frozen=True)
class Technology:
    """One generation technology with its cost data.

    Costs are in abstract currency units: ``marginal_cost`` per MWh produced,
    ``capex`` per MW of new build, ``fom`` per MW owned (fixed O&M).
    ``invest_limit`` caps what a single producer may add, in MW.
    """

    id: str
    marginal_cost: float
    capex: float
    invest_limit: float
    fom: float = 0.0

    def __post_init__(self):
        if not self.id:
            raise ScenarioError("technology id must be a non-empty string")
        if self.marginal_cost < 0:
            raise ScenarioError(f"technology {self.id}: marginal_cost must be >= 0")
        if self.capex < 0:
            raise ScenarioError(f"technology {self.id}: capex must be >= 0")
        if self.fom < 0:
            raise ScenarioError(f"technology {self.id}: fom must be >= 0")
        if self.invest_limit <= 0:
            raise ScenarioError(f"technology {self.id}: invest_limit must be > 0")


@dataclass(frozen=True)
class LoadProfile:
    """Demand in MW for each operational period."""

    demand: tuple[float, ...]

    def __post_init__(self):
        if len(self.demand) == 0:
            raise ScenarioError("load profile needs at least one period")
        for t, d in enumerate(self.demand):
            if d <= 0:
                raise ScenarioError(f"load profile: demand must be > 0 (period {t + 1} is {d})")

    def __len__(self) -> int:
        return len(self.demand)


@dataclass(frozen=True)
class Buildout:
    """System-wide installed capacity in MW, keyed by (region, technology)."""

    capacity: dict[tuple[str, str], float]

    def __post_init__(self):
        for key, mw in self.capacity.items():
            if mw < 0:
                raise ScenarioError(f"buildout: capacity must be >= 0 ({key} is {mw})")

    def as_array(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [self.capacity[p] for p in pairs]

    @staticmethod
    def from_array(pairs: Sequence[tuple[str, str]], values: Iterable[float]) -> "Buildout":
        return Buildout(dict(zip(pairs, (float(v) for v in values))))

    def total_mw(self) -> float:
        return sum(self.capacity.values())


@dataclass(frozen=True)
class Scenario:
    """Full game definition: who can build what, and what the market looks like.

    ``existing`` holds each producer's pre-installed MW per (region, technology)
    pair, indexed like :attr:`pairs`; the stylized case starts everyone at zero.
    ``sampling_bounds`` are the per-pair [lo, hi] intervals used when drawing
    random buildouts for surrogate training.
    """

    technologies: tuple[Technology, ...]
    genco_count: int
    regions: tuple[str, ...]
    load: LoadProfile
    voll: float
    existing: tuple[tuple[float, ...], ...] = ()
    sampling_bounds: tuple[tuple[float, float], ...] = ()
    name: str = "scenario"

    def __post_init__(self):
        if len(self.technologies) == 0:
            raise ScenarioError("scenario needs at least one technology")
        ids = [t.id for t in self.technologies]
        if len(set(ids)) != len(ids):
            raise ScenarioError("technology ids must be unique")
        if self.genco_count < 1:
            raise ScenarioError("genco count must be >= 1")
        if len(self.regions) == 0:
            raise ScenarioError("scenario needs at least one region")
        if len(set(self.regions)) != len(self.regions):
            raise ScenarioError("region ids must be unique")
        max_cost = max(t.marginal_cost for t in self.technologies)
        if self.voll <= max_cost:
            raise ScenarioError(
                f"voll must exceed every marginal cost (voll={self.voll}, max cost={max_cost})"
            )
        n = len(self.regions) * len(self.technologies)
        if self.existing == ():
            object.__setattr__(
                self, "existing", tuple((0.0,) * n for _ in range(self.genco_count))
            )
        if len(self.existing) != self.genco_count or any(len(row) != n for row in self.existing):
            raise ScenarioError("existing capacity must have one row per genco, one column per (region, technology)")
        for row in self.existing:
            for mw in row:
                if mw < 0:
                    raise ScenarioError("existing capacity must be >= 0")
        if self.sampling_bounds == ():
            object.__setattr__(self, "sampling_bounds", tuple(self._default_bounds()))
        if len(self.sampling_bounds) != n:
            raise ScenarioError("sampling_bounds must cover every (region, technology) pair")
        for lo, hi in self.sampling_bounds:
            if lo < 0 or lo > hi:
                raise ScenarioError(f"sampling bound [{lo}, {hi}] must satisfy 0 <= lo <= hi")

    def _default_bounds(self) -> list[tuple[float, float]]:
        # headroom if every producer builds to its limit on top of what exists
        bounds = []
        for i, (_, tech) in enumerate(self.pairs):
            exist = sum(row[i] for row in self.existing)
            limit = next(t.invest_limit for t in self.technologies if t.id == tech)
            bounds.append((0.0, self.genco_count * limit + exist))
        return bounds

    @property
    def pairs(self) -> tuple[tuple[str, str], ...]:
        """(region, technology) index pairs, region-major, in declaration order."""
        return tuple((r, t.id) for r in self.regions for t in self.technologies)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f"k_{r}_{g}" for r, g in self.pairs)

    @property
    def target_names(self) -> tuple[str, ...]:
        return tuple(f"profit_{r}_{g}" for r, g in self.pairs)

    def technology(self, tech_id: str) -> Technology:
        for t in self.technologies:
            if t.id == tech_id:
                return t
        raise KeyError(tech_id)

    def invest_bounds(self) -> list[tuple[float, float]]:
        """Per-pair investment box for a single producer."""
        return [(0.0, self.technology(g).invest_limit) for _, g in self.pairs]

    def existing_total(self) -> list[float]:
        n = len(self.pairs)
        return [sum(row[i] for row in self.existing) for i in range(n)]


def total_buildout(strategies: Sequence[Mapping[tuple[str, str], float]]) -> Buildout:
    """Sum per-producer capacity maps into the system-wide buildout.

    All maps must be defined on the same (region, technology) key set; the sum
    is independent of producer order.
    """
    if len(strategies) == 0:
        raise ScenarioError("total_buildout needs at least one strategy")
    keys = set(strategies[0])
    for i, strat in enumerate(strategies[1:], start=2):
        if set(strat) != keys:
            raise ScenarioError(f"strategy {i} is indexed on a different (region, technology) set")
    total = {k: 0.0 for k in strategies[0]}
    for strat in strategies:
        for k, mw in strat.items():
            total[k] += mw
    return Buildout(total)


# --- YAML config ----------------------------------------------------------

_REQUIRED_KEYS = ("voll", "technologies", "gencos", "load")


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    """Build a validated Scenario from YAML text.

    Raises :class:`ScenarioError` with line context on malformed YAML and with
    the violated invariant on bad values.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ScenarioError(f"could not parse scenario config{where}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario config must be a mapping at the top level")
    missing = [k for k in _REQUIRED_KEYS if k not in raw]
    if missing:
        raise ScenarioError(f"scenario config is missing required fields: {', '.join(missing)}")

    techs = []
    for i, entry in enumerate(raw["technologies"]):
        if not isinstance(entry, dict) or "id" not in entry:
            raise ScenarioError(f"technology entry {i + 1} must be a mapping with an 'id'")
        unknown = set(entry) - {"id", "marginal_cost", "capex", "invest_limit", "fom"}
        if unknown:
            raise ScenarioError(f"technology {entry['id']}: unknown fields {sorted(unknown)}")
        for req in ("marginal_cost", "capex", "invest_limit"):
            if req not in entry:
                raise ScenarioError(f"technology {entry['id']}: missing field '{req}'")
        techs.append(
            Technology(
                id=str(entry["id"]),
                marginal_cost=float(entry["marginal_cost"]),
                capex=float(entry["capex"]),
                invest_limit=float(entry["invest_limit"]),
                fom=float(entry.get("fom", 0.0)),
            )
        )

    regions = tuple(str(r) for r in raw.get("regions", ["main"]))

    gencos = raw["gencos"]
    existing_raw: Mapping = {}
    if isinstance(gencos, dict):
        if "count" not in gencos:
            raise ScenarioError("gencos mapping must contain 'count'")
        genco_count = int(gencos["count"])
        existing_raw = gencos.get("existing", {}) or {}
    else:
        genco_count = int(gencos)

    load = LoadProfile(tuple(float(d) for d in raw["load"]))
    pairs = tuple((r, t.id) for r in regions for t in techs)

    existing = [[0.0] * len(pairs) for _ in range(genco_count)]
    for genco_key, per_region in existing_raw.items():
        j = int(genco_key) - 1
        if not 0 <= j < genco_count:
            raise ScenarioError(f"existing capacity given for unknown genco {genco_key}")
        for region, per_tech in per_region.items():
            for tech, mw in per_tech.items():
                key = (str(region), str(tech))
                if key not in pairs:
                    raise ScenarioError(f"existing capacity on unknown (region, technology) {key}")
                existing[j][pairs.index(key)] = float(mw)

    bounds: tuple[tuple[float, float], ...] = ()
    if "sampling_bounds" in raw and raw["sampling_bounds"]:
        defaults = None
        resolved = []
        for i, (region, tech) in enumerate(pairs):
            entry = raw["sampling_bounds"].get(region, {}).get(tech)
            if entry is None:
                if defaults is None:
                    # fill gaps with the automatic bound
                    tmp = Scenario(
                        technologies=tuple(techs),
                        genco_count=genco_count,
                        regions=regions,
                        load=load,
                        voll=float(raw["voll"]),
                        existing=tuple(tuple(row) for row in existing),
                    )
                    defaults = tmp.sampling_bounds
                resolved.append(defaults[i])
            else:
                lo, hi = entry
                resolved.append((float(lo), float(hi)))
        bounds = tuple(resolved)

    return Scenario(
        technologies=tuple(techs),
        genco_count=genco_count,
        regions=regions,
        load=load,
        voll=float(raw["voll"]),
        existing=tuple(tuple(row) for row in existing),
        sampling_bounds=bounds,
        name=str(raw.get("name", name)),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


def dump_scenario(scenario: Scenario) -> str:
    """Serialize to YAML; ``parse_scenario`` restores a field-identical object."""
    pairs = scenario.pairs
    existing: dict = {}
    for j, row in enumerate(scenario.existing):
        per_genco: dict = {}
        for (region, tech), mw in zip(pairs, row):
            if mw != 0.0:
                per_genco.setdefault(region, {})[tech] = mw
        if per_genco:
            existing[j + 1] = per_genco
    doc = {
        "name": scenario.name,
        "voll": scenario.voll,
        "regions": list(scenario.regions),
        "technologies": [
            {
                "id": t.id,
                "marginal_cost": t.marginal_cost,
                "capex": t.capex,
                "invest_limit": t.invest_limit,
                "fom": t.fom,
            }
            for t in scenario.technologies
        ],
        "gencos": {"count": scenario.genco_count, "existing": existing},
        "load": list(scenario.load.demand),
        "sampling_bounds": {
            region: {tech: list(scenario.sampling_bounds[i]) for i, (r, tech) in enumerate(pairs) if r == region}
            for region in scenario.regions
        },
    }
    return yaml.safe_dump(doc, sort_keys=False)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(dump_scenario(scenario), encoding="utf-8")
