"""JSON configuration: one document resolving every tunable to an explicit value.

Layout::

    {
      "strategy":  {<StrategyParams fields>},
      "sim":       {<SimConfig fields except geometry>, "road": {<RoadGeometry fields>}},
      "placement": {<PlacementSpec fields>},
      "scenarios": {"<name>": {<ScenarioSpec fields except name>}, ...}
    }

Every section and key is optional; missing values take the defaults.
Unknown keys are errors. ``scenarios`` adds new scenarios or replaces
built-in ones by name.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .harness import SCENARIOS, PlacementSpec, ScenarioSpec
from .road import ConfigError, RoadGeometry, SimConfig, StrategyParams


@dataclass(frozen=True)
class ResolvedConfig:
    params: StrategyParams = field(default_factory=StrategyParams)
    sim: SimConfig = field(default_factory=SimConfig)
    placement: PlacementSpec = field(default_factory=PlacementSpec)
    scenarios: dict[str, ScenarioSpec] = field(default_factory=lambda: dict(SCENARIOS))

    def scenario(self, name: str) -> ScenarioSpec:
        try:
            return self.scenarios[name]
        except KeyError:
            known = ", ".join(sorted(self.scenarios))
            raise ConfigError(f"unknown scenario {name!r} (known: {known})") from None

    def with_seed(self, seed: int) -> ResolvedConfig:
        return dataclasses.replace(self, sim=dataclasses.replace(self.sim, seed=seed))

    def to_dict(self) -> dict:
        sim = {f.name: getattr(self.sim, f.name) for f in dataclasses.fields(self.sim)
               if f.name != "geometry"}
        sim["road"] = dataclasses.asdict(self.sim.geometry)
        scenarios = {}
        for name, spec in self.scenarios.items():
            entry = dataclasses.asdict(spec)
            del entry["name"]
            entry["n_values"] = list(spec.n_values)
            scenarios[name] = entry
        return {
            "strategy": dataclasses.asdict(self.params),
            "sim": sim,
            "placement": dataclasses.asdict(self.placement),
            "scenarios": scenarios,
        }


def _coerce(section: str, key: str, value, default):
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(
                isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in value):
            raise ConfigError(f"{where} must be a list of non-negative integers")
        return tuple(value)
    raise ConfigError(f"{where}: unsupported value")


def _section(name: str, raw, defaults: dict, skip=()) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{name} must be an object")
    unknown = sorted(set(raw) - set(defaults) - set(skip))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(unknown)}")
    return {k: _coerce(name, k, v, defaults[k]) for k, v in raw.items() if k in defaults}


def _defaults(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}


def from_dict(doc: dict) -> ResolvedConfig:
    """Validate a parsed document and resolve it against the defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(doc) - {"strategy", "sim", "placement", "scenarios"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")

    params = StrategyParams(**_section("strategy", doc.get("strategy", {}), _defaults(StrategyParams())))

    sim_raw = doc.get("sim", {})
    sim_defaults = _defaults(SimConfig())
    del sim_defaults["geometry"]
    sim_kw = _section("sim", sim_raw, sim_defaults, skip=("road",))
    road_kw = _section("sim.road", sim_raw.get("road", {}), _defaults(RoadGeometry()))
    sim = SimConfig(geometry=RoadGeometry(**road_kw), **sim_kw)

    placement = PlacementSpec(**_section("placement", doc.get("placement", {}),
                                         _defaults(PlacementSpec())))
    placement.zone_centers(sim.geometry.width_m)

    scenarios = dict(SCENARIOS)
    raw_sc = doc.get("scenarios", {})
    if not isinstance(raw_sc, dict):
        raise ConfigError("scenarios must be an object keyed by name")
    for name, body in raw_sc.items():
        base = scenarios.get(name, ScenarioSpec(name, 0.9, 1.0, 3, 6, 10.2, SCENARIOS["nominal"].n_values))
        defaults = _defaults(base)
        del defaults["name"]
        kw = _section(f"scenarios.{name}", body, defaults)
        spec = dataclasses.replace(base, **kw)
        if spec.n_ng < 0 or spec.n_rp < 0 or not spec.width_m > 0 or not spec.n_values:
            raise ConfigError(f"scenario {name!r} is inconsistent")
        scenarios[name] = spec
    return ResolvedConfig(params, sim, placement, scenarios)


def load_config(path: str | Path | None) -> ResolvedConfig:
    """Read a JSON config file; ``None`` gives the defaults."""
    if path is None:
        return ResolvedConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    try:
        return from_dict(doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def default_config_json() -> str:
    """The fully resolved default configuration, ready to edit."""
    return json.dumps(ResolvedConfig().to_dict(), indent=2) + "\n"
