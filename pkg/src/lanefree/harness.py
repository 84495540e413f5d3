"""Initial placement, the four reference scenarios and fundamental-diagram sweeps."""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .engine import FdPoint, InvariantViolation, WorldState, run
from .road import (ConfigError, DIMENSION_CLASSES, RoadGeometry, SimConfig,
                   StrategyParams, desired_speed_for, sample_dim_classes)

log = logging.getLogger(__name__)

ZONE_WIDTH_M = 3.4
JITTER_HALF_WIDTH_M = 0.5
MIN_BUMPER_GAP_M = 0.5


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    gamma_x: float
    gamma_y: float
    n_ng: int
    n_rp: int
    width_m: float
    n_values: tuple[int, ...]

    def apply(self, params: StrategyParams, config: SimConfig) -> tuple[StrategyParams, SimConfig]:
        """Overlay the scenario's nudging weights, set sizes and road width."""
        params = replace(params, gamma_x=self.gamma_x, gamma_y=self.gamma_y,
                         n_ng=self.n_ng, n_rp=self.n_rp)
        config = replace(config, geometry=replace(config.geometry, width_m=self.width_m))
        return params, config


DEFAULT_N = tuple(range(50, 451, 50))

SCENARIOS: dict[str, ScenarioSpec] = {
    s.name: s for s in (
        ScenarioSpec("no_nudging", 0.0, 0.0, 0, 6, 10.2, DEFAULT_N),
        ScenarioSpec("nominal", 0.9, 1.0, 3, 6, 10.2, DEFAULT_N),
        ScenarioSpec("moderate", 0.45, 0.5, 3, 6, 10.2, DEFAULT_N),
        ScenarioSpec("widened", 0.9, 1.0, 3, 6, 11.9, tuple(range(50, 551, 50))),
    )
}


@dataclass(frozen=True)
class PlacementSpec:
    """Lateral zones for the initial layout.

    ``"lanes"`` centers one zone per lane of equal width (1.7, 5.1, 8.5 m on a
    10.2 m road); ``"literal"`` uses ``1.7 + 1.7 (l - 1)`` from the right edge.
    """

    zone_rule: str = "lanes"
    jitter_half_width: float = JITTER_HALF_WIDTH_M
    longitudinal_min_gap: float = MIN_BUMPER_GAP_M

    def zone_centers(self, width_m: float) -> np.ndarray:
        zones = max(1, int(np.floor(width_m / ZONE_WIDTH_M + 1e-9)))
        if self.zone_rule == "lanes":
            lane = width_m / zones
            return lane * (np.arange(zones) + 0.5)
        if self.zone_rule == "literal":
            return 1.7 + 1.7 * np.arange(zones)
        raise ConfigError(f"unknown zone rule {self.zone_rule!r}")


def _spread(x: np.ndarray, need: np.ndarray, length_m: float) -> np.ndarray:
    """Push sorted ring positions apart so gap ``k`` is at least ``need[k]``.

    Each gap becomes ``need[k]`` plus a share of the leftover ring length
    proportional to its original size, which keeps order and the first
    position fixed.
    """
    gaps = np.diff(np.append(x, x[0] + length_m))
    slack = length_m - need.sum()
    new_gaps = need + slack * gaps / length_m
    out = x[0] + np.concatenate(([0.0], np.cumsum(new_gaps[:-1])))
    return np.mod(out, length_m)


def initial_placement(n: int, geometry: RoadGeometry, params: StrategyParams | None,
                      rng: np.random.Generator,
                      placement: PlacementSpec = PlacementSpec()) -> WorldState:
    """Quasi-uniform start on the road surface with every vehicle at rest.

    Draw order from ``rng``: all dimension classes, then all lateral jitters,
    then all longitudinal positions. Vehicles are split into zones in id
    order, extra vehicles going to the lowest zones.
    """
    centers = placement.zone_centers(geometry.width_m)
    classes = sample_dim_classes(rng, n)
    jitter = rng.uniform(-placement.jitter_half_width, placement.jitter_half_width, size=n)
    x_raw = rng.uniform(0.0, geometry.length_m, size=n)

    lengths = np.array([DIMENSION_CLASSES[c][0] for c in classes])
    widths = np.array([DIMENSION_CLASSES[c][1] for c in classes])
    sizes = np.full(centers.size, n // centers.size)
    sizes[: n % centers.size] += 1
    zone = np.repeat(np.arange(centers.size), sizes)

    y = centers[zone] + jitter
    if n and (np.any(y - 0.5 * widths < 0.0) or np.any(y + 0.5 * widths > geometry.width_m)):
        raise ConfigError("placement zones do not fit inside the road")

    x = np.empty(n)
    for z in range(centers.size):
        members = np.flatnonzero(zone == z)
        if members.size == 0:
            continue
        members = members[np.argsort(x_raw[members], kind="stable")]
        lm = lengths[members]
        need = 0.5 * (lm + np.roll(lm, -1)) + placement.longitudinal_min_gap
        if members.size == 1:
            need = np.zeros(1)
        if need.sum() >= geometry.length_m:
            raise ConfigError(f"{n} vehicles do not fit on a {geometry.length_m} m ring")
        x[members] = _spread(x_raw[members], need, geometry.length_m)

    return WorldState(
        t=0.0, step_index=0, ids=np.arange(n, dtype=np.int64), x=x, y=y,
        v_x=np.zeros(n), v_y=np.zeros(n), v_d=desired_speed_for(y, geometry.width_m),
        dim_class=classes.astype(np.int64),
    )


def derive_seed(seed: int, scenario: str, n: int) -> np.random.SeedSequence:
    """Independent, reproducible stream for one (scenario, n) point."""
    return np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(scenario.encode()), n])


def scenario_start(scenario: ScenarioSpec, n: int, params: StrategyParams, config: SimConfig,
                   placement: PlacementSpec = PlacementSpec()):
    """Scenario-adjusted ``(params, config, world0)`` for one FD point."""
    params, config = scenario.apply(params, config)
    rng = np.random.default_rng(derive_seed(config.seed, scenario.name, n))
    return params, config, initial_placement(n, config.geometry, params, rng, placement)


def run_point(scenario: ScenarioSpec, n: int, params: StrategyParams, config: SimConfig,
              placement: PlacementSpec = PlacementSpec(), on_step=None) -> FdPoint:
    params, config, world = scenario_start(scenario, n, params, config, placement)
    try:
        point, _ = run(world, params, config, keep_records=False, on_step=on_step)
    except InvariantViolation as exc:
        log.error("%s n=%d failed: %s", scenario.name, n, exc)
        return FdPoint(n=n, density=n / (config.geometry.length_m / 1000.0), flow=0.0,
                       mean_speed=0.0, stationary=False, error=str(exc))
    return point


def run_fd_series(scenario: ScenarioSpec, config: SimConfig, params: StrategyParams,
                  n_values: Iterable[int] | None = None,
                  placement: PlacementSpec = PlacementSpec(),
                  on_step_factory=None) -> list[FdPoint]:
    """One run per vehicle count, in ascending ``n``; failures are kept as points.

    ``on_step_factory(n)``, if given, returns the per-step callback for that run.
    """
    points = []
    for n in sorted(n_values if n_values is not None else scenario.n_values):
        hook = on_step_factory(n) if on_step_factory is not None else None
        point = run_point(scenario, n, params, config, placement, on_step=hook)
        log.info("%s n=%d flow=%.0f veh/h speed=%.2f m/s", scenario.name, n,
                 point.flow, point.mean_speed)
        points.append(point)
    return points


def capacity(points: Sequence[FdPoint]) -> tuple[float, int]:
    """Maximum flow over a series and the vehicle count where it occurs."""
    best = max(points, key=lambda p: (p.flow, -p.n))
    return best.flow, best.n
