"""Road geometry, vehicle types and the global configuration records.

Longitudinal positions live on a ring of circumference ``length_m`` and are
always stored wrapped into ``[0, length_m)``; every pairwise longitudinal
offset goes through :func:`forward_gap`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Passenger-car dimension classes as ``class_id -> (length_m, width_m)``.
DIMENSION_CLASSES: dict[int, tuple[float, float]] = {
    1: (3.20, 1.60),
    2: (3.90, 1.70),
    3: (4.25, 1.80),
    4: (4.55, 1.82),
    5: (4.60, 1.77),
    6: (5.15, 1.84),
}

MIN_DESIRED_SPEED = 25.0
MAX_DESIRED_SPEED = 35.0


class ConfigError(ValueError):
    """Raised for an inconsistent or infeasible configuration."""


@dataclass(frozen=True)
class RoadGeometry:
    length_m: float = 1000.0
    width_m: float = 10.2
    ring: bool = True

    def __post_init__(self):
        if not self.length_m > 0 or not self.width_m > 0:
            raise ConfigError(f"road dimensions must be positive: {self}")
        if not self.ring:
            raise ConfigError("only ring roads are supported")


@dataclass(frozen=True)
class VehicleDims:
    class_id: int
    length_m: float
    width_m: float

    @classmethod
    def of_class(cls, class_id: int) -> VehicleDims:
        try:
            length, width = DIMENSION_CLASSES[class_id]
        except KeyError:
            raise ConfigError(f"unknown dimension class {class_id}") from None
        return cls(class_id, length, width)


@dataclass(frozen=True)
class VehicleState:
    id: int
    x: float
    y: float
    v_x: float
    v_y: float
    v_d: float
    dims: VehicleDims


@dataclass(frozen=True)
class StrategyParams:
    """Every tunable constant of the movement strategy.

    ``gap_mode`` selects what the car-following bound divides by the
    longitudinal time gap: ``"bumper"`` (clear spacing) or ``"center"``.
    ``l_x_min`` and ``l_y_min`` floor the field's skirt widths, so a vehicle
    at rest still feels the one ahead of it. ``lateral_guard`` enables the
    side-by-side neighbor cap on ``f_y`` for pairs whose longitudinal
    extents come within ``guard_margin_m`` of each other.
    """

    c_x_ca: float = 4.5
    c_y_ca: float = 1.5
    gamma_x: float = 0.9
    gamma_y: float = 1.0
    t_gap_x: float = 0.65
    t_gap_y: float = 0.25
    omega: float = 0.3
    eta: float = 0.25
    alpha: float = 0.2
    beta: float = 0.3
    u_x_min: float = -4.5
    u_x_max: float = 2.0
    u_y_b: float = 1.5
    horizon_m: float = 120.0
    n_rp: int = 6
    n_ng: int = 3
    l_y_min: float = 1.6
    l_x_min: float = 1.0
    gap_mode: str = "bumper"
    lateral_guard: bool = True
    guard_margin_m: float = 1.0

    def __post_init__(self):
        for name in ("gamma_x", "gamma_y", "omega"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.u_x_min < 0.0 < self.u_x_max:
            raise ConfigError("need u_x_min < 0 < u_x_max")
        if not self.u_y_b > 0.0:
            raise ConfigError("u_y_b must be positive")
        if not self.horizon_m > 0.0:
            raise ConfigError("horizon_m must be positive")
        if self.c_x_ca <= 0.0 or self.c_y_ca <= 0.0:
            raise ConfigError("force coefficients c_x_ca, c_y_ca must be positive")
        if self.n_rp < 0 or self.n_ng < 0:
            raise ConfigError("neighbor set sizes must be non-negative")
        if self.alpha < 0.0 or self.t_gap_x < 0.0 or self.t_gap_y < 0.0 or self.l_y_min < 0.0 or self.l_x_min < 0.0:
            raise ConfigError("alpha, time gaps and field floors must be non-negative")
        if self.guard_margin_m < 0.0:
            raise ConfigError("guard_margin_m must be non-negative")
        if self.gap_mode not in ("bumper", "center"):
            raise ConfigError(f"gap_mode must be 'bumper' or 'center', got {self.gap_mode!r}")


@dataclass(frozen=True)
class SimConfig:
    step_s: float = 0.2
    horizon_steps: int = 6000
    measure_window_steps: int = 1500
    detector_x: float = 0.0
    seed: int = 20190101
    geometry: RoadGeometry = field(default_factory=RoadGeometry)

    def __post_init__(self):
        if not self.step_s > 0:
            raise ConfigError("step_s must be positive")
        if self.measure_window_steps <= 0 or self.measure_window_steps > self.horizon_steps:
            raise ConfigError("need 0 < measure_window_steps <= horizon_steps")
        if not 0.0 <= self.detector_x < self.geometry.length_m:
            raise ConfigError("detector_x must lie on the ring")


def forward_gap(x_from, x_to, length_m):
    """Distance travelled forward along the ring from ``x_from`` to ``x_to``.

    Works elementwise on arrays. The result lies in ``[0, length_m)``.
    """
    gap = np.mod(np.subtract(x_to, x_from), length_m)
    # mod of a tiny negative difference rounds up to exactly length_m
    gap = np.where(gap >= length_m, 0.0, gap)
    return gap if gap.ndim else float(gap)


def signed_offset(x_from, x_to, length_m):
    """Shortest signed ring offset from ``x_from`` to ``x_to``, in ``[-L/2, L/2)``."""
    return np.mod(np.subtract(x_to, x_from) + 0.5 * length_m, length_m) - 0.5 * length_m


def desired_speed_for(y0, width_m):
    """Desired speed growing linearly from 25 m/s at the right edge to 35 m/s at the left."""
    return MIN_DESIRED_SPEED + (MAX_DESIRED_SPEED - MIN_DESIRED_SPEED) * np.divide(y0, width_m)


def sample_dims(rng: np.random.Generator) -> VehicleDims:
    return VehicleDims.of_class(int(rng.integers(1, 7)))


def sample_dim_classes(rng: np.random.Generator, n: int) -> np.ndarray:
    """Vectorised :func:`sample_dims`; draws the same stream as ``n`` scalar calls."""
    return rng.integers(1, 7, size=n)
