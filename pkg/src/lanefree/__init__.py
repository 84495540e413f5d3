"""Lane-free ring-road traffic with repulsion and nudging forces."""

__version__ = "0.1.0"

from .road import (DIMENSION_CLASSES, ConfigError, RoadGeometry, SimConfig, StrategyParams,
                   VehicleDims, VehicleState, desired_speed_for, forward_gap, sample_dims)
from .potential import FieldParams, PairForce, field_params, h_trapezoid, pair_force, pi_field
from .strategy import (ForceBreakdown, NeighborSets, compose_raw, erf, select_neighbor_sets,
                       target_speed_force)
from .bounds import (AccelBounds, InvariantFault, apply_bounds, boundary_accel_cap,
                     car_following_cap, neighbor_lateral_caps, speed_caps)
from .engine import (FdPoint, InvariantViolation, StepRecord, WorldState, collision_audit,
                     compute_accelerations, detect_crossings, run, step)
from .harness import (SCENARIOS, PlacementSpec, ScenarioSpec, capacity, initial_placement,
                      run_fd_series, run_point)
from .config import ResolvedConfig, load_config
