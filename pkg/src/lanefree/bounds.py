"""Bound cascade turning raw forces into applied accelerations.

Stages run in a fixed order and later stages override earlier ones:

1. technical clip of both components;
2. car-following leader bound on ``f_x`` (never below the technical floor);
3. no-reversing / overspeed interval on ``f_x``;
4. lateral speed cap ``|v_y| <= beta * v_x`` on ``f_y``;
5. road-boundary escape-velocity caps on ``f_y``;
6. lateral neighbor guard on ``f_y`` (see :func:`neighbor_lateral_caps`).

The boundary cap is the exact one-step solution of: the next lateral speed
towards a boundary must not exceed ``sqrt(2 * u * d)`` at the next distance
``d`` from it. For ``v' = v + f T`` and ``d' = d - v T - f T^2 / 2`` this
gives ``F = (-u - 2v/T + sqrt(u^2 - 4uv/T + 8ud/T^2)) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from numba import njit

from .road import RoadGeometry, StrategyParams, VehicleState, forward_gap
from .strategy import ForceBreakdown, Neighbor


class InvariantFault(RuntimeError):
    """A safety invariant the cascade relies on was already broken."""


# fault codes returned by the compiled cascade
FAULT_NONE = 0
FAULT_ESCAPE_LEFT = 1
FAULT_ESCAPE_RIGHT = 2
FAULT_LATERAL_CONFLICT = 4

# relative slack for rounding when the escape-velocity bound is exactly tight
_DISC_SLACK = 1e-9


@dataclass(frozen=True)
class AccelBounds:
    x_lo: float = -math.inf
    x_hi: float = math.inf
    y_lo: float = -math.inf
    y_hi: float = math.inf
    leader_id: int | None = None
    boundary_active: tuple[bool, bool] = (False, False)


@njit(cache=True)
def _boundary_cap(d, v, u, T):
    """Largest admissible acceleration towards a boundary; NaN if already unsafe."""
    disc = u * u - 4.0 * u * v / T + 8.0 * u * d / (T * T)
    if disc < 0.0:
        scale = u * u + 4.0 * u * abs(v) / T + 8.0 * u * d / (T * T)
        if disc < -_DISC_SLACK * scale:
            return math.nan
        disc = 0.0
    return 0.5 * (-u - 2.0 * v / T + math.sqrt(disc))


@njit(cache=True)
def _edge_cap(d, v, u, T):
    """Escape-velocity cap, further limited so lateral motion can always stop in one step.

    The second term keeps ``v <= 2 d / T``; from any such state braking to
    ``v' = 0`` within one step stays on the road, so the lateral speed cap
    and both edge caps can never exclude each other.
    """
    cap = _boundary_cap(d, v, u, T)
    return min(cap, d / (T * T) - 1.5 * v / T)


def boundary_accel_cap(d: float, v: float, u: float, T: float) -> float:
    """Maximum acceleration towards a boundary at distance ``d`` approached at speed ``v``.

    This is the supremum of ``f`` for which the next state keeps
    ``v' <= sqrt(2 u d')`` and ``d' >= 0``. For ``v <= 2 d / T`` that is the
    closed form in the module docstring. Closer in, the binding constraint
    is ``d' >= 0`` itself and the cap is ``2 (d - v T) / T^2``.

    Raises :class:`InvariantFault` when ``v`` already exceeds the
    escape-velocity bound ``sqrt(2 u d)``.
    """
    limit = math.sqrt(2.0 * u * max(d, 0.0))
    if d < 0.0 or v > limit + _DISC_SLACK * (1.0 + limit):
        raise InvariantFault(f"lateral speed {v} exceeds escape velocity {limit} at d={d}")
    if v * T > 2.0 * d:
        return 2.0 * (d - v * T) / (T * T)
    return _boundary_cap(d, v, u, T)


@njit(cache=True)
def _follow_bound(f_rp_x, gap, v_jx, v_x, v_d, t_gap_x, eta, T):
    lam = min(1.0, abs(f_rp_x)) ** eta
    v_hat = min(gap / t_gap_x, v_jx) if t_gap_x > 0.0 else v_jx
    return (1.0 - lam) * (v_d - v_x) / T + lam * (v_hat - v_x) / T


def car_following_cap(ego: VehicleState, rp_set: Sequence[Neighbor],
                      params: StrategyParams, T: float) -> tuple[float, int | None]:
    """Tightest car-following bound over the repulsion set and the leader imposing it."""
    best, leader = math.inf, None
    for nb in sorted(rp_set, key=lambda nb: nb.id):
        gap = nb.gap
        if params.gap_mode == "bumper":
            gap = max(0.0, gap - 0.5 * (ego.dims.length_m + nb.length_m))
        zeta = _follow_bound(float(nb.force.repulsion_on_upstream[0]), gap, nb.v_x,
                             ego.v_x, ego.v_d, params.t_gap_x, params.eta, T)
        if zeta < best:
            best, leader = zeta, nb.id
    return best, leader


def speed_caps(v_x: float, v_y: float, v_d: float, params: StrategyParams, T: float) -> AccelBounds:
    """No-reversing/overspeed interval for ``f_x`` and the symmetric lateral-speed cap for ``f_y``."""
    return AccelBounds(
        x_lo=-v_x / T,
        x_hi=((1.0 + params.alpha) * v_d - v_x) / T,
        y_lo=(-params.beta * v_x - v_y) / T,
        y_hi=(params.beta * v_x - v_y) / T,
    )


@njit(cache=True)
def _pair_lateral_caps(d, v_toward_i, v_toward_j, u, T):
    """Caps on each vehicle's acceleration towards the other for a side-by-side pair.

    ``d`` is the clear lateral distance. The pair's closing motion is held
    to the same one-step-stoppable escape set as a road edge. Each vehicle
    may always brake its own lateral speed to zero; the remaining slack is
    shared equally.
    """
    closing = v_toward_i + v_toward_j
    joint = _edge_cap(d, closing, u, T)
    if math.isnan(joint):
        joint = -closing / T
    slack = 0.5 * max(0.0, joint + closing / T)
    return -v_toward_i / T + slack, -v_toward_j / T + slack


@njit(cache=True)
def _cascade(raw_x, raw_y, zeta, v_x, v_y, v_d, y, w, road_w,
             u_x_min, u_x_max, u_y_b, alpha, beta, T, lo_n, hi_n):
    """Applied ``(f_x, f_y, fault, left_binding, right_binding)``."""
    fault = 0
    f_x = min(max(raw_x, u_x_min), u_x_max)
    f_y = min(max(raw_y, -u_y_b), u_y_b)

    if zeta < f_x:
        f_x = max(zeta, u_x_min)
    f_x = min(max(f_x, -v_x / T), ((1.0 + alpha) * v_d - v_x) / T)

    # cap against the longitudinal speed the vehicle will actually have
    v_x_next = v_x + f_x * T
    f_y = min(max(f_y, (-beta * v_x_next - v_y) / T), (beta * v_x_next - v_y) / T)

    hi = _edge_cap(road_w - y - 0.5 * w, v_y, u_y_b, T)
    lo = -_edge_cap(y - 0.5 * w, -v_y, u_y_b, T)
    if math.isnan(hi):
        fault |= 1
        hi = -u_y_b
    if math.isnan(lo):
        fault |= 2
        lo = u_y_b
    if lo > hi:
        fault |= 4
    left = f_y > hi
    right = f_y < lo
    f_y = min(max(f_y, lo), hi)

    lo = max(lo, lo_n)
    hi = min(hi, hi_n)
    if lo <= hi:
        f_y = min(max(f_y, lo), hi)
    else:
        # braking lateral motion to zero satisfies every edge and neighbor cap
        f_y = -v_y / T
    return f_x, f_y, fault, left, right


def neighbor_lateral_caps(ego: VehicleState, others: Iterable[VehicleState],
                          params: StrategyParams, T: float,
                          length_m: float = 1000.0) -> tuple[float, float]:
    """Interval ``(lo, hi)`` for ``f_y`` imposed by side-by-side neighbors.

    A neighbor counts when the two longitudinal extents overlap or come
    within ``guard_margin_m`` and the two bodies are laterally clear of
    each other. The interval always contains ``-v_y / T``.
    """
    lo, hi = -math.inf, math.inf
    if not params.lateral_guard:
        return lo, hi
    for other in others:
        if other.id == ego.id:
            continue
        ahead = forward_gap(ego.x, other.x, length_m)
        reach = 0.5 * (ego.dims.length_m + other.dims.length_m) + params.guard_margin_m
        if min(ahead, length_m - ahead if ahead > 0.0 else 0.0) >= reach:
            continue
        clear = abs(other.y - ego.y) - 0.5 * (ego.dims.width_m + other.dims.width_m)
        if clear < 0.0:
            continue
        if other.y > ego.y:
            cap, _ = _pair_lateral_caps(clear, ego.v_y, -other.v_y, params.u_y_b, T)
            hi = min(hi, cap)
        else:
            cap, _ = _pair_lateral_caps(clear, -ego.v_y, other.v_y, params.u_y_b, T)
            lo = max(lo, -cap)
    return lo, hi


def apply_bounds(raw: ForceBreakdown, ego: VehicleState, rp_set: Sequence[Neighbor],
                 geometry: RoadGeometry, params: StrategyParams, T: float,
                 lateral: tuple[float, float] = (-math.inf, math.inf)) -> tuple[float, float]:
    """Run the full cascade for one vehicle and return the applied ``(f_x, f_y)``.

    ``lateral`` is the neighbor interval from :func:`neighbor_lateral_caps`.
    """
    zeta, _ = car_following_cap(ego, rp_set, params, T)
    f_x, f_y, fault, _, _ = _cascade(
        float(raw.raw[0]), float(raw.raw[1]), zeta, ego.v_x, ego.v_y, ego.v_d,
        ego.y, ego.dims.width_m, geometry.width_m,
        params.u_x_min, params.u_x_max, params.u_y_b, params.alpha, params.beta, T,
        float(lateral[0]), float(lateral[1]))
    if fault & (FAULT_ESCAPE_LEFT | FAULT_ESCAPE_RIGHT):
        raise InvariantFault(f"vehicle {ego.id} is past its escape-velocity bound (fault {fault})")
    return f_x, f_y
