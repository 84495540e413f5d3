"""Synchronous time stepping on the ring road.

Every vehicle's acceleration is computed from the frozen time-``t``
snapshot before any state is advanced. Neighbor candidates come from a
per-step longitudinal sort; each upstream/downstream pair is evaluated once
and offered to both the upstream vehicle's repulsion set and the
downstream vehicle's nudging set. Per-vehicle sums are taken in ascending
id order, so results do not depend on storage order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numba import njit

from .bounds import _cascade, _follow_bound, _pair_lateral_caps
from .potential import _pair_force
from .road import (ConfigError, DIMENSION_CLASSES, SimConfig, StrategyParams,
                   VehicleDims, VehicleState, forward_gap)
from .strategy import _target_speed

log = logging.getLogger(__name__)

# absolute slack on every invariant check
TOL = 1e-9


class InvariantViolation(RuntimeError):
    """A vehicle left the road, broke a speed cap or hit an escape-velocity fault."""

    def __init__(self, message: str, step_index: int, vehicle_id: int):
        super().__init__(f"step {step_index}, vehicle {vehicle_id}: {message}")
        self.step_index = step_index
        self.vehicle_id = vehicle_id


@dataclass(frozen=True)
class WorldState:
    """All vehicles at one instant, stored column-wise."""

    t: float
    step_index: int
    ids: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v_x: np.ndarray
    v_y: np.ndarray
    v_d: np.ndarray
    dim_class: np.ndarray

    @property
    def n(self) -> int:
        return int(self.ids.size)

    @property
    def length(self) -> np.ndarray:
        return _CLASS_LENGTH[self.dim_class]

    @property
    def width(self) -> np.ndarray:
        return _CLASS_WIDTH[self.dim_class]

    @property
    def vehicles(self) -> list[VehicleState]:
        return [
            VehicleState(int(i), float(x), float(y), float(vx), float(vy), float(vd),
                         VehicleDims.of_class(int(c)))
            for i, x, y, vx, vy, vd, c in zip(self.ids, self.x, self.y, self.v_x,
                                              self.v_y, self.v_d, self.dim_class)
        ]

    @classmethod
    def from_vehicles(cls, vehicles, t: float = 0.0, step_index: int = 0) -> WorldState:
        vs = list(vehicles)
        ids = np.array([v.id for v in vs], dtype=np.int64)
        if np.unique(ids).size != ids.size:
            raise ConfigError("vehicle ids must be unique")
        return cls(
            t=t, step_index=step_index, ids=ids,
            x=np.array([v.x for v in vs], dtype=float),
            y=np.array([v.y for v in vs], dtype=float),
            v_x=np.array([v.v_x for v in vs], dtype=float),
            v_y=np.array([v.v_y for v in vs], dtype=float),
            v_d=np.array([v.v_d for v in vs], dtype=float),
            dim_class=np.array([v.dims.class_id for v in vs], dtype=np.int64),
        )

    def permuted(self, perm) -> WorldState:
        return replace(self, ids=self.ids[perm], x=self.x[perm], y=self.y[perm],
                       v_x=self.v_x[perm], v_y=self.v_y[perm], v_d=self.v_d[perm],
                       dim_class=self.dim_class[perm])


_CLASS_LENGTH = np.zeros(len(DIMENSION_CLASSES) + 1)
_CLASS_WIDTH = np.zeros(len(DIMENSION_CLASSES) + 1)
for _c, (_l, _w) in DIMENSION_CLASSES.items():
    _CLASS_LENGTH[_c], _CLASS_WIDTH[_c] = _l, _w


@dataclass(frozen=True)
class StepRecord:
    f_x: np.ndarray
    f_y: np.ndarray
    crossings: int
    collisions: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class FdPoint:
    n: int
    density: float
    flow: float
    mean_speed: float
    stationary: bool
    speed_defined: bool = True
    collisions: int = 0
    error: str | None = None
    extras: dict = field(default_factory=dict, compare=False)


def _pack(params: StrategyParams) -> np.ndarray:
    return np.array([
        params.c_x_ca, params.c_y_ca, params.gamma_x, params.gamma_y,
        params.t_gap_x, params.t_gap_y, params.omega, params.eta,
        params.alpha, params.beta, params.u_x_min, params.u_x_max, params.u_y_b,
        params.horizon_m, params.n_rp, params.n_ng, params.l_y_min,
        1.0 if params.gap_mode == "bumper" else 0.0, params.l_x_min,
        1.0 if params.lateral_guard else 0.0, params.guard_margin_m,
    ])


@njit(cache=True)
def _better(m1, g1, i1, m2, g2, i2):
    if m1 != m2:
        return m1 > m2
    if g1 != g2:
        return g1 < g2
    return i1 < i2


@njit(cache=True)
def _offer(row, cnt, mags, gaps, ids, fxs, fys, idx, m, g, vid, fx, fy, j):
    k = mags.shape[1]
    c = cnt[row]
    if c < k:
        pos = c
        cnt[row] = c + 1
    elif _better(m, g, vid, mags[row, k - 1], gaps[row, k - 1], ids[row, k - 1]):
        pos = k - 1
    else:
        return
    while pos > 0 and _better(m, g, vid, mags[row, pos - 1], gaps[row, pos - 1], ids[row, pos - 1]):
        mags[row, pos] = mags[row, pos - 1]
        gaps[row, pos] = gaps[row, pos - 1]
        ids[row, pos] = ids[row, pos - 1]
        fxs[row, pos] = fxs[row, pos - 1]
        fys[row, pos] = fys[row, pos - 1]
        idx[row, pos] = idx[row, pos - 1]
        pos -= 1
    mags[row, pos] = m
    gaps[row, pos] = g
    ids[row, pos] = vid
    fxs[row, pos] = fx
    fys[row, pos] = fy
    idx[row, pos] = j


@njit(cache=True)
def _id_order(ids, c):
    perm = np.arange(c)
    for a in range(1, c):
        b = a
        while b > 0 and ids[perm[b - 1]] > ids[perm[b]]:
            perm[b - 1], perm[b] = perm[b], perm[b - 1]
            b -= 1
    return perm


@njit(cache=True)
def _accelerations(order, vid, x, y, vx, vy, vd, ln, wd, road_len, road_w, p, T):
    n = x.size
    c_x, c_y, g_x, g_y = p[0], p[1], p[2], p[3]
    t_gx, t_gy, omega, eta = p[4], p[5], p[6], p[7]
    alpha, beta, u_x_min, u_x_max, u_y_b = p[8], p[9], p[10], p[11], p[12]
    horizon = p[13]
    k_rp, k_ng = int(p[14]), int(p[15])
    l_y_min, bumper, l_x_min = p[16], p[17] > 0.5, p[18]
    guard, margin = p[19] > 0.5, p[20]
    lo_n = np.full(n, -math.inf)
    hi_n = np.full(n, math.inf)

    rp_m = np.zeros((n, max(k_rp, 1)))
    rp_g = np.zeros_like(rp_m)
    rp_fx = np.zeros_like(rp_m)
    rp_fy = np.zeros_like(rp_m)
    rp_id = np.zeros((n, max(k_rp, 1)), dtype=np.int64)
    rp_ix = np.zeros_like(rp_id)
    rp_c = np.zeros(n, dtype=np.int64)
    ng_m = np.zeros((n, max(k_ng, 1)))
    ng_g = np.zeros_like(ng_m)
    ng_fx = np.zeros_like(ng_m)
    ng_fy = np.zeros_like(ng_m)
    ng_id = np.zeros((n, max(k_ng, 1)), dtype=np.int64)
    ng_ix = np.zeros_like(ng_id)
    ng_c = np.zeros(n, dtype=np.int64)

    for a in range(n):
        i = order[a]
        for s in range(1, n):
            j = order[(a + s) % n]
            gap = x[j] - x[i]
            if gap < 0.0:
                gap += road_len
            if gap > horizon:
                break
            if guard and gap < 0.5 * (ln[i] + ln[j]) + margin:
                clear = abs(y[j] - y[i]) - 0.5 * (wd[i] + wd[j])
                if clear >= 0.0:
                    if y[j] > y[i]:
                        ci, cj = _pair_lateral_caps(clear, vy[i], -vy[j], u_y_b, T)
                        hi_n[i] = min(hi_n[i], ci)
                        lo_n[j] = max(lo_n[j], -cj)
                    else:
                        ci, cj = _pair_lateral_caps(clear, -vy[i], vy[j], u_y_b, T)
                        lo_n[i] = max(lo_n[i], -ci)
                        hi_n[j] = min(hi_n[j], cj)
            if gap <= 0.0:
                continue
            m, fx, fy = _pair_force(gap, y[i] - y[j], vx[i], vy[i], vx[j], vy[j],
                                    ln[i], ln[j], wd[i], wd[j],
                                    t_gx, t_gy, omega, c_x, l_y_min, l_x_min)
            if m == 0.0:
                continue
            if k_rp > 0:
                _offer(i, rp_c, rp_m, rp_g, rp_id, rp_fx, rp_fy, rp_ix, m, gap, vid[j], fx, fy, j)
            if k_ng > 0:
                _offer(j, ng_c, ng_m, ng_g, ng_id, ng_fx, ng_fy, ng_ix, m, gap, vid[i], -fx, -fy, i)

    f_x = np.zeros(n)
    f_y = np.zeros(n)
    fault = np.zeros(n, dtype=np.int64)
    leader = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        rp_x = 0.0
        rp_y = 0.0
        zeta = math.inf
        c = rp_c[i]
        perm = _id_order(rp_id[i], c)
        for q in range(c):
            e = perm[q]
            rp_x += rp_fx[i, e]
            rp_y += rp_fy[i, e]
            gap = rp_g[i, e]
            if bumper:
                gap = max(0.0, gap - 0.5 * (ln[i] + ln[rp_ix[i, e]]))
            z = _follow_bound(rp_fx[i, e], gap, vx[rp_ix[i, e]], vx[i], vd[i], t_gx, eta, T)
            if z < zeta:
                zeta = z
                leader[i] = rp_id[i, e]
        ng_x = 0.0
        ng_y = 0.0
        c = ng_c[i]
        perm = _id_order(ng_id[i], c)
        for q in range(c):
            e = perm[q]
            ng_x += ng_fx[i, e]
            ng_y += ng_fy[i, e]
        ts_x, ts_y = _target_speed(vx[i], vy[i], vd[i])
        raw_x = ts_x + c_x * (rp_x + g_x * ng_x)
        raw_y = ts_y + c_y * (rp_y + g_y * ng_y)
        fx_i, fy_i, flt, _, _ = _cascade(raw_x, raw_y, zeta, vx[i], vy[i], vd[i], y[i], wd[i],
                                         road_w, u_x_min, u_x_max, u_y_b, alpha, beta, T,
                                         lo_n[i], hi_n[i])
        f_x[i] = fx_i
        f_y[i] = fy_i
        fault[i] = flt
    return f_x, f_y, fault, leader


@njit(cache=True)
def _overlaps(order, x, y, ln, wd, road_len, max_len):
    n = x.size
    out = []
    for a in range(n):
        i = order[a]
        for s in range(1, n):
            j = order[(a + s) % n]
            gap = x[j] - x[i]
            if gap < 0.0:
                gap += road_len
            if gap >= max_len:
                break
            if gap < 0.5 * (ln[i] + ln[j]) and abs(y[i] - y[j]) < 0.5 * (wd[i] + wd[j]):
                out.append((min(i, j), max(i, j)))
    return out


def _sorted_order(world: WorldState) -> np.ndarray:
    return np.lexsort((world.ids, world.x))


def collision_audit(world: WorldState, length_m: float = 1000.0) -> list[tuple[int, int]]:
    """Id pairs whose axis-aligned rectangles overlap with positive area."""
    if world.n < 2:
        return []
    ln, wd = world.length, world.width
    pairs = _overlaps(_sorted_order(world), world.x, world.y, ln, wd, float(length_m),
                      float(ln.max()))
    uniq = sorted({(int(world.ids[a]), int(world.ids[b])) for a, b in pairs})
    return [(min(a, b), max(a, b)) for a, b in uniq]


def compute_accelerations(world: WorldState, params: StrategyParams, config: SimConfig):
    """Applied accelerations, fault codes and car-following leaders for a snapshot."""
    if world.n == 0:
        empty = np.zeros(0)
        return empty, empty, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    geo = config.geometry
    if params.horizon_m >= 0.5 * geo.length_m:
        raise ConfigError("horizon_m must be shorter than half the ring")
    if params.lateral_guard and params.horizon_m < max(DIMENSION_CLASSES.values())[0] + params.guard_margin_m:
        raise ConfigError("horizon_m must cover the lateral guard window")
    return _accelerations(_sorted_order(world), world.ids, world.x, world.y, world.v_x,
                          world.v_y, world.v_d, world.length, world.width,
                          float(geo.length_m), float(geo.width_m), _pack(params),
                          float(config.step_s))


def detect_crossings(prev: WorldState, next: WorldState, detector_x: float,
                     length_m: float = 1000.0) -> int:
    """Vehicles whose forward sweep ``[x_prev, x_prev + travel)`` covers the detector."""
    travel = forward_gap(prev.x, next.x, length_m)
    to_detector = forward_gap(prev.x, detector_x, length_m)
    return int(np.count_nonzero(to_detector < travel))


def _check(world: WorldState, params: StrategyParams, config: SimConfig, fault) -> None:
    W = config.geometry.width_m
    half_w = 0.5 * world.width
    checks = [
        (fault != 0, "escape-velocity fault"),
        (world.y - half_w < -TOL, "crossed the right road boundary"),
        (world.y + half_w > W + TOL, "crossed the left road boundary"),
        (world.v_x < -TOL, "moving backwards"),
        (world.v_x > (1.0 + params.alpha) * world.v_d + TOL, "exceeded the overspeed cap"),
        (np.abs(world.v_y) > params.beta * world.v_x + TOL, "exceeded the lateral speed cap"),
    ]
    for bad, message in checks:
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise InvariantViolation(message, world.step_index, int(world.ids[k]))


def step(world: WorldState, params: StrategyParams, config: SimConfig):
    """Advance every vehicle by one step of constant acceleration.

    Time is kept as ``step_index * T`` so it does not drift.

    Returns the new :class:`WorldState` and the :class:`StepRecord` of the
    step. Raises :class:`InvariantViolation` if the new state leaves the
    road or breaks a speed cap.
    """
    T = config.step_s
    L = config.geometry.length_m
    f_x, f_y, fault, _ = compute_accelerations(world, params, config)
    x = np.mod(world.x + world.v_x * T + 0.5 * f_x * T * T, L)
    x[x >= L] = 0.0
    v_x = world.v_x + f_x * T
    # the no-reversing bound can round to a hair below zero
    v_x[(v_x < 0.0) & (v_x > -TOL)] = 0.0
    nxt = replace(world, t=(world.step_index + 1) * T, step_index=world.step_index + 1, x=x,
                  y=world.y + world.v_y * T + 0.5 * f_y * T * T,
                  v_x=v_x, v_y=world.v_y + f_y * T)
    _check(nxt, params, config, fault)
    record = StepRecord(
        f_x=f_x, f_y=f_y,
        crossings=detect_crossings(world, nxt, config.detector_x, L),
        collisions=tuple(collision_audit(nxt, L)),
    )
    return nxt, record


def run(world0: WorldState, params: StrategyParams, config: SimConfig,
        keep_records: bool = True,
        on_step: Callable[[WorldState, StepRecord], None] | None = None):
    """Advance ``config.horizon_steps`` steps and summarize the final window.

    Returns ``(FdPoint, records)``; ``records`` is empty unless
    ``keep_records``. An :class:`InvariantViolation` propagates to the caller.
    """
    K, W = config.horizon_steps, config.measure_window_steps
    crossings = np.zeros(K, dtype=np.int64)
    speed_sum = 0.0
    collisions = 0
    records = []
    world = world0
    for k in range(K):
        world, rec = step(world, params, config)
        crossings[k] = rec.crossings
        collisions += len(rec.collisions)
        if k >= K - W and world.n:
            speed_sum += float(world.v_x.mean())
        if keep_records:
            records.append(rec)
        if on_step is not None:
            on_step(world, rec)
        if rec.collisions:
            log.warning("step %d: overlapping vehicles %s", world.step_index, rec.collisions)
    return summarize(world0.n, crossings, speed_sum, collisions, config), records


def flow_veh_per_h(count: int, steps: int, step_s: float) -> float:
    return 3600.0 * count / (steps * step_s)


def summarize(n: int, crossings: np.ndarray, speed_sum: float, collisions: int,
              config: SimConfig) -> FdPoint:
    K, W, T = config.horizon_steps, config.measure_window_steps, config.step_s
    flow = flow_veh_per_h(int(crossings[K - W:].sum()), W, T)
    prev_steps = min(W, K - W)
    if prev_steps > 0:
        prev = flow_veh_per_h(int(crossings[K - W - prev_steps:K - W].sum()), prev_steps, T)
        stationary = abs(flow - prev) <= 0.1 * prev if prev > 0 else flow == 0.0
    else:
        prev, stationary = math.nan, False
    return FdPoint(
        n=n, density=n / (config.geometry.length_m / 1000.0), flow=flow,
        mean_speed=speed_sum / W if n else 0.0, stationary=bool(stationary),
        speed_defined=n > 0, collisions=collisions, extras={"previous_window_flow": prev},
    )
