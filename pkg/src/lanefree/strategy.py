"""Target-speed forces, neighbor selection and force composition."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .potential import PairForce, pair_force
from .road import StrategyParams, VehicleState, forward_gap


@dataclass(frozen=True)
class Neighbor:
    id: int
    gap: float
    force: PairForce
    v_x: float
    length_m: float


@dataclass(frozen=True)
class NeighborSets:
    rp_set: tuple[Neighbor, ...]
    ng_set: tuple[Neighbor, ...]


@dataclass(frozen=True)
class ForceBreakdown:
    ts: np.ndarray
    rp: np.ndarray
    ng: np.ndarray
    raw: np.ndarray


@njit(cache=True)
def erf(z):
    """Gauss error function, exactly odd."""
    r = math.erf(abs(z))
    return r if z >= 0.0 else -r


@njit(cache=True)
def _target_speed(v_x, v_y, v_d):
    return -erf(v_x - v_d), -erf(v_y)


def target_speed_force(v_x: float, v_y: float, v_d: float) -> np.ndarray:
    return np.array(_target_speed(v_x, v_y, v_d))


def _ranked(candidates: list[Neighbor], k: int) -> tuple[Neighbor, ...]:
    live = [c for c in candidates if c.force.magnitude > 0.0]
    live.sort(key=lambda c: (-c.force.magnitude, c.gap, c.id))
    return tuple(live[:k])


def select_neighbor_sets(ego: VehicleState, others: Sequence[VehicleState],
                         params: StrategyParams, length_m: float = 1000.0) -> NeighborSets:
    """Strongest downstream repellers and strongest upstream nudgers of ``ego``.

    Candidates must lie within ``params.horizon_m`` along the ring in the
    relevant direction; zero-magnitude pairs never enter a set. Ties are
    broken by the smaller gap, then the smaller id.
    """
    ahead, behind = [], []
    for other in others:
        if other.id == ego.id:
            continue
        gap = forward_gap(ego.x, other.x, length_m)
        if 0.0 < gap <= params.horizon_m:
            force = pair_force(ego, other, params, gap_dx=-gap)
            ahead.append(Neighbor(other.id, gap, force, other.v_x, other.dims.length_m))
        back = forward_gap(other.x, ego.x, length_m)
        if 0.0 < back <= params.horizon_m:
            force = pair_force(other, ego, params, gap_dx=-back)
            behind.append(Neighbor(other.id, back, force, other.v_x, other.dims.length_m))
    return NeighborSets(_ranked(ahead, params.n_rp), _ranked(behind, params.n_ng))


def compose_raw(ego: VehicleState, sets: NeighborSets, params: StrategyParams) -> ForceBreakdown:
    """Combine target-speed, repulsion and attenuated nudging into raw accelerations."""
    ts = target_speed_force(ego.v_x, ego.v_y, ego.v_d)
    rp = np.zeros(2)
    for nb in sorted(sets.rp_set, key=lambda nb: nb.id):
        rp = rp + nb.force.repulsion_on_upstream
    ng = np.zeros(2)
    for nb in sorted(sets.ng_set, key=lambda nb: nb.id):
        ng = ng + nb.force.nudging_on_downstream
    raw = np.array([
        ts[0] + params.c_x_ca * (rp[0] + params.gamma_x * ng[0]),
        ts[1] + params.c_y_ca * (rp[1] + params.gamma_y * ng[1]),
    ])
    return ForceBreakdown(ts=ts, rp=rp, ng=ng, raw=raw)
