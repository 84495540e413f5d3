"""Trapezoidal potential field and the pairwise repulsion/nudging forces.

The scalar kernels (``h_trapezoid``, ``pi_field`` and the ``_pair_*``
helpers) are compiled with numba so the simulation engine can call them
from its inner loop; they are equally usable from plain Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .road import ConfigError, StrategyParams, VehicleState, forward_gap


class CollisionFault(RuntimeError):
    """Two vehicle centers coincide, so the force direction is undefined."""


@dataclass(frozen=True)
class FieldParams:
    l_x: float
    d_x: float
    l_y: float
    d_y: float

    def pi_args(self) -> tuple[float, float, float, float, float, float]:
        """The six extent arguments passed to :func:`pi_field`."""
        half = 0.5 * self.l_x
        return (half, half + self.d_x, half, self.l_y, self.d_y, self.l_y)


@dataclass(frozen=True)
class PairForce:
    repulsion_on_upstream: np.ndarray
    nudging_on_downstream: np.ndarray
    magnitude: float


@njit(cache=True)
def h_trapezoid(delta, d_rise, d_flat, d_fall):
    """Plateau of height 1 on ``[-d_flat, d_flat]`` with linear skirts.

    A zero-width skirt is a hard cutoff: the closed plateau keeps value 1
    and everything beyond it is 0.
    """
    if delta < -d_flat:
        if d_rise <= 0.0:
            return 0.0
        return max(0.0, (d_flat + delta + d_rise) / d_rise)
    if delta > d_flat:
        if d_fall <= 0.0:
            return 0.0
        return max(0.0, 1.0 - (delta - d_flat) / d_fall)
    return 1.0


@njit(cache=True)
def pi_field(dx, dy, l1, l, l2, w1, w, w2):
    return h_trapezoid(dx, l1, l, l2) * h_trapezoid(dy, w1, w, w2)


@njit(cache=True)
def _pair_extents(v_ix, v_iy, v_jx, v_jy, l_i, l_j, w_i, w_j,
                  t_gap_x, t_gap_y, omega, c_x_ca, l_y_min, l_x_min):
    l_x = max(v_ix * t_gap_x, l_x_min)
    closing = max(0.0, v_ix - omega * v_jx)
    d_x = 0.5 * closing * closing / c_x_ca + 0.5 * (l_i + l_j)
    l_y = max(abs(v_iy - v_jy) * t_gap_y, l_y_min)
    d_y = 0.5 * (w_i + w_j)
    return l_x, d_x, l_y, d_y


@njit(cache=True)
def _pair_force(gap, dy, v_ix, v_iy, v_jx, v_jy, l_i, l_j, w_i, w_j,
                t_gap_x, t_gap_y, omega, c_x_ca, l_y_min, l_x_min):
    """Repulsion (magnitude, x, y) on an upstream vehicle ``gap`` metres behind.

    ``dy`` is the upstream lateral position minus the downstream one. The
    caller guarantees ``gap > 0`` so the direction is always defined.
    """
    l_x, d_x, l_y, d_y = _pair_extents(v_ix, v_iy, v_jx, v_jy, l_i, l_j, w_i, w_j,
                                       t_gap_x, t_gap_y, omega, c_x_ca, l_y_min, l_x_min)
    half = 0.5 * l_x
    dx = -gap
    mag = h_trapezoid(dx, half, half + d_x, half)
    if mag > 0.0:
        mag *= h_trapezoid(dy, l_y, d_y, l_y)
    if mag == 0.0:
        return 0.0, 0.0, 0.0
    norm = math.sqrt(dx * dx + dy * dy)
    return mag, mag * dx / norm, mag * dy / norm


def field_params(upstream: VehicleState, downstream: VehicleState,
                 params: StrategyParams) -> FieldParams:
    """Field extents of ``downstream``'s aura as seen by ``upstream``."""
    if params.c_x_ca <= 0.0:
        raise ConfigError("c_x_ca must be positive")
    i, j = upstream, downstream
    return FieldParams(*_pair_extents(
        i.v_x, i.v_y, j.v_x, j.v_y, i.dims.length_m, j.dims.length_m,
        i.dims.width_m, j.dims.width_m, params.t_gap_x, params.t_gap_y,
        params.omega, params.c_x_ca, params.l_y_min, params.l_x_min))


def pair_force(upstream: VehicleState, downstream: VehicleState,
               params: StrategyParams, gap_dx: float | None = None,
               length_m: float = 1000.0) -> PairForce:
    """Repulsion on ``upstream`` and the equal-and-opposite nudging on ``downstream``.

    ``gap_dx`` is the signed offset from the downstream to the upstream
    center (negative); when omitted it is taken from the ring positions.
    """
    if gap_dx is None:
        gap_dx = -forward_gap(upstream.x, downstream.x, length_m)
    dy = upstream.y - downstream.y
    if gap_dx == 0.0 and dy == 0.0:
        raise CollisionFault(f"vehicles {upstream.id} and {downstream.id} share a center")
    fp = field_params(upstream, downstream, params)
    mag = pi_field(gap_dx, dy, *fp.pi_args())
    if mag == 0.0:
        rep = np.zeros(2)
    else:
        norm = math.sqrt(gap_dx * gap_dx + dy * dy)
        rep = np.array([mag * gap_dx / norm, mag * dy / norm])
    return PairForce(repulsion_on_upstream=rep, nudging_on_downstream=-rep, magnitude=mag)
