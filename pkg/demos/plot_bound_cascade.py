"""
How a raw force becomes a safe acceleration
===========================================

A single vehicle is placed close to the right road edge, drifting outward,
with a slower car ahead. We follow its desired force through each safety
bound and watch which one bites.
"""

import numpy as np

from lanefree import (RoadGeometry, StrategyParams, VehicleDims, VehicleState, apply_bounds,
                      boundary_accel_cap, car_following_cap, compose_raw, select_neighbor_sets,
                      speed_caps)

T = 0.2
params = StrategyParams()
road = RoadGeometry()
car = VehicleDims.of_class(3)

ego = VehicleState(0, 500.0, 1.2, v_x=31.0, v_y=-0.9, v_d=30.0, dims=car)
leader = VehicleState(1, 512.0, 1.6, v_x=22.0, v_y=0.0, v_d=26.0, dims=car)

# %%
# The raw force: target speed plus repulsion from the leader.
sets = select_neighbor_sets(ego, [leader], params)
raw = compose_raw(ego, sets, params)
print("target-speed part  ", np.round(raw.ts, 4))
print("repulsion part     ", np.round(raw.rp, 4))
print("raw force          ", np.round(raw.raw, 4))

# %%
# Car-following limit. The leader is 12 m ahead and 9 m/s slower.
zeta, leader_id = car_following_cap(ego, sets.rp_set, params, T)
print("\ncar-following cap  ", round(zeta, 4), "set by vehicle", leader_id)

# %%
# Speed-derived limits: no reversing, no more than 20 % over v_d, and a
# lateral rate tied to the longitudinal one.
caps = speed_caps(ego.v_x, ego.v_y, ego.v_d, params, T)
print("speed caps         ", caps)

# %%
# Distance to the right edge and the largest lateral acceleration toward it
# that still leaves room to stop. A negative value means "must push back".
d = ego.y - 0.5 * car.width_m
print("\nedge distance      ", round(d, 4), "m")
print("edge cap           ", round(boundary_accel_cap(d, -ego.v_y, params.u_y_b, T), 4))

# %%
# All stages together.
f_x, f_y = apply_bounds(raw, ego, sets.rp_set, road, params, T)
print("\nbounded (f_x, f_y) ", round(f_x, 4), round(f_y, 4))
v_y_next = ego.v_y + f_y * T
print("next lateral speed ", round(v_y_next, 4), "(was", ego.v_y, ")")
