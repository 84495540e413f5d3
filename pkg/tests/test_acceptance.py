"""Acceptance criteria, one test per criterion.

Every test records a one-line verdict (printed immediately and repeated in
the terminal summary) before asserting, so a failing criterion still shows
its measured numbers. The full fundamental-diagram sweep runs once per
session at the shipped defaults (K = 6000, T = 0.2 s) and takes several
minutes on one core.
"""

import math
import time
from dataclasses import dataclass, replace

import numpy as np
import pytest

from lanefree import (SCENARIOS, SimConfig, StrategyParams, boundary_accel_cap, capacity, erf,
                      h_trapezoid, pi_field)
from lanefree.cli import main
from lanefree.harness import run_point

from oracles import boundary_cap_bisect, erf_series, h_literal, pi_literal

P = StrategyParams()
CFG = SimConfig()
ORDER = ("no_nudging", "nominal", "moderate", "widened")  # scenarios 1..4
TOL = 1e-9
OVERLAP_EVERY = 20  # brute-force rectangle check stride, in steps


def verdict(verdicts, k, ok, text, label=None):
    line = f"{'PASS' if ok else 'FAIL'} {label or f'C{k}'}: {text}"
    verdicts[k] = line
    print(line)
    return ok


@dataclass
class Auditor:
    """Per-step observer that re-checks the run from raw state columns."""

    road_w: float
    alpha: float
    beta: float
    steps: int = 0
    boundary: int = 0
    speed_cap: int = 0
    lateral_cap: int = 0
    reversing: int = 0
    overlaps: int = 0
    engine_collisions: int = 0
    seconds: float = 0.0

    def __call__(self, world, rec):
        t0 = time.perf_counter()
        self.steps += 1
        half_w = 0.5 * world.width
        self.boundary += int(np.count_nonzero((world.y - half_w < -TOL) |
                                              (world.y + half_w > self.road_w + TOL)))
        self.reversing += int(np.count_nonzero(world.v_x < 0.0))
        self.speed_cap += int(np.count_nonzero(world.v_x > (1 + self.alpha) * world.v_d + TOL))
        self.lateral_cap += int(np.count_nonzero(np.abs(world.v_y) > self.beta * world.v_x + TOL))
        self.engine_collisions += len(rec.collisions)
        if world.step_index % OVERLAP_EVERY == 0:
            self.overlaps += _overlap_count(world)
        self.seconds += time.perf_counter() - t0

    @property
    def clean(self):
        return not (self.boundary or self.speed_cap or self.lateral_cap or self.reversing
                    or self.overlaps or self.engine_collisions)


def _overlap_count(world, length=1000.0):
    """All-pairs rectangle overlap on the ring, plain numpy."""
    dx = np.abs(world.x[:, None] - world.x[None, :])
    dx = np.minimum(dx, length - dx)
    dy = np.abs(world.y[:, None] - world.y[None, :])
    reach_x = 0.5 * (world.length[:, None] + world.length[None, :])
    reach_y = 0.5 * (world.width[:, None] + world.width[None, :])
    hit = (dx < reach_x - TOL) & (dy < reach_y - TOL)
    return int(np.count_nonzero(np.triu(hit, 1)))


@dataclass
class Sweep:
    points: dict
    audits: dict
    seconds: dict


@pytest.fixture(scope="session")
def sweep():
    points, audits, seconds = {}, {}, {}
    for name in ORDER:
        spec = SCENARIOS[name]
        points[name] = []
        for n in spec.n_values:
            params, _ = spec.apply(P, CFG)
            audit = Auditor(spec.width_m, params.alpha, params.beta)
            t0 = time.perf_counter()
            point = run_point(spec, n, P, CFG, on_step=audit)
            seconds[name, n] = time.perf_counter() - t0 - audit.seconds
            points[name].append(point)
            audits[name, n] = audit
            print(f"{name} n={n} flow={point.flow:.0f} stationary={point.stationary} "
                  f"clean={audit.clean} {seconds[name, n]:.1f}s")
    return Sweep(points, audits, seconds)


def flows(points):
    return [p.flow for p in points]


# --- 1 ---------------------------------------------------------------------

def test_c1_closed_forms(verdicts):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    ext = rng.uniform(0.01, 30.0, size=(100_000, 6))
    # offsets scaled to each support so that both ramps and the plateau are hit
    ux, uy = rng.uniform(-1.2, 1.2, size=(2, 100_000))
    worst = 0.0
    for (l1, l, l2, w1, w, w2), a, b in zip(ext, ux, uy):
        dx = a * (l + (l2 if a > 0 else l1))
        dy = b * (w + (w2 if b > 0 else w1))
        worst = max(worst, abs(h_trapezoid(dx, l1, l, l2) - h_literal(dx, l1, l, l2)),
                    abs(pi_field(dx, dy, l1, l, l2, w1, w, w2) - pi_literal(dx, dy, l1, l, l2, w1, w, w2)))
    worst_erf = max(abs(erf(z) - erf_series(z)) for z in rng.uniform(-6.0, 6.0, 2000))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and worst_erf <= 1e-7 and elapsed < 5.0
    verdict(verdicts, 1, ok, f"h/pi max err {worst:.1e} (<=1e-12), erf max err {worst_erf:.1e} "
                             f"(<=1e-7), {elapsed:.2f}s (<5s)")
    assert ok


# --- 2 ---------------------------------------------------------------------

def test_c2_boundary_cap_oracle(verdicts):
    rng = np.random.default_rng(102)
    start = time.perf_counter()
    worst = worst_tight = 0.0
    tight = 0
    for _ in range(10_000):
        u = rng.uniform(0.3, 5.0)
        T = rng.uniform(0.05, 0.5)
        d = rng.uniform(0.0, 5.0) * rng.choice([1.0, 0.01])
        v = rng.uniform(-3.0, 1.0) * math.sqrt(2 * u * d) if d > 0 else rng.uniform(-3.0, 0.0)
        f = boundary_accel_cap(d, v, u, T)
        worst = max(worst, abs(f - boundary_cap_bisect(d, v, u, T)))
        if f < u:
            # not clipped by the technical bound, so the active constraint is tight
            v1, d1 = v + f * T, d - v * T - 0.5 * f * T * T
            if v * T <= 2 * d:
                res = abs(v1 - math.sqrt(2 * u * max(d1, 0.0)))
            else:
                res = abs(d1)
            worst_tight = max(worst_tight, res)
            tight += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and worst_tight <= 1e-9 and tight > 1000 and elapsed < 10.0
    verdict(verdicts, 2, ok, f"bisection max err {worst:.1e} (<=1e-6), tightness residual "
                             f"{worst_tight:.1e} over {tight} binding cases (<=1e-9), "
                             f"{elapsed:.2f}s (<10s)")
    assert ok


# --- 3 ---------------------------------------------------------------------

def test_c3_smoke_variant(verdicts):
    cfg = replace(CFG, horizon_steps=1500, measure_window_steps=750)
    start = time.perf_counter()
    dirty = []
    for name in ORDER:
        spec = SCENARIOS[name]
        params, _ = spec.apply(P, cfg)
        for n in (50, 250, 450):
            audit = Auditor(spec.width_m, params.alpha, params.beta)
            point = run_point(spec, n, P, cfg, on_step=audit)
            if point.error or not audit.clean or point.collisions:
                dirty.append(f"{name}/{n}")
    elapsed = time.perf_counter() - start
    ok = not dirty and elapsed < 30.0
    verdict(verdicts, 3.5, ok, f"12 runs at K=1500, {len(dirty)} unclean {dirty}, "
                               f"{elapsed:.1f}s (<30s)", label="C3 smoke")
    assert ok


@pytest.mark.slow
def test_c3_full_runs_crash_free(sweep, verdicts):
    runs = len(sweep.audits)
    failed = [f"{s}/{p.n}" for s in ORDER for p in sweep.points[s] if p.error]
    overl = sum(a.overlaps + a.engine_collisions for a in sweep.audits.values())
    exits = sum(a.boundary for a in sweep.audits.values())
    ok = not failed and overl == 0 and exits == 0
    verdict(verdicts, 3, ok, f"{runs} full runs (K=6000), {overl} collisions, {exits} boundary "
                             f"exits, aborted {failed}")
    assert ok


# --- 4 ---------------------------------------------------------------------

@pytest.mark.slow
def test_c4_speed_caps(sweep, verdicts):
    a = sweep.audits.values()
    steps = sum(x.steps for x in a)
    rev, spd, lat = (sum(getattr(x, k) for x in a) for k in ("reversing", "speed_cap", "lateral_cap"))
    ok = rev == spd == lat == 0 and steps == len(sweep.audits) * CFG.horizon_steps
    verdict(verdicts, 4, ok, f"{steps} audited steps: {rev} v_x<0, {spd} v_x>1.2 v_d, "
                             f"{lat} |v_y|>0.3 v_x")
    assert ok


# --- 5 ---------------------------------------------------------------------

def unimodal_within(seq, band):
    top = max(seq)
    m = seq.index(top)
    slack = band * top
    rising = all(b >= a - slack for a, b in zip(seq[:m], seq[1:m + 1]))
    falling = all(b <= a + slack for a, b in zip(seq[m:], seq[m + 1:]))
    return rising and falling


@pytest.mark.slow
def test_c5_inverse_u(sweep, verdicts):
    f = flows(sweep.points["no_nudging"])
    top = max(f)
    ok = unimodal_within(f, 0.05) and f[-1] <= 0.8 * top
    verdict(verdicts, 5, ok, f"scenario 1 flows {[round(x) for x in f]}; unimodal within 5%, "
                             f"flow(450)={f[-1]:.0f} <= 0.8*{top:.0f}={0.8 * top:.0f}")
    assert ok


# --- 6 ---------------------------------------------------------------------

@pytest.mark.slow
def test_c6_nudging_ordering(sweep, verdicts):
    (c1, n1), (c2, n2), (c3, _) = (capacity(sweep.points[s]) for s in ORDER[:3])
    ok = c2 >= c3 >= c1 and c2 >= 1.03 * c1 and n2 >= n1
    verdict(verdicts, 6, ok, f"capacities s2={c2:.0f} >= s3={c3:.0f} >= s1={c1:.0f}, "
                             f"s2/s1={c2 / c1:.3f} (>=1.03), critical n s2={n2} >= s1={n1}")
    assert ok


# --- 7 ---------------------------------------------------------------------

@pytest.mark.slow
def test_c7_widening(sweep, verdicts):
    pts2, pts4 = sweep.points["nominal"], sweep.points["widened"]
    (c2, _), (c4, _) = capacity(pts2), capacity(pts4)
    flow4 = {p.n: p.flow for p in pts4}
    # "collapsed" means below a tenth of the scenario's own capacity
    collapsed = [p.n for p in pts2 if p.flow < 0.1 * c2]
    if collapsed:
        probe = max(collapsed)
        sustained = flow4.get(probe, 0.0) > 0.1 * c4
        detail = f"s2 collapses by n={probe}, s4 flow there {flow4.get(probe, 0.0):.0f}"
    else:
        probe = max(p.n for p in pts2)
        sustained = all(f > 0 for f in flow4.values())
        detail = (f"s2 never collapses (min {min(flows(pts2)):.0f}); s4 flow > 0 at every n "
                  f"up to {max(flow4)} incl. n={probe}")
    ok = c4 >= 1.03 * c2 and sustained
    verdict(verdicts, 7, ok, f"capacity s4={c4:.0f} vs 1.03*s2={1.03 * c2:.0f}; {detail}")
    assert ok


# --- 8 ---------------------------------------------------------------------

@pytest.mark.slow
def test_c8_capacity_plausibility(sweep, verdicts):
    c1, n1 = capacity(sweep.points["no_nudging"])
    ok = c1 > 6000
    verdict(verdicts, 8, ok, f"scenario 1 capacity {c1:.0f} veh/h at n={n1} (>6000)")
    assert ok


# --- 9 ---------------------------------------------------------------------

def test_c9_determinism(tmp_path, verdicts):
    conf = tmp_path / "c.json"
    conf.write_text('{"sim": {"horizon_steps": 400, "measure_window_steps": 200}}')
    args = ["fd", "--config", str(conf), "--n", "100,300"]
    for out in ("a", "b"):
        assert main(args + ["--out", str(tmp_path / out)]) == 0
    same = [(tmp_path / "a" / f"fd_{s}.csv").read_bytes() == (tmp_path / "b" / f"fd_{s}.csv").read_bytes()
            for s in ORDER]
    ok = all(same)
    verdict(verdicts, 9, ok, f"two fd executions, {sum(same)}/4 CSVs byte-identical")
    assert ok


# --- 10 --------------------------------------------------------------------

@pytest.mark.slow
def test_c10_runtime(sweep, verdicts):
    times = {s: sweep.seconds[s, 450] for s in ORDER}
    slowest = max(times.values())
    ok = slowest <= 60.0
    verdict(verdicts, 10, ok, "n=450 K=6000 single-run wall time "
            + ", ".join(f"{s} {t:.1f}s" for s, t in times.items()) + " (<=60s)")
    assert ok


# --- 11 --------------------------------------------------------------------

@pytest.mark.slow
def test_c11_stationarity(sweep, verdicts):
    pts = [(s, p) for s in ORDER for p in sweep.points[s]]
    bad = [f"{s}/{p.n} ({p.extras.get('previous_window_flow', float('nan')):.0f}->{p.flow:.0f})"
           for s, p in pts if not p.stationary]
    ok = not bad
    verdict(verdicts, 11, ok, f"{len(pts) - len(bad)}/{len(pts)} points within 10% of the "
                              f"preceding window; off: {bad}")
    assert ok
