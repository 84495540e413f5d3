"""Command-line entry point: ``lanefree fd | run | audit``.

Exit codes: 0 success, 1 configuration or usage error, 2 safety or
invariant violation.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ResolvedConfig, from_dict, load_config
from .engine import TOL, InvariantViolation, WorldState, collision_audit, run
from .harness import initial_placement, derive_seed, run_fd_series, scenario_start
from .output import (TrajectoryWriter, audit_summary, fd_svg, point_summary, read_trajectories,
                     write_fd_csv, write_manifest)
from .road import ConfigError

log = logging.getLogger("lanefree")

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2
DEFAULT_FD_SCENARIOS = ("no_nudging", "nominal", "moderate", "widened")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None
    if not values or min(values) < 0:
        raise argparse.ArgumentTypeError("need at least one non-negative integer")
    return values


def _scenario_names(raw: list[str] | None) -> list[str]:
    if raw is None:
        return list(DEFAULT_FD_SCENARIOS)
    names = [part.strip() for item in raw for part in item.split(",")]
    if not names or any(not n for n in names):
        raise UsageError("scenario list is empty")
    return list(dict.fromkeys(names))


def _resolve(args) -> ResolvedConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _manifest(command: str, cfg: ResolvedConfig, started: str, **extra) -> dict:
    return {"tool": "lanefree", "version": __version__, "command": command,
            "seed": cfg.sim.seed, "config": cfg.to_dict(), "started_utc": started,
            "finished_utc": _now(), **extra}


def cmd_fd(args) -> int:
    started = _now()
    cfg = _resolve(args)
    names = _scenario_names(args.scenario)
    specs = [cfg.scenario(n) for n in names]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    series, rows, outputs = {}, [], []
    for spec in specs:
        points = run_fd_series(spec, cfg.sim, cfg.params, n_values=args.n,
                               placement=cfg.placement)
        series[spec.name] = points
        path = out / f"fd_{spec.name}.csv"
        write_fd_csv(path, points)
        outputs.append(path.name)
        rows.extend(point_summary(spec.name, p) for p in points)
        for p in points:
            print(f"{spec.name} n={p.n} flow={p.flow:.0f} veh/h speed={p.mean_speed:.2f} m/s "
                  f"stationary={p.stationary} collisions={p.collisions}"
                  + (f" error={p.error}" if p.error else ""))

    (out / "fd.svg").write_text(fd_svg(series))
    outputs.append("fd.svg")
    audit = audit_summary(rows)
    write_manifest(out / "manifest.json", _manifest(
        "fd", cfg, started, scenarios=names, n_values=args.n, outputs=outputs + ["manifest.json"],
        audit=audit))
    return EXIT_OK if audit["clean"] else EXIT_INVARIANT


def cmd_run(args) -> int:
    started = _now()
    if args.n < 0:
        raise UsageError("--n must be non-negative")
    cfg = _resolve(args)
    spec = cfg.scenario(args.scenario)
    params, sim, world = scenario_start(spec, args.n, cfg.params, cfg.sim, cfg.placement)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    outputs, error, point = [], None, None
    fh = None
    try:
        hook = None
        if args.trajectories is not None:
            fh = open(out / "trajectories.csv", "w", newline="")
            hook = TrajectoryWriter(fh, args.trajectories)
            outputs.append("trajectories.csv")
        point, _ = run(world, params, sim, keep_records=False, on_step=hook)
    except InvariantViolation as exc:
        error = str(exc)
        log.error("run aborted: %s", exc)
    finally:
        if fh is not None:
            fh.close()

    if point is not None:
        print(f"n={point.n} density={point.density:g} veh/km flow={point.flow:g} veh/h "
              f"mean_speed={point.mean_speed:.4f} m/s stationary={point.stationary} "
              f"collisions={point.collisions}")
        rows = [point_summary(spec.name, point)]
    else:
        rows = [{"scenario": spec.name, "n": args.n, "flow_veh_per_h": None,
                 "stationary": False, "collisions": None, "error": error}]
    audit = audit_summary(rows) if point is not None else {"clean": False, "points": rows}
    write_manifest(out / "manifest.json", _manifest(
        "run", cfg, started, scenario=spec.name, n=args.n, trajectories_every=args.trajectories,
        outputs=outputs + ["manifest.json"], audit=audit))
    return EXIT_OK if audit["clean"] else EXIT_INVARIANT


def audit_trajectories(states: dict, cfg: ResolvedConfig, scenario: str) -> list[tuple]:
    """Violation rows ``(step, kind, ids, detail)`` for recorded states.

    Vehicle dimensions and desired speeds are regenerated from the
    placement the recording started from.
    """
    spec = cfg.scenario(scenario)
    ids = sorted({int(i) for s in states.values() for i in s["id"]})
    n = len(ids)
    if ids != list(range(n)):
        raise ValueError("trajectory ids must be 0..n-1")
    params, sim = spec.apply(cfg.params, cfg.sim)
    rng = np.random.default_rng(derive_seed(sim.seed, spec.name, n))
    start = initial_placement(n, sim.geometry, params, rng, cfg.placement)
    L, W = sim.geometry.length_m, sim.geometry.width_m

    rows = []
    for step, s in states.items():
        cls = start.dim_class[s["id"]]
        world = WorldState(t=float(s["t"][0]), step_index=step, ids=s["id"], x=s["x"], y=s["y"],
                           v_x=s["v_x"], v_y=s["v_y"], v_d=start.v_d[s["id"]], dim_class=cls)
        for a, b in collision_audit(world, L):
            rows.append((step, "collision", f"{a},{b}", "rectangles overlap"))
        half_w = 0.5 * world.width
        checks = (
            (world.y - half_w < -TOL, "boundary", "right edge crossed"),
            (world.y + half_w > W + TOL, "boundary", "left edge crossed"),
            ((world.x < 0.0) | (world.x >= L), "boundary", "x outside the ring"),
            (world.v_x < -TOL, "speed_cap", "v_x < 0"),
            (world.v_x > (1.0 + params.alpha) * world.v_d + TOL, "speed_cap", "v_x above overspeed cap"),
            (np.abs(world.v_y) > params.beta * world.v_x + TOL, "lateral_cap", "|v_y| > beta*v_x"),
        )
        for bad, kind, detail in checks:
            for k in np.flatnonzero(bad):
                rows.append((step, kind, str(int(world.ids[k])), detail))
    return rows


def cmd_audit(args) -> int:
    if args.manifest is not None:
        try:
            doc = json.loads(Path(args.manifest).read_text())
            cfg = from_dict(doc["config"])
            scenario = args.scenario or doc["scenario"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"unusable manifest {args.manifest}: {exc}") from None
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    else:
        cfg = _resolve(args)
        scenario = args.scenario or "nominal"
    try:
        states = read_trajectories(Path(args.trajectories))
        rows = audit_trajectories(states, cfg, scenario)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.trajectories}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"schema mismatch: {exc}") from None

    print(f"{'step':>8}  {'kind':<12} {'ids':<12} detail")
    for step, kind, ids, detail in rows:
        print(f"{step:>8}  {kind:<12} {ids:<12} {detail}")
    print(f"{len(states)} recorded steps, {len(rows)} violation(s)")
    return EXIT_OK if not rows else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lanefree", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON configuration file (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override the configured base seed")

    p = sub.add_parser("fd", help="fundamental-diagram series for one or more scenarios")
    common(p)
    p.add_argument("--scenario", action="append",
                   help="scenario name; repeat or comma-separate (default: the four built-ins)")
    p.add_argument("--n", type=_int_list, help="comma-separated vehicle counts (default: per scenario)")
    p.add_argument("--out", default="out", help="output directory")
    p.set_defaults(func=cmd_fd)

    p = sub.add_parser("run", help="a single simulation")
    common(p)
    p.add_argument("--scenario", default="nominal", help="scenario name (default: nominal)")
    p.add_argument("--n", type=int, required=True, help="vehicle count")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--trajectories", type=int, metavar="K",
                   help="write trajectories.csv sampled every K steps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="check a recorded trajectories.csv for safety violations")
    p.add_argument("trajectories", help="trajectories.csv written by 'run'")
    common(p)
    p.add_argument("--scenario", help="scenario the trace was recorded under (default: nominal)")
    p.add_argument("--manifest", help="take config, scenario and seed from a run manifest")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "trajectories", None) is not None and args.command == "run" \
            and args.trajectories <= 0:
        parser.error("--trajectories must be positive")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lanefree: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"lanefree: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
