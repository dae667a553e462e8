"""Command line front end.

Verbs: run, profile, record, replay, export, bench. Exit codes: 0 ok,
2 bad config, 3 world load failure, 4 I/O or log format problem,
1 anything else.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..bus import MessageBus
from .bag import BagError, iterate_bag, replay
from .config import (
    ConfigError,
    WorldLoadError,
    bundled_scenario_names,
    resolve_scenario,
    with_overrides,
)
from .profiler import format_table, profile_tasks
from .scenario import MissingTraceError, export_cycles, export_cycles_from_csv, run_scenario


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tenthcar",
        description="Scaled-vehicle software twin: scenarios, profiling, bags.",
    )
    sub = p.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run a scenario and write artifacts")
    run.add_argument("--scenario", required=True,
                     help=f"bundled name ({', '.join(bundled_scenario_names())}) or YAML path")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--duration", type=float, default=None)
    run.add_argument("--out", default="out", help="artifact directory")
    run.add_argument("--record", default=None, help="also record topics to this bag file")

    prof = sub.add_parser("profile", help="per-task-set CPU/memory table")
    prof.add_argument("--scenario", default="ladder")
    prof.add_argument("--duration", type=float, default=None)
    prof.add_argument("--no-calibration", action="store_true")

    rec = sub.add_parser("record", help="run a scenario, recording topics to a bag")
    rec.add_argument("--scenario", required=True)
    rec.add_argument("--topics", default="scan,odom",
                     help="comma-separated topic list")
    rec.add_argument("--out", required=True, help="bag file path")
    rec.add_argument("--seed", type=int, default=None)

    rep = sub.add_parser("replay", help="republish a bag")
    rep.add_argument("bag")
    rep.add_argument("--speed", type=float, default=1.0,
                     help="time scale; <= 0 replays as fast as possible")

    exp = sub.add_parser("export", help="re-emit actuator cycle CSV from a run dir")
    exp.add_argument("run_dir")
    exp.add_argument("--out", default=None, help="defaults to the run dir")

    sub.add_parser("bench", help="compare compiled and pure kernels")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except WorldLoadError as exc:
        print(f"world error: {exc}", file=sys.stderr)
        return 3
    except (BagError, MissingTraceError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


def _dispatch(args) -> int:
    if args.verb == "run":
        cfg = with_overrides(resolve_scenario(args.scenario), args.seed, args.duration)
        record = getattr(args, "record", None)
        if record:
            cfg = cfg if cfg.record_topics else _with_record(cfg)
        log = run_scenario(cfg, out_dir=args.out, record_path=record)
        export_cycles(log, args.out)
        print(f"{cfg.name}: {len(log.rows)} ticks, artifacts in {args.out}")
        for topic, stats in sorted(log.topic_stats.items()):
            print(f"  {topic}: published {stats['published']}, "
                  f"dropped {stats['dropped']}")
        if log.config.goal is not None:
            print(f"  goal reached: {log.goal_reached}, "
                  f"min clearance {log.min_clearance:.3f} m")
        return 0

    if args.verb == "profile":
        cfg = with_overrides(resolve_scenario(args.scenario), None, args.duration)
        rows = profile_tasks(cfg, include_calibration=not args.no_calibration)
        print(format_table(rows))
        return 0

    if args.verb == "record":
        cfg = with_overrides(resolve_scenario(args.scenario), args.seed, None)
        topics = tuple(t for t in args.topics.split(",") if t)
        from dataclasses import replace

        cfg = replace(cfg, record_topics=topics)
        log = run_scenario(cfg, record_path=args.out)
        total = sum(s["published"] for t, s in log.topic_stats.items() if t in topics)
        print(f"recorded {total} envelopes on {','.join(topics)} to {args.out}")
        return 0

    if args.verb == "replay":
        count = sum(1 for _ in iterate_bag(args.bag))  # validate before publishing
        bus = MessageBus()
        n = replay(bus, args.bag, speed=args.speed)
        print(f"replayed {n} of {count} envelopes from {args.bag}")
        return 0

    if args.verb == "export":
        out = args.out if args.out is not None else args.run_dir
        path = export_cycles_from_csv(Path(args.run_dir) / "trajectory.csv", out)
        print(f"wrote {path}")
        return 0

    if args.verb == "bench":
        from ..kernels.bench import format_bench, run_bench

        print(format_bench(run_bench()))
        return 0

    return 1


def _with_record(cfg):
    from dataclasses import replace

    return replace(cfg, record_topics=("scan", "odom", "pose", "cmd"))


if __name__ == "__main__":
    sys.exit(main())
