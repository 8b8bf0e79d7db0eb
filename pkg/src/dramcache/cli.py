"""Command-line entry point: ``dramcache run|sweep|validate``.

Config keys can be overridden from the environment as ``DRAMCACHE__<SECTION>__<KEY>``,
for example ``DRAMCACHE__LINK__FAR_LINK_ROUND_TRIP_NS=500``.
"""

import argparse
import copy
import sys

from . import config as cfgmod
from .cache_mgr import InvariantViolation
from .core import ConfigError
from .system import simulate
from .telemetry import emit, to_csv
from .validation import format_table, run_suite

EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def _load(args):
    raw = cfgmod.load(args.config)
    if args.seed is not None:
        raw["engine"]["seed"] = args.seed
    if args.format is not None:
        raw["output"]["format"] = args.format
    if args.out is not None:
        raw["output"]["path"] = args.out
    return raw


def _write(text, path):
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _run_one(cfg, debug_events=None):
    if debug_events is None:
        return simulate(cfg)[0]
    with open(debug_events, "w") as log:
        return simulate(cfg, event_log=log)[0]


def cmd_run(args):
    cfg = cfgmod.from_raw(_load(args))
    report = _run_one(cfg, args.debug_events)
    _write(emit([report], cfg.output_format), cfg.output_path)
    return 0


def parse_values(items):
    values = []
    for item in items:
        values.extend(v for v in item.split(",") if v.strip())
    if not values:
        raise ConfigError("sweep needs at least one value")
    return [v.strip() for v in values]


def sweep(raw, axis, values):
    """Run one isolated engine per value of ``axis``; returns the reports in order."""
    section, key = cfgmod.resolve_key(axis)
    reports = []
    base_id = raw["engine"]["run_id"]
    for value in values:
        point = copy.deepcopy(raw)
        cfgmod.set_value(point, f"{section}.{key}", value)
        point["engine"]["run_id"] = f"{base_id}-{key}={value}"
        reports.append(simulate(cfgmod.from_raw(point))[0])
    return reports


def cmd_sweep(args):
    raw = _load(args)
    reports = sweep(raw, args.axis, parse_values(args.values))
    out = raw["output"]
    _write(emit(reports, out["format"]), out["path"] or None)
    return 0


def cmd_validate(args):
    checks, reports = run_suite(seed=1 if args.seed is None else args.seed, name_filter=args.filter)
    print(format_table(checks), end="")
    if args.out and reports:
        _write(emit(reports, args.format or "csv"), args.out)
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print("failed checks:", file=sys.stderr)
        for name in failed:
            print(f"  {name}", file=sys.stderr)
        return EXIT_FAILED_CHECK
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="dramcache", description="Near/far memory DRAM cache simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override engine.seed")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), help="report format")
    common.add_argument("--debug-events", metavar="PATH", help="log every device access to PATH")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one configuration")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="run one configuration per value of a key")
    p.add_argument("config")
    p.add_argument("--axis", required=True, help="config key, dotted (link.far_link_round_trip_ns) or bare")
    p.add_argument("--values", required=True, nargs="+", help="values, space or comma separated")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", parents=[common], help="run the built-in validation checks")
    p.add_argument("--filter", help="only run checks whose name contains this text")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
