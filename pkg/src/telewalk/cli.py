"""Command-line entry points: run, replay, serve, validate.

Exit codes: 0 ok, 2 invalid configuration, 3 runtime abort (offending tick on
stderr).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .simloop import SimAbort, read_command_stream, run_scenario


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="scenario YAML path")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config entry "
                   "(dotted path, repeatable)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telewalk",
        description="Teleoperated bipedal walking simulator")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_run = sub.add_parser("run", help="run the scenario as configured")
    _add_common(p_run)
    p_run.add_argument("--out", help="telemetry CSV path")

    p_replay = sub.add_parser("replay",
                              help="run against a recorded command file")
    _add_common(p_replay)
    p_replay.add_argument("--commands", help="command CSV (defaults to the "
                          "scenario's command_source path)")
    p_replay.add_argument("--out", help="telemetry CSV path")

    p_serve = sub.add_parser("serve", help="live teleoperation bridge")
    _add_common(p_serve)
    p_serve.add_argument("--port", type=int, help="WebSocket port")
    p_serve.add_argument("--duration", type=float,
                         help="simulated seconds before the server exits")
    p_serve.add_argument("--out", help="telemetry CSV path")
    p_serve.add_argument("--capture", help="write the tick-sampled commands "
                         "actually consumed to this CSV")

    p_val = sub.add_parser("validate",
                           help="check the configuration without simulating")
    _add_common(p_val)
    return parser


def _summary_exit(summary, verbose: int) -> int:
    for line in summary.lines():
        print(line)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, overrides=args.overrides)
    except ConfigError as e:
        print(f"config invalid: {e}", file=sys.stderr)
        return 2

    if args.subcommand == "validate":
        print("config ok")
        print(f"model: {config.model.name} ({config.model.n_joints} joints)")
        print(f"omega: {config.omega:.6g} 1/s (z_com {config.z_com} m)")
        return 0

    try:
        if args.subcommand == "run":
            summary = run_scenario(config, out_path=args.out)
            return _summary_exit(summary, args.verbose)

        if args.subcommand == "replay":
            provider = None
            if args.commands:
                provider = read_command_stream(args.commands)
            summary = run_scenario(config, out_path=args.out,
                                   command_provider=provider)
            return _summary_exit(summary, args.verbose)

        if args.subcommand == "serve":
            from .bridge import serve
            summary = serve(config, port=args.port, duration=args.duration,
                            telemetry_path=args.out, capture_path=args.capture)
            return _summary_exit(summary, args.verbose)
    except SimAbort as e:
        print(f"runtime abort at tick {e.tick}: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"config invalid: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
