import argparse
import asyncio
import json
import logging
import sys
from typing import Optional, Sequence, get_args

from lab.exceptions import ConfigError
from lab.graph import EXIT_CODES
from lab.reporting import format_table
from lab.runner import run, stream_events
from lab.schemas import Command, ExperimentConfig, load_config, parse_config
from parabolic.settings import LOG_LEVEL

COMMANDS: tuple[str, ...] = get_args(Command)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"invalid JSON at column {e.colno}: {e.msg}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config; flags override its values")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int, help="particle draws per cloud")
    common.add_argument("--jobs", type=int)
    common.add_argument("--budget", type=int, help="maximum total particle draws")
    common.add_argument("--out", help="report path (default: the report directory)")
    common.add_argument("--log-level", default=None)
    common.add_argument("--table", action="store_true", help="print a check table")
    common.add_argument("--stream", action="store_true", help="print pipeline progress")
    common.add_argument("--model", type=_json, help='model spec as JSON, e.g. {"kind": "flat_plane", "n": 2}')
    common.add_argument("--n", type=int, help="dimension for flat_plane / vertical_line / kp_cone models")
    common.add_argument("--center", type=_floats, help="h_1,...,h_n,t")
    common.add_argument("--radii", type=_floats)
    common.add_argument("--metric", choices=["koranyi", "box"])
    common.add_argument("--points", type=int)
    common.add_argument("--tolerance", type=float, help="standard-error multiple for Monte-Carlo checks")

    parser = argparse.ArgumentParser(prog="parabolic-lab", description="Parabolic measure experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "moments":
            p.add_argument("--s", type=float)
            p.add_argument("--k-max", type=int)
        elif name == "bwgl":
            p.add_argument("--eta", type=float)
            p.add_argument("--depth", type=int)
            p.add_argument("--j0", type=int)
        elif name == "wcd":
            p.add_argument("--eps", type=float)
        elif name == "quadric-expansion":
            p.add_argument("--D", type=_json, help="symmetric matrix as JSON")
        elif name == "counterexample":
            p.add_argument("--base", type=int)
            p.add_argument("--levels", type=int)
            p.add_argument("--profile-seed", type=int)
            p.add_argument("--scales", type=_floats)
        elif name == "square-function":
            p.add_argument("--q", type=float)
            p.add_argument("--min-atoms", type=int)
    return parser


def _model_from_flags(args: argparse.Namespace) -> Optional[dict]:
    if args.model is not None:
        return args.model
    if getattr(args, "D", None) is not None:
        return {"kind": "quadric_graph", "D": args.D}
    if args.command == "counterexample" and any(
        getattr(args, k) is not None for k in ("base", "levels", "profile_seed")
    ):
        spec = {"kind": "holder_graph"}
        for flag, key in (("base", "base"), ("levels", "levels"), ("profile_seed", "seed")):
            if getattr(args, flag) is not None:
                spec[key] = getattr(args, flag)
        return spec
    if args.n is not None:
        return {"kind": "flat_plane", "n": args.n}
    return None


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        "command": args.command,
        "model": _model_from_flags(args),
        "seed": args.seed,
        "samples": args.samples,
        "jobs": args.jobs,
        "budget": args.budget,
        "out": args.out,
        "center": args.center,
        "radii": args.radii if args.radii is not None else getattr(args, "scales", None),
        "metric": args.metric,
        "points": args.points,
        "tolerance": args.tolerance,
    }
    for key in ("s", "k_max", "eta", "depth", "j0", "eps", "q", "min_atoms"):
        overrides[key] = getattr(args, key, None)
    if args.config:
        return load_config(args.config, overrides)
    return parse_config({k: v for k, v in overrides.items() if v is not None})


async def _stream(config: ExperimentConfig) -> dict:
    final_state = None
    async for event in stream_events(config):
        if event["type"] == "node_start":
            print(f"[{event['name']}]", flush=True)
        elif event["type"] == "check":
            mark = "ok" if event["passed"] else "FAILED"
            print(f"  {event['name']}: {event['value']:.6g} ({mark})", flush=True)
        elif event["type"] == "report":
            print(f"[report written to {event['path']}]")
        elif event["type"] == "final_state":
            final_state = event["state"]
    return final_state


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
    except ConfigError as e:
        print(f"config error:\n{e.detail}", file=sys.stderr)
        print("[exit_reason=CONFIG_ERROR]")
        return e.exit_code

    state = asyncio.run(_stream(config)) if args.stream else run(config)
    if state is None:
        print("[Error: No final state received]", file=sys.stderr)
        return 1
    report = state.get("report")
    if args.table and report is not None:
        print(format_table(report))
    else:
        if state.get("report_path"):
            print(f"report: {state['report_path']}")
        print(f"[exit_reason={state.get('exit_reason')}]")
    if state.get("error"):
        print(state["error"], file=sys.stderr)
    return EXIT_CODES[state["exit_reason"]]


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nExiting...")
        sys.exit(130)
