"""Command-line entry point: simulate, sweep, policy-table."""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import sys
from pathlib import Path

from .errors import ScenarioParseError, ScenarioValidationError
from .policy import Objective, policy_table_text
from .runner import export_metrics, run_scenario
from .scenario import build_scenario, load_scenario


def _set_dotted(data: dict, dotted_key: str, value) -> None:
    parts = dotted_key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ScenarioParseError(f"cannot override through non-object key '{part}'")
    node[parts[-1]] = value


def _parse_param(spec: str) -> tuple[str, list]:
    if "=" not in spec:
        raise ScenarioParseError(f"--param expects KEY=V1,V2,... (got '{spec}')")
    key, _, raw_values = spec.partition("=")
    values = []
    for chunk in raw_values.split(","):
        try:
            values.append(json.loads(chunk))
        except json.JSONDecodeError:
            values.append(chunk)
    if not values:
        raise ScenarioParseError(f"--param '{key}' has no values")
    return key, values


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.objective is not None:
        data = copy.deepcopy(scenario.raw)
        data["objective"] = args.objective
        scenario = build_scenario(data, source=str(args.scenario))
    bundle = run_scenario(scenario, seed=args.seed)
    paths = export_metrics(bundle, args.out)
    print(f"scenario '{bundle.scenario_name}' seed={bundle.seed}")
    print(f"migrations: {len(bundle.reports)}, rtt samples: {len(bundle.rtt_series)}")
    for name in ("migrations", "rtt", "trace", "summary"):
        print(f"wrote {paths[name]}")
    return 0


def _cmd_sweep(args) -> int:
    base = load_scenario(args.scenario)
    axes = [_parse_param(spec) for spec in args.param]
    out_root = Path(args.out)
    print(f"{'variant':<56}{'migrations':>11}{'downtime_us':>13}{'bytes':>14}")
    for combo in itertools.product(*(values for _, values in axes)):
        data = copy.deepcopy(base.raw)
        label_parts = []
        for (key, _), value in zip(axes, combo):
            _set_dotted(data, key, value)
            label_parts.append(f"{key.split('.')[-1]}={value}")
        label = ",".join(label_parts)
        scenario = build_scenario(data, source=str(args.scenario))
        bundle = run_scenario(scenario, seed=args.seed)
        safe_label = label.replace("/", "_")
        export_metrics(bundle, out_root / safe_label)
        downtime = sum(rec.report.downtime_us for rec in bundle.reports)
        total_bytes = sum(
            rec.report.bytes_transferred + rec.report.sync_bytes
            for rec in bundle.reports
        )
        print(f"{label:<56}{len(bundle.reports):>11}{downtime:>13}{total_bytes:>14}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nfmigsim",
        description="Simulate live migration of virtualized 5G core functions "
        "across edge hosts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim_parser = sub.add_parser("simulate", help="run one scenario and export metrics")
    sim_parser.add_argument("scenario", type=Path, help="scenario file (JSON)")
    sim_parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim_parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    sim_parser.add_argument(
        "--objective",
        choices=[o.value for o in Objective],
        default=None,
        help="override the scenario objective",
    )

    sweep_parser = sub.add_parser(
        "sweep", help="run a scenario across parameter variants"
    )
    sweep_parser.add_argument("scenario", type=Path)
    sweep_parser.add_argument(
        "--param",
        action="append",
        required=True,
        metavar="KEY=V1,V2,...",
        help="dotted scenario key and comma-separated values; repeatable "
        "(variants form the cross product)",
    )
    sweep_parser.add_argument("--seed", type=int, default=None)
    sweep_parser.add_argument("--out", type=Path, default=Path("out"))

    sub.add_parser("policy-table", help="print the strategy decision grid")

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        print(policy_table_text(), end="")
        return 0
    except (ScenarioParseError, ScenarioValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
