"""Scenario runner: parse a scenario file, simulate, trace, check, summarize.

Verbs:
    run    simulate one scenario; optionally write the trace, run the
           checks, and print a summary
    check  re-run all checks offline against a written trace file
    sweep  run one scenario across many seeds and aggregate check results

Exit codes: 0 all good, 1 a check failed, 2 config or parse error,
3 the run hit max_steps before quiescence.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import sys
from pathlib import Path

from .checker import PASS, run_all_checks
from .netsim import ConfigInvalid, ScriptAction, SimConfig, run
from .strategy import AgentSpec, StrategyKind, utility
from .trace import read_trace, write_trace

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NONQUIESCENT = 3


def parse_action(raw: dict) -> dict:
    verbs = [k for k in raw if k in ("pay", "backfill")]
    if len(verbs) != 1:
        raise ConfigInvalid(f"script action must name exactly one verb, got {sorted(raw)}")
    verb = verbs[0]
    body = raw[verb] or {}
    action = {"type": verb}
    if verb == "pay":
        action.update(
            to=int(body["to"]),
            amount=int(body["amount"]),
            convert_fees=bool(body.get("convert_fees", False)),
        )
    return action


def build_config(raw: dict, seed_override: int | None = None) -> SimConfig:
    try:
        agents = [
            AgentSpec(int(a["id"]), StrategyKind(a["kind"]), a.get("params", {}))
            for a in raw["agents"]
        ]
        script = [
            ScriptAction(int(s["tick"]), int(s["agent"]), parse_action(s["action"]))
            for s in raw.get("script", [])
        ]
        config = SimConfig(
            n=int(raw["n"]),
            t=int(raw["t"]),
            epsilon=int(raw.get("epsilon", 1)),
            initial_balance=int(raw.get("initial_balance", 1000)),
            seed=seed_override if seed_override is not None else int(first_seed(raw)),
            d_min=int(raw.get("d_min", 1)),
            d_max=int(raw.get("d_max", 1)),
            fifo_channels=bool(raw.get("fifo_channels", False)),
            condition3_strict=bool(raw.get("condition3_strict", False)),
            msg_cost_c=raw.get("msg_cost_c", 0),
            agents=agents,
            script=script,
            max_steps=int(raw.get("max_steps", 1_000_000)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad scenario field: {exc}") from exc
    config.validate()
    return config


def first_seed(raw: dict) -> int:
    if "seed" in raw:
        return raw["seed"]
    if "seeds" in raw:
        return raw["seeds"][0]
    if "seed_range" in raw:
        return raw["seed_range"][0]
    return 0


def scenario_seeds(raw: dict, flag: str | None) -> list[int]:
    if flag:
        if ".." in flag:
            lo, hi = flag.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(s) for s in flag.split(",")]
    if "seeds" in raw:
        return [int(s) for s in raw["seeds"]]
    if "seed_range" in raw:
        lo, hi = raw["seed_range"]
        return list(range(int(lo), int(hi) + 1))
    return [int(raw.get("seed", 0))]


def load_scenario(path: str) -> dict:
    text = Path(path).read_text()
    return json.loads(text)


def print_reports(reports) -> None:
    for report in reports:
        line = f"[{report.status}] {report.name}"
        if report.detail:
            line += f": {report.detail}"
        print(line)


def print_summary(result, config: SimConfig) -> None:
    records = result.records
    reference = next(
        (s.id for s in config.agents if s.kind is StrategyKind.COMPLIANT),
        config.agents[0].id,
    )
    balances = result.agents[reference].ledger.B
    print(f"quiescent: {result.quiescent}  steps: {result.steps}")
    print(f"balances (view of agent {reference}): "
          + " ".join(f"{i}:{balances[i]}" for i in sorted(balances)))
    print("agent  kind                executed  utility")
    for spec in sorted(config.agents, key=lambda s: s.id):
        executed = len(result.agents[spec.id].ledger.executed)
        score = utility(records, spec.id, config.msg_cost_c)
        print(f"{spec.id:<6} {spec.kind.value:<19} {executed:<9} {score}")


def cmd_run(args) -> int:
    try:
        raw = load_scenario(args.scenario)
        config = build_config(raw, args.seed)
    except (OSError, json.JSONDecodeError, ConfigInvalid) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run(config)
    if args.trace:
        with open(args.trace, "w") as fp:
            write_trace(result.records, fp)
    code = EXIT_OK
    if args.check:
        reports = run_all_checks(result.records)
        print_reports(reports)
        if any(r.status != PASS for r in reports):
            code = EXIT_CHECK_FAILED
    if args.summary:
        print_summary(result, config)
    if not result.quiescent:
        print("warning: run hit max_steps before quiescence", file=sys.stderr)
        return EXIT_NONQUIESCENT
    return code


def cmd_check(args) -> int:
    try:
        with open(args.trace) as fp:
            records = read_trace(fp)
        reports = run_all_checks(records)
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"error: unreadable trace: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print_reports(reports)
    return EXIT_OK if all(r.status == PASS for r in reports) else EXIT_CHECK_FAILED


def _sweep_one(payload) -> tuple[int, bool, list[str]]:
    raw, seed = payload
    config = build_config(raw, seed)
    result = run(config)
    reports = run_all_checks(result.records)
    failures = [r.name for r in reports if r.status != PASS]
    if not result.quiescent:
        failures.append("quiescence")
    return seed, not failures, failures


def cmd_sweep(args) -> int:
    try:
        raw = load_scenario(args.scenario)
        seeds = scenario_seeds(raw, args.seeds)
        build_config(raw, seeds[0])  # validate once before forking workers
    except (OSError, json.JSONDecodeError, ConfigInvalid, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    payloads = [(raw, seed) for seed in seeds]
    if args.workers > 1:
        with multiprocessing.Pool(args.workers) as pool:
            results = pool.map(_sweep_one, payloads)
    else:
        results = [_sweep_one(p) for p in payloads]
    results.sort(key=lambda r: r[0])
    good = sum(1 for _, ok, _ in results if ok)
    print(f"{good}/{len(results)} PASS")
    for seed, ok, failures in results:
        if not ok:
            print(f"seed {seed}: {', '.join(failures)}")
    return EXIT_OK if good == len(results) else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ledgersim",
        description="simulate a consensus-free money-transfer protocol and check its invariants",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--trace", help="write line-delimited trace records here")
    p_run.add_argument("--check", action="store_true", help="run all checks on the trace")
    p_run.add_argument("--summary", action="store_true", help="print final balances and utility")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="re-check a written trace file")
    p_check.add_argument("trace")
    p_check.set_defaults(func=cmd_check)

    p_sweep = sub.add_parser("sweep", help="run a scenario across many seeds")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--seeds", help="e.g. 1..1000 or 3,5,8")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


def entry() -> None:
    sys.exit(main())
