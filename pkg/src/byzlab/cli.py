"""Command-line entry point.

Exit codes: 0 pass, 1 property violated, 2 input error, 3 search too large,
4 threshold error. Reports are JSON on stdout; ``--verbose`` adds a human
summary on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from dataclasses import replace
from pathlib import Path

from . import mpc
from .engine import run_protocol
from .model import (
    ALL_CLASSES,
    FaultClass,
    ScenarioError,
    decisions_to_dict,
    dumps_scenario,
    load_scenario,
    scenario_to_dict,
)
from .verifier import (
    DEFAULT_CAP,
    SearchSpaceTooLarge,
    bound_oracle,
    check_verdict,
    exhaustive_search,
    search_all_traitor_sets,
)

EXIT_OK, EXIT_VIOLATED, EXIT_INPUT, EXIT_TOO_LARGE, EXIT_THRESHOLD = 0, 1, 2, 3, 4


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _emit(report: dict, out=None) -> None:
    (out or sys.stdout).write(dumps(report) + "\n")


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _seed_override(scenario):
    raw = os.environ.get("BYZ_SEED")
    if raw is None:
        return scenario
    try:
        return replace(scenario, seed=int(raw, 0))
    except ValueError:
        raise ScenarioError(f"BYZ_SEED must be an integer, got {raw!r}") from None


def run_report(scenario, verbose=False) -> tuple[dict, int]:
    transcript = run_protocol(scenario)
    verdict = check_verdict(transcript, scenario)
    report = {
        "scenario": scenario_to_dict(scenario),
        "verdict": verdict.to_dict(),
        "decisions": decisions_to_dict(transcript.decisions),
    }
    if verbose:
        report["transcript"] = transcript.to_dict()["rounds"]
    return report, (EXIT_OK if verdict.ok else EXIT_VIOLATED)


def cmd_run(args) -> int:
    try:
        scenario = _seed_override(load_scenario(args.file))
    except (OSError, ScenarioError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    report, code = run_report(scenario, verbose=args.verbose)
    _emit(report)
    if args.verbose:
        v = report["verdict"]
        print(
            f"ic1={v['ic1']} ic2={v['ic2']} rounds_used={v['rounds_used']} "
            f"horizon_respected={v['horizon_respected']}",
            file=sys.stderr,
        )
    return code


def _parse_agents(raw: str) -> list[int]:
    try:
        return [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ScenarioError(f"expected comma-separated agent ids, got {raw!r}") from None


def cmd_search(args) -> int:
    try:
        template = _seed_override(load_scenario(args.file))
        traitors = _parse_agents(args.traitors) if args.traitors is not None else None
    except (OSError, ScenarioError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    decisions = (template.decision,) if args.fixed_decision else None
    try:
        if args.max_traitors is not None:
            report = search_all_traitor_sets(
                template, args.max_traitors, decisions=decisions, cap=args.cap, workers=args.workers
            )
        else:
            report = exhaustive_search(
                template, traitors, decisions=decisions, cap=args.cap, workers=args.workers
            )
    except SearchSpaceTooLarge as exc:
        _emit({"error": "search_space_too_large", "cardinality": exc.cardinality, "cap": exc.cap})
        return _fail(str(exc), EXIT_TOO_LARGE)
    except ValueError as exc:
        return _fail(str(exc), EXIT_INPUT)

    out = report.to_dict()
    if not report.all_pass:
        path = Path(args.out) if args.out else Path(args.file).with_suffix(".counterexample.json")
        path.write_text(dumps_scenario(report.worst.scenario), encoding="utf-8")
        out["counterexample_file"] = str(path)
    _emit(out)
    if args.verbose:
        print(
            f"checked {report.scenarios_checked} adversaries, {report.violations} violations",
            file=sys.stderr,
        )
    return EXIT_OK if report.all_pass else EXIT_VIOLATED


def _parse_inputs(pairs) -> dict[int, list[int]]:
    inputs = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise mpc.CircuitError(f"input {pair!r} is not player=value[,value...]")
        try:
            inputs[int(key)] = [int(v) for v in value.split(",")]
        except ValueError:
            raise mpc.CircuitError(f"input {pair!r} is not numeric") from None
    return inputs


def cmd_mpc(args) -> int:
    try:
        circuit, params = mpc.load_circuit(args.circuit)
        inputs = _parse_inputs(args.inputs)
        coalition = _parse_agents(args.audit) if args.audit else None
    except (OSError, mpc.CircuitError, ScenarioError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    p, n, t = params["p"], params["n"], params["t"]
    try:
        seed = int(os.environ.get("BYZ_SEED", "0"), 0)
    except ValueError:
        return _fail("BYZ_SEED must be an integer", EXIT_INPUT)
    try:
        result = mpc.evaluate_circuit(circuit, inputs, n, t, random.Random(seed), p)
    except mpc.ThresholdTooHigh as exc:
        return _fail(str(exc), EXIT_THRESHOLD)
    except mpc.MpcError as exc:
        return _fail(str(exc), EXIT_INPUT)
    report = {
        "outputs": {
            str(i): {str(w): v for w, v in sorted(outs.items())}
            for i, outs in sorted(result.outputs.items())
        }
    }
    code = EXIT_OK
    if coalition is not None:
        try:
            audit = mpc.privacy_audit(circuit, coalition, n, t, p, cap=args.cap)
        except mpc.SearchSpaceTooLarge as exc:
            _emit(report)
            return _fail(str(exc), EXIT_TOO_LARGE)
        except mpc.CoalitionTooLarge as exc:
            return _fail(str(exc), EXIT_THRESHOLD)
        except mpc.MpcError as exc:
            return _fail(str(exc), EXIT_INPUT)
        report["audit"] = audit.to_dict()
        code = EXIT_OK if audit.passed else EXIT_VIOLATED
    _emit(report)
    return code


_CLASS_ALIASES = {"all": set(ALL_CLASSES), "none": set()}


def parse_classes(raw: str) -> set[FaultClass]:
    raw = raw.strip().lower()
    if raw in _CLASS_ALIASES:
        return _CLASS_ALIASES[raw]
    out = set()
    for part in raw.replace(",", "+").split("+"):
        try:
            out.add(FaultClass(part.strip()))
        except ValueError:
            raise ScenarioError(f"unknown fault class {part!r}") from None
    return out


def cmd_bounds(args) -> int:
    try:
        classes = parse_classes(args.classes)
        result = bound_oracle(args.n, args.m, classes)
    except (ScenarioError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    _emit(result.to_dict())
    if args.verbose:
        print(result.summary(), file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="byzlab", description="Byzantine agreement under device faults"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one scenario file")
    p.add_argument("file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("search", parents=[common], help="exhaustive adversary search from a template")
    p.add_argument("file")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--traitors", help="comma-separated traitor agents (default: fault senders)")
    p.add_argument("--max-traitors", type=int, help="search every traitor set up to this size")
    p.add_argument("--fixed-decision", action="store_true",
                   help="only the template's decision instead of both")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="counterexample path")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("mpc", parents=[common], help="evaluate a circuit on shares")
    p.add_argument("circuit")
    p.add_argument("--inputs", nargs="*", metavar="PLAYER=VALUE")
    p.add_argument("--audit", metavar="I,J", help="coalition for the privacy audit")
    p.add_argument("--cap", type=int, default=10**6)
    p.set_defaults(func=cmd_mpc)

    p = sub.add_parser("bounds", parents=[common], help="feasibility table entry")
    p.add_argument("n", type=int)
    p.add_argument("m", type=int)
    p.add_argument("classes", help="all | corrupt | corrupt+drop | ...")
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
