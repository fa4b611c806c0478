"""Command-line entry point: simulate, replay, inspect, validate.

Exit status is 0 on success, 1 for bad input, 2 when a run breaks one of the
engine's own accounting invariants.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import Any, Sequence, TextIO

from .header_schema import SchemaError, load_schema_set
from .parser import GraphError, ParseError, graph_from_json, parse, validate_graph
from .pcap import PcapError, read_pcap, write_pcap
from .pipeline import counters_to_csv, read_counters
from .profile import DSTNODECOUNTER, ConfigInvalid, ProfileConfig, build_profile
from .runner import InvariantViolation, RunResult, run_records, run_scenario
from .simnet import ScenarioInvalid, load_scenario

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INVARIANT = 2

INPUT_ERRORS = (
    ScenarioInvalid,
    ConfigInvalid,
    PcapError,
    GraphError,
    SchemaError,
    OSError,
    json.JSONDecodeError,
)


def _int(v: str) -> int:
    return int(v, 0)


def _profile_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=int, help="alert threshold per window")
    p.add_argument("--window", type=float, dest="window_s", help="window length in seconds")
    p.add_argument("--zep-proto-id", type=_int, help="ZEP protocol id to accept (e.g. 0x4558)")
    p.add_argument("--hello-type", type=_int, dest="hello_msg_type", help="HELLO message type byte")
    p.add_argument("--confirm-k", type=int, help="alert windows needed before mitigation")
    p.add_argument("--delay", type=float, dest="delay_s", help="controller command delay (s)")


def _output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--report", help="write the JSON run report here")
    p.add_argument("--log", help="write the southbound log here instead of stdout")
    p.add_argument("--counters", help="write a dstnodecounter CSV snapshot here")


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    keys = ("theta", "window_s", "zep_proto_id", "hello_msg_type")
    return {k: getattr(args, k) for k in keys if getattr(args, k) is not None}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="p4flood", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="generate a scenario and run it through the switch")
    p.add_argument("--scenario", required=True)
    p.add_argument("--pcap", help="also write the generated frames to this pcap")
    p.add_argument("--seed", type=_int, help="override the scenario seed")
    _profile_flags(p)
    _output_flags(p)

    p = sub.add_parser("replay", help="run frames from a pcap through the switch")
    p.add_argument("--pcap", required=True)
    _profile_flags(p)
    _output_flags(p)

    p = sub.add_parser("inspect", help="dump parsed headers of every frame in a pcap")
    p.add_argument("--pcap", required=True)
    p.add_argument("--schema", help="header schema JSON (default: built-in profile)")
    p.add_argument("--graph", help="parse graph JSON (default: built-in profile)")
    p.add_argument("--zep-proto-id", type=_int)
    p.add_argument("--limit", type=int, default=0, help="stop after N frames")

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--scenario", required=True)
    return ap


def _emit(result: RunResult, args: argparse.Namespace, out: TextIO) -> None:
    lines = "\n".join(result.log) + "\n"
    if args.log:
        with open(args.log, "w") as fh:
            fh.write(lines)
    else:
        out.write(lines)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(result.report.dumps() + "\n")
    if args.counters:
        with open(args.counters, "w") as fh:
            fh.write(counters_to_csv(read_counters(result.switch, DSTNODECOUNTER)))


def _cmd_simulate(args: argparse.Namespace, out: TextIO) -> int:
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    kw: dict[str, Any] = {}
    if args.confirm_k is not None:
        kw["confirm_k"] = args.confirm_k
    if args.delay_s is not None:
        kw["delay_s"] = args.delay_s
    result, records = run_scenario(sc, _overrides(args), **kw)
    if args.pcap:
        write_pcap(args.pcap, records)
    _emit(result, args, out)
    return EXIT_OK


def _cmd_replay(args: argparse.Namespace, out: TextIO) -> int:
    records = read_pcap(args.pcap)
    cfg = ProfileConfig().with_overrides(_overrides(args))
    result = run_records(
        records,
        cfg,
        confirm_k=args.confirm_k if args.confirm_k is not None else 1,
        delay_s=args.delay_s if args.delay_s is not None else 0.0,
    )
    _emit(result, args, out)
    return EXIT_OK


def _cmd_inspect(args: argparse.Namespace, out: TextIO) -> int:
    if (args.schema is None) != (args.graph is None):
        raise GraphError("--schema and --graph must be given together")
    if args.schema:
        schemas = load_schema_set(args.schema)
        graph = graph_from_json(args.graph)
        problems = validate_graph(graph, schemas)
        if problems:
            raise GraphError("; ".join(map(str, problems)))
    else:
        cfg = ProfileConfig()
        if args.zep_proto_id is not None:
            cfg = cfg.with_overrides({"zep_proto_id": args.zep_proto_id})
        prof = build_profile(cfg)
        schemas, graph = prof.schemas, prof.graph
    for i, rec in enumerate(read_pcap(args.pcap)):
        if args.limit and i >= args.limit:
            break
        out.write(f"frame {i} t={rec.timestamp_s:.6f} len={len(rec.raw_bytes)}\n")
        try:
            pkt = parse(graph, schemas, rec.raw_bytes)
        except ParseError as exc:
            out.write(f"  parse error: {exc}\n")
            continue
        for h in pkt.headers:
            fields = " ".join(
                f"{f.name}=0x{h.values[f.name]:0{(f.width_bits + 3) // 4}X}"
                for f in h.definition.fields
            )
            out.write(f"  {h.name}: {fields}\n")
        out.write(f"  payload[{len(pkt.payload)}]: {pkt.payload.hex()}\n")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace, out: TextIO) -> int:
    sc = load_scenario(args.scenario)
    prof = build_profile(sc.profile_config())
    problems = validate_graph(prof.graph, prof.schemas)
    if problems:
        raise InvariantViolation("; ".join(map(str, problems)))
    n_atk = sum(1 for n in sc.nodes if n.role.value == "ATTACKER")
    out.write(
        f"ok: {len(sc.nodes)} nodes ({n_atk} attacker), duration {sc.duration_s}s, seed {sc.seed}\n"
    )
    return EXIT_OK


COMMANDS = {
    "simulate": _cmd_simulate,
    "replay": _cmd_replay,
    "inspect": _cmd_inspect,
    "validate": _cmd_validate,
}


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    out = out or sys.stdout
    try:
        return COMMANDS[args.cmd](args, out)
    except InvariantViolation as exc:
        print(f"p4flood: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except INPUT_ERRORS as exc:
        print(f"p4flood: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
