"""Command-line interface: ``mmlake run | explain | discover``.

Exit status is 0 on success, 1 for user errors (bad manifest, program,
or data) and 2 for internal failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import replace
from typing import List, Optional, Sequence

from . import dsl
from .discovery import DiscoveryConfig, discover
from .errors import LakeError, ValidationError
from .executor import compile_physical, execute
from .lake import load_manifest
from .model import RecordSet, to_jsonable
from .planner import CostModel, build_logical_plan, estimate, explain, optimize
from .verifier import verify

PROVENANCE = "provenance"


class UserError(Exception):
    """Raised for command-line usage problems."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


def _probability(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("threshold must be within [0, 1]")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mmlake", description="Query a multi-modal data lake.")
    sub = p.add_subparsers(dest="command", required=True)

    def discovery_flags(sp):
        sp.add_argument("--threshold", type=_probability, help="minimum discovery score")
        sp.add_argument("--topk", type=_positive, help="maximum number of discovered sources")

    run = sub.add_parser("run", help="execute a program")
    run.add_argument("manifest")
    run.add_argument("program")
    run.add_argument("--optimize", choices=("on", "off"), default="on")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--provenance", action="store_true", help="append a provenance column")
    run.add_argument("--verifier", choices=("rule", "answerer"))
    run.add_argument("--workers", type=int, default=0, help="thread pool size; 0 runs sequentially")
    run.add_argument("--seed", type=int, default=None, help="schedule seed for parallel runs")
    run.add_argument("--timing", action="store_true", help="report elapsed_ms (makes output run-dependent)")
    discovery_flags(run)

    exp = sub.add_parser("explain", help="print naive and optimized plans")
    exp.add_argument("manifest")
    exp.add_argument("program")
    discovery_flags(exp)

    disc = sub.add_parser("discover", help="rank sources for a query")
    disc.add_argument("manifest")
    disc.add_argument("query")
    discovery_flags(disc)
    return p


class _Stage:
    """Tracks the pipeline stage so errors can be labelled with it."""

    name = "manifest"


def _load(args, stage: _Stage):
    stage.name = "manifest"
    lake = load_manifest(args.manifest)
    overrides = {}
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    if args.topk is not None:
        overrides["top_k"] = args.topk
    if overrides:
        lake.discovery = replace(lake.discovery, **overrides)
    return lake


def _program(path: str, lake, stage: _Stage):
    stage.name = "parse"
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UserError(f"cannot read program {path}: {exc.strerror}") from None
    ir = dsl.parse_program(text, validate=False, operators=lake.operators)
    stage.name = "validate"
    return dsl.check(ir, operators=lake.operators)


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return json.dumps(to_jsonable(value), ensure_ascii=False)
    if isinstance(value, bool):
        return "true" if value else "false"
    return value


def render(rs: RecordSet, stats: dict, fmt: str, provenance: bool) -> str:
    schema = list(rs.schema) + ([PROVENANCE] if provenance else [])
    rows = []
    for r in rs.records:
        row = [to_jsonable(r.attrs[a]) for a in rs.schema]
        if provenance:
            row.append(sorted({sid for sid, _ in r.provenance}))
        rows.append(row)
    if fmt == "json":
        return json.dumps({"schema": schema, "records": rows, "stats": stats}, ensure_ascii=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(schema)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def cmd_run(args, out, stage: _Stage) -> int:
    started = time.perf_counter()
    lake = _load(args, stage)
    ir = _program(args.program, lake, stage)
    stage.name = "plan"
    cost = CostModel.from_lake(lake)
    plan = estimate(build_logical_plan(ir, lake), cost, lake.operators)
    if args.optimize == "on":
        stage.name = "optimize"
        plan = optimize(plan, cost, lake)
    stage.name = "compile"
    dag = compile_physical(plan, lake)
    stage.name = "execute"
    res = execute(dag, lake, parallel=args.workers > 0, workers=max(1, args.workers), seed=args.seed)
    stage.name = "verify"
    config = lake.verifier if args.verifier is None else replace(lake.verifier, strategy=args.verifier)
    answer = verify(res.outputs, config, lake.answerer)
    elapsed = round((time.perf_counter() - started) * 1000.0, 3) if args.timing else None
    stats = {"fragments": res.fragments, "visited_nodes": res.visited_nodes, "elapsed_ms": elapsed}
    out.write(render(answer, stats, args.format, args.provenance))
    return 0


def cmd_explain(args, out, stage: _Stage) -> int:
    lake = _load(args, stage)
    ir = _program(args.program, lake, stage)
    stage.name = "plan"
    cost = CostModel.from_lake(lake)
    naive = estimate(build_logical_plan(ir, lake), cost, lake.operators)
    stage.name = "optimize"
    stats = {}
    optimized = optimize(naive, cost, lake, stats=stats)
    out.write("== naive plan ==\n")
    out.write(explain(naive))
    out.write(f"\n== optimized plan ({stats['passes']} passes) ==\n")
    out.write(explain(optimized))
    return 0


def cmd_discover(args, out, stage: _Stage) -> int:
    lake = _load(args, stage)
    stage.name = "discover"
    result = discover(args.query, lake.registry, lake.discovery)
    out.write(f"{'rank':<6}{'source':<24}{'modality':<10}score\n")
    for i, hit in enumerate(result, 1):
        out.write(f"{i:<6}{hit.source_id:<24}{hit.modality.value:<10}{hit.score:.4f}\n")
    return 0


COMMANDS = {"run": cmd_run, "explain": cmd_explain, "discover": cmd_discover}


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    stage = _Stage()
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out, stage)
    except UserError as exc:
        err.write(f"usage error: {exc}\n")
        return 1
    except ValidationError as exc:
        for d in exc.diagnostics:
            err.write(f"validate error: {d}\n")
        return 1
    except LakeError as exc:
        err.write(f"{stage.name} error: {exc}\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - anything else is a bug
        err.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return 2


def run_cli(argv: List[str]):
    """Run the CLI in-process; returns (exit status, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


if __name__ == "__main__":
    sys.exit(main())
