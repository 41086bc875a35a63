"""Physical fragments, DAG execution, and the end-to-end query pipeline."""

from __future__ import annotations

import random
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

from . import predicates
from .errors import LakeError, UnsupportedOperatorForModality
from .graph import match_nodes
from .model import Modality, RecordSet
from .planner import CostModel, LogicalPlan, OperatorNode, build_logical_plan, estimate, optimize
from .relational import (
    JoinCondition,
    eval_aggregation,
    eval_conjunction,
    eval_join,
    eval_ranking,
    filter_project,
)
from .text import lookup
from .verifier import VerifierConfig, verify

BACKEND_OF = {Modality.TABLE: "relational", Modality.GRAPH: "graph", Modality.TEXT: "text"}


@dataclass(frozen=True)
class PhysicalFragment:
    """One plan node compiled to a backend call.

    ``inputs`` are child fragments in operand order; ``deps`` are producers
    whose output feeds a membership filter in this fragment.
    """

    ref: str
    backend: str
    call: str
    node: OperatorNode = field(repr=False, compare=False)
    inputs: Tuple[str, ...] = ()
    deps: Tuple[str, ...] = ()

    @property
    def upstream(self) -> Tuple[str, ...]:
        return self.inputs + tuple(d for d in self.deps if d not in self.inputs)


@dataclass(frozen=True)
class FragmentDAG:
    fragments: Dict[str, PhysicalFragment]
    roots: Tuple[Tuple[str, str], ...]  # (output name, fragment ref)

    def __len__(self) -> int:
        return len(self.fragments)

    def order(self) -> List[str]:
        """Deterministic topological order (Kahn's algorithm, ties by insertion)."""
        indeg = {r: 0 for r in self.fragments}
        users: Dict[str, List[str]] = {r: [] for r in self.fragments}
        for f in self.fragments.values():
            for u in f.upstream:
                indeg[f.ref] += 1
                users[u].append(f.ref)
        ready = [r for r in self.fragments if indeg[r] == 0]
        out = []
        while ready:
            r = ready.pop(0)
            out.append(r)
            for u in users[r]:
                indeg[u] -= 1
                if indeg[u] == 0:
                    ready.append(u)
        if len(out) != len(self.fragments):
            raise LakeError("fragment graph has a cycle")
        return out


def _membership_refs(obj: Any) -> List[str]:
    out: List[str] = []
    if isinstance(obj, dict):
        if obj.get("op") == "in" and "ref" in obj:
            out.append(obj["ref"])
        for v in obj.values():
            out.extend(_membership_refs(v))
    elif isinstance(obj, list):
        for v in obj:
            out.extend(_membership_refs(v))
    return out


def _resolve_deep(obj: Any, lookup_values) -> Any:
    if isinstance(obj, dict):
        if obj.get("op") == "in" and "ref" in obj:
            return {"attribute": obj["attribute"], "op": "in", "values": lookup_values(obj["ref"], obj["ref_attribute"])}
        return {k: _resolve_deep(v, lookup_values) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_resolve_deep(v, lookup_values) for v in obj]
    return obj


def _call_for(node: OperatorNode, lake) -> Tuple[str, str]:
    if node.scan:
        modality = lake.modality(node.source)
        return BACKEND_OF[modality], {"table": "scan_table", "graph": "match_nodes", "text": "scan_documents"}[modality.value]
    if node.kind == "LookUp":
        if lake.modality(node.source) != Modality.TEXT:
            raise UnsupportedOperatorForModality(f"LookUp needs a text source, {node.source} is not", node=node.nid)
        return "text", "lookup"
    if node.is_udo:
        op = lake.operators.get(node.kind)
        if lake.modality(node.source) != op.modality:
            raise UnsupportedOperatorForModality(
                f"{node.kind} runs on {op.modality} sources, {node.source} is {lake.modality(node.source)}", node=node.nid)
        return BACKEND_OF[op.modality], f"udo:{node.kind}"
    if node.kind == "Aggregation":
        child = node.children[0]
        if child.scan and lake.modality(child.source) == Modality.TEXT:
            raise UnsupportedOperatorForModality("Aggregation over raw documents is not supported", node=node.nid)
    calls = {"Selection": "filter_project", "Projection": "filter_project", "Join": "join",
             "Aggregation": "aggregate", "Ranking": "rank", "Conjunction": "conjunction"}
    return "relational", calls[node.kind]


def compile_physical(plan: LogicalPlan, lake) -> FragmentDAG:
    """One fragment per plan node, children before parents."""
    fragments: Dict[str, PhysicalFragment] = {}

    def visit(node: OperatorNode) -> str:
        inputs = tuple(visit(c) for c in node.children)
        if node.nid in fragments:
            raise LakeError(f"duplicate node id {node.nid}")
        backend, call = _call_for(node, lake)
        deps = tuple(dict.fromkeys(_membership_refs([node.filter, dict(node.pred)])))
        fragments[node.nid] = PhysicalFragment(node.nid, backend, call, node, inputs, deps)
        return node.nid

    roots = tuple((name, visit(r)) for name, r in zip(plan.names, plan.roots))
    for f in fragments.values():
        for d in f.deps:
            if d not in fragments:
                raise LakeError(f"membership filter references unknown fragment {d}", node=f.ref)
    dag = FragmentDAG(fragments, roots)
    dag.order()
    return dag


def run_fragment(frag: PhysicalFragment, results: Mapping[str, RecordSet], lake) -> RecordSet:
    node = frag.node

    def values(ref: str, attr: str) -> List[Any]:
        rs = results[ref]
        if attr not in rs.schema:
            raise LakeError(f"membership attribute {attr!r} missing from {ref}", node=frag.ref)
        return [r.attrs[attr] for r in rs.records]

    tree = predicates.resolve(node.filter, values) if frag.deps else node.filter
    ins = [results[r] for r in frag.inputs]
    call = frag.call
    try:
        if call == "scan_table":
            return filter_project(lake.backend(node.source).data, tree, node.columns)
        if call == "match_nodes":
            rs = match_nodes(lake.backend(node.source), node.pred.get("label"), tree)
            return filter_project(rs, None, node.columns)
        if call == "scan_documents":
            return filter_project(lake.backend(node.source).records(), tree, node.columns)
        if call == "filter_project":
            out = ins[0]
        elif call == "join":
            spec = node.join
            out = eval_join(
                ins[0], ins[1], {"type": spec.join_type},
                condition=JoinCondition(spec.keys, spec.tree, spec.nl_text),
                renames=spec.rename_map, self_join=spec.self_join,
            )
        elif call == "aggregate":
            out = eval_aggregation(ins[0], dict(node.pred))
        elif call == "rank":
            out = eval_ranking(ins[0], dict(node.pred))
        elif call == "conjunction":
            out = eval_conjunction(ins[0], ins[1], node.pred["mode"])
        elif call == "lookup":
            out = lookup(lake.backend(node.source), node.pred, ins[0] if node.context else None, lake.answerer)
        elif call.startswith("udo:"):
            op = lake.operators.get(node.kind)
            pred = _resolve_deep(dict(node.pred), values) if frag.deps else node.pred
            out = op.execute(lake.backend(node.source), pred, ins[0] if ins else None)
        else:
            raise LakeError(f"unknown fragment call {call}")
        return filter_project(out, tree, node.columns)
    except LakeError as exc:
        if exc.node is None:
            exc.node = frag.ref
        raise


@dataclass
class ExecutionResult:
    outputs: Dict[str, RecordSet]
    fragments: int
    visited_nodes: int
    order: List[str]


def execute(dag: FragmentDAG, lake, *, parallel: bool = False, workers: int = 4,
            seed: Optional[int] = None) -> ExecutionResult:
    """Evaluate every fragment once; returns root outputs keyed by output name.

    With ``parallel`` independent fragments run on a thread pool and ``seed``
    shuffles which ready fragment is submitted first. Results do not depend on
    the schedule.
    """
    lake.reset_counters()
    results: Dict[str, RecordSet] = {}
    finished: List[str] = []
    if not parallel:
        for ref in dag.order():
            results[ref] = run_fragment(dag.fragments[ref], results, lake)
            finished.append(ref)
    else:
        rng = random.Random(seed)
        waiting = {ref: set(f.upstream) for ref, f in dag.fragments.items()}
        with ThreadPoolExecutor(max_workers=workers) as pool:
            running = {}
            while waiting or running:
                ready = sorted(r for r, deps in waiting.items() if not deps)
                rng.shuffle(ready)
                for ref in ready:
                    del waiting[ref]
                    running[pool.submit(run_fragment, dag.fragments[ref], dict(results), lake)] = ref
                done, _ = wait(list(running), return_when=FIRST_COMPLETED)
                for fut in done:
                    ref = running.pop(fut)
                    results[ref] = fut.result()
                    finished.append(ref)
                    for deps in waiting.values():
                        deps.discard(ref)
    outputs = {name: results[ref] for name, ref in dag.roots}
    return ExecutionResult(outputs, len(dag), lake.visited(), finished)


@dataclass
class QueryResult:
    answer: RecordSet
    outputs: Dict[str, RecordSet]
    naive: LogicalPlan
    plan: LogicalPlan
    fragments: int
    visited_nodes: int
    elapsed_ms: float


def plan_program(ir, lake, *, optimized: bool = True, cost: Optional[CostModel] = None) -> Tuple[LogicalPlan, LogicalPlan]:
    """(naive plan, plan to execute) for a validated program."""
    cost = cost or CostModel.from_lake(lake)
    naive = estimate(build_logical_plan(ir, lake), cost, lake.operators)
    return naive, (optimize(naive, cost, lake) if optimized else naive)


def run_program(ir, lake, *, optimized: bool = True, parallel: bool = False, seed: Optional[int] = None,
                verifier: Optional[VerifierConfig] = None) -> QueryResult:
    """bind, build, optimize, compile, execute and verify."""
    start = time.perf_counter()
    naive, plan = plan_program(ir, lake, optimized=optimized)
    dag = compile_physical(plan, lake)
    res = execute(dag, lake, parallel=parallel, seed=seed)
    answer = verify(res.outputs, verifier or lake.verifier, lake.answerer)
    elapsed = (time.perf_counter() - start) * 1000.0
    return QueryResult(answer, res.outputs, naive, plan, res.fragments, res.visited_nodes, elapsed)
