"""IR to logical plan, source binding, and static schema inference."""

from __future__ import annotations

from dataclasses import replace
from typing import Any, Dict, List, Optional, Tuple

from .. import predicates
from ..discovery import bind_sources
from ..dsl import ProgramIR, selection_parts
from ..errors import LakeError, PlanError, SchemaMismatch, UnknownAttribute
from ..model import Modality
from ..relational import aggregate_name, resolve_condition, right_renames, side_filters
from ..text import ANSWER_SCHEMA, HIT_SCHEMA
from .nodes import JoinSpec, LogicalPlan, OperatorNode

# predicate keys whose values steer an operator rather than describe data
_CONTROL_KEYS = {"cond_type", "mode", "op", "order", "type", "func", "direction", "k"}
_STRUCTURAL_KEYS = {
    "and", "or", "not", "attribute", "value", "other", "filter", "cond", "columns", "table",
    "label", "query", "by", "group_by", "steps", "edge", "carry", "edge_filter",
} | _CONTROL_KEYS


def predicate_text(pred: Any) -> List[str]:
    """Every string literal, attribute name and condition text in a predicate."""
    out: List[str] = []
    if isinstance(pred, dict):
        for key, value in pred.items():
            if key in _CONTROL_KEYS:
                continue
            if key not in _STRUCTURAL_KEYS:
                out.append(str(key))
            out.extend(predicate_text(value))
    elif isinstance(pred, list):
        for v in pred:
            out.extend(predicate_text(v))
    elif isinstance(pred, str):
        out.append(pred)
    elif isinstance(pred, (int, float)) and not isinstance(pred, bool):
        out.append(str(pred))
    return out


class _Builder:
    def __init__(self, ir: ProgramIR):
        self.ir = ir
        self.used: Dict[str, int] = {}

    def nid(self, name: str) -> str:
        n = self.used.get(name, 0) + 1
        self.used[name] = n
        return name if n == 1 else f"{name}#{n}"

    def scan(self, nid: str, stmt, pred=None) -> OperatorNode:
        return OperatorNode(
            nid=nid, kind="Selection", binding=stmt.name, pred=dict(pred or {}),
            src_request=stmt.src, scan=True,
            discovery_query=" ".join(predicate_text(stmt.pred)),
        )

    def input_node(self, name: str, nid: str, stmt) -> OperatorNode:
        return self.scan(nid, stmt) if self.ir.is_lake(name) else self.build(name)

    def sides(self, stmt, nid: str) -> Tuple[OperatorNode, OperatorNode, bool]:
        ins = stmt.inputs
        if len(ins) == 2:
            return self.input_node(ins[0], nid + ".left", stmt), self.input_node(ins[1], nid + ".right", stmt), False
        if self.ir.is_lake(ins[0]):
            return self.scan(nid + ".left", stmt), self.scan(nid + ".right", stmt), True
        return self.build(ins[0]), self.scan(nid + ".right", stmt), False

    def build(self, name: str) -> OperatorNode:
        s = self.ir.statement(name)
        nid = self.nid(name)
        lake_input = self.ir.is_lake(s.inputs[0])
        pred = dict(s.pred)
        if s.kind == "Selection":
            columns, tree = selection_parts(pred)
            columns = tuple(columns) if columns else None
            if lake_input:
                scan_pred = {k: pred[k] for k in ("label", "table") if k in pred}
                node = self.scan(nid, s, scan_pred)
                return replace(node, filter=tree, columns=columns)
            child = self.build(s.inputs[0])
            return OperatorNode(nid, "Selection", name, pred, (child,), filter=tree, columns=columns)
        if s.kind == "Projection":
            child = self.input_node(s.inputs[0], nid + ".scan", s)
            return OperatorNode(nid, "Projection", name, pred, (child,), columns=tuple(pred["columns"]))
        if s.kind in ("Join", "Conjunction"):
            left, right, self_join = self.sides(s, nid)
            join = None
            if s.kind == "Join":
                join = JoinSpec(join_type=pred.get("type", "inner"), self_join=self_join)
            return OperatorNode(nid, s.kind, name, pred, (left, right), join=join)
        if s.kind in ("Aggregation", "Ranking"):
            child = self.input_node(s.inputs[0], nid + ".scan", s)
            return OperatorNode(nid, s.kind, name, pred, (child,))
        if s.kind == "LookUp":
            mode = s.mode or pred.get("mode") or "keyword"
            pred["mode"] = mode
            children = () if lake_input else (self.build(s.inputs[0]),)
            return OperatorNode(
                nid, "LookUp", name, pred, children, src_request=s.src, context=bool(children),
                discovery_query=" ".join(predicate_text(s.pred)),
            )
        children = () if lake_input else (self.build(s.inputs[0]),)
        return OperatorNode(
            nid, s.kind, name, pred, children, src_request=s.src,
            discovery_query=" ".join(predicate_text(s.pred)),
        )


def build_tree(ir: ProgramIR) -> LogicalPlan:
    """Unbound plan forest: one tree per Output, shared statements duplicated."""
    b = _Builder(ir)
    return LogicalPlan(tuple(b.build(o) for o in ir.outputs), tuple(ir.outputs))


class SchemaOracle:
    """Static output schemas for plan nodes over a loaded lake."""

    def __init__(self, lake):
        self.lake = lake
        # keyed by id(); the node is stored alongside so the id stays unique
        self._memo: Dict[int, Tuple[OperatorNode, Tuple[str, ...]]] = {}

    def scan_schema(self, node: OperatorNode) -> Tuple[str, ...]:
        label = node.pred.get("label") if node.modality == Modality.GRAPH else None
        return self.lake.scan_schema(node.source, label)

    def input_schema(self, node: OperatorNode) -> Tuple[str, ...]:
        """Schema the node's own operator produces, before filter and columns."""
        kind = node.kind
        if node.scan:
            return self.scan_schema(node)
        if kind == "LookUp":
            return ANSWER_SCHEMA if node.pred.get("mode") == "prompt" else HIT_SCHEMA
        if node.is_udo:
            op = self.lake.operators.get(kind)
            return tuple(op.output_schema(self.lake.backend(node.source), node.pred))
        if kind in ("Selection", "Projection", "Ranking"):
            return self.of(node.children[0])
        if kind == "Join":
            left, right = (self.of(c) for c in node.children)
            renames = node.join.rename_map
            return tuple(left) + tuple(renames.get(c, c) for c in right)
        if kind == "Conjunction":
            return self.of(node.children[0])
        if kind == "Aggregation":
            gb = node.pred.get("group_by") or []
            gb = [gb] if isinstance(gb, str) else list(gb)
            return tuple(gb) + (aggregate_name(node.pred["func"], node.pred.get("attribute")),)
        raise PlanError(f"unknown node kind {kind}", node=node.nid)

    def of(self, node: OperatorNode) -> Tuple[str, ...]:
        key = id(node)
        if key not in self._memo:
            base = self.input_schema(node)
            self._memo[key] = (node, tuple(node.columns) if node.columns else base)
        return self._memo[key][1]


def _require(names, schema, node: OperatorNode, what: str):
    missing = [n for n in names if n not in schema]
    if missing:
        raise UnknownAttribute(f"{what} {missing[0]!r} is not among {list(schema)}", node=node.nid)


def check_node(node: OperatorNode, oracle: SchemaOracle) -> None:
    """Static attribute checks for one node (children already checked)."""
    base = oracle.input_schema(node)
    _require(predicates.refs(node.filter), base, node, "filter attribute")
    if node.columns:
        _require(node.columns, base, node, "column")
        if len(set(node.columns)) != len(node.columns):
            raise SchemaMismatch(f"duplicate columns {list(node.columns)}", node=node.nid)
    kind = node.kind
    if kind == "Aggregation":
        child = oracle.of(node.children[0])
        gb = node.pred.get("group_by") or []
        _require([gb] if isinstance(gb, str) else gb, child, node, "group_by attribute")
        if node.pred.get("attribute"):
            _require([node.pred["attribute"]], child, node, "aggregated attribute")
    elif kind == "Ranking":
        _require([node.pred["by"]], oracle.of(node.children[0]), node, "ranking attribute")
    elif kind == "Conjunction":
        a, b = (oracle.of(c) for c in node.children)
        if set(a) != set(b):
            raise SchemaMismatch(f"{node.pred.get('mode')} needs equal schemas, got {list(a)} and {list(b)}", node=node.nid)
    elif kind == "Join":
        left, right = (oracle.of(c) for c in node.children)
        _require([lk for lk, _ in node.join.keys], left, node, "left join key")
        _require([rk for _, rk in node.join.keys], right, node, "right join key")
        _require(predicates.refs(node.join.tree), base, node, "join condition attribute")


def _resolve_join(node: OperatorNode, oracle: SchemaOracle) -> OperatorNode:
    left_node, right_node = node.children
    left, right = oracle.of(left_node), oracle.of(right_node)
    try:
        cond = resolve_condition(node.pred, left, right)
        lf, rf = side_filters(node.pred.get("filter"), left, right)
    except LakeError as exc:
        exc.node = exc.node or node.nid
        raise
    renames = right_renames(left, right)
    spec = replace(node.join, keys=cond.keys, tree=cond.tree, nl_text=cond.nl_text,
                   renames=tuple(renames.items()))
    annotations = node.annotations
    if cond.nl_text:
        keys = ", ".join(f"{a} = {b}" for a, b in cond.keys)
        annotations += (f"Compiled condition {cond.nl_text.strip()!r} to {keys}",)
    if spec.join_type == "left":
        # a right-side filter must run before a left join to keep unmatched rows
        if rf is not None:
            right_node = replace(right_node, filter=predicates.conjoin([right_node.filter, rf]))
        post = lf
    else:
        post = predicates.conjoin([lf, predicates.rename(rf, renames)])
    return replace(node, children=(left_node, right_node), join=spec,
                   filter=predicates.conjoin([node.filter, post]), annotations=annotations)


def finalize(plan: LogicalPlan, lake) -> LogicalPlan:
    """Resolve join conditions against static schemas and check attributes."""

    def visit(node: OperatorNode) -> OperatorNode:
        children = tuple(visit(c) for c in node.children)
        node = replace(node, children=children)
        oracle = SchemaOracle(lake)
        if node.kind == "Join":
            node = _resolve_join(node, oracle)
            oracle = SchemaOracle(lake)
        check_node(node, oracle)
        return node

    return plan.map_roots(visit)


def build_logical_plan(ir: ProgramIR, lake=None) -> LogicalPlan:
    """Build the plan forest; with a lake, also bind sources and resolve joins."""
    plan = build_tree(ir)
    if lake is None:
        return plan
    plan = bind_sources(plan, lake.registry, lake.discovery, lake.operators)
    return finalize(plan, lake)


__all__ = ["build_logical_plan", "build_tree", "finalize", "SchemaOracle", "predicate_text", "check_node"]
