"""Deterministic text rendering of plans."""

from __future__ import annotations

import json
from typing import List

from .. import predicates
from .nodes import LogicalPlan, OperatorNode


def _pred_summary(node: OperatorNode) -> str:
    kind, pred = node.kind, node.pred
    if kind == "Join":
        spec = node.join
        parts = []
        if spec.keys:
            parts.append("on " + ", ".join(f"{a} = {b}" for a, b in spec.keys))
        if spec.tree is not None:
            parts.append("cond " + predicates.summary(spec.tree))
        if spec.join_type != "inner":
            parts.append(spec.join_type)
        if spec.self_join:
            parts.append("self")
        return " ".join(parts) or "cross"
    if kind == "Aggregation":
        out = f"{pred['func']}({pred.get('attribute') or '*'})"
        if pred.get("group_by"):
            out += f" by {pred['group_by']}"
        return out
    if kind == "Ranking":
        out = f"by {pred['by']} {pred.get('order', 'desc')}"
        return out + (f" k={pred['k']}" if "k" in pred else "")
    if kind == "Conjunction":
        return str(pred.get("mode"))
    if kind == "LookUp":
        out = f"{pred.get('mode')} {json.dumps(pred.get('query', ''), ensure_ascii=False)}"
        return out + (f" k={pred['k']}" if "k" in pred else "")
    if node.is_udo:
        return json.dumps(pred, sort_keys=True, ensure_ascii=False)
    if node.scan and pred.get("label"):
        return f"label={pred['label']}"
    return ""


def node_line(node: OperatorNode) -> str:
    parts = [f"{node.kind}[{node.nid}]"]
    if node.source is not None:
        parts.append(f"src={node.source}:{node.modality}")
    elif node.src_request is not None:
        parts.append(f"src?={node.src_request}")
    summary = _pred_summary(node)
    if summary:
        parts.append(summary)
    if node.filter is not None:
        parts.append(f"where {predicates.summary(node.filter)}")
    if node.columns:
        parts.append(f"cols={list(node.columns)}")
    if node.context:
        parts.append("context-edge")
    if node.est is not None:
        parts.append(f"est={node.est:.4g}")
    return " ".join(parts)


def _render(node: OperatorNode, depth: int, out: List[str]) -> None:
    pad = "  " * depth
    out.append(pad + node_line(node))
    for a in node.annotations:
        out.append(pad + "    # " + a)
    for c in node.children:
        _render(c, depth + 1, out)


def explain(plan: LogicalPlan) -> str:
    """One block per output: a header line then the indented operator tree."""
    out: List[str] = []
    for name, root in zip(plan.names, plan.roots):
        out.append(f"Output({name})")
        _render(root, 1, out)
    if plan.cost is not None:
        out.append(f"total cost = {plan.cost:.4g}")
    return "\n".join(out) + "\n"


def tree_lines(plan: LogicalPlan) -> List[str]:
    """Operator lines only (no headers, annotations or totals)."""
    text = explain(plan).splitlines()
    return [l for l in text if l.startswith("  ") and not l.lstrip().startswith("#")]
