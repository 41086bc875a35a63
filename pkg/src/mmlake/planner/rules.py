"""Rewrite rules and the fixpoint optimizer.

R1 pushes filter conjuncts toward scans, R2 prunes scan columns nobody
reads, R3 orders cross-modal equality joins so the cheaper side runs first
and feeds a membership filter to the other, R4 fuses stacked Selections.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Dict, List, Optional, Set, Tuple

from .. import predicates
from .build import SchemaOracle
from .cost import CostModel, annotate, estimate
from .nodes import LogicalPlan, OperatorNode

MAX_PASSES = 10


def _note(node: OperatorNode, text: str) -> OperatorNode:
    if text in node.annotations:
        return node
    return replace(node, annotations=node.annotations + (text,))


def _add_filter(node: OperatorNode, conj: dict, origin: str) -> OperatorNode:
    node = replace(node, filter=predicates.conjoin([node.filter, conj]))
    return _note(node, f"R1: {predicates.summary(conj)} pushed from {origin}")


def _group_by(node: OperatorNode) -> List[str]:
    gb = node.pred.get("group_by") or []
    return [gb] if isinstance(gb, str) else list(gb)


class Rewriter:
    def __init__(self, lake, cost: CostModel):
        self.lake = lake
        self.cost = cost
        self.operators = lake.operators

    # -- R1 -------------------------------------------------------------------

    def r1(self, node: OperatorNode, oracle: SchemaOracle) -> OperatorNode:
        node = self._push_here(node, oracle)
        children = tuple(self.r1(c, oracle) for c in node.children)
        return node if children == node.children else replace(node, children=children)

    def _push_here(self, node: OperatorNode, oracle: SchemaOracle) -> OperatorNode:
        conjs = predicates.conjuncts(node.filter)
        if node.is_udo:
            return self._absorb(node, conjs)
        if not conjs or node.scan or not node.children:
            return node
        kind = node.kind
        children = list(node.children)
        stay: List[dict] = []
        for c in conjs:
            names = predicates.refs(c)
            if kind in ("Selection", "Projection") or (kind == "Ranking" and "k" not in node.pred):
                children[0] = _add_filter(children[0], c, node.nid)
            elif kind == "Aggregation" and names <= set(_group_by(node)):
                children[0] = _add_filter(children[0], c, node.nid)
            elif kind == "Conjunction":
                children = [_add_filter(ch, c, node.nid) for ch in children]
            elif kind == "Join":
                left_names = set(oracle.of(children[0]))
                renames = node.join.rename_map
                inverse = {renames.get(a, a): a for a in oracle.of(children[1])}
                if names <= left_names:
                    children[0] = _add_filter(children[0], c, node.nid)
                elif node.join.join_type == "inner" and names <= set(inverse):
                    children[1] = _add_filter(children[1], predicates.rename(c, inverse), node.nid)
                else:
                    stay.append(c)
            else:
                stay.append(c)
        spec = node.join
        if kind == "Join" and spec.join_type == "inner" and spec.tree is not None:
            left_names = set(oracle.of(children[0]))
            renames = spec.rename_map
            inverse = {renames.get(a, a): a for a in oracle.of(children[1])}
            keep = []
            for c in predicates.conjuncts(spec.tree):
                names = predicates.refs(c)
                if names <= left_names:
                    children[0] = _add_filter(children[0], c, node.nid)
                elif names <= set(inverse):
                    children[1] = _add_filter(children[1], predicates.rename(c, inverse), node.nid)
                else:
                    keep.append(c)
            spec = replace(spec, tree=predicates.conjoin(keep))
        if len(stay) == len(conjs) and spec == node.join:
            return node
        return replace(node, filter=predicates.conjoin(stay), children=tuple(children), join=spec)

    def _absorb(self, node: OperatorNode, conjs: List[dict]) -> OperatorNode:
        if not conjs or node.kind not in self.operators:
            return node
        op = self.operators.get(node.kind)
        backend = self.lake.backend(node.source)
        pred, stay, notes = dict(node.pred), [], []
        for c in conjs:
            new = op.absorb(backend, pred, c)
            if new is None:
                stay.append(c)
            else:
                pred = new
                notes.append(f"R1: {predicates.summary(c)} absorbed into {node.kind}")
        if not notes:
            return node
        node = replace(node, pred=pred, filter=predicates.conjoin(stay))
        for n in notes:
            node = _note(node, n)
        return node

    # -- R2 -------------------------------------------------------------------

    def r2(self, node: OperatorNode, need: Optional[Set[str]], oracle: SchemaOracle) -> OperatorNode:
        if node.scan:
            if need is None:
                return node
            current = oracle.of(node)
            keep = tuple(c for c in current if c in need) or current[:1]
            if len(keep) >= len(current):
                return node
            return _note(replace(node, columns=keep), f"R2: scan keeps {list(keep)}")
        wants = self._child_needs(node, need, oracle)
        children = tuple(self.r2(c, w, oracle) for c, w in zip(node.children, wants))
        return node if children == node.children else replace(node, children=children)

    def _child_needs(self, node: OperatorNode, need, oracle) -> List[Optional[Set[str]]]:
        kind = node.kind
        n = len(node.children)
        if kind in ("Conjunction", "LookUp") or node.is_udo:
            return [None] * n
        out = set(node.columns) if node.columns else need
        if kind == "Aggregation":
            attr = node.pred.get("attribute")
            return [set(_group_by(node)) | ({attr} if attr else set())]
        if out is None:
            return [None] * n
        out = out | predicates.refs(node.filter)
        if kind == "Ranking":
            return [out | {node.pred["by"]}]
        if kind == "Join":
            spec = node.join
            if spec.self_join:
                return [None, None]
            out = out | predicates.refs(spec.tree)
            left = set(oracle.of(node.children[0]))
            renames = spec.rename_map
            left_need = (out & left) | {lk for lk, _ in spec.keys}
            right_need = {a for a in oracle.of(node.children[1]) if renames.get(a, a) in out}
            right_need |= {rk for _, rk in spec.keys}
            return [left_need, right_need]
        return [out]

    # -- R3 -------------------------------------------------------------------

    def r3(self, node: OperatorNode) -> OperatorNode:
        children = tuple(self.r3(c) for c in node.children)
        if children != node.children:
            node = replace(node, children=children)
        if node.kind == "LookUp" and node.context:
            child = node.children[0]
            if _modalities(child) - {node.modality}:
                node = _note(node, f"R3: context {child.nid} runs before the LookUp")
            return node
        spec = node.join
        if node.kind != "Join" or spec.join_type != "inner" or not spec.keys or spec.self_join or spec.semijoin:
            return node
        left, right = node.children
        if _modalities(left) == _modalities(right):
            return node
        est_l = annotate(left, self.cost, self.operators).est
        est_r = annotate(right, self.cost, self.operators).est
        if est_l <= est_r:
            producer, consumer, side = left, right, "left"
            pairs = [(rk, lk) for lk, rk in spec.keys]
        else:
            producer, consumer, side = right, left, "right"
            pairs = [(lk, rk) for lk, rk in spec.keys]
        leaves = [{"attribute": c, "op": "in", "ref": producer.nid, "ref_attribute": p} for c, p in pairs]
        consumer = replace(consumer, filter=predicates.conjoin([consumer.filter, *leaves]))
        consumer = _note(consumer, f"R3: semi-join filter {', '.join(predicates.summary(l) for l in leaves)}")
        children = (producer, consumer) if side == "left" else (consumer, producer)
        node = replace(node, children=children, join=replace(spec, semijoin=side))
        return _note(node, f"R3: {producer.nid} (est {est_l if side == 'left' else est_r:.4g}) runs before "
                           f"{consumer.nid} (est {est_r if side == 'left' else est_l:.4g})")

    # -- R4 -------------------------------------------------------------------

    def r4(self, node: OperatorNode) -> OperatorNode:
        children = tuple(self.r4(c) for c in node.children)
        if children != node.children:
            node = replace(node, children=children)
        if node.kind != "Selection" or node.scan or len(node.children) != 1:
            return node
        child = node.children[0]
        if child.kind != "Selection":
            return node
        fused = replace(
            child,
            nid=node.nid,
            binding=node.binding,
            filter=predicates.conjoin([child.filter, node.filter]),
            columns=node.columns or child.columns,
            annotations=child.annotations + node.annotations,
        )
        return _note(fused, f"R4: fused Selection {child.nid} into {node.nid}")

    # -- driver ---------------------------------------------------------------

    def one_pass(self, plan: LogicalPlan) -> LogicalPlan:
        plan = plan.map_roots(lambda r: self.r1(r, SchemaOracle(self.lake)))
        plan = plan.map_roots(lambda r: self.r2(r, None, SchemaOracle(self.lake)))
        plan = plan.map_roots(self.r3)
        return plan.map_roots(self.r4)


def _modalities(node: OperatorNode) -> Set:
    return {n.modality for n in node.walk() if n.modality is not None}


def _strip(plan: LogicalPlan) -> LogicalPlan:
    def clear(n: OperatorNode) -> OperatorNode:
        return replace(n, est=None, children=tuple(clear(c) for c in n.children))

    return plan.map_roots(clear)


def optimize(plan: LogicalPlan, cost: CostModel, lake, *, max_passes: int = MAX_PASSES,
             stats: Optional[Dict[str, int]] = None) -> LogicalPlan:
    """Apply R1-R4 until nothing changes; returns the plan with estimates."""
    rw = Rewriter(lake, cost)
    plan = _strip(plan)
    passes = 0
    while passes < max_passes:
        passes += 1
        new = rw.one_pass(plan)
        if new == plan:
            break
        plan = new
    if stats is not None:
        stats["passes"] = passes
    return estimate(plan, cost, lake.operators)
