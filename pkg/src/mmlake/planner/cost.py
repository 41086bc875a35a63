"""Additive cardinality-based cost model."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional

from ..text import DEFAULT_K
from .nodes import LogicalPlan, OperatorNode

RANGE_OPS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class CostModel:
    """Per-source cardinalities plus fixed selectivity constants."""

    cardinalities: Mapping[str, float] = field(default_factory=dict)
    equality: float = 0.1
    range: float = 0.3
    contains: float = 0.2
    natural_language: float = 0.5
    inequality: float = 0.9
    membership: float = 0.1
    group_factor: float = 0.1

    @classmethod
    def from_lake(cls, lake, **overrides) -> "CostModel":
        return cls(cardinalities=lake.registry.cardinalities(), **overrides)

    def scaled(self, factor: float) -> "CostModel":
        return replace(self, cardinalities={k: v * factor for k, v in self.cardinalities.items()})

    def cardinality(self, source: Optional[str]) -> float:
        return float(self.cardinalities.get(source, 0.0))

    def selectivity(self, tree: Optional[dict]) -> float:
        """Estimated fraction of records a filter tree keeps."""
        if tree is None:
            return 1.0
        if "and" in tree:
            s = 1.0
            for c in tree["and"]:
                s *= self.selectivity(c)
            return s
        if "or" in tree:
            return min(1.0, sum(self.selectivity(c) for c in tree["or"]))
        if "not" in tree:
            return 1.0 - self.selectivity(tree["not"])
        op = tree["op"]
        if op == "=":
            return self.equality
        if op == "!=":
            return self.inequality
        if op in RANGE_OPS:
            return self.range
        if op == "contains":
            return self.contains
        return self.membership


def _join_selectivity(node: OperatorNode, cost: CostModel) -> float:
    spec = node.join
    if spec is None:
        return 1.0
    if spec.nl_text:
        s = cost.natural_language
    else:
        s = cost.equality ** len(spec.keys)
    return s * cost.selectivity(spec.tree)


def node_estimate(node: OperatorNode, child_ests, cost: CostModel, operators=None) -> float:
    """Estimate for one node given its children's estimates."""
    kind, pred = node.kind, node.pred
    if node.scan:
        base = cost.cardinality(node.source)
    elif kind == "LookUp":
        if pred.get("mode") == "prompt":
            base = 1.0
        else:
            base = min(float(pred.get("k", DEFAULT_K)), cost.cardinality(node.source))
    elif node.is_udo:
        start = child_ests[0] if child_ests else cost.cardinality(node.source)
        op = operators.get(kind) if operators is not None and kind in operators else None
        base = op.estimate(start, pred, cost.selectivity) if op else start
    elif kind == "Join":
        base = child_ests[0] * child_ests[1] * _join_selectivity(node, cost)
    elif kind == "Conjunction":
        a, b = child_ests
        mode = pred.get("mode")
        base = a + b if mode == "union" else (min(a, b) if mode == "intersect" else a)
    elif kind == "Aggregation":
        base = child_ests[0] * cost.group_factor if pred.get("group_by") else 1.0
    elif kind == "Ranking":
        base = min(child_ests[0], float(pred["k"])) if "k" in pred else child_ests[0]
    else:
        base = child_ests[0]
    return max(0.0, base * cost.selectivity(node.filter))


def annotate(node: OperatorNode, cost: CostModel, operators=None) -> OperatorNode:
    children = tuple(annotate(c, cost, operators) for c in node.children)
    est = node_estimate(node, [c.est for c in children], cost, operators)
    return replace(node, children=children, est=est)


def estimate(plan: LogicalPlan, cost: CostModel, operators=None) -> LogicalPlan:
    """Plan with ``est`` filled in bottom-up on every node; ``plan.cost`` sums them."""
    return plan.map_roots(lambda r: annotate(r, cost, operators))


def subtree_estimates(plan: LogicalPlan) -> Dict[str, float]:
    return {n.nid: n.est for n in plan.nodes()}
