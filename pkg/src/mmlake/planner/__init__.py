"""Logical planning: plan building, costs, rewrite rules and explain."""

from .build import SchemaOracle, build_logical_plan, build_tree, finalize, predicate_text
from .cost import CostModel, estimate
from .explain import explain, tree_lines
from .nodes import JoinSpec, LogicalPlan, OperatorNode
from .rules import MAX_PASSES, optimize

__all__ = [
    "CostModel", "JoinSpec", "LogicalPlan", "MAX_PASSES", "OperatorNode", "SchemaOracle",
    "build_logical_plan", "build_tree", "estimate", "explain", "finalize", "optimize",
    "predicate_text", "tree_lines",
]
