"""Logical plan data structures."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Mapping, Optional, Tuple

from ..dsl import PRIMITIVES
from ..model import Modality


@dataclass(frozen=True)
class JoinSpec:
    """Join details fixed when the plan is built.

    ``renames`` maps right-input attributes to output names; ``tree`` is a
    non-equality condition over output names. ``semijoin`` records which side
    the cross-modal ordering rule runs first.
    """

    keys: Tuple[Tuple[str, str], ...] = ()
    tree: Optional[dict] = None
    join_type: str = "inner"
    renames: Tuple[Tuple[str, str], ...] = ()
    self_join: bool = False
    nl_text: Optional[str] = None
    semijoin: Optional[str] = None

    @property
    def rename_map(self) -> Dict[str, str]:
        return dict(self.renames)


@dataclass(frozen=True)
class OperatorNode:
    """One operator in a plan tree.

    ``filter`` is applied to the operator's output (for scans: while
    scanning) and ``columns`` projects after it. ``scan`` marks leaves that
    read a source directly; ``context`` marks a LookUp whose child feeds its
    prompt rather than its records.
    """

    nid: str
    kind: str
    binding: str
    pred: Mapping[str, Any] = field(default_factory=dict)
    children: Tuple["OperatorNode", ...] = ()
    src_request: Optional[str] = None
    source: Optional[str] = None
    modality: Optional[Modality] = None
    filter: Optional[dict] = None
    columns: Optional[Tuple[str, ...]] = None
    join: Optional[JoinSpec] = None
    context: bool = False
    scan: bool = False
    discovery_query: Optional[str] = None
    est: Optional[float] = None
    annotations: Tuple[str, ...] = ()

    @property
    def is_udo(self) -> bool:
        return self.kind not in PRIMITIVES

    def walk(self) -> Iterator["OperatorNode"]:
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass(frozen=True)
class LogicalPlan:
    roots: Tuple[OperatorNode, ...]
    names: Tuple[str, ...]

    def __post_init__(self):
        if not self.roots:
            raise ValueError("a plan needs at least one root")
        if len(self.roots) != len(self.names):
            raise ValueError("one output name per root")

    def nodes(self) -> Iterator[OperatorNode]:
        for r in self.roots:
            yield from r.walk()

    def find(self, nid: str) -> OperatorNode:
        for n in self.nodes():
            if n.nid == nid:
                return n
        raise KeyError(nid)

    @property
    def cost(self) -> Optional[float]:
        ests = [n.est for n in self.nodes()]
        if any(e is None for e in ests):
            return None
        return float(sum(ests))

    def map_roots(self, fn) -> "LogicalPlan":
        return LogicalPlan(tuple(fn(r) for r in self.roots), self.names)


def needs_source(node: OperatorNode) -> bool:
    return node.scan or node.kind == "LookUp" or node.is_udo


def required_modality(node: OperatorNode, operators=None) -> Optional[Modality]:
    if node.kind == "LookUp":
        return Modality.TEXT
    if node.is_udo and operators is not None and node.kind in operators:
        return operators.get(node.kind).modality
    if node.scan and node.kind == "Selection":
        if "label" in node.pred:
            return Modality.GRAPH
        if "table" in node.pred:
            return Modality.TABLE
    return None
