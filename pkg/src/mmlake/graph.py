"""In-memory property graph backend.

Ingestion reads two CSV files::

    nodes.csv: id,label,props          (props is a JSON object, may be empty)
    edges.csv: src,type,dst[,props]    (props optional JSON object)

Matches are projected into records with the node properties plus ``__id`` and
``__label``. Every node examined by ``match_nodes``/``traverse``/``path_query``
increments a visit counter used to measure pushdown benefit.
"""

from __future__ import annotations

import csv
import json
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from . import predicates
from .errors import LakeError, MissingIdColumn, SchemaMismatch, UnknownProperty
from .model import Modality, Record, RecordSet

ID = "__id"
LABEL = "__label"
PATH = "__path"
WILDCARD = (None, "*")
DIRECTIONS = ("out", "in", "both")


@dataclass(frozen=True)
class Edge:
    src: str
    type: str
    dst: str
    props: Mapping[str, Any] = field(default_factory=dict)


class PropertyGraph:
    """Nodes and typed edges; immutable after construction except the counter."""

    def __init__(self, nodes: Sequence[Tuple[str, str, Mapping[str, Any]]], edges: Sequence[Edge], source_id: str = "graph"):
        self.source_id = source_id
        self.nodes: Dict[str, Tuple[str, Dict[str, Any]]] = {}
        self._by_label: Dict[str, List[str]] = {}
        for node_id, label, props in nodes:
            if node_id in self.nodes:
                raise SchemaMismatch(f"duplicate node id {node_id!r}")
            if not label:
                raise SchemaMismatch(f"node {node_id!r} has an empty label")
            self.nodes[node_id] = (label, dict(props))
            self._by_label.setdefault(label, []).append(node_id)
        self.edges: List[Edge] = list(edges)
        self._out: Dict[Tuple[str, str], List[Edge]] = {}
        self._in: Dict[Tuple[str, str], List[Edge]] = {}
        for e in self.edges:
            for end in (e.src, e.dst):
                if end not in self.nodes:
                    raise SchemaMismatch(f"edge {e.src}-{e.type}->{e.dst} references unknown node {end!r}")
            self._out.setdefault((e.src, e.type), []).append(e)
            self._in.setdefault((e.dst, e.type), []).append(e)
        self._props: Dict[Optional[str], Tuple[str, ...]] = {}
        for label, ids in self._by_label.items():
            names = set()
            for i in ids:
                names |= set(self.nodes[i][1])
            self._props[label] = tuple(sorted(names))
        everything = set()
        for names in self._props.values():
            everything |= set(names)
        self._props[None] = tuple(sorted(everything))
        self._visited = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.nodes)

    # -- instrumentation --------------------------------------------------

    def reset_counter(self) -> None:
        with self._lock:
            self._visited = 0

    def _visit(self, n: int = 1) -> None:
        with self._lock:
            self._visited += n

    @property
    def visited(self) -> int:
        with self._lock:
            return self._visited

    # -- schema ------------------------------------------------------------

    def labels(self) -> List[str]:
        return list(self._by_label)

    def properties(self, label: Optional[str] = None) -> Tuple[str, ...]:
        label = None if label in WILDCARD else label
        return self._props.get(label, ())

    def node_schema(self, label: Optional[str] = None) -> Tuple[str, ...]:
        return (ID, LABEL) + self.properties(label)

    def node_ids(self, label: Optional[str] = None) -> List[str]:
        if label in WILDCARD:
            return list(self.nodes)
        return list(self._by_label.get(label, []))

    def node_attrs(self, node_id: str, label: Optional[str] = None) -> Dict[str, Any]:
        node_label, props = self.nodes[node_id]
        attrs = {ID: node_id, LABEL: node_label}
        for p in self.properties(label if label not in WILDCARD else None):
            attrs[p] = props.get(p)
        return attrs

    @property
    def provenance(self):
        return frozenset({(self.source_id, Modality.GRAPH.value)})


def visited_counter(g: PropertyGraph) -> int:
    return g.visited


def load_graph(nodes_path, edges_path, source_id: str) -> PropertyGraph:
    nodes = []
    with open(nodes_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            props = json.loads(row.get("props") or "{}")
            nodes.append((row["id"], row["label"], props))
    edges = []
    with open(edges_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            props = json.loads(row.get("props") or "{}")
            edges.append(Edge(row["src"], row["type"], row["dst"], props))
    return PropertyGraph(nodes, edges, source_id)


def _check_props(g: PropertyGraph, label: Optional[str], tree: Optional[dict]) -> None:
    known = set(g.node_schema(label))
    for name in predicates.refs(tree):
        if name not in known:
            raise UnknownProperty(f"property {name!r} is absent from every {label or 'node'}")


def match_nodes(g: PropertyGraph, label: Optional[str] = None, pred: Optional[dict] = None) -> RecordSet:
    """One record per node of ``label`` (``None``/``"*"`` = any) satisfying ``pred``."""
    label = None if label in WILDCARD else label
    tree = predicates.normalize(pred, allow_internal=True) if pred is not None else None
    _check_props(g, label, tree)
    test = predicates.compile_filter(tree)
    ids = g.node_ids(label)
    g._visit(len(ids))
    prov = g.provenance
    out = []
    for node_id in ids:
        attrs = g.node_attrs(node_id, label)
        if test(attrs):
            out.append(Record(attrs, prov))
    return RecordSet(g.node_schema(label), out)


def _neighbours(g: PropertyGraph, node_id: str, edge_type: str, direction: str) -> List[Tuple[str, Edge]]:
    out: List[Tuple[str, Edge]] = []
    if direction in ("out", "both"):
        out.extend((e.dst, e) for e in g._out.get((node_id, edge_type), []))
    if direction in ("in", "both"):
        out.extend((e.src, e) for e in g._in.get((node_id, edge_type), []))
    return out


def _step_test(g: PropertyGraph, label, tree):
    label = None if label in WILDCARD else label
    _check_props(g, label, tree)
    test = predicates.compile_filter(tree)

    def accept(node_id: str) -> bool:
        node_label = g.nodes[node_id][0]
        if label is not None and node_label != label:
            return False
        return test(g.node_attrs(node_id, label))

    return accept


def traverse(
    g: PropertyGraph,
    start: RecordSet,
    edge_type: str,
    direction: str = "out",
    target_label: Optional[str] = None,
    target_pred: Optional[dict] = None,
    edge_pred: Optional[dict] = None,
) -> RecordSet:
    """Nodes one ``edge_type`` hop from any start node, deduplicated by id."""
    if direction not in DIRECTIONS:
        raise LakeError(f"direction must be one of {DIRECTIONS}")
    if ID not in start.schema:
        raise MissingIdColumn(f"start set has no {ID} column")
    target_label = None if target_label in WILDCARD else target_label
    tree = predicates.normalize(target_pred, allow_internal=True) if target_pred is not None else None
    accept = _step_test(g, target_label, tree)
    edge_test = predicates.compile_filter(predicates.normalize(edge_pred) if edge_pred else None)
    order: List[str] = []
    prov: Dict[str, frozenset] = {}
    for rec in start.records:
        node_id = rec.attrs[ID]
        if node_id not in g.nodes:
            continue
        for nb, edge in _neighbours(g, node_id, edge_type, direction):
            g._visit()
            if not edge_test(edge.props) or not accept(nb):
                continue
            if nb not in prov:
                order.append(nb)
                prov[nb] = g.provenance | rec.provenance
            else:
                prov[nb] = prov[nb] | rec.provenance
    schema = g.node_schema(target_label)
    return RecordSet(schema, [Record(g.node_attrs(n, target_label), prov[n]) for n in order])


@dataclass(frozen=True)
class Step:
    """One pattern step. The first step has no edge."""

    label: Optional[str] = None
    edge: Optional[str] = None
    direction: str = "out"
    filter: Optional[dict] = None
    edge_filter: Optional[dict] = None
    carry: Tuple[Tuple[str, str], ...] = ()

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Step":
        return cls(
            label=d.get("label"),
            edge=d.get("edge"),
            direction=d.get("direction", "out"),
            filter=predicates.normalize(d.get("filter"), allow_internal=True),
            edge_filter=predicates.normalize(d.get("edge_filter")),
            carry=tuple((d.get("carry") or {}).items()),
        )


def path_schema(g: PropertyGraph, steps: Sequence[Step]) -> Tuple[str, ...]:
    carried = tuple(out for s in steps for _, out in s.carry)
    base = g.node_schema(steps[-1].label)
    clash = set(carried) & set(base)
    if clash:
        raise SchemaMismatch(f"carried attributes {sorted(clash)} collide with final node properties")
    return base + carried + (PATH,)


def path_query(g: PropertyGraph, steps: Sequence[Step], start: Optional[RecordSet] = None) -> RecordSet:
    """Fixed-length pattern match.

    Output has one record per distinct matching path: the final node's
    attributes, any carried properties, and ``__path`` (node ids). The set of
    final ``__id`` values equals folding :func:`traverse` over the steps.
    """
    steps = [s if isinstance(s, Step) else Step.from_dict(s) for s in steps]
    if not steps:
        raise LakeError("pattern needs at least one step")
    first = steps[0]
    if start is None:
        seeds = match_nodes(g, first.label, first.filter)
    else:
        if ID not in start.schema:
            raise MissingIdColumn(f"start set has no {ID} column")
        accept = _step_test(g, first.label, first.filter)
        seen = []
        for rec in start.records:
            node_id = rec.attrs[ID]
            g._visit()
            if node_id in g.nodes and accept(node_id) and node_id not in seen:
                seen.append(node_id)
        seeds = RecordSet(g.node_schema(first.label), [Record(g.node_attrs(n, first.label), g.provenance) for n in seen])

    def carried(node_id: str, step: Step) -> Dict[str, Any]:
        props = g.nodes[node_id][1]
        return {out: props.get(prop) for prop, out in step.carry}

    paths: List[Tuple[Tuple[str, ...], Dict[str, Any]]] = [
        ((r.attrs[ID],), carried(r.attrs[ID], first)) for r in seeds.records
    ]
    for step in steps[1:]:
        if step.edge is None:
            raise LakeError("every step after the first needs an 'edge'")
        if step.direction not in DIRECTIONS:
            raise LakeError(f"direction must be one of {DIRECTIONS}")
        accept = _step_test(g, step.label, step.filter)
        edge_test = predicates.compile_filter(step.edge_filter)
        nxt = []
        seen = set()
        for ids, carry in paths:
            for nb, edge in _neighbours(g, ids[-1], step.edge, step.direction):
                g._visit()
                if not edge_test(edge.props) or not accept(nb):
                    continue
                path = ids + (nb,)
                if path in seen:
                    continue
                seen.add(path)
                nxt.append((path, {**carry, **carried(nb, step)}))
        paths = nxt
    last = steps[-1].label
    schema = path_schema(g, steps)
    out = []
    for ids, carry in paths:
        attrs = g.node_attrs(ids[-1], last)
        attrs.update(carry)
        attrs[PATH] = list(ids)
        out.append(Record(attrs, g.provenance))
    return RecordSet(schema, out)
