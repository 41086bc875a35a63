"""Source registry and lexical source discovery.

Each source is summarized by a sparse term signature: normalized term
frequency times inverse source frequency over its attribute names, its name,
and the first 1,000 stored values. Queries are scored by cosine similarity.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import EmptySource, LakeError, NoSourceFound, UnknownGoldSource
from .model import Modality, SourceDescriptor
from .tokenizer import tokenize, value_tokens

SAMPLE_LIMIT = 1000


@dataclass(frozen=True)
class DiscoveryConfig:
    threshold: float = 0.05
    top_k: int = 3

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be within [0, 1], got {self.threshold}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")


@dataclass(frozen=True)
class Hit:
    source_id: str
    modality: Modality
    score: float


@dataclass(frozen=True)
class DiscoveryResult:
    hits: Tuple[Hit, ...] = ()

    def __len__(self) -> int:
        return len(self.hits)

    def __iter__(self):
        return iter(self.hits)

    @property
    def top(self) -> Optional[Hit]:
        return self.hits[0] if self.hits else None

    def ids(self) -> List[str]:
        return [h.source_id for h in self.hits]


def _sample_values(handle) -> Tuple[List[str], List[Any], int]:
    """(schema summary, first sampled values, cardinality) for a source handle."""
    from .graph import PropertyGraph
    from .relational import Table
    from .text import TextCorpus

    backend = handle.backend
    if isinstance(backend, Table):
        values = []
        for rec in backend.data.records:
            for col in backend.schema:
                if len(values) >= SAMPLE_LIMIT:
                    break
                values.append(rec.attrs[col])
        return list(backend.schema), values, len(backend)
    if isinstance(backend, PropertyGraph):
        summary = list(backend.labels()) + list(backend.properties()) + sorted({e.type for e in backend.edges})
        values = []
        for node_id, (label, props) in backend.nodes.items():
            for v in [label] + [props[p] for p in sorted(props)]:
                if len(values) >= SAMPLE_LIMIT:
                    break
                values.append(v)
        return summary, values, len(backend)
    if isinstance(backend, TextCorpus):
        values = []
        for doc in backend.docs:
            for tok in tokenize(doc.title) + tokenize(doc.body):
                if len(values) >= SAMPLE_LIMIT:
                    break
                values.append(tok)
        return ["doc_id", "title", "body"], values, len(backend)
    raise LakeError(f"cannot index backend of type {type(backend).__name__}")


def source_terms(handle) -> Tuple[Counter, List[str], int]:
    summary, values, cardinality = _sample_values(handle)
    counts: Counter = Counter()
    for name in summary:
        counts.update(tokenize(name))
    counts.update(tokenize(handle.name))
    for v in values:
        counts.update(value_tokens(v))
    return counts, summary, cardinality


def _weights(counts: Mapping[str, int], isf) -> Dict[str, float]:
    total = sum(counts.values())
    if not total:
        return {}
    raw = {t: (c / total) * isf(t) for t, c in counts.items()}
    norm = math.sqrt(math.fsum(w * w for w in raw.values()))
    return {t: w / norm for t, w in sorted(raw.items())} if norm else {}


def index_source(handle, isf=None) -> SourceDescriptor:
    """Descriptor with an L2-normalized signature.

    Without ``isf`` (inverse source frequency) every term gets weight 1 before
    normalization; :class:`Registry` supplies the lake-wide frequencies.
    Raises EmptySource when the source holds no records.
    """
    counts, summary, cardinality = source_terms(handle)
    if cardinality == 0:
        raise EmptySource(f"source {handle.id!r} is empty")
    signature = _weights(counts, isf or (lambda t: 1.0))
    if not signature:
        raise EmptySource(f"source {handle.id!r} has no indexable terms")
    return SourceDescriptor(handle.id, handle.modality, handle.name, tuple(summary), cardinality, signature)


class Registry:
    """All indexed sources; immutable after construction."""

    def __init__(self, handles: Iterable = ()):
        handles = list(handles)
        self._counts: Dict[str, Counter] = {}
        self.descriptors: Dict[str, SourceDescriptor] = {}
        self.df: Counter = Counter()
        raw = []
        for h in handles:
            if h.id in self._counts or h.id in dict(raw):
                raise LakeError(f"duplicate source id {h.id!r}")
            counts, summary, cardinality = source_terms(h)
            raw.append((h.id, (h, counts, summary, cardinality)))
        for _, (h, counts, _, cardinality) in raw:
            if cardinality:
                self.df.update(counts.keys())
        self.n = sum(1 for _, (_, _, _, c) in raw if c)
        for sid, (h, counts, summary, cardinality) in raw:
            signature = _weights(counts, self.isf) if cardinality else {}
            self.descriptors[sid] = SourceDescriptor(h.id, h.modality, h.name, tuple(summary), cardinality, signature)
            self._counts[sid] = counts

    def isf(self, term: str) -> float:
        return math.log((self.n + 1) / (self.df.get(term, 0) + 1)) + 1.0

    def __len__(self) -> int:
        return len(self.descriptors)

    def __contains__(self, source_id: str) -> bool:
        return source_id in self.descriptors

    def __getitem__(self, source_id: str) -> SourceDescriptor:
        return self.descriptors[source_id]

    def ids(self) -> List[str]:
        return sorted(self.descriptors)

    def of_modality(self, modality: Optional[Modality]) -> List[str]:
        return [s for s in self.ids() if modality is None or self.descriptors[s].modality == modality]

    def query_vector(self, text: str) -> Dict[str, float]:
        return _weights(Counter(tokenize(text)), self.isf)

    def cardinalities(self) -> Dict[str, int]:
        return {s: d.cardinality for s, d in self.descriptors.items()}


def discover(
    query: str,
    registry: Registry,
    config: DiscoveryConfig = DiscoveryConfig(),
    candidates: Optional[Sequence[str]] = None,
) -> DiscoveryResult:
    """Sources whose cosine score against ``query`` is positive and >= threshold.

    Ordered by score descending then source id, truncated to ``top_k``.
    """
    if not len(registry):
        raise LakeError("registry is empty")
    qv = registry.query_vector(query)
    if not qv:
        return DiscoveryResult()
    ids = registry.ids() if candidates is None else sorted(candidates)
    hits = []
    for sid in ids:
        d = registry[sid]
        if not d.signature:
            continue
        score = math.fsum(w * d.signature[t] for t, w in qv.items() if t in d.signature)
        score = min(1.0, max(0.0, score))
        if score > 0 and score >= config.threshold:
            hits.append(Hit(sid, d.modality, score))
    hits.sort(key=lambda h: (-h.score, h.source_id))
    return DiscoveryResult(tuple(hits[: config.top_k]))


def _match_name(name: str, registry: Registry, candidates: Sequence[str]) -> Optional[str]:
    want = name.casefold()
    forms = {want, want.rstrip("s"), want + "s"}
    for sid in candidates:
        d = registry[sid]
        for have in (sid.casefold(), d.name.casefold()):
            if have in forms or have.rstrip("s") in forms:
                return sid
    return None


def bind_sources(plan, registry: Registry, config: DiscoveryConfig = DiscoveryConfig(), operators=None):
    """Bind every source-reading node whose source is not yet fixed.

    An explicit source id binds directly; a modality narrows the candidates;
    a Selection ``table`` key picks a source by name. Anything still open
    runs discovery over the node's predicate text and takes the top hit,
    recording the decision as an annotation. Raises NoSourceFound.
    """
    from .planner.nodes import LogicalPlan, needs_source, required_modality

    def bind(node):
        children = tuple(bind(c) for c in node.children)
        if children != node.children:
            node = replace(node, children=children)
        if node.source is not None or not needs_source(node):
            return node
        want = required_modality(node, operators)
        request = node.src_request
        if request is not None and request in registry:
            d = registry[request]
            if want is not None and d.modality != want:
                raise NoSourceFound(f"source {request!r} is {d.modality}, {node.kind} needs {want}", node=node.nid)
            return replace(node, source=request, modality=d.modality)
        if request is not None:
            try:
                modality = Modality.parse(request)
            except ValueError:
                raise NoSourceFound(f"src {request!r} is neither a source id nor a modality", node=node.nid) from None
            if want is not None and modality != want:
                raise NoSourceFound(f"{node.kind} runs on {want}, not {modality}", node=node.nid)
            want = modality
        candidates = registry.of_modality(want)
        named = node.pred.get("table") if node.kind == "Selection" else None
        if named:
            sid = _match_name(named, registry, candidates)
            if sid is None:
                raise NoSourceFound(f"no {want or 'source'} named {named!r}", node=node.nid)
            return replace(node, source=sid, modality=registry[sid].modality)
        if request is not None and len(candidates) == 1:
            sid = candidates[0]
            return replace(node, source=sid, modality=registry[sid].modality)
        query = node.discovery_query or ""
        result = discover(query, registry, config, candidates)
        if result.top is None:
            raise NoSourceFound(f"discovery found no source for {query!r}", node=node.nid)
        top = result.top
        note = f"Discovery: {top.source_id} score={top.score:.4f} among {result.ids()}"
        return replace(
            node, source=top.source_id, modality=top.modality,
            annotations=node.annotations + (note,),
        )

    return LogicalPlan(tuple(bind(r) for r in plan.roots), plan.names)


def evaluate_discovery(
    labeled: Sequence[Tuple[str, str]],
    registry: Registry,
    config: DiscoveryConfig = DiscoveryConfig(),
) -> float:
    """Recall@1 of ``discover`` over (query, gold source id) pairs."""
    if not labeled:
        raise ValueError("evaluate_discovery needs at least one labeled query")
    for _, gold in labeled:
        if gold not in registry:
            raise UnknownGoldSource(f"gold source {gold!r} is not registered")
    hits = 0
    for query, gold in labeled:
        top = discover(query, registry, config).top
        if top is not None and top.source_id == gold:
            hits += 1
    return hits / len(labeled)
