"""Verifier: combines the outputs of all plan roots into one answer."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import LakeError, NoOutputs
from .model import Record, RecordSet, canonical_hash, to_jsonable, values_equal
from .text import ANSWER_SCHEMA

SUPPORT = "support_count"
ROOT_ID = "root_id"
STRATEGIES = ("rule", "answerer")


@dataclass(frozen=True)
class VerifierConfig:
    """Verifier settings; every merge rule can be switched off on its own."""

    strategy: str = "rule"
    drop_empty: bool = True
    dedup: bool = True
    union_equal: bool = True
    merge_overlapping: bool = True
    question: str = "What is the final answer?"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")


Outputs = Union[Mapping[str, RecordSet], Sequence[RecordSet]]


def _named(outputs: Outputs) -> List[Tuple[str, RecordSet]]:
    if isinstance(outputs, Mapping):
        return list(outputs.items())
    return [(f"root{i}", rs) for i, rs in enumerate(outputs)]


def _dedup(rs: RecordSet) -> List[Tuple[str, Record]]:
    seen: Dict[str, Record] = {}
    for r in rs.records:
        h = canonical_hash(r)
        if h in seen:
            seen[h] = Record(seen[h].attrs, seen[h].provenance | r.provenance)
        else:
            seen[h] = r
    return list(seen.items())


def _agrees(a: Mapping[str, Any], b: Mapping[str, Any]) -> bool:
    shared = set(a) & set(b)
    if not shared:
        return False
    return all(a[k] is not None and values_equal(a[k], b[k]) for k in shared)


def _ordered(schema: Sequence[str], rows: List[Record]) -> RecordSet:
    rows = sorted(rows, key=lambda r: (-r.attrs[SUPPORT], canonical_hash(r)))
    return RecordSet(tuple(schema), rows)


def _union(named, config: VerifierConfig) -> RecordSet:
    attrs = sorted(named[0][1].schema)
    merged: Dict[str, List[Any]] = {}
    for _, rs in named:
        items = _dedup(rs) if config.dedup else [(str(i), r) for i, r in enumerate(rs.records)]
        for _, r in items:
            h = canonical_hash(r)
            if h in merged:
                merged[h][1] += 1
                merged[h][2] = merged[h][2] | r.provenance
            else:
                merged[h] = [r, 1, r.provenance]
    rows = [Record({**{a: r.attrs[a] for a in attrs}, SUPPORT: n}, prov) for r, n, prov in merged.values()]
    return _ordered(attrs + [SUPPORT], rows)


def _fold(named, config: VerifierConfig) -> RecordSet:
    attrs = sorted({a for _, rs in named for a in rs.schema})
    acc: List[List[Any]] = []  # [attrs, roots, provenance]
    for name, rs in sorted(named, key=lambda p: p[0]):
        items = _dedup(rs) if config.dedup else [(str(i), r) for i, r in enumerate(rs.records)]
        for _, r in items:
            target = None
            if config.merge_overlapping:
                for entry in acc:
                    if name not in entry[1] and _agrees(entry[0], r.attrs):
                        target = entry
                        break
            if target is None:
                acc.append([dict(r.attrs), {name}, r.provenance])
            else:
                target[0].update(r.attrs)
                target[1].add(name)
                target[2] = target[2] | r.provenance
    rows = []
    for values, roots, prov in acc:
        out = {a: values.get(a) for a in attrs}
        out[ROOT_ID] = "+".join(sorted(roots))
        out[SUPPORT] = len(roots)
        rows.append(Record(out, prov))
    return _ordered(attrs + [ROOT_ID, SUPPORT], rows)


def _serialize(named) -> RecordSet:
    rows = []
    for name, rs in named:
        for r in rs.records:
            payload = json.dumps({a: to_jsonable(r.attrs[a]) for a in rs.schema}, sort_keys=True, ensure_ascii=False)
            rows.append(Record({ROOT_ID: name, "record": payload}, r.provenance))
    return RecordSet((ROOT_ID, "record"), rows)


def verify(outputs: Outputs, config: VerifierConfig = VerifierConfig(), answerer=None) -> RecordSet:
    """Aggregate root outputs into the final answer.

    A single root passes through unchanged. With the rule strategy multiple
    roots are deduplicated and either unioned with a ``support_count`` (equal
    schemas) or folded into widened records tagged with ``root_id``. With the
    answerer strategy all outputs are handed to the answerer as context.
    Raises NoOutputs.
    """
    named = _named(outputs)
    if not named:
        raise NoOutputs("the program produced no outputs")
    if config.strategy == "answerer":
        if answerer is None:
            raise LakeError("the answerer verifier strategy needs a configured answerer")
        text, conf = answerer.answer(config.question, _serialize(named))
        prov = frozenset().union(*(r.provenance for _, rs in named for r in rs.records))
        return RecordSet(ANSWER_SCHEMA, [Record({"answer": text, "score": float(conf)}, prov)])
    if len(named) == 1:
        return named[0][1]
    if config.drop_empty and any(len(rs) for _, rs in named):
        named = [(n, rs) for n, rs in named if len(rs)]
    schemas = {frozenset(rs.schema) for _, rs in named}
    if config.union_equal and len(schemas) == 1:
        return _union(named, config)
    return _fold(named, config)

