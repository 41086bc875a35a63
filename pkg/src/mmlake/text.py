"""Text backend: LookUp modes, the Answerer seam, and the join-condition compiler."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple

from .errors import EmptyQuery, UncompilableCondition, UnknownMode
from .model import Modality, Record, RecordSet, recordset_digest, union_provenance
from .tokenizer import tokenize, value_tokens

DOC_SCHEMA = ("doc_id", "title", "body")
HIT_SCHEMA = ("doc_id", "title", "score")
ANSWER_SCHEMA = ("answer", "score")
DEFAULT_K = 5


def idf(n_docs: int, df: int) -> float:
    return math.log((n_docs + 1) / (df + 1)) + 1.0


def weigh(counts: Mapping[str, int], idf_of) -> Dict[str, float]:
    """tf x idf weights, L2-normalized."""
    raw = {t: c * idf_of(t) for t, c in counts.items()}
    norm = math.sqrt(sum(w * w for w in raw.values()))
    if norm == 0:
        return {}
    return {t: w / norm for t, w in sorted(raw.items())}


def cosine(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    if len(a) > len(b):
        a, b = b, a
    s = math.fsum(w * b[t] for t, w in a.items() if t in b)
    return min(1.0, max(0.0, s))


@dataclass(frozen=True)
class TextDocument:
    doc_id: str
    title: str
    body: str
    counts: Mapping[str, int]
    vector: Mapping[str, float]


class TextCorpus:
    """Documents with body token vectors; immutable after load."""

    def __init__(self, docs: Iterable[Mapping[str, Any]], source_id: str = "text"):
        self.source_id = source_id
        raw = []
        for d in docs:
            raw.append((str(d["id"]), str(d.get("title") or ""), str(d.get("body") or "")))
        counts = [Counter(tokenize(body)) for _, _, body in raw]
        self.df: Counter = Counter()
        for c in counts:
            self.df.update(c.keys())
        self.n = len(raw)
        self.docs: List[TextDocument] = [
            TextDocument(doc_id, title, body, c, weigh(c, self.idf))
            for (doc_id, title, body), c in zip(raw, counts)
        ]

    def idf(self, term: str) -> float:
        return idf(self.n, self.df.get(term, 0))

    def __len__(self) -> int:
        return self.n

    @property
    def provenance(self):
        return frozenset({(self.source_id, Modality.TEXT.value)})

    def records(self) -> RecordSet:
        prov = self.provenance
        return RecordSet(DOC_SCHEMA, [
            Record({"doc_id": d.doc_id, "title": d.title, "body": d.body}, prov) for d in self.docs
        ])

    def query_vector(self, text: str) -> Dict[str, float]:
        return weigh(Counter(tokenize(text)), self.idf)


def load_corpus(path, source_id: str) -> TextCorpus:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                docs.append(json.loads(line))
    return TextCorpus(docs, source_id)


class Answerer(Protocol):
    def answer(self, question: str, context: Optional[RecordSet]) -> Tuple[str, float]:
        ...


def _norm_question(q: str) -> str:
    return " ".join(q.split()).casefold()


def best_overlap(question: str, context: Optional[RecordSet]) -> Tuple[str, float]:
    """The context text value sharing the most tokens with the question."""
    q = set(tokenize(question))
    best, best_score = "", -1
    if context is not None:
        for rec in context.records:
            for col in context.schema:
                v = rec.attrs[col]
                if not isinstance(v, str):
                    continue
                score = len(q & set(value_tokens(v)))
                if score > best_score:
                    best, best_score = v, score
    if best_score < 0:
        return "", 0.0
    return best, best_score / max(1, len(q))


class ScriptedAnswerer:
    """Deterministic answerer keyed by (question, context digest).

    Entries without ``context_digest`` match any context; digest-specific
    entries win. Unmatched questions fall back to :func:`best_overlap`.
    """

    def __init__(self, entries: Iterable[Mapping[str, Any]] = ()):
        self._exact: Dict[Tuple[str, str], Tuple[str, float]] = {}
        self._any: Dict[str, Tuple[str, float]] = {}
        for e in entries:
            key = _norm_question(e["question"])
            value = (str(e["answer"]), float(e.get("confidence", 1.0)))
            if e.get("context_digest"):
                self._exact[(key, e["context_digest"])] = value
            else:
                self._any[key] = value

    @classmethod
    def from_file(cls, path) -> "ScriptedAnswerer":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def answer(self, question: str, context: Optional[RecordSet]) -> Tuple[str, float]:
        key = _norm_question(question)
        if context is not None:
            hit = self._exact.get((key, recordset_digest(context)))
            if hit:
                return hit
        if key in self._any:
            return self._any[key]
        return best_overlap(question, context)


def lookup(
    corpus: TextCorpus,
    pred: Mapping[str, Any],
    context: Optional[RecordSet] = None,
    answerer: Optional[Answerer] = None,
) -> RecordSet:
    """Keyword search, similarity search, or prompt over the answerer."""
    mode = pred.get("mode", "keyword")
    query = pred.get("query") or ""
    k = pred.get("k", DEFAULT_K)
    if mode not in ("keyword", "similarity", "prompt"):
        raise UnknownMode(f"unknown LookUp mode {mode!r}")
    prov = corpus.provenance
    if mode == "prompt":
        if not query.strip():
            raise EmptyQuery("prompt needs a question")
        if answerer is None:
            answerer = ScriptedAnswerer()
        text, conf = answerer.answer(query, context)
        if context is not None:
            prov = prov | union_provenance(context.records)
        return RecordSet(ANSWER_SCHEMA, [Record({"answer": text, "score": float(conf)}, prov)])
    terms = tokenize(query)
    if not terms:
        raise EmptyQuery(f"query {query!r} has no searchable tokens")
    hits: List[Tuple[float, str, TextDocument]] = []
    if mode == "keyword":
        wanted = set(terms)
        for d in corpus.docs:
            if wanted <= set(d.counts):
                hits.append((float(sum(d.counts[t] for t in wanted)), d.doc_id, d))
    else:
        qv = corpus.query_vector(query)
        for d in corpus.docs:
            s = cosine(qv, d.vector)
            if s > 0:
                hits.append((s, d.doc_id, d))
    hits.sort(key=lambda h: (-h[0], h[1]))
    return RecordSet(HIT_SCHEMA, [
        Record({"doc_id": d.doc_id, "title": d.title, "score": s}, prov) for s, _, d in hits[:k]
    ])


@dataclass(frozen=True)
class CompiledCondition:
    keys: Tuple[Tuple[str, str], ...]
    matched: Tuple[Tuple[str, str], ...]

    def as_pred(self) -> Dict[str, Any]:
        return {"cond": [a if a == b else f"{a} = {b}" for a, b in self.keys], "cond_type": "equality"}


def _attr_for(token: str, names: Sequence[str]) -> Optional[str]:
    for a in names:
        if token == a.casefold() or token + "s" == a.casefold() or token == a.casefold() + "s":
            return a
    return None


def compile_nl_cond(cond: str, left_schema: Sequence[str], right_schema: Sequence[str]) -> CompiledCondition:
    """Compile a natural-language join condition into equality keys.

    A token naming an attribute present on both sides (exact or
    singular/plural) becomes an equality on it; ``same <attr>`` forces one.
    Anything else raises UncompilableCondition.
    """
    if not cond or not cond.strip():
        raise UncompilableCondition("empty join condition")
    tokens = tokenize(cond)
    shared = [a for a in left_schema if a in set(right_schema)]
    keys: List[str] = []
    matched: List[Tuple[str, str]] = []
    for i, tok in enumerate(tokens):
        attr = _attr_for(tok, shared)
        if attr is None and i > 0 and tokens[i - 1] == "same":
            raise UncompilableCondition(f"'same {tok}' names no attribute shared by both inputs")
        if attr is not None:
            matched.append((tok, attr))
            if attr not in keys:
                keys.append(attr)
    if not keys:
        raise UncompilableCondition(
            f"no token of {cond.strip()!r} names an attribute shared by both inputs ({shared})"
        )
    return CompiledCondition(tuple((a, a) for a in keys), tuple(matched))
