"""Modality-agnostic data model shared by every backend.

Values are plain Python objects: ``None``, ``bool``, ``int``, ``float``, ``str``
and ``list`` of values. Graph nodes and documents are projected into attribute
maps, so everything flowing between operators is a :class:`RecordSet`.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Sequence, Tuple

from .errors import KindMismatch, SchemaMismatch

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=", "contains")


class Modality(str, enum.Enum):
    TABLE = "table"
    GRAPH = "graph"
    TEXT = "text"

    @classmethod
    def parse(cls, text: str) -> "Modality":
        return cls(text.strip().lower())

    def __str__(self) -> str:
        return self.value


Provenance = FrozenSet[Tuple[str, str]]


def kind_of(value: Any) -> str:
    """Return the value kind: null, boolean, number, text or list."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "text"
    if isinstance(value, (list, tuple)):
        return "list"
    raise KindMismatch(f"unsupported value type {type(value).__name__}")


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


class Record:
    """An immutable attribute map with provenance.

    ``attrs`` must not be mutated after construction; operators build new
    records instead.
    """

    __slots__ = ("attrs", "provenance")

    def __init__(self, attrs: Mapping[str, Any], provenance: Iterable[Tuple[str, str]] = ()):
        for name in attrs:
            if not name:
                raise ValueError("attribute names must be non-empty")
        object.__setattr__(self, "attrs", dict(attrs))
        object.__setattr__(self, "provenance", frozenset(provenance))

    def __setattr__(self, key, value):
        raise AttributeError("Record is immutable")

    def __getitem__(self, name: str) -> Any:
        return self.attrs[name]

    def get(self, name: str, default: Any = None) -> Any:
        return self.attrs.get(name, default)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Record):
            return NotImplemented
        return self.attrs == other.attrs and self.provenance == other.provenance

    def __hash__(self) -> int:
        return hash(canonical_hash(self))

    def __repr__(self) -> str:
        return f"Record({self.attrs!r})"

    def project(self, columns: Sequence[str]) -> "Record":
        return Record({c: self.attrs[c] for c in columns}, self.provenance)

    def with_attrs(self, attrs: Mapping[str, Any], extra_provenance: Iterable = ()) -> "Record":
        return Record(attrs, self.provenance | frozenset(extra_provenance))


@dataclass(frozen=True)
class RecordSet:
    """Bag of records sharing one schema."""

    schema: Tuple[str, ...]
    records: Tuple[Record, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @classmethod
    def from_rows(cls, schema: Sequence[str], rows: Iterable[Sequence[Any]], provenance=()) -> "RecordSet":
        schema = tuple(schema)
        return cls(schema, tuple(Record(dict(zip(schema, row)), provenance) for row in rows))

    def rows(self) -> List[Tuple[Any, ...]]:
        return [tuple(r.attrs[c] for c in self.schema) for r in self.records]


@dataclass(frozen=True)
class SourceDescriptor:
    id: str
    modality: Modality
    name: str
    schema_summary: Tuple[str, ...]
    cardinality: int
    signature: Mapping[str, float] = field(default_factory=dict)

    @property
    def discoverable(self) -> bool:
        return bool(self.signature)


def validate_recordset(rs: RecordSet) -> None:
    """Raise SchemaMismatch unless every record carries exactly the schema."""
    if len(set(rs.schema)) != len(rs.schema):
        raise SchemaMismatch(f"duplicate attribute names in schema {rs.schema}")
    expected = set(rs.schema)
    for i, rec in enumerate(rs.records):
        if set(rec.attrs) != expected:
            raise SchemaMismatch(
                f"record {i} attributes {sorted(rec.attrs)} differ from schema {list(rs.schema)}"
            )
        for v in rec.attrs.values():
            kind_of(v)


def render_value(value: Any) -> str:
    """Stable textual rendering used by canonical hashing."""
    kind = kind_of(value)
    if kind == "null":
        return "null"
    if kind == "boolean":
        return "true" if value else "false"
    if kind == "number":
        if isinstance(value, int):
            return str(value)
        if math.isnan(value):
            return "nan"
        return format(value, ".15g")
    if kind == "text":
        return json.dumps(nfc(value), ensure_ascii=True)
    return "[" + ",".join(render_value(v) for v in value) + "]"


def canonical_string(attrs: Mapping[str, Any]) -> str:
    return "{" + ",".join(
        json.dumps(name) + ":" + render_value(attrs[name]) for name in sorted(attrs)
    ) + "}"


def canonical_hash(record: Record | Mapping[str, Any]) -> str:
    """SHA-256 hex digest of a record's attribute map.

    Attribute order and provenance are ignored; integer 5 and float 5.0 hash
    equal because floats render with 15 significant digits.
    """
    attrs = record.attrs if isinstance(record, Record) else record
    return hashlib.sha256(canonical_string(attrs).encode("utf-8")).hexdigest()


def recordset_digest(rs: RecordSet) -> str:
    """Order-insensitive digest of a record multiset plus its attribute set."""
    h = hashlib.sha256()
    h.update(json.dumps(sorted(rs.schema)).encode("utf-8"))
    for digest in sorted(canonical_hash(r) for r in rs.records):
        h.update(digest.encode("ascii"))
    return h.hexdigest()


def canonical_multiset(rs: RecordSet) -> List[str]:
    return sorted(canonical_hash(r) for r in rs.records)


def values_equal(a: Any, b: Any) -> bool:
    """Equality used by set semantics: null equals null here."""
    return render_value(a) == render_value(b)


def _check_comparable(v1: Any, v2: Any, op: str) -> Tuple[str, str]:
    k1, k2 = kind_of(v1), kind_of(v2)
    if op == "contains":
        if k1 != "text" or k2 != "text":
            raise KindMismatch(f"contains needs text operands, got {k1} and {k2}")
        return k1, k2
    if k1 != k2:
        raise KindMismatch(f"cannot compare {k1} with {k2} using {op}")
    if k1 in ("boolean", "list") and op not in ("=", "!="):
        raise KindMismatch(f"{k1} values only support = and !=")
    return k1, k2


def compare(v1: Any, v2: Any, op: str) -> bool:
    """Evaluate a predicate comparison.

    Any comparison involving null is false. Text compares by code point after
    NFC normalization (identical to UTF-8 byte order); ``contains`` is a
    case-insensitive substring test.
    """
    if op not in COMPARISON_OPS:
        raise KindMismatch(f"unknown comparison operator {op!r}")
    if v1 is None or v2 is None:
        return False
    kind, _ = _check_comparable(v1, v2, op)
    if op == "contains":
        return nfc(v2).casefold() in nfc(v1).casefold()
    if kind == "text":
        v1, v2 = nfc(v1), nfc(v2)
    elif kind == "list":
        return (render_value(v1) == render_value(v2)) == (op == "=")
    if op == "=":
        return v1 == v2
    if op == "!=":
        return v1 != v2
    if op == "<":
        return v1 < v2
    if op == "<=":
        return v1 <= v2
    if op == ">":
        return v1 > v2
    return v1 >= v2


def sort_key(value: Any, kind: str | None = None):
    """Sort key placing nulls below every non-null value."""
    if value is None:
        return (0, 0)
    if isinstance(value, str):
        return (1, nfc(value))
    return (1, value)


def check_sortable(values: Iterable[Any]) -> None:
    kinds = {kind_of(v) for v in values} - {"null"}
    if len(kinds) > 1:
        raise KindMismatch(f"cannot order mixed kinds {sorted(kinds)}")
    if kinds & {"list"}:
        raise KindMismatch("list values cannot be ordered")


def to_jsonable(value: Any) -> Any:
    if isinstance(value, tuple):
        return [to_jsonable(v) for v in value]
    if isinstance(value, list):
        return [to_jsonable(v) for v in value]
    return value


def union_provenance(records: Iterable[Record]) -> Provenance:
    out: set = set()
    for r in records:
        out |= r.provenance
    return frozenset(out)


def empty(schema: Sequence[str]) -> RecordSet:
    return RecordSet(tuple(schema), ())


