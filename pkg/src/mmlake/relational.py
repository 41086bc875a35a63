"""Embedded table backend: CSV ingestion plus the relational operators.

Every ``eval_*`` function is pure and returns a new RecordSet.
"""

from __future__ import annotations

import csv
import math
import re
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from . import predicates
from .errors import KindMismatch, SchemaMismatch, UnknownAttribute, UnknownTable
from .model import (
    Modality,
    Record,
    RecordSet,
    canonical_hash,
    check_sortable,
    kind_of,
    render_value,
    sort_key,
    union_provenance,
)

RIGHT_SUFFIX = "_r"


@dataclass(frozen=True)
class Table:
    name: str
    source_id: str
    data: RecordSet
    column_types: Dict[str, str]
    distinct_counts: Dict[str, int]

    @property
    def schema(self) -> Tuple[str, ...]:
        return self.data.schema

    def __len__(self) -> int:
        return len(self.data)


def _infer(values: List[str]) -> str:
    present = [v for v in values if v != ""]
    if not present:
        return "text"
    try:
        for v in present:
            int(v)
        return "integer"
    except ValueError:
        pass
    try:
        for v in present:
            float(v)
        return "float"
    except ValueError:
        return "text"


_CONVERT = {"integer": int, "float": float, "text": str}


def make_table(name: str, source_id: str, header: Sequence[str], raw_rows: Iterable[Sequence[str]]) -> Table:
    """Build a typed table from string cells; empty cells become null."""
    header = [h.strip() for h in header]
    if any(not h for h in header) or len(set(header)) != len(header):
        raise SchemaMismatch(f"table {name!r}: header names must be non-empty and unique")
    rows = [list(r) for r in raw_rows]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise SchemaMismatch(f"table {name!r}: row {i + 1} has {len(r)} fields, expected {len(header)}")
    types = {}
    for j, col in enumerate(header):
        types[col] = _infer([r[j] for r in rows])
    prov = [(source_id, Modality.TABLE.value)]
    records = []
    for r in rows:
        attrs = {}
        for j, col in enumerate(header):
            cell = r[j]
            attrs[col] = None if cell == "" else _CONVERT[types[col]](cell)
        records.append(Record(attrs, prov))
    distinct = {
        col: len({render_value(rec.attrs[col]) for rec in records if rec.attrs[col] is not None})
        for col in header
    }
    return Table(name, source_id, RecordSet(tuple(header), tuple(records)), types, distinct)


def read_csv_table(path, name: str, source_id: str) -> Table:
    """Read an RFC-4180 UTF-8 CSV with a header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: CSV has no header row") from None
        return make_table(name, source_id, header, [r for r in reader if r])


class TableStore:
    """Tables keyed by name; immutable once loaded."""

    def __init__(self, tables: Iterable[Table] = ()):
        self._tables: Dict[str, Table] = {}
        for t in tables:
            self.add(t)

    def add(self, table: Table) -> None:
        self._tables[table.name] = table

    def table(self, name: str) -> Table:
        if name in self._tables:
            return self._tables[name]
        folded = {k.casefold(): v for k, v in self._tables.items()}
        if name.casefold() in folded:
            return folded[name.casefold()]
        raise UnknownTable(f"unknown table {name!r}")

    def names(self) -> List[str]:
        return list(self._tables)

    def __contains__(self, name: str) -> bool:
        return name in self._tables


# -- helpers -----------------------------------------------------------------

def _require(schema: Sequence[str], names: Iterable[str], what: str = "attribute") -> None:
    missing = [n for n in names if n not in schema]
    if missing:
        raise UnknownAttribute(f"unknown {what} {missing[0]!r}; available: {list(schema)}")


def filter_project(rs: RecordSet, tree: Optional[dict], columns: Optional[Sequence[str]] = None) -> RecordSet:
    """Keep records satisfying ``tree`` then project onto ``columns``."""
    _require(rs.schema, predicates.refs(tree))
    test = predicates.compile_filter(tree)
    records = [r for r in rs.records if test(r.attrs)] if tree is not None else list(rs.records)
    if columns is None:
        return RecordSet(rs.schema, records)
    return eval_projection(RecordSet(rs.schema, records), columns)


def _as_recordset(data: Union[RecordSet, Table, TableStore], pred: dict) -> RecordSet:
    if isinstance(data, TableStore):
        if "table" not in pred:
            raise UnknownTable("Selection over a table store needs a 'table' key")
        return data.table(pred["table"]).data
    if isinstance(data, Table):
        if "table" in pred and pred["table"].casefold() not in (data.name.casefold(), data.source_id.casefold()):
            raise UnknownTable(f"unknown table {pred['table']!r}")
        return data.data
    return data


# -- operators ---------------------------------------------------------------

def eval_selection(data: Union[RecordSet, Table, TableStore], pred: dict) -> RecordSet:
    """Rows satisfying the predicate; an ``attribute`` key implicitly projects."""
    from .dsl import selection_parts

    rs = _as_recordset(data, pred)
    try:
        columns, tree = selection_parts(pred)
    except predicates.FilterSyntaxError as exc:
        raise KindMismatch(f"malformed predicate: {exc}") from None
    return filter_project(rs, tree, columns)


def eval_projection(rs: RecordSet, columns: Sequence[str]) -> RecordSet:
    columns = list(columns)
    _require(rs.schema, columns)
    if len(set(columns)) != len(columns):
        raise SchemaMismatch(f"duplicate projection columns {columns}")
    if tuple(columns) == rs.schema:
        return rs
    return RecordSet(tuple(columns), tuple(r.project(columns) for r in rs.records))


def right_renames(left_schema: Sequence[str], right_schema: Sequence[str]) -> Dict[str, str]:
    """Output names for right-side attributes; collisions get ``_r`` suffixes."""
    taken = set(left_schema)
    out: Dict[str, str] = {}
    for name in right_schema:
        new = name
        while new in taken:
            new += RIGHT_SUFFIX
        taken.add(new)
        out[name] = new
    return out


_EQ = re.compile(r"^\s*([^=\s]+)\s*=\s*([^=\s]+)\s*$")


def parse_equality_keys(cond: Union[str, List[str]]) -> List[Tuple[str, str]]:
    items = [cond] if isinstance(cond, str) else list(cond)
    keys = []
    for item in items:
        m = _EQ.match(item)
        if m:
            keys.append((m.group(1), m.group(2)))
        else:
            keys.append((item.strip(), item.strip()))
    return keys


@dataclass(frozen=True)
class JoinCondition:
    """Resolved join condition: equality keys and/or a tree over output names."""

    keys: Tuple[Tuple[str, str], ...] = ()
    tree: Optional[dict] = None
    nl_text: Optional[str] = None


def resolve_condition(pred: dict, left_schema: Sequence[str], right_schema: Sequence[str]) -> JoinCondition:
    """Turn a Join predicate's ``cond`` into a JoinCondition."""
    cond = pred.get("cond")
    cond_type = pred.get("cond_type")
    if cond is None:
        return JoinCondition()
    if cond_type == "equality" or isinstance(cond, list):
        return JoinCondition(keys=tuple(parse_equality_keys(cond)))
    if isinstance(cond, dict):
        try:
            tree = predicates.normalize(cond)
        except predicates.FilterSyntaxError as exc:
            raise KindMismatch(f"malformed join cond: {exc}") from None
        return JoinCondition(tree=tree)
    from .text import compile_nl_cond

    compiled = compile_nl_cond(cond, left_schema, right_schema)
    return JoinCondition(keys=compiled.keys, nl_text=cond)


def side_filters(filter_raw: Any, left_schema: Sequence[str], right_schema: Sequence[str]):
    """Apply a Join ``filter`` to every input whose schema covers it."""
    try:
        tree = predicates.normalize(filter_raw)
    except predicates.FilterSyntaxError as exc:
        raise KindMismatch(f"malformed join filter: {exc}") from None
    if tree is None:
        return None, None
    needed = predicates.refs(tree)
    on_left = tree if needed <= set(left_schema) else None
    on_right = tree if needed <= set(right_schema) else None
    if on_left is None and on_right is None:
        raise UnknownAttribute(f"join filter attributes {sorted(needed)} are not all present on either input")
    return on_left, on_right


def _key_of(rec: Record, cols: Sequence[str]):
    vals = [rec.attrs[c] for c in cols]
    if any(v is None for v in vals):
        return None
    return tuple(render_value(v) for v in vals)


def _check_key_kinds(left: RecordSet, right: RecordSet, keys) -> None:
    for lk, rk in keys:
        lkinds = {kind_of(r.attrs[lk]) for r in left.records} - {"null"}
        rkinds = {kind_of(r.attrs[rk]) for r in right.records} - {"null"}
        if lkinds and rkinds and lkinds != rkinds:
            raise KindMismatch(f"join key {lk} ({sorted(lkinds)}) vs {rk} ({sorted(rkinds)})")


def eval_join(
    left: RecordSet,
    right: RecordSet,
    pred: Optional[dict] = None,
    *,
    condition: Optional[JoinCondition] = None,
    renames: Optional[Dict[str, str]] = None,
    self_join: bool = False,
) -> RecordSet:
    """Join two record sets.

    Equality keys use a hash join probed in left order; other conditions run
    as a nested loop over the combined (renamed) record. With ``self_join``
    a left record is never paired with an identical right record.
    """
    pred = pred or {}
    join_type = pred.get("type", "inner")
    if "filter" in pred:
        lf, rf = side_filters(pred["filter"], left.schema, right.schema)
        if lf is not None:
            left = filter_project(left, lf)
        if rf is not None:
            right = filter_project(right, rf)
    if condition is None:
        condition = resolve_condition(pred, left.schema, right.schema)
    renames = renames or right_renames(left.schema, right.schema)
    missing = [c for c in right.schema if c not in renames]
    if missing:
        renames = {**right_renames(left.schema, right.schema), **renames}
    out_schema = tuple(left.schema) + tuple(renames[c] for c in right.schema)
    _require(left.schema, [lk for lk, _ in condition.keys])
    _require(right.schema, [rk for _, rk in condition.keys])
    _require(out_schema, predicates.refs(condition.tree))
    _check_key_kinds(left, right, condition.keys)
    test = predicates.compile_filter(condition.tree)
    null_right = {renames[c]: None for c in right.schema}

    def combine(l: Record, r: Record) -> Dict[str, Any]:
        attrs = dict(l.attrs)
        for c in right.schema:
            attrs[renames[c]] = r.attrs[c]
        return attrs

    if condition.keys:
        lcols = [k[0] for k in condition.keys]
        rcols = [k[1] for k in condition.keys]
        table: Dict[tuple, List[Record]] = {}
        for r in right.records:
            key = _key_of(r, rcols)
            if key is not None:
                table.setdefault(key, []).append(r)

        def candidates(l: Record):
            key = _key_of(l, lcols)
            return table.get(key, []) if key is not None else []
    else:
        def candidates(l: Record):
            return right.records

    self_hashes = {}
    out: List[Record] = []
    for l in left.records:
        matched = False
        for r in candidates(l):
            if self_join:
                lh = self_hashes.setdefault(id(l), canonical_hash(l))
                rh = self_hashes.setdefault(id(r), canonical_hash(r))
                if lh == rh:
                    continue
            attrs = combine(l, r)
            if condition.tree is not None and not test(attrs):
                continue
            matched = True
            out.append(Record(attrs, l.provenance | r.provenance))
        if not matched and join_type == "left":
            out.append(Record({**l.attrs, **null_right}, l.provenance))
    return RecordSet(out_schema, out)


def aggregate_name(func: str, attribute: Optional[str]) -> str:
    return f"{func}_{attribute}" if attribute else func


def _agg(func: str, values: List[Any]) -> Any:
    present = [v for v in values if v is not None]
    if func == "count":
        return len(present)
    if func in ("avg", "sum"):
        for v in present:
            if kind_of(v) != "number":
                raise KindMismatch(f"{func} needs numeric values, got {kind_of(v)}")
        if not present:
            return None
        if all(isinstance(v, int) for v in present):
            total: Any = sum(present)
        else:
            total = math.fsum(present)
        return total / len(present) if func == "avg" else total
    check_sortable(present)
    if not present:
        return None
    keyed = [sort_key(v) for v in present]
    idx = keyed.index(min(keyed) if func == "min" else max(keyed))
    return present[idx]


def eval_aggregation(rs: RecordSet, pred: dict) -> RecordSet:
    """Group and aggregate; nulls are excluded from every function's input."""
    func = pred["func"]
    attribute = pred.get("attribute")
    group_by = pred.get("group_by") or []
    if isinstance(group_by, str):
        group_by = [group_by]
    _require(rs.schema, list(group_by) + ([attribute] if attribute else []))
    out_name = aggregate_name(func, attribute)
    schema = tuple(group_by) + (out_name,)
    groups: "OrderedDict[tuple, List[Record]]" = OrderedDict()
    for r in rs.records:
        key = tuple(render_value(r.attrs[g]) for g in group_by)
        groups.setdefault(key, []).append(r)
    if not group_by and not groups:
        groups[()] = []
    out = []
    for members in groups.values():
        if attribute:
            values = [m.attrs[attribute] for m in members]
        else:
            values = [1] * len(members)
        attrs = {g: members[0].attrs[g] for g in group_by}
        attrs[out_name] = _agg(func, values)
        out.append(Record(attrs, union_provenance(members)))
    return RecordSet(schema, out)


def eval_ranking(rs: RecordSet, pred: dict) -> RecordSet:
    """Stable sort by one attribute; nulls sort lowest. Truncate to ``k``."""
    by = pred["by"]
    _require(rs.schema, [by])
    order = pred.get("order", "desc")
    check_sortable(r.attrs[by] for r in rs.records)
    ranked = sorted(rs.records, key=lambda r: sort_key(r.attrs[by]), reverse=(order == "desc"))
    k = pred.get("k")
    if k is not None:
        ranked = ranked[:k]
    return RecordSet(rs.schema, ranked)


def dedup(rs: RecordSet) -> RecordSet:
    seen: Dict[str, int] = {}
    out: List[Record] = []
    for r in rs.records:
        h = canonical_hash(r)
        if h in seen:
            i = seen[h]
            out[i] = Record(out[i].attrs, out[i].provenance | r.provenance)
        else:
            seen[h] = len(out)
            out.append(r)
    return RecordSet(rs.schema, out)


def eval_conjunction(a: RecordSet, b: RecordSet, mode: str) -> RecordSet:
    """Set union / intersect / except keyed by canonical record hash."""
    if set(a.schema) != set(b.schema) or len(a.schema) != len(b.schema):
        raise SchemaMismatch(f"conjunction inputs differ: {list(a.schema)} vs {list(b.schema)}")
    if mode not in ("union", "intersect", "except"):
        raise SchemaMismatch(f"unknown conjunction mode {mode!r}")
    b = RecordSet(a.schema, [Record({c: r.attrs[c] for c in a.schema}, r.provenance) for r in b.records])
    da, db = dedup(a), dedup(b)
    b_index = {canonical_hash(r): r for r in db.records}
    if mode == "union":
        return dedup(RecordSet(a.schema, da.records + db.records))
    out = []
    for r in da.records:
        h = canonical_hash(r)
        if mode == "intersect" and h in b_index:
            out.append(Record(r.attrs, r.provenance | b_index[h].provenance))
        elif mode == "except" and h not in b_index:
            out.append(r)
    return RecordSet(a.schema, out)
