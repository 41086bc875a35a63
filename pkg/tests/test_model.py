import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmlake.errors import KindMismatch, SchemaMismatch
from mmlake.model import (
    Record,
    RecordSet,
    canonical_hash,
    canonical_string,
    compare,
    kind_of,
    recordset_digest,
    validate_recordset,
)

scalars = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(-10**6, 10**6),
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.text(max_size=8),
)
attr_maps = st.dictionaries(st.text(min_size=1, max_size=5), scalars, max_size=5)


def test_digest_ignores_attribute_order():
    assert canonical_hash({"a": 1, "b": "x"}) == canonical_hash({"b": "x", "a": 1})


def test_digest_is_value_sensitive():
    assert canonical_hash({"a": 1}) != canonical_hash({"a": 2})


def test_int_and_float_hash_equal():
    assert canonical_hash({"a": 5}) == canonical_hash({"a": 5.0})


def test_digest_is_pinned():
    # platform independence: the string form is fully specified
    assert canonical_string({"b": [1, None], "a": 0.1}) == '{"a":0.1,"b":[1,null]}'


def test_compare_examples():
    assert compare(3, 3.0, "=")
    assert compare("Chicago Bulls", "bulls", "contains")
    with pytest.raises(KindMismatch):
        compare("a", 1, "<")


def test_null_comparisons_are_false():
    for op in ("=", "!=", "<", ">="):
        assert not compare(None, 1, op)
        assert not compare(None, None, op)


def test_boolean_order_rejected():
    with pytest.raises(KindMismatch):
        compare(True, False, "<")


def test_record_is_immutable():
    r = Record({"a": 1})
    with pytest.raises(AttributeError):
        r.attrs = {}


def test_provenance_not_part_of_hash():
    assert canonical_hash(Record({"a": 1}, [("s", "table")])) == canonical_hash(Record({"a": 1}))


def test_recordset_rejects_schema_mismatch():
    with pytest.raises(SchemaMismatch):
        validate_recordset(RecordSet(("a",), (Record({"b": 1}),)))
    with pytest.raises(SchemaMismatch):
        validate_recordset(RecordSet(("a", "a"), ()))


def test_recordset_digest_is_order_free():
    a = RecordSet.from_rows(["x"], [[1], [2]])
    b = RecordSet.from_rows(["x"], [[2], [1]])
    assert recordset_digest(a) == recordset_digest(b)


@given(attr_maps)
def test_hash_deterministic(attrs):
    assert canonical_hash(dict(attrs)) == canonical_hash(dict(reversed(list(attrs.items()))))


@given(st.one_of(st.integers(), st.floats(allow_nan=False)), st.one_of(st.integers(), st.floats(allow_nan=False)))
def test_less_than_antisymmetric(a, b):
    assert not (compare(a, b, "<") and compare(b, a, "<"))


@given(st.text(max_size=6), st.text(max_size=6))
def test_text_less_than_antisymmetric(a, b):
    assert not (compare(a, b, "<") and compare(b, a, "<"))


@given(scalars)
def test_kind_of_total_on_scalars(v):
    assert kind_of(v) in ("null", "boolean", "number", "text")


def test_validate_recordset_accepts_operator_output():
    rs = RecordSet.from_rows(["a", "b"], [[1, "x"], [None, math.pi]])
    validate_recordset(rs)
