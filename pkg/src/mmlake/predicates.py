"""Boolean filter trees.

A filter tree is plain JSON-shaped data. Normalized node forms::

    {"and": [tree, ...]}   {"or": [tree, ...]}   {"not": tree}
    {"attribute": a, "op": op, "value": literal}
    {"attribute": a, "op": op, "other": b}          # attribute vs attribute
    {"attribute": a, "op": "in", "ref": node, "ref_attribute": b}
    {"attribute": a, "op": "in", "values": [...]}   # resolved membership

The ``in`` forms are produced by the planner's semi-join rule only; user
programs cannot write them. A shorthand map such as ``{"year": "2023"}`` is
read as a conjunction of equalities.
"""

from __future__ import annotations

import copy
import json
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence

from .errors import KindMismatch
from .model import COMPARISON_OPS, compare, kind_of, render_value

BOOL_KEYS = ("and", "or", "not")
LEAF_KEYS = frozenset({"attribute", "op", "value", "other"})
INTERNAL_OPS = ("in",)

Tree = Dict[str, Any]


class FilterSyntaxError(ValueError):
    """A filter tree is malformed; the message is a validation diagnostic."""


def _is_scalar(v: Any) -> bool:
    try:
        return kind_of(v) != "list"
    except KindMismatch:
        return False


def normalize(raw: Any, *, allow_internal: bool = False) -> Optional[Tree]:
    """Return the normalized tree for ``raw`` (``None`` means always true)."""
    if raw is None:
        return None
    if not isinstance(raw, Mapping):
        raise FilterSyntaxError(f"filter must be an object, got {type(raw).__name__}")
    if not raw:
        return None
    keys = set(raw)
    if keys & set(BOOL_KEYS):
        if len(keys) != 1:
            raise FilterSyntaxError(f"boolean node must have exactly one key, got {sorted(keys)}")
        (key,) = keys
        body = raw[key]
        if key == "not":
            if isinstance(body, list):
                if len(body) != 1:
                    raise FilterSyntaxError("'not' takes exactly one child")
                body = body[0]
            child = normalize(body, allow_internal=allow_internal)
            if child is None:
                raise FilterSyntaxError("'not' of an empty filter")
            return {"not": child}
        if not isinstance(body, list):
            raise FilterSyntaxError(f"'{key}' takes a list of children")
        children = []
        for c in body:
            n = normalize(c, allow_internal=allow_internal)
            if n is None:
                raise FilterSyntaxError(f"empty child under '{key}'")
            children.append(n)
        return {key: children}
    if "op" in keys:
        return _leaf(raw, allow_internal)
    if "cond" in keys or "cond_type" in keys:
        raise FilterSyntaxError("natural-language conditions are only allowed as a Join cond")
    leaves = []
    for attr, value in raw.items():
        if not isinstance(attr, str) or not attr:
            raise FilterSyntaxError("shorthand filter keys must be attribute names")
        if not _is_scalar(value):
            raise FilterSyntaxError(f"shorthand value for {attr!r} must be a scalar")
        leaves.append({"attribute": attr, "op": "=", "value": value})
    return leaves[0] if len(leaves) == 1 else {"and": leaves}


def _leaf(raw: Mapping[str, Any], allow_internal: bool) -> Tree:
    op = raw.get("op")
    attr = raw.get("attribute")
    if not isinstance(attr, str) or not attr:
        raise FilterSyntaxError("comparison needs a non-empty 'attribute'")
    if op in INTERNAL_OPS:
        if not allow_internal:
            raise FilterSyntaxError(f"operator {op!r} is reserved for the planner")
        leaf = {"attribute": attr, "op": op}
        if "values" in raw:
            leaf["values"] = list(raw["values"])
        else:
            leaf["ref"] = raw["ref"]
            leaf["ref_attribute"] = raw["ref_attribute"]
        return leaf
    if op not in COMPARISON_OPS:
        raise FilterSyntaxError(f"unknown comparison operator {op!r}")
    extra = set(raw) - LEAF_KEYS
    if extra:
        raise FilterSyntaxError(f"unknown keys in comparison: {sorted(extra)}")
    if ("value" in raw) == ("other" in raw):
        raise FilterSyntaxError("comparison needs exactly one of 'value' or 'other'")
    if "other" in raw:
        other = raw["other"]
        if not isinstance(other, str) or not other:
            raise FilterSyntaxError("'other' must name an attribute")
        return {"attribute": attr, "op": op, "other": other}
    value = raw["value"]
    try:
        kind_of(value)
    except KindMismatch as exc:
        raise FilterSyntaxError(str(exc)) from None
    return {"attribute": attr, "op": op, "value": value}


def refs(tree: Optional[Tree]) -> set:
    """Attribute names a tree reads."""
    if tree is None:
        return set()
    if "and" in tree or "or" in tree:
        out = set()
        for c in tree.get("and", tree.get("or")):
            out |= refs(c)
        return out
    if "not" in tree:
        return refs(tree["not"])
    out = {tree["attribute"]}
    if "other" in tree:
        out.add(tree["other"])
    return out


def conjuncts(tree: Optional[Tree]) -> List[Tree]:
    if tree is None:
        return []
    if "and" in tree:
        out = []
        for c in tree["and"]:
            out.extend(conjuncts(c))
        return out
    return [tree]


def conjoin(parts: Iterable[Optional[Tree]]) -> Optional[Tree]:
    flat: List[Tree] = []
    for p in parts:
        for c in conjuncts(p):
            if c not in flat:
                flat.append(c)
    if not flat:
        return None
    return flat[0] if len(flat) == 1 else {"and": flat}


def rename(tree: Optional[Tree], mapping: Mapping[str, str]) -> Optional[Tree]:
    if tree is None:
        return None
    if "and" in tree or "or" in tree:
        key = "and" if "and" in tree else "or"
        return {key: [rename(c, mapping) for c in tree[key]]}
    if "not" in tree:
        return {"not": rename(tree["not"], mapping)}
    out = dict(tree)
    out["attribute"] = mapping.get(tree["attribute"], tree["attribute"])
    if "other" in tree:
        out["other"] = mapping.get(tree["other"], tree["other"])
    return out


def memberships(tree: Optional[Tree]) -> List[Tree]:
    """Unresolved membership leaves (those carrying a ``ref``)."""
    if tree is None:
        return []
    if "and" in tree or "or" in tree:
        out = []
        for c in tree.get("and", tree.get("or")):
            out.extend(memberships(c))
        return out
    if "not" in tree:
        return memberships(tree["not"])
    return [tree] if "ref" in tree else []


def resolve(tree: Optional[Tree], lookup: Callable[[str, str], List[Any]]) -> Optional[Tree]:
    """Replace membership refs with concrete value lists."""
    if tree is None:
        return None
    if "and" in tree or "or" in tree:
        key = "and" if "and" in tree else "or"
        return {key: [resolve(c, lookup) for c in tree[key]]}
    if "not" in tree:
        return {"not": resolve(tree["not"], lookup)}
    if "ref" in tree:
        return {
            "attribute": tree["attribute"],
            "op": "in",
            "values": lookup(tree["ref"], tree["ref_attribute"]),
        }
    return tree


def _numeric_literal(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return None


def _compile_leaf(leaf: Tree) -> Callable[[Mapping[str, Any]], bool]:
    attr, op = leaf["attribute"], leaf["op"]
    if op == "in":
        members = {render_value(v) for v in leaf["values"] if v is not None}

        def member(rec):
            v = rec[attr]
            return v is not None and render_value(v) in members

        return member
    if "other" in leaf:
        other = leaf["other"]
        return lambda rec: compare(rec[attr], rec[other], op)
    literal = leaf["value"]
    if isinstance(literal, str) and op != "contains":
        as_number = _numeric_literal(literal)

        def cmp_coerced(rec):
            v = rec[attr]
            if as_number is not None and isinstance(v, (int, float)) and not isinstance(v, bool):
                return compare(v, as_number, op)
            return compare(v, literal, op)

        return cmp_coerced
    return lambda rec: compare(rec[attr], literal, op)


def compile_filter(tree: Optional[Tree]) -> Callable[[Mapping[str, Any]], bool]:
    """Compile a tree into a predicate over attribute maps.

    Comparisons with null are false; a text literal compared against a
    numeric value is read as a number when it parses as one (so a shorthand
    ``{"year": "2023"}`` matches integer years).
    """
    if tree is None:
        return lambda rec: True
    if "and" in tree:
        parts = [compile_filter(c) for c in tree["and"]]
        return lambda rec: all(p(rec) for p in parts)
    if "or" in tree:
        parts = [compile_filter(c) for c in tree["or"]]
        return lambda rec: any(p(rec) for p in parts)
    if "not" in tree:
        inner = compile_filter(tree["not"])
        return lambda rec: not inner(rec)
    return _compile_leaf(tree)


def evaluate(tree: Optional[Tree], attrs: Mapping[str, Any]) -> bool:
    return compile_filter(tree)(attrs)


def _literal(v: Any) -> str:
    return json.dumps(v, ensure_ascii=False)


def summary(tree: Optional[Tree]) -> str:
    """Compact, deterministic rendering for explain output."""
    if tree is None:
        return "true"
    if "and" in tree or "or" in tree:
        key = "and" if "and" in tree else "or"
        return "(" + f" {key.upper()} ".join(summary(c) for c in tree[key]) + ")"
    if "not" in tree:
        return f"NOT {summary(tree['not'])}"
    attr, op = tree["attribute"], tree["op"]
    if "other" in tree:
        return f"{attr} {op} {tree['other']}"
    if op == "in":
        if "ref" in tree:
            return f"{attr} IN {tree['ref']}.{tree['ref_attribute']}"
        return f"{attr} IN <{len(tree['values'])} values>"
    return f"{attr} {op} {_literal(tree['value'])}"


def copy_tree(tree: Optional[Tree]) -> Optional[Tree]:
    return copy.deepcopy(tree)


def string_literals(tree: Optional[Tree]) -> List[str]:
    """Attribute names and text literals appearing in a tree, in order."""
    if tree is None:
        return []
    if "and" in tree or "or" in tree:
        out: List[str] = []
        for c in tree.get("and", tree.get("or")):
            out.extend(string_literals(c))
        return out
    if "not" in tree:
        return string_literals(tree["not"])
    out = [tree["attribute"]]
    if "other" in tree:
        out.append(tree["other"])
    elif isinstance(tree.get("value"), (str, int, float)) and not isinstance(tree.get("value"), bool):
        out.append(str(tree["value"]))
    return out


def columns_of(trees: Sequence[Optional[Tree]]) -> set:
    out = set()
    for t in trees:
        out |= refs(t)
    return out
