"""Textual program format (``.mmq``) and its validated IR.

Grammar::

    program   := [header] (statement | output)*
    header    := NAME "=" "new" NAME "(" (STRING | NAME) ")" [";"]
    statement := NAME "=" OPNAME "(" arg ("," arg)* ")" [";"]
    arg       := "input" "=" (NAME | "[" NAME ("," NAME)* "]")
               | "src" "=" STRING | "mode" "=" STRING | "pred" "=" object
    output    := "Output" "(" NAME ")" [";"]

Predicate objects are JSON with a few relaxations: single-quoted strings,
bare-word keys, Python's True/False/None, and a single-quoted bracketed list
(``'['team','score']'``) read as a list.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import predicates
from .errors import LakeError, ProgramSyntaxError, ValidationError

PRIMITIVES = ("Selection", "Projection", "Join", "Aggregation", "LookUp", "Ranking", "Conjunction")
TWO_INPUT = ("Join", "Conjunction")
STATEMENT_ARGS = ("input", "src", "mode", "pred")
COND_TYPES = ("natural language", "equality")
AGG_FUNCS = ("min", "max", "avg", "sum", "count")
LOOKUP_MODES = ("keyword", "similarity", "prompt")
SET_MODES = ("union", "intersect", "except")
JOIN_TYPES = ("inner", "left")

PRED_KEYS = {
    "Selection": {"attribute", "table", "label", "filter", "and", "or", "not", "op", "value", "other"},
    "Projection": {"columns"},
    "Join": {"cond", "cond_type", "filter", "type"},
    "Aggregation": {"func", "attribute", "group_by"},
    "LookUp": {"query", "mode", "k"},
    "Ranking": {"by", "order", "k"},
    "Conjunction": {"mode"},
}


@dataclass(frozen=True)
class OperatorStatement:
    name: str
    kind: str
    inputs: Tuple[str, ...]
    pred: Dict[str, Any] = field(default_factory=dict)
    src: Optional[str] = None
    mode: Optional[str] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ProgramIR:
    statements: Tuple[OperatorStatement, ...]
    outputs: Tuple[str, ...]
    lake_path: Optional[str] = None
    lake_name: str = "lake"

    def statement(self, name: str) -> OperatorStatement:
        for s in self.statements:
            if s.name == name:
                return s
        raise KeyError(name)

    def is_lake(self, name: str) -> bool:
        return name == self.lake_name


@dataclass(frozen=True)
class Diagnostic:
    statement: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.statement}: {self.rule}: {self.message}"


# -- lexer -------------------------------------------------------------------

_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+"),
    ("COMMENT", r"(?:\#|//)[^\n]*"),
    ("NUMBER", r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?"),
    ("NAME", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("PUNCT", r"[=(),;\[\]{}:]"),
]
_MASTER = re.compile("|".join(f"(?P<{n}>{p})" for n, p in _TOKEN_SPEC))
_ITEM = r"""(?:'[^'\\\n]*'|"[^"\\\n]*"|-?\d+(?:\.\d+)?)"""
_QUOTED_LIST = re.compile(rf"'\[\s*(?:{_ITEM}(?:\s*,\s*{_ITEM})*)?\s*\]'")


@dataclass
class Token:
    type: str
    value: Any
    line: int
    col: int


def _position(text: str, pos: int) -> Tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _read_string(text: str, pos: int) -> Tuple[str, int]:
    quote = text[pos]
    i = pos + 1
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == quote:
            break
        i += 1
    else:
        raise ProgramSyntaxError("unterminated string", *_position(text, pos))
    body = text[pos + 1:i]
    if quote == "'":
        body = re.sub(r"\\'", "'", body)
        body = re.sub(r'(?<!\\)((?:\\\\)*)"', r'\1\\"', body)
    try:
        value = json.loads('"' + body + '"', strict=False)
    except json.JSONDecodeError as exc:
        raise ProgramSyntaxError(f"bad string literal: {exc.msg}", *_position(text, pos)) from None
    return value, i + 1


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        line, col = _position(text, pos)
        if ch == "'":
            m = _QUOTED_LIST.match(text, pos)
            if m:
                inner = tokenize(m.group(0)[1:-1])
                items = [t.value for t in inner if t.type in ("STRING", "NUMBER")]
                tokens.append(Token("LIST", items, line, col))
                pos = m.end()
                continue
        if ch in "'\"":
            value, pos = _read_string(text, pos)
            tokens.append(Token("STRING", value, line, col))
            continue
        m = _MASTER.match(text, pos)
        if not m:
            raise ProgramSyntaxError(f"unexpected character {ch!r}", line, col)
        kind = m.lastgroup
        raw = m.group(0)
        pos = m.end()
        if kind in ("WS", "COMMENT"):
            continue
        if kind == "NUMBER":
            value: Any = float(raw) if any(c in raw for c in ".eE") else int(raw)
        else:
            value = raw
        tokens.append(Token(kind, value, line, col))
    tokens.append(Token("EOF", None, *_position(text, len(text))))
    return tokens


# -- parser ------------------------------------------------------------------

_LITERAL_NAMES = {"true": True, "false": False, "null": None, "True": True, "False": False, "None": None}


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        return ProgramSyntaxError(message, tok.line, tok.col)

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def at(self, type_: str, value: Any = None) -> bool:
        tok = self.tok
        return tok.type == type_ and (value is None or tok.value == value)

    def expect(self, type_: str, value: Any = None) -> Token:
        if not self.at(type_, value):
            want = repr(value) if value is not None else type_.lower()
            got = "end of input" if self.tok.type == "EOF" else repr(self.tok.value)
            raise self.error(f"expected {want}, got {got}")
        return self.advance()

    def skip_semicolon(self):
        if self.at("PUNCT", ";"):
            self.advance()

    def program(self) -> ProgramIR:
        lake_path = None
        lake_name = "lake"
        statements: List[OperatorStatement] = []
        outputs: List[str] = []
        if self._is_header():
            lake_name, lake_path = self.header()
        while not self.at("EOF"):
            if self.at("NAME", "Output"):
                outputs.append(self.output())
            else:
                statements.append(self.statement())
        return ProgramIR(tuple(statements), tuple(outputs), lake_path, lake_name)

    def _is_header(self) -> bool:
        t = self.tokens
        return (
            len(t) > 3 and t[0].type == "NAME" and t[1].value == "="
            and t[2].type == "NAME" and t[2].value == "new"
        )

    def header(self) -> Tuple[str, str]:
        name = self.expect("NAME").value
        self.expect("PUNCT", "=")
        self.expect("NAME", "new")
        self.expect("NAME")
        self.expect("PUNCT", "(")
        if self.at("STRING") or self.at("NAME"):
            path = self.advance().value
        else:
            raise self.error("expected a data lake path")
        self.expect("PUNCT", ")")
        self.skip_semicolon()
        return name, path

    def output(self) -> str:
        self.expect("NAME", "Output")
        self.expect("PUNCT", "(")
        name = self.expect("NAME").value
        self.expect("PUNCT", ")")
        self.skip_semicolon()
        return name

    def statement(self) -> OperatorStatement:
        name_tok = self.expect("NAME")
        self.expect("PUNCT", "=")
        kind = self.expect("NAME").value
        self.expect("PUNCT", "(")
        args: Dict[str, Any] = {}
        while True:
            key_tok = self.expect("NAME")
            key = key_tok.value
            if key not in STATEMENT_ARGS:
                raise self.error(f"unknown argument {key!r}", key_tok)
            if key in args:
                raise self.error(f"duplicate argument {key!r}", key_tok)
            self.expect("PUNCT", "=")
            if key == "input":
                args[key] = self.input_expr()
            elif key == "pred":
                args[key] = self.value()
                if not isinstance(args[key], dict):
                    raise self.error("pred must be an object", key_tok)
            else:
                args[key] = self.expect("STRING").value
            if self.at("PUNCT", ","):
                self.advance()
                if self.at("PUNCT", ")"):
                    break
                continue
            break
        self.expect("PUNCT", ")")
        self.skip_semicolon()
        if "input" not in args:
            raise self.error("missing 'input' argument", name_tok)
        return OperatorStatement(
            name=name_tok.value, kind=kind, inputs=args["input"], pred=args.get("pred", {}),
            src=args.get("src"), mode=args.get("mode"), line=name_tok.line,
        )

    def input_expr(self) -> Tuple[str, ...]:
        if self.at("PUNCT", "["):
            self.advance()
            names = [self.expect("NAME").value]
            while self.at("PUNCT", ","):
                self.advance()
                names.append(self.expect("NAME").value)
            self.expect("PUNCT", "]")
            return tuple(names)
        return (self.expect("NAME").value,)

    def value(self) -> Any:
        tok = self.tok
        if tok.type in ("STRING", "NUMBER", "LIST"):
            return self.advance().value
        if tok.type == "NAME" and tok.value in _LITERAL_NAMES:
            self.advance()
            return _LITERAL_NAMES[tok.value]
        if self.at("PUNCT", "{"):
            return self.object()
        if self.at("PUNCT", "["):
            return self.array()
        got = "end of input" if tok.type == "EOF" else repr(tok.value)
        raise self.error(f"expected a value, got {got}")

    def object(self) -> Dict[str, Any]:
        self.expect("PUNCT", "{")
        out: Dict[str, Any] = {}
        while not self.at("PUNCT", "}"):
            key_tok = self.tok
            if key_tok.type in ("STRING", "NAME"):
                key = self.advance().value
            else:
                raise self.error("expected an object key")
            if key in out:
                raise self.error(f"duplicate key {key!r}", key_tok)
            self.expect("PUNCT", ":")
            out[key] = self.value()
            if not self.at("PUNCT", ","):
                break
            self.advance()
        self.expect("PUNCT", "}")
        return out

    def array(self) -> List[Any]:
        self.expect("PUNCT", "[")
        out = []
        while not self.at("PUNCT", "]"):
            out.append(self.value())
            if not self.at("PUNCT", ","):
                break
            self.advance()
        self.expect("PUNCT", "]")
        return out


def parse_program(text: str, *, validate: bool = True, operators=None) -> ProgramIR:
    """Parse program text into an IR.

    Raises ProgramSyntaxError with line/column on malformed text and, when
    ``validate`` is set, ValidationError carrying every diagnostic.
    """
    try:
        ir = _Parser(text).program()
    except RecursionError:
        raise ProgramSyntaxError("literal nested too deeply", 1, 1) from None
    if validate:
        diags = validate_program(ir, operators=operators)
        if diags:
            raise ValidationError(diags)
    return ir


# -- printer -----------------------------------------------------------------

def _str(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def print_program(ir: ProgramIR) -> str:
    lines = []
    if ir.lake_path is not None:
        lines.append(f"{ir.lake_name} = new DataLake({_str(ir.lake_path)});")
    for s in ir.statements:
        inputs = s.inputs[0] if len(s.inputs) == 1 else "[" + ", ".join(s.inputs) + "]"
        args = [f"input = {inputs}"]
        if s.src is not None:
            args.append(f"src = {_str(s.src)}")
        if s.mode is not None:
            args.append(f"mode = {_str(s.mode)}")
        args.append("pred = " + json.dumps(s.pred, ensure_ascii=False))
        lines.append(f"{s.name} = {s.kind}({', '.join(args)});")
    for name in ir.outputs:
        lines.append(f"Output({name});")
    return "\n".join(lines) + "\n"


# -- validation --------------------------------------------------------------

def _str_list(value: Any) -> bool:
    return isinstance(value, list) and bool(value) and all(isinstance(v, str) and v for v in value)


def _positive_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 1


def selection_parts(pred: Dict[str, Any]) -> Tuple[Optional[List[str]], Optional[dict]]:
    """Split a Selection predicate into (projection columns, filter tree)."""
    tree_keys = {k: pred[k] for k in ("and", "or", "not") if k in pred}
    columns = None
    if "op" in pred:
        tree_keys.update({k: pred[k] for k in ("attribute", "op", "value", "other") if k in pred})
    elif "attribute" in pred:
        attr = pred["attribute"]
        columns = [attr] if isinstance(attr, str) else list(attr)
    parts = [predicates.normalize(pred.get("filter"))]
    if tree_keys:
        parts.append(predicates.normalize(tree_keys))
    return columns, predicates.conjoin(parts)


def _check_filter(raw, where: str, out: List[str]):
    try:
        predicates.normalize(raw)
    except predicates.FilterSyntaxError as exc:
        out.append(f"malformed {where}: {exc}")


def pred_problems(kind: str, pred: Dict[str, Any], mode: Optional[str], operators=None) -> List[Tuple[str, str]]:
    """Return (rule, message) pairs for a statement's predicate."""
    problems: List[Tuple[str, str]] = []
    if kind in PRED_KEYS:
        allowed = PRED_KEYS[kind]
    else:
        allowed = set(operators.get(kind).pred_keys) if operators and kind in operators else set(pred)
    for key in pred:
        if key not in allowed:
            problems.append(("unknown-key", f"key {key!r} is not allowed for {kind}"))
    msgs: List[str] = []
    if kind == "Selection":
        if "op" not in pred and "attribute" in pred:
            attr = pred["attribute"]
            if not (isinstance(attr, str) and attr) and not _str_list(attr):
                msgs.append("'attribute' must name one or more attributes")
        for key in ("table", "label"):
            if key in pred and not (isinstance(pred[key], str) and pred[key]):
                msgs.append(f"'{key}' must be a non-empty string")
        if "value" in pred and "op" not in pred:
            msgs.append("'value' requires 'op'")
        if "filter" in pred:
            _check_filter(pred["filter"], "filter", msgs)
        tree_keys = {k: pred[k] for k in ("and", "or", "not", "attribute", "op", "value", "other")
                     if k in pred and (k not in ("attribute",) or "op" in pred)}
        if tree_keys:
            _check_filter(tree_keys, "condition", msgs)
    elif kind == "Projection":
        if not _str_list(pred.get("columns")):
            msgs.append("'columns' must be a non-empty list of attribute names")
    elif kind == "Join":
        cond = pred.get("cond")
        cond_type = pred.get("cond_type")
        if cond_type is not None and cond_type not in COND_TYPES:
            problems.append(("bad-cond-type", f"cond_type must be one of {list(COND_TYPES)}, got {cond_type!r}"))
        elif cond is None and cond_type is not None:
            msgs.append("cond_type given without cond")
        elif cond_type == "equality" or isinstance(cond, list):
            if not ((isinstance(cond, str) and cond.strip()) or _str_list(cond)):
                msgs.append("equality cond must be an attribute name, 'a = b', or a list of those")
        elif isinstance(cond, str):
            if not cond.strip():
                msgs.append("natural-language cond is empty")
        elif isinstance(cond, dict):
            _check_filter(cond, "cond", msgs)
        elif cond is not None:
            msgs.append("cond must be text, a list of keys, or a condition tree")
        if "filter" in pred:
            _check_filter(pred["filter"], "filter", msgs)
        if "type" in pred and pred["type"] not in JOIN_TYPES:
            msgs.append(f"join type must be one of {list(JOIN_TYPES)}")
    elif kind == "Aggregation":
        func = pred.get("func")
        if func not in AGG_FUNCS:
            msgs.append(f"'func' must be one of {list(AGG_FUNCS)}")
        if "attribute" in pred and not (isinstance(pred["attribute"], str) and pred["attribute"]):
            msgs.append("'attribute' must be an attribute name")
        if func != "count" and "attribute" not in pred:
            msgs.append(f"{func} needs an 'attribute'")
        gb = pred.get("group_by")
        if gb is not None and not ((isinstance(gb, str) and gb) or _str_list(gb)):
            msgs.append("'group_by' must be an attribute name or list of names")
    elif kind == "LookUp":
        if not isinstance(pred.get("query"), str):
            msgs.append("'query' must be text")
        pm = pred.get("mode")
        if pm is not None and mode is not None and pm != mode:
            msgs.append(f"mode given twice with different values ({mode!r}, {pm!r})")
        effective = mode if mode is not None else pm
        if effective is not None and effective not in LOOKUP_MODES:
            msgs.append(f"mode must be one of {list(LOOKUP_MODES)}")
        if "k" in pred and not _positive_int(pred["k"]):
            msgs.append("'k' must be a positive integer")
    elif kind == "Ranking":
        if not (isinstance(pred.get("by"), str) and pred["by"]):
            msgs.append("'by' must name an attribute")
        if pred.get("order", "desc") not in ("asc", "desc"):
            msgs.append("'order' must be 'asc' or 'desc'")
        if "k" in pred and not _positive_int(pred["k"]):
            msgs.append("'k' must be a positive integer")
    elif kind == "Conjunction":
        if pred.get("mode") not in SET_MODES:
            msgs.append(f"'mode' must be one of {list(SET_MODES)}")
    elif operators and kind in operators:
        msgs.extend(operators.get(kind).validate_pred(pred))
    problems.extend(("malformed-predicate", m) for m in msgs)
    return problems


def validate_program(ir: ProgramIR, *, operators=None) -> List[Diagnostic]:
    """Check reference, arity and predicate rules; empty list means valid."""
    from .operators import default_registry

    operators = operators if operators is not None else default_registry()
    diags: List[Diagnostic] = []
    bound: set = set()
    for s in ir.statements:
        def add(rule, message, _s=s):
            diags.append(Diagnostic(_s.name, rule, message))

        if s.name == ir.lake_name:
            add("reserved-name", f"{s.name!r} is the lake handle")
        elif s.name in bound:
            add("duplicate-binding", f"{s.name!r} is already bound")
        known = s.kind in PRIMITIVES or s.kind in operators
        if not known:
            add("unknown-operator", f"unknown operator {s.kind!r}")
        for name in s.inputs:
            if not ir.is_lake(name) and name not in bound:
                add("dangling-reference", f"input {name!r} is not bound before use")
        max_inputs = 2 if s.kind in TWO_INPUT else 1
        if not 1 <= len(s.inputs) <= max_inputs:
            add("arity", f"{s.kind} takes {'one or two inputs' if max_inputs == 2 else 'exactly one input'}, got {len(s.inputs)}")
        if s.mode is not None and s.kind != "LookUp":
            add("unexpected-mode", "mode is only valid for LookUp")
        if s.src is not None and not s.src.strip():
            add("bad-src", "src must be a modality or source id")
        if known:
            for rule, message in pred_problems(s.kind, s.pred, s.mode, operators):
                add(rule, message)
        bound.add(s.name)
    if not ir.outputs:
        diags.append(Diagnostic("<program>", "no-output", "program has no Output"))
    for i, name in enumerate(ir.outputs):
        if name in ir.outputs[:i]:
            diags.append(Diagnostic("<program>", "duplicate-output", f"Output({name}) appears twice"))
        if name not in bound:
            diags.append(Diagnostic("<program>", "dangling-output", f"Output({name}) names an unbound binding"))
    return diags


def check(ir: ProgramIR, operators=None) -> ProgramIR:
    diags = validate_program(ir, operators=operators)
    if diags:
        raise ValidationError(diags)
    return ir


def load_program(path) -> ProgramIR:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


__all__ = [
    "Diagnostic", "OperatorStatement", "ProgramIR", "parse_program", "print_program",
    "validate_program", "selection_parts", "LakeError",
]
