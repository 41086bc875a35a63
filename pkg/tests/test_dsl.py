import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmlake.dsl import OperatorStatement, ProgramIR, parse_program, print_program, validate_program
from mmlake.errors import LakeError, ProgramSyntaxError, ValidationError

from conftest import read_program


def test_figure4_shape(fig4_ir):
    assert len(fig4_ir.statements) == 2
    assert fig4_ir.outputs == ("text_results",)
    lookup = fig4_ir.statement("text_results")
    assert lookup.kind == "LookUp" and lookup.mode == "prompt" and lookup.inputs == ("table_results",)
    assert fig4_ir.statement("table_results").pred == {"attribute": "name", "table": "Team"}


def test_figure5_shape(fig5_ir):
    assert len(fig5_ir.statements) == 2
    join = fig5_ir.statement("join_results")
    assert join.src is None
    assert join.pred["filter"] == {"year": "2023"}
    # the quoted list literal is read as a list
    assert fig5_ir.statement("project_results").pred == {"columns": ["team", "score"]}


def test_empty_predicate():
    ir = parse_program('x = Selection(input = lake, src = "table", pred = {})\nOutput(x)')
    assert len(ir.statements) == 1 and ir.statements[0].pred == {}
    assert parse_program(print_program(ir)) == ir


def test_figure4_round_trip(fig4_ir):
    assert parse_program(print_program(fig4_ir)) == fig4_ir


def test_figures_validate(fig4_ir, fig5_ir):
    assert validate_program(fig4_ir) == []
    assert validate_program(fig5_ir) == []


def test_dangling_reference():
    ir = parse_program("x = Selection(input = ghost, pred = {})\nOutput(x)", validate=False)
    diags = validate_program(ir)
    assert [d.rule for d in diags] == ["dangling-reference"]


def test_unknown_key():
    ir = parse_program("x = Selection(input = lake, pred = {'colour': 'red'})\nOutput(x)", validate=False)
    assert [d.rule for d in validate_program(ir)] == ["unknown-key"]


@pytest.mark.parametrize("text, rule", [
    ("x = Selection(input = lake, pred = {})", "no-output"),
    ("x = Selection(input = lake, pred = {})\nOutput(y)", "dangling-output"),
    ("x = Selection(input = lake, pred = {})\nx = Selection(input = lake, pred = {})\nOutput(x)", "duplicate-binding"),
    ("x = Frobnicate(input = lake, pred = {})\nOutput(x)", "unknown-operator"),
    ("x = Selection(input = [lake, lake], pred = {})\nOutput(x)", "arity"),
    ("x = Ranking(input = lake, pred = {'by': 'a', 'k': 0})\nOutput(x)", "malformed-predicate"),
    ("x = Selection(input = lake, pred = {})\nOutput(x)\nOutput(x)", "duplicate-output"),
    ("x = Join(input = lake, pred = {'cond': 'a', 'cond_type': 'fuzzy'})\nOutput(x)", "bad-cond-type"),
])
def test_diagnostic_rules(text, rule):
    ir = parse_program(text, validate=False)
    assert rule in {d.rule for d in validate_program(ir)}


def test_validation_error_lists_every_problem():
    text = "x = Selection(input = ghost, pred = {'colour': 1})\nOutput(x)"
    with pytest.raises(ValidationError) as info:
        parse_program(text)
    assert len(info.value.diagnostics) == 2


@pytest.mark.parametrize("text", ["x = (", "x = Selection(input = lake, pred = {'a': })", "Output(", "= 3", "x = Selection(input = lake, pred = {'a': 'b)"])
def test_syntax_errors_carry_position(text):
    with pytest.raises(ProgramSyntaxError) as info:
        parse_program(text)
    assert info.value.line >= 1 and info.value.column >= 1


def test_statement_order_is_textual():
    ir = parse_program(read_program("ex33.mmq"))
    assert [s.name for s in ir.statements] == ["champions", "paths", "pairs", "in_ma", "colleges"]


# -- properties ----------------------------------------------------------------

names = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True).filter(lambda s: s != "lake")
scalars = st.one_of(
    st.integers(-1000, 1000),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(max_size=10),
    st.booleans(),
    st.none(),
)
leaf = st.builds(lambda a, op, v: {"attribute": a, "op": op, "value": v},
                 names, st.sampled_from(["=", "!=", "<", ">=", "contains"]), scalars)
filters = st.recursive(leaf, lambda kids: st.lists(kids, min_size=1, max_size=3).map(lambda x: {"and": x}),
                       max_leaves=4)


@st.composite
def statements(draw, idx, bound):
    kind = draw(st.sampled_from(["Selection", "Projection", "Ranking", "Aggregation", "LookUp", "Join", "Conjunction"]))
    pool = ["lake"] + bound
    single = (draw(st.sampled_from(pool)),)
    mode = None
    src = draw(st.one_of(st.none(), st.sampled_from(["table", "graph", "text", "players"])))
    if kind == "Selection":
        pred = draw(st.one_of(st.just({}), filters.map(lambda f: {"filter": f})))
    elif kind == "Projection":
        pred = {"columns": draw(st.lists(names, min_size=1, max_size=3, unique=True))}
    elif kind == "Ranking":
        pred = {"by": draw(names), "order": draw(st.sampled_from(["asc", "desc"])), "k": draw(st.integers(1, 9))}
    elif kind == "Aggregation":
        pred = {"func": "count", "group_by": draw(names)}
    elif kind == "LookUp":
        mode = draw(st.sampled_from(["keyword", "similarity", "prompt"]))
        pred = {"query": draw(st.text(min_size=1, max_size=20))}
    else:
        single = tuple(draw(st.lists(st.sampled_from(pool), min_size=2, max_size=2)))
        pred = {"mode": "union"} if kind == "Conjunction" else {"cond": draw(names), "cond_type": "equality"}
    return OperatorStatement(f"s{idx}", kind, single, pred, src, mode)


@st.composite
def programs(draw):
    n = draw(st.integers(1, 5))
    stmts = []
    for i in range(n):
        stmts.append(draw(statements(i, [s.name for s in stmts])))
    outs = draw(st.lists(st.sampled_from([s.name for s in stmts]), min_size=1, max_size=2, unique=True))
    path = draw(st.one_of(st.none(), st.text(max_size=10)))
    return ProgramIR(tuple(stmts), tuple(outs), path, "lake")


@settings(max_examples=100)
@given(programs())
def test_round_trip(ir):
    assert validate_program(ir) == []
    once = parse_program(print_program(ir))
    assert once == ir
    assert parse_program(print_program(once)) == once


@given(st.text(max_size=60))
def test_parsing_is_total(text):
    try:
        parse_program(text)
    except LakeError:
        pass


@given(programs(), st.integers(0, 200))
def test_truncated_programs_never_crash(ir, cut):
    text = print_program(ir)
    try:
        parse_program(text[:cut])
    except LakeError:
        pass
