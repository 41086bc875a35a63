import pytest

import oracle as o
from mmlake.dsl import parse_program
from mmlake.errors import KindMismatch, UnsupportedOperatorForModality
from mmlake.executor import compile_physical, execute, plan_program, run_program
from mmlake.lake import in_memory_lake
from mmlake.relational import make_table

from progen import random_program


def dag_for(ir, lake, optimized=True):
    _, plan = plan_program(ir, lake, optimized=optimized)
    return compile_physical(plan, lake)


def test_figure4_fragments(fig4_ir, shared_lake):
    dag = dag_for(fig4_ir, shared_lake)
    frags = dag.fragments
    assert {f.backend for f in frags.values()} == {"relational", "text"}
    assert frags["text_results"].inputs == ("table_results",)
    assert frags["text_results"].node.context


def test_single_scan_single_fragment(shared_lake):
    dag = dag_for(parse_program('x = Selection(input = lake, src = "teams", pred = {})\nOutput(x)'), shared_lake)
    assert len(dag) == 1
    assert dag.fragments["x"].call == "scan_table"


def test_example_semijoin_wiring(ex33_ir, shared_lake):
    dag = dag_for(ex33_ir, shared_lake)
    paths = dag.fragments["paths"]
    assert paths.backend == "graph" and paths.deps == ("champions",)
    order = dag.order()
    assert order.index("champions") < order.index("paths")
    assert dag.fragments["champions"].backend == "relational"


def test_figure5_result(fig5_ir, shared_lake):
    res = run_program(fig5_ir, shared_lake)
    rows = [r for r in o.table("games") if r["year"] == 2023]
    want = [{"team": a["team"], "score": a["score"]} for a in rows for b in rows
            if a["location"] == b["location"] and a["game_id"] != b["game_id"]]
    assert o.engine_multiset(res.answer) == o.multiset(want)


def test_empty_sources():
    lake = in_memory_lake(tables={"e": make_table("Empty", "e", ["a", "b"], [])})
    text = ('x = Selection(input = lake, src = "e", pred = {"filter": {"a": 1}})\n'
            'y = Aggregation(input = x, pred = {"func": "count", "group_by": "b"})\nOutput(y)')
    res = run_program(parse_program(text), lake)
    assert len(res.answer) == 0 and res.answer.schema == ("b", "count")


def test_errors_carry_fragment_ref(shared_lake):
    text = ('s = Selection(input = lake, src = "teams", pred = {})\n'
            'a = Aggregation(input = s, pred = {"func": "sum", "attribute": "city"})\nOutput(a)')
    with pytest.raises(KindMismatch) as info:
        run_program(parse_program(text), shared_lake)
    assert info.value.node == "a"


def test_aggregation_over_documents_unsupported(shared_lake):
    text = 'a = Aggregation(input = lake, src = "nba_docs", pred = {"func": "count"})\nOutput(a)'
    with pytest.raises(UnsupportedOperatorForModality):
        run_program(parse_program(text), shared_lake)


def test_every_fragment_runs_once(ex33_ir, shared_lake):
    dag = dag_for(ex33_ir, shared_lake)
    res = execute(dag, shared_lake)
    assert sorted(res.order) == sorted(dag.fragments)


@pytest.mark.parametrize("seed", range(10))
def test_parallel_matches_sequential(seed, shared_lake):
    ir = parse_program(random_program(1000 + seed))
    dag = dag_for(ir, shared_lake)
    seq = execute(dag, shared_lake)
    par = execute(dag, shared_lake, parallel=True, workers=4, seed=seed)
    assert seq.outputs.keys() == par.outputs.keys()
    for name in seq.outputs:
        assert seq.outputs[name].rows() == par.outputs[name].rows()
