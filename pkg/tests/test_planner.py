import pytest

from mmlake import predicates
from mmlake.dsl import parse_program
from mmlake.errors import UnknownAttribute
from mmlake.executor import plan_program
from mmlake.lake import in_memory_lake
from mmlake.planner import (
    MAX_PASSES,
    CostModel,
    SchemaOracle,
    build_logical_plan,
    estimate,
    explain,
    optimize,
    tree_lines,
)
from mmlake.planner.build import check_node
from mmlake.relational import make_table

from progen import random_program


def plan_of(text, lake, optimized=False):
    naive, opt = plan_program(parse_program(text), lake)
    return opt if optimized else naive


def strip(node):
    from dataclasses import replace
    return replace(node, est=None, children=tuple(strip(c) for c in node.children))


def test_figure4_tree(fig4_ir, shared_lake):
    plan = build_logical_plan(fig4_ir, shared_lake)
    (root,) = plan.roots
    assert root.kind == "LookUp" and root.context
    (child,) = root.children
    assert child.kind == "Selection" and child.source == "teams"


def test_figure5_tree(fig5_ir, shared_lake):
    (root,) = build_logical_plan(fig5_ir, shared_lake).roots
    assert root.kind == "Projection"
    join = root.children[0]
    assert join.kind == "Join" and join.join.self_join
    assert [c.source for c in join.children] == ["games", "games"]
    assert join.join.keys == (("location", "location"),)


def test_two_outputs_make_a_forest(shared_lake):
    text = ('a = Selection(input = lake, src = "teams", pred = {})\n'
            'b = Selection(input = lake, src = "games", pred = {})\nOutput(a)\nOutput(b)\n')
    plan = plan_of(text, shared_lake)
    assert plan.names == ("a", "b") and len(plan.roots) == 2


def test_shared_statement_is_duplicated(shared_lake):
    text = ('s = Selection(input = lake, src = "teams", pred = {})\n'
            'a = Projection(input = s, pred = {"columns": ["name"]})\n'
            'b = Projection(input = s, pred = {"columns": ["city"]})\nOutput(a)\nOutput(b)\n')
    nids = [n.nid for n in plan_of(text, shared_lake).nodes()]
    assert len(nids) == len(set(nids))


def test_example_optimization(ex33_ir, shared_lake):
    _, plan = plan_program(ex33_ir, shared_lake)
    text = explain(plan)
    assert "R1:" in text and "R3:" in text
    paths = plan.find("paths")
    steps = paths.pred["steps"]
    assert steps[2]["filter"] == {"attribute": "state", "op": "=", "value": "Massachusetts"}
    assert predicates.memberships(steps[0]["filter"])[0]["ref"] == "champions"
    join = plan.find("pairs")
    assert join.join.semijoin == "left"


def test_single_scan_is_fixpoint(shared_lake):
    text = 'x = Selection(input = lake, src = "teams", pred = {"filter": {"name": "Bulls"}})\nOutput(x)\n'
    naive, opt = plan_program(parse_program(text), shared_lake)
    stats = {}
    optimize(naive, CostModel.from_lake(shared_lake), shared_lake, stats=stats)
    assert stats["passes"] == 1
    assert strip(opt.roots[0]) == strip(naive.roots[0])


def test_figure5_year_pushed_to_both_scans(fig5_ir, shared_lake):
    _, plan = plan_program(fig5_ir, shared_lake)
    scans = [n for n in plan.nodes() if n.scan]
    assert len(scans) == 2
    for s in scans:
        assert {"attribute": "year", "op": "=", "value": "2023"} in predicates.conjuncts(s.filter)
    assert plan.find("join_results").filter is None


@pytest.fixture(scope="module")
def small_lake():
    t3 = make_table("Three", "three", ["k", "v"], [["1", "a"], ["2", "b"], ["3", "c"]])
    t4 = make_table("Four", "four", ["k", "w"], [["1", "x"], ["2", "y"], ["3", "z"], ["4", "q"]])
    return in_memory_lake(tables={"three": t3, "four": t4})


def test_cost_examples(small_lake):
    cost = CostModel.from_lake(small_lake)
    scan = plan_of('x = Selection(input = lake, src = "three", pred = {})\nOutput(x)', small_lake)
    assert estimate(scan, cost).roots[0].est == pytest.approx(3.0)
    eq = plan_of('x = Selection(input = lake, src = "three", pred = {"filter": {"k": 1}})\nOutput(x)', small_lake)
    assert estimate(eq, cost).roots[0].est == pytest.approx(0.3)
    join = plan_of('a = Selection(input = lake, src = "three", pred = {})\n'
                   'b = Selection(input = lake, src = "four", pred = {})\n'
                   'j = Join(input = [a, b], pred = {"cond": "k = k", "cond_type": "equality"})\nOutput(j)', small_lake)
    assert estimate(join, cost).roots[0].est == pytest.approx(1.2)


def test_selectivity_constants():
    c = CostModel()
    leaf = lambda op: {"attribute": "a", "op": op, "value": 1}
    assert c.selectivity(leaf("=")) == 0.1
    assert c.selectivity(leaf("<")) == 0.3
    assert c.selectivity(leaf("!=")) == 0.9
    assert c.selectivity({"not": leaf("=")}) == pytest.approx(0.9)
    assert c.selectivity({"or": [leaf("<")] * 5}) == 1.0


def test_figure4_two_line_tree(fig4_ir, shared_lake):
    _, plan = plan_program(fig4_ir, shared_lake)
    lines = tree_lines(plan)
    assert len(lines) == 2
    assert lines[0].strip().startswith("LookUp") and lines[1].strip().startswith("Selection")


def test_explain_is_deterministic(ex33_ir, shared_lake):
    _, a = plan_program(ex33_ir, shared_lake)
    _, b = plan_program(ex33_ir, shared_lake)
    assert explain(a) == explain(b)


def test_unknown_attribute_names_node(shared_lake):
    text = 'x = Selection(input = lake, src = "teams", pred = {"filter": {"colour": "red"}})\nOutput(x)'
    with pytest.raises(UnknownAttribute) as info:
        build_logical_plan(parse_program(text), shared_lake)
    assert info.value.node == "x"


# -- properties ----------------------------------------------------------------------

def _programs(nba_dir):
    import os
    texts = [random_program(s) for s in range(40)]
    for name in ("fig4.mmq", "fig5.mmq", "ex33.mmq"):
        with open(os.path.join(nba_dir, name), encoding="utf-8") as fh:
            texts.append(fh.read())
    return texts


def test_fixpoint_within_pass_limit(nba_dir, shared_lake):
    cost = CostModel.from_lake(shared_lake)
    for text in _programs(nba_dir):
        naive = estimate(build_logical_plan(parse_program(text), shared_lake), cost)
        stats = {}
        optimize(naive, cost, shared_lake, stats=stats)
        assert stats["passes"] <= MAX_PASSES
        assert stats["passes"] < MAX_PASSES, "optimizer hit the pass cap without converging"


def test_pushdown_is_schema_sound(nba_dir, shared_lake):
    for text in _programs(nba_dir):
        _, plan = plan_program(parse_program(text), shared_lake)
        oracle = SchemaOracle(shared_lake)
        for node in plan.nodes():
            check_node(node, oracle)


CROSS_MODAL = [
    None,  # filled with the example program
    'a = Selection(input = lake, src = "players", pred = {"filter": {"position": "PG"}})\n'
    'g = Selection(input = lake, src = "nba_graph", pred = {"label": "Player"})\n'
    'j = Join(input = [a, g], pred = {"cond": "name = name", "cond_type": "equality"})\nOutput(j)\n',
    'g = Selection(input = lake, src = "nba_graph", pred = {"label": "Team"})\n'
    'a = Selection(input = lake, src = "players", pred = {})\n'
    'j = Join(input = [g, a], pred = {"cond": "name = team", "cond_type": "equality"})\nOutput(j)\n',
]


@pytest.mark.parametrize("idx", range(len(CROSS_MODAL)))
@pytest.mark.parametrize("factor", [0.001, 0.5, 7.0, 1e6])
def test_r3_choice_stable_under_scaling(idx, factor, ex33_ir, shared_lake):
    ir = ex33_ir if CROSS_MODAL[idx] is None else parse_program(CROSS_MODAL[idx])
    base = CostModel.from_lake(shared_lake)
    naive = build_logical_plan(ir, shared_lake)

    def producer(cost):
        plan = optimize(estimate(naive, cost), cost, shared_lake)
        return [(n.nid, n.join.semijoin) for n in plan.nodes() if n.kind == "Join"]

    want = producer(base)
    assert any(side for _, side in want)
    assert producer(base.scaled(factor)) == want
