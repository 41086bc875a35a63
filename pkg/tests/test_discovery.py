from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmlake.discovery import (
    DiscoveryConfig,
    Registry,
    _weights,
    bind_sources,
    discover,
    evaluate_discovery,
    index_source,
)
from mmlake.dsl import parse_program
from mmlake.errors import EmptySource, NoSourceFound, UnknownGoldSource
from mmlake.lake import SourceHandle, in_memory_lake
from mmlake.model import Modality
from mmlake.planner import build_tree
from mmlake.relational import make_table
from mmlake.synthetic import discovery_lake
from mmlake.tokenizer import tokenize

FIG4_QUESTION = "Which team drafted the tallest players on average for the point guard position over the years?"


@pytest.fixture(scope="module")
def synthetic():
    return discovery_lake()


def test_teams_signature_terms(shared_lake):
    sig = index_source(shared_lake.handle("teams")).signature
    assert {"team", "name", "city", "champ", "year", "bulls", "chicago"} <= set(sig)
    assert abs(sum(w * w for w in sig.values()) - 1.0) < 1e-9
    assert all(w >= 0 for w in sig.values())


def test_empty_table_is_not_indexable():
    empty = make_table("Nothing", "nothing", ["a"], [])
    with pytest.raises(EmptySource):
        index_source(SourceHandle("nothing", Modality.TABLE, "Nothing", empty))


def test_empty_source_registered_but_undiscoverable():
    lake = in_memory_lake(tables={"nothing": make_table("Nothing", "nothing", ["a"], []),
                                  "t": make_table("Nothing", "t", ["a"], [["x"]])})
    assert "nothing" in lake.registry
    assert discover("nothing", lake.registry, DiscoveryConfig(0.0, 5)).ids() == ["t"]


def test_identical_sources_identical_signatures():
    rows = [["1", "Bulls"], ["2", "Knicks"]]
    a = make_table("Team", "a", ["id", "name"], rows)
    b = make_table("Team", "b", ["id", "name"], rows)
    sa = index_source(SourceHandle("a", Modality.TABLE, "Team", a)).signature
    sb = index_source(SourceHandle("b", Modality.TABLE, "Team", b)).signature
    assert sa == sb


def test_nba_question_prefers_team_and_player_sources(shared_lake):
    result = discover(FIG4_QUESTION, shared_lake.registry, DiscoveryConfig(0.0, 10))
    ids = result.ids()
    for relevant in ("teams", "players"):
        assert relevant in ids
        if "weather" in ids:
            assert ids.index(relevant) < ids.index("weather")


def test_nba_question_matches_exhaustive_cosine(shared_lake):
    reg = shared_lake.registry
    q = reg.query_vector(FIG4_QUESTION)
    scores = {}
    for sid in reg.ids():
        sig = reg[sid].signature
        s = sum(w * sig.get(t, 0.0) for t, w in q.items())
        if s > 0:
            scores[sid] = s
    want = sorted(scores, key=lambda s: (-scores[s], s))
    assert discover(FIG4_QUESTION, reg, DiscoveryConfig(0.0, len(reg))).ids() == want


def test_stop_words_only():
    lake = discovery_lake().lake
    assert len(discover("the of and which", lake.registry)) == 0


def test_zero_threshold_returns_every_overlapping_source(shared_lake):
    reg = shared_lake.registry
    query = "Chicago games weather"
    terms = set(tokenize(query))
    overlapping = sorted(s for s in reg.ids() if terms & set(reg[s].signature))
    got = discover(query, reg, DiscoveryConfig(0.0, len(reg)))
    assert sorted(got.ids()) == overlapping


def test_result_ordering_invariants(shared_lake):
    res = discover(FIG4_QUESTION, shared_lake.registry, DiscoveryConfig(0.01, 10))
    scores = [h.score for h in res]
    assert scores == sorted(scores, reverse=True)
    assert all(0.01 <= s <= 1.0 for s in scores)


def test_config_ranges():
    for bad in ({"threshold": -0.1}, {"threshold": 1.5}, {"top_k": 0}):
        with pytest.raises(ValueError):
            DiscoveryConfig(**bad)


# -- binding -------------------------------------------------------------------

def _plan(text):
    return build_tree(parse_program(text))


def test_figure5_join_binds_games(fig5_ir, shared_lake):
    plan = bind_sources(build_tree(fig5_ir), shared_lake.registry, shared_lake.discovery)
    scans = [n for n in plan.nodes() if n.scan]
    assert scans and {n.source for n in scans} == {"games"}
    assert any(a.startswith("Discovery: games") for n in scans for a in n.annotations)


def test_explicit_sources_unchanged(shared_lake):
    plan = _plan('x = Selection(input = lake, src = "teams", pred = {})\nOutput(x)')
    bound = bind_sources(plan, shared_lake.registry)
    assert bound.roots[0].source == "teams"
    assert bound.roots[0].annotations == ()


def test_table_key_binds_by_name(fig4_ir, shared_lake):
    plan = bind_sources(build_tree(fig4_ir), shared_lake.registry, shared_lake.discovery)
    sources = {n.kind: n.source for n in plan.nodes()}
    assert sources == {"LookUp": "nba_docs", "Selection": "teams"}


def test_nonsense_terms_raise(shared_lake):
    plan = _plan("x = Selection(input = lake, pred = {'filter': {'zzqx': 'vvwk'}})\nOutput(x)")
    with pytest.raises(NoSourceFound) as info:
        bind_sources(plan, shared_lake.registry, shared_lake.discovery)
    assert info.value.node == "x"


def test_wrong_modality_source_rejected(shared_lake):
    plan = _plan('x = LookUp(input = lake, src = "teams", mode = "keyword", pred = {"query": "bulls"})\nOutput(x)')
    with pytest.raises(NoSourceFound):
        bind_sources(plan, shared_lake.registry)


# -- evaluation ------------------------------------------------------------------

def test_recall_arithmetic(synthetic):
    queries = list(synthetic.queries[:10])
    q, gold = queries[0]
    wrong = next(s for s in synthetic.lake.registry.ids() if s != gold)
    queries[0] = (q, wrong)
    assert evaluate_discovery(queries, synthetic.lake.registry) == pytest.approx(0.9)


def test_empty_query_list_is_an_error(synthetic):
    with pytest.raises(ValueError):
        evaluate_discovery([], synthetic.lake.registry)


def test_unknown_gold(synthetic):
    with pytest.raises(UnknownGoldSource):
        evaluate_discovery([("x", "nope")], synthetic.lake.registry)


def test_synthetic_recall(synthetic):
    assert len(synthetic.lake.registry) == 12 and len(synthetic.queries) == 20
    assert evaluate_discovery(synthetic.queries, synthetic.lake.registry) >= 0.9


# -- properties --------------------------------------------------------------------

taus = st.floats(0.0, 1.0)


@settings(max_examples=60)
@given(st.integers(0, 19), taus, taus)
def test_threshold_monotone(synthetic, i, t1, t2):
    lo, hi = sorted((t1, t2))
    q = synthetic.queries[i][0]
    reg = synthetic.lake.registry
    big = set(discover(q, reg, DiscoveryConfig(lo, 12)).ids())
    small = set(discover(q, reg, DiscoveryConfig(hi, 12)).ids())
    assert small <= big


@given(st.dictionaries(st.sampled_from("abcdefg"), st.integers(1, 9), min_size=1), st.integers(2, 50))
def test_signature_scale_invariant(counts, factor):
    isf = lambda t: 1.0 + "abcdefg".index(t) / 3
    scaled = Counter({t: c * factor for t, c in counts.items()})
    a, b = _weights(counts, isf), _weights(scaled, isf)
    assert a.keys() == b.keys()
    assert all(abs(a[t] - b[t]) < 1e-12 for t in a)


@given(st.sampled_from([FIG4_QUESTION, "games in Chicago", "college state", "weather snow"]))
def test_discover_is_pure(shared_lake, query):
    a = discover(query, shared_lake.registry)
    b = discover(query, Registry(shared_lake.sources.values()))
    assert a == b
