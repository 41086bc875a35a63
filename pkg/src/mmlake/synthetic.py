"""Deterministic synthetic lakes for the pushdown and discovery experiments."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Tuple

from .dsl import parse_program
from .graph import Edge, PropertyGraph
from .lake import DataLake, in_memory_lake
from .relational import make_table
from .text import TextCorpus

MASSACHUSETTS = "Massachusetts"


@dataclass(frozen=True)
class DraftParams:
    teams: int = 30
    players: int = 1000
    colleges: int = 50
    states: int = 20
    champions: int = 3  # teams 0..champions-1 won a title in the 1990s


def state_name(j: int) -> str:
    return MASSACHUSETTS if j == 0 else f"State {j:02d}"


def draft_lake(params: DraftParams = DraftParams()) -> DataLake:
    """Teams table plus a Team/Player/College graph.

    Player i is drafted by team i mod teams and attended college
    (7 i) mod colleges; college j lies in state j mod states.
    """
    rows = []
    for t in range(params.teams):
        year = 1990 + 3 * t if t < params.champions else 1970 + (t % 15)
        rows.append([str(t), f"Team {t:02d}", f"City {t:02d}", str(year)])
    teams = make_table("Team", "teams", ["team_id", "name", "city", "champ_year"], rows)
    nodes = [(f"t{t}", "Team", {"name": f"Team {t:02d}"}) for t in range(params.teams)]
    nodes += [(f"p{i}", "Player", {"name": f"Player {i:04d}"}) for i in range(params.players)]
    nodes += [(f"c{j}", "College", {"name": f"College {j:02d}", "state": state_name(j % params.states)})
              for j in range(params.colleges)]
    edges = [Edge(f"p{i}", "DRAFTED_BY", f"t{i % params.teams}") for i in range(params.players)]
    edges += [Edge(f"p{i}", "ATTENDED", f"c{(7 * i) % params.colleges}") for i in range(params.players)]
    graph = PropertyGraph(nodes, edges, "draft_graph")
    return in_memory_lake(tables={"teams": teams}, graphs={"draft_graph": graph})


DRAFT_PROGRAM = """
champions = Selection(input = lake, src = "teams", pred = {'filter': {'and': [
    {'attribute': 'champ_year', 'op': '>=', 'value': 1990},
    {'attribute': 'champ_year', 'op': '<=', 'value': 1999}]}})
paths = PathQuery(input = lake, src = "graph", pred = {'steps': [
    {'label': 'Team', 'carry': {'name': 'team'}},
    {'edge': 'DRAFTED_BY', 'direction': 'in', 'label': 'Player'},
    {'edge': 'ATTENDED', 'direction': 'out', 'label': 'College'}]})
pairs = Join(input = [champions, paths], pred = {'cond': 'name = team', 'cond_type': 'equality'})
in_ma = Selection(input = pairs, pred = {'filter': {'state': 'Massachusetts'}})
Output(in_ma)
"""


def draft_program():
    return parse_program(DRAFT_PROGRAM)


def expected_draft_answer(params: DraftParams = DraftParams()) -> List[Tuple[str, str]]:
    """(team name, college name) per matching path, computed directly."""
    out = []
    for i in range(params.players):
        t, c = i % params.teams, (7 * i) % params.colleges
        if t < params.champions and c % params.states == 0:
            out.append((f"Team {t:02d}", f"College {c:02d}"))
    return out


# -- discovery --------------------------------------------------------------

_SYLLABLES = ["ka", "lo", "mi", "ra", "tu", "ve", "zo", "pe", "shi", "qua", "dor", "fen", "gri", "bax", "nel", "wu"]
_COMMON = ["record", "entry", "value", "status", "note"]
_TEMPLATES = [
    "find {a} with {b}",
    "which {a} have the highest {b}",
    "list every {a} and {b}",
    "show {a} related to {b} and {c}",
]


def _words(rng: random.Random, n: int, taken: set) -> List[str]:
    out = []
    while len(out) < n:
        w = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


@dataclass(frozen=True)
class DiscoveryFixture:
    lake: DataLake
    vocab: dict
    queries: List[Tuple[str, str]]


def discovery_lake(n_sources: int = 12, n_queries: int = 20, seed: int = 7) -> DiscoveryFixture:
    """Sources of all three modalities, each with its own injected vocabulary."""
    rng = random.Random(seed)
    taken: set = set(_COMMON)
    tables, graphs, corpora, vocab = {}, {}, {}, {}
    for i in range(n_sources):
        sid = f"src{i:02d}"
        words = _words(rng, 10, taken)
        vocab[sid] = words
        kind = i % 3
        if kind == 0:
            header = words[:3] + ["status"]
            rows = [[rng.choice(words[3:]), rng.choice(words[3:]), str(r), rng.choice(_COMMON)] for r in range(8)]
            tables[sid] = make_table(words[0], sid, header, rows)
        elif kind == 1:
            nodes = [(f"n{j}", words[j % 2].capitalize(), {words[2]: rng.choice(words[3:]), "note": rng.choice(_COMMON)})
                     for j in range(8)]
            edges = [Edge(f"n{j}", words[3].upper(), f"n{j + 1}") for j in range(7)]
            graphs[sid] = PropertyGraph(nodes, edges, sid)
        else:
            docs = [{"id": f"d{j}", "title": f"{words[j % 3]} {rng.choice(_COMMON)}",
                     "body": " ".join(rng.choice(words) for _ in range(12)) + " " + rng.choice(_COMMON)}
                    for j in range(6)]
            corpora[sid] = TextCorpus(docs, sid)
    lake = in_memory_lake(tables=tables, graphs=graphs, corpora=corpora)
    queries = []
    ids = sorted(vocab)
    for q in range(n_queries):
        gold = ids[q % len(ids)]
        a, b, c = rng.sample(vocab[gold][:6], 3)
        template = _TEMPLATES[q % len(_TEMPLATES)]
        queries.append((template.format(a=a, b=b, c=c) + " " + rng.choice(_COMMON), gold))
    return DiscoveryFixture(lake, vocab, queries)
