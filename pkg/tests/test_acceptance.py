"""Acceptance criteria 1-7, one pass/fail line each.

Run under pytest, or directly (``python tests/test_acceptance.py``) to print
the seven lines. ``--digest`` prints a digest of every criterion's
serialized output, which criterion 7 compares across fresh processes.
"""

import hashlib
import json
import os
import random
import subprocess
import sys
import time

import pytest

import oracle as o
from conftest import nba_path
from oracle_cases import CASES
from progen import random_program
from test_oracle import compare_case

from mmlake import parse_program, run_program
from mmlake.cli import run_cli
from mmlake.discovery import DiscoveryConfig, discover, evaluate_discovery
from mmlake.executor import compile_physical, execute, plan_program
from mmlake.lake import load_manifest
from mmlake.model import RecordSet, canonical_string
from mmlake.synthetic import discovery_lake, draft_lake, draft_program, expected_draft_answer
from mmlake.verifier import ROOT_ID, SUPPORT, verify

N_PROGRAMS = 100
N_SCHEDULES = 10
RESULTS = []


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print(line)
    return ok


def serialize(rs):
    return json.dumps({"schema": list(rs.schema), "rows": [canonical_string(r.attrs) for r in rs.records]})


def fresh_lake():
    return load_manifest(nba_path("manifest.json"))


# -- criteria -------------------------------------------------------------------------

def criterion1():
    lake = fresh_lake()
    start = time.perf_counter()
    passed = [c.name for c in CASES if compare_case(c, lake)]
    elapsed = time.perf_counter() - start
    payload = [serialize(run_program(parse_program(c.program), lake).answer) for c in CASES]
    ok = len(passed) == len(CASES) and len(CASES) >= 40 and elapsed < 5.0
    return ok, f"{len(passed)}/{len(CASES)} oracle cases in {elapsed:.2f}s", payload


def criterion2_runs():
    lake = fresh_lake()
    out = []
    for seed in range(N_PROGRAMS):
        ir = parse_program(random_program(seed))
        on = run_program(ir, lake, optimized=True)
        off = run_program(ir, lake, optimized=False)
        out.append((seed, ir, on, off))
    return lake, out


def criterion2():
    start = time.perf_counter()
    _, runs = criterion2_runs()
    elapsed = time.perf_counter() - start
    same = sum(sorted(map(canonical_string, (r.attrs for r in on.answer))) ==
               sorted(map(canonical_string, (r.attrs for r in off.answer))) for _, _, on, off in runs)
    payload = [serialize(on.answer) for _, _, on, _ in runs]
    ok = same == N_PROGRAMS and elapsed < 60.0
    return ok, f"{same}/{N_PROGRAMS} programs equal with optimize on/off in {elapsed:.2f}s", payload


def criterion3():
    lake = draft_lake()
    naive = run_program(draft_program(), lake, optimized=False)
    opt = run_program(draft_program(), lake, optimized=True)
    pairs = lambda rs: sorted((r.attrs["name"], r.attrs["name_r"]) for r in rs)
    same = pairs(naive.answer) == pairs(opt.answer) == sorted(expected_draft_answer())
    ratio = naive.visited_nodes / max(1, opt.visited_nodes)
    ok = same and ratio >= 5.0 and naive.visited_nodes >= 1000
    detail = f"naive {naive.visited_nodes} visits, optimized {opt.visited_nodes}, ratio {ratio:.1f}x, results equal={same}"
    return ok, detail, [serialize(opt.answer), naive.visited_nodes, opt.visited_nodes]


TAUS = [0.05 + 0.05 * i for i in range(10)]


def criterion4():
    fx = discovery_lake()
    reg = fx.lake.registry
    recall = evaluate_discovery(fx.queries, reg)
    monotone = True
    sizes_log = []
    for q, _ in fx.queries:
        for k in (3, 12):
            sizes = [len(discover(q, reg, DiscoveryConfig(t, k))) for t in TAUS]
            sizes_log.append(sizes)
            monotone &= all(a >= b for a, b in zip(sizes, sizes[1:]))
    ok = len(reg) == 12 and len(fx.queries) == 20 and recall >= 0.9 and monotone
    return ok, f"Recall@1 {recall:.2f} on {len(fx.queries)} queries, tau monotone={monotone}", [recall, sizes_log]


def criterion5():
    manifest = nba_path("manifest.json")
    payload, notes, ok = [], [], True
    for fig in ("fig4.mmq", "fig5.mmq"):
        code, out, err = run_cli(["run", manifest, nba_path(fig)])
        records = json.loads(out)["records"] if code == 0 else []
        ok &= code == 0 and bool(records)
        notes.append(f"{fig} exit {code}, {len(records)} records")
        payload.append(out)
    return ok, "; ".join(notes), payload


def _random_roots(rng):
    pools = {"name": ["Bulls", "Duke", "UCLA", None], "state": ["MA", "CA", None],
             "team": ["Bulls", "Knicks"], "score": [0, 1, 2]}
    roots = {}
    for i in range(rng.randint(2, 4)):
        schema = rng.sample(sorted(pools), rng.randint(1, 3))
        rows = [[rng.choice(pools[a]) for a in schema] for _ in range(rng.randint(0, 5))]
        roots[f"r{i}"] = RecordSet.from_rows(schema, rows)
    return roots


def merge_examples():
    rs = RecordSet.from_rows
    single = rs(["a"], [[1], [1]])
    ok1 = verify({"x": single}) is single
    a = rs(["name"], [[c] for c in "abcde"])
    b = rs(["name"], [[c] for c in "defgh"])
    u = verify({"a": a, "b": b})
    ok2 = len(u) == 8 and sorted(r.attrs["name"] for r in u if r.attrs[SUPPORT] == 2) == ["d", "e"]
    m = verify({"n": rs(["name"], [["BC"], ["Duke"]]), "s": rs(["name", "state"], [["BC", "MA"], ["UCLA", "CA"]])})
    merged = [r.attrs for r in m if r.attrs[SUPPORT] == 2]
    ok3 = (len(m) == 3 and merged == [{"name": "BC", "state": "MA", ROOT_ID: "n+s", SUPPORT: 2}]
           and sorted(r.attrs[ROOT_ID] for r in m if r.attrs[SUPPORT] == 1) == ["n", "s"])
    return [ok1, ok2, ok3], [serialize(u), serialize(m)]


def criterion6():
    rng = random.Random(2024)
    idem = perm = 0
    payload = []
    for _ in range(50):
        roots = _random_roots(rng)
        once = verify(roots)
        idem += serialize(verify([once])) == serialize(once)
        items = list(roots.items())
        rng.shuffle(items)
        perm += serialize(verify(dict(items))) == serialize(once)
        payload.append(serialize(once))
    examples, more = merge_examples()
    ok = idem == 50 and perm == 50 and all(examples)
    return ok, f"idempotent {idem}/50, permutation-invariant {perm}/50, merge examples {sum(examples)}/3", payload + more


def digest():
    h = hashlib.sha256()
    for fn in (criterion1, criterion2, criterion3, criterion4, criterion5, criterion6):
        h.update(json.dumps(fn()[2], sort_keys=True).encode("utf-8"))
    return h.hexdigest()


def criterion7():
    here = os.path.abspath(__file__)
    digests = []
    for seed in ("1", "2", "3"):
        env = {**os.environ, "PYTHONHASHSEED": seed}
        proc = subprocess.run([sys.executable, here, "--digest"], capture_output=True, text=True, env=env,
                              cwd=os.path.dirname(here))
        digests.append(proc.stdout.strip() if proc.returncode == 0 else f"error: {proc.stderr[-200:]}")
    runs_equal = len(set(digests)) == 1 and not digests[0].startswith("error")

    lake, runs = criterion2_runs()
    schedules_equal = 0
    for seed, ir, on, _ in runs:
        _, plan = plan_program(ir, lake)
        dag = compile_physical(plan, lake)
        base = {n: serialize(rs) for n, rs in execute(dag, lake).outputs.items()}
        if all({n: serialize(rs) for n, rs in execute(dag, lake, parallel=True, workers=4,
                                                       seed=seed * 100 + s).outputs.items()} == base
               for s in range(N_SCHEDULES)):
            schedules_equal += 1
    ok = runs_equal and schedules_equal == N_PROGRAMS
    return ok, (f"3 fresh-process runs identical={runs_equal}, "
                f"{schedules_equal}/{N_PROGRAMS} programs identical across {N_SCHEDULES} parallel schedules"), None


# -- pytest entry points ------------------------------------------------------------------

CRITERIA = [criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7]


@pytest.mark.parametrize("number", range(1, 8))
def test_criterion(number):
    ok, detail, _ = CRITERIA[number - 1]()
    assert report(number, ok, detail), detail


if __name__ == "__main__":
    if "--digest" in sys.argv:
        print(digest())
    else:
        results = [report(i, *CRITERIA[i - 1]()[:2]) for i in range(1, 8)]
        sys.exit(0 if all(results) else 1)
