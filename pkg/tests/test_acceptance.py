"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line; the lines are printed as the
test runs and again in the terminal summary (see ``conftest.py``).  Run
this file directly to print the lines without pytest.
"""

import functools
import itertools
import random
import statistics
import sys
import time

import pytest

from bpmncheck.benchgen import block_counts, gen_blocks, gen_parallel
from bpmncheck.ctl import AF, AG, AX, EF, EG, EU, EX, Atom, Graph, Labeling, Not, TrueF, sat_set
from bpmncheck.explorer import explore
from bpmncheck.hot import generate_rules
from bpmncheck.model import NodeKind
from bpmncheck.properties import (
    check_no_dead_activities,
    check_option_to_complete,
    check_proper_completion,
    check_safeness,
)

import models
import oracle
from test_ctl import oracle as ctl_oracle, random_formula, random_graph, random_labeling

RESULTS = {}

REFERENCE_STATES = [7, 13, 31, 85, 247, 733, 2119, 6565, 19687, 59053]
REFERENCE_TRANSITIONS = [7, 17, 59, 221, 815, 2921, 10211, 34997, 118103, 393665]
REFERENCE_RULES = [9, 11, 13, 15, 17, 19, 21, 23, 25, 27]
REFERENCE_BLOCKS = {
    1: (0, 5, 4, 9),
    50: (66, 185, 217, 402),
    100: (132, 368, 433, 801),
    150: (200, 552, 651, 1203),
    200: (266, 735, 867, 1602),
    250: (332, 918, 1083, 2001),
    300: (400, 1102, 1301, 2403),
}


def record(number, title, checks, summary=None):
    """``checks`` is a list of ``(ok, detail)``; the criterion passes when
    every check does.  On success ``summary`` replaces the detail list."""
    failed = [d for ok, d in checks if not ok]
    status = "FAIL" if failed else "PASS"
    detail = "; ".join(failed) if failed else summary or "; ".join(d for _, d in checks)
    line = f"criterion {number} [{title}]: {status} - {detail}"
    RESULTS[number] = line
    print(line)
    return not failed, line


@functools.lru_cache(maxsize=None)
def parallel_run(n):
    rs = generate_rules(gen_parallel(n))
    start = time.perf_counter()
    lts = explore(rs, threads=1)
    return len(rs.rules), lts.state_count, lts.transition_count, time.perf_counter() - start


def criterion_1():
    runs = {n: parallel_run(n) for n in range(1, 11)}
    checks = []
    for n in range(1, 11):
        states = runs[n][1]
        checks.append((states == 3**n + 4, f"n={n}: {states} states vs 3^n+4={3**n + 4}"))
    for n, published in zip(range(1, 11), REFERENCE_STATES):
        states = runs[n][1]
        checks.append((states == published, f"n={n}: {states} states vs reference {published}"))
    secs = runs[10][3]
    checks.append((secs < 60, f"n=10 explored in {secs:.2f}s (< 60s)"))
    counts = ", ".join(str(runs[n][1]) for n in range(1, 11))
    return record(1, "parallel state counts", checks, f"states n=1..10: {counts}; n=10 in {secs:.2f}s")


def criterion_2():
    checks = []
    for n, published in zip(range(1, 11), REFERENCE_TRANSITIONS):
        t = parallel_run(n)[2]
        expected = 2 * n * 3 ** (n - 1) + 4
        checks.append((t == expected, f"n={n}: {t} transitions vs {expected}"))
        checks.append((published == t + 1, f"n={n}: reference {published} = {t} + 1"))
    counts = ", ".join(str(parallel_run(n)[2]) for n in range(1, 11))
    return record(2, "parallel transition counts", checks, f"transitions n=1..10: {counts}; reference = ours + 1")


def criterion_3():
    checks = []
    for n, published in zip(range(1, 11), REFERENCE_RULES):
        rules = parallel_run(n)[0]
        checks.append((rules == 2 * n + 4, f"n={n}: {rules} rules vs 2n+4"))
        checks.append((published - rules == 3, f"n={n}: reference {published} - {rules} = 3"))
    return record(3, "rule-count formula", checks, "2n+4 rules for n=1..10; reference offset 3")


def criterion_4():
    checks = []
    for k, row in REFERENCE_BLOCKS.items():
        m = gen_blocks(k)
        c = m.counts()
        got = (c["gateways"], c["nodes"], c["flows"], c["nodes"] + c["flows"])
        closed = block_counts(k)
        closed = (closed["gateways"], closed["flowNodes"], closed["sequenceFlows"], closed["total"])
        checks.append((got == row and closed == row, f"k={k}: {got} vs reference {row}"))
    return record(4, "block-model element counts", checks, f"all {len(REFERENCE_BLOCKS)} reference rows exact")


def _verdicts(lts):
    return (
        check_safeness(lts).holds,
        check_option_to_complete(lts).holds,
        check_proper_completion(lts).holds,
        tuple(check_no_dead_activities(lts).details["deadActivities"]),
    )


def _oracle_verdicts(m):
    activities = {n.id for n in m.nodes.values() if n.kind in (NodeKind.TASK, NodeKind.CALL)}
    return (
        oracle.safe(m),
        oracle.option_to_complete(m),
        oracle.proper_completion(m),
        tuple(sorted(activities - oracle.executed_activities(m))),
    )


def criterion_5():
    checks = []
    for n in range(1, 7):
        m = gen_parallel(n)
        ours = _verdicts(explore(generate_rules(m)))
        expected = _oracle_verdicts(m)
        ok = ours == expected == (True, True, True, ())
        checks.append((ok, f"n={n}: engine {ours} oracle {expected}"))
    return record(5, "general properties on benchmarks", checks, "n=1..6 safe and sound, oracle agrees")


def criterion_6():
    cases = [
        ("a", models.fork_xor_merge, check_safeness, 0),
        ("b", models.xor_split_and_join, check_option_to_complete, 1),
        ("c", models.two_branches_one_end, check_proper_completion, 2),
    ]
    checks = []
    for tag, make, check, idx in cases:
        m = make()
        lts = explore(generate_rules(m))
        v = check(lts)
        expected = _oracle_verdicts(m)[idx]
        ok = not v.holds and not expected and bool(v.witness)
        checks.append((ok, f"({tag}) {m.name}: {v.name}={v.holds} oracle={expected} witness={len(v.witness or [])} steps"))
    m = models.disconnected_task()
    dead = tuple(check_no_dead_activities(explore(generate_rules(m))).details["deadActivities"])
    expected = _oracle_verdicts(m)[3]
    checks.append((dead == expected == ("orphan",), f"(d) {m.name}: dead {list(dead)} oracle {list(expected)}"))
    return record(6, "violation fixtures", checks)


def _dags(n):
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    for mask in range(1 << len(pairs)):
        yield Graph(n, [(a, f"e{a}{b}", b) for i, (a, b) in enumerate(pairs) if mask >> i & 1])


def criterion_7():
    rng = random.Random(1729)
    trials = 1000
    bad = 0
    for _ in range(trials):
        n = rng.randint(1, 6)
        g, lab, f = random_graph(rng, n), random_labeling(rng, n), random_formula(rng, 2)
        s = lambda x: sat_set(g, lab, x)  # noqa: E731
        if not (
            s(AG(f)) == s(Not(EF(Not(f))))
            and s(AF(f)) == s(Not(EG(Not(f))))
            and s(EF(f)) == s(EU(TrueF(), f))
            and s(AX(f)) == s(Not(EX(Not(f))))
        ):
            bad += 1
    checks = [(bad == 0, f"dualities on {trials} random LTSs (<= 6 states): {bad} mismatches")]

    def agree(g, lab, f):
        sat = sat_set(g, lab, f)
        return all((s in sat) == ctl_oracle(g, lab, f, s) for s in range(g.n))

    # every acyclic shape up to 4 states, each with random labelings/formulas
    exhaustive = mism = 0
    for n in range(1, 5):
        for g in _dags(n):
            for _ in range(4):
                lab, f = random_labeling(rng, n), random_formula(rng, 3)
                exhaustive += 1
                mism += not agree(g, lab, f)
    # random acyclic shapes up to 10 states
    sampled = 0
    for _ in range(600):
        n = rng.randint(5, 10)
        g, lab, f = random_graph(rng, n, acyclic=True), random_labeling(rng, n), random_formula(rng, 3)
        sampled += 1
        mism += not agree(g, lab, f)
    checks.append(
        (mism == 0, f"path oracle: {exhaustive} exhaustive (<= 4 states) + {sampled} sampled (5..10 states), {mism} mismatches")
    )
    return record(7, "CTL engine", checks)


def criterion_8():
    degrees, rules = [], []
    for k in range(1, 301):
        m = gen_blocks(k)
        degrees.append(sum(len(n.incoming) + len(n.outgoing) for n in m.nodes.values()))
        rules.append(len(generate_rules(m).rules))
    r2 = statistics.correlation(degrees, rules) ** 2
    bounded = all(r <= d + 1 for d, r in zip(degrees, rules))
    m = gen_blocks(300)
    start = time.perf_counter()
    generate_rules(m)
    secs = time.perf_counter() - start
    fit = statistics.linear_regression(degrees, rules)
    return record(
        8,
        "rule generation scaling",
        [
            (r2 >= 0.999, f"rules vs degree R^2={r2:.6f} (slope {fit.slope:.3f})"),
            (bounded, "rules <= degree + 1 for k=1..300"),
            (secs < 5, f"gen_blocks(300) rules in {secs:.3f}s (< 5s)"),
        ],
    )


def criterion_9():
    checks = []
    fixtures = models.ALL_FIXTURES + [lambda: gen_parallel(4), lambda: gen_blocks(3)]
    for make in fixtures:
        rs = generate_rules(make())
        one = explore(rs, threads=1)
        for threads in (2, 4):
            many = explore(rs, threads=threads)
            same = one.canonical() == many.canonical() and one.transitions == many.transitions
            checks.append((same, f"{rs.model.name} threads={threads}"))
    ok = all(c for c, _ in checks)
    summary = [(ok, f"{len(fixtures)} models identical with 1, 2 and 4 threads")]
    return record(9, "determinism", summary if ok else checks)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_criterion(criterion):
    ok, line = criterion()
    assert ok, line


if __name__ == "__main__":
    results = [c()[0] for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
