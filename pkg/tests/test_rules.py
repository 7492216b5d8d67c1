from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from bpmncheck.benchgen import gen_blocks, gen_parallel
from bpmncheck.hot import TERMINATION_RULE, generate_rules
from bpmncheck.rules import (
    ConsumeToken,
    IllFormedRule,
    NoTokenAt,
    OptionalMessageSend,
    ProduceToken,
    Rule,
    TokenAt,
    apply_rule,
    check_rule_wellformed,
    successors,
)
from bpmncheck.state import RUNNING, TERMINATED, ExecutionState, canonical_key, snapshot

import models


def state(*snaps):
    return ExecutionState.of(snaps)


def move(src, dst, process="p"):
    return Rule(f"{dst}_start_{src}", dst, process, (TokenAt(src),), (ConsumeToken(src), ProduceToken(dst)))


class TestApplySimple:
    def test_activity_start(self):
        out = successors(move("sf1", "act"), state(snapshot("p", {"sf1": 1})))
        assert out == {state(snapshot("p", {"act": 1}))}

    def test_no_match(self):
        assert apply_rule(move("sf1", "act"), state(snapshot("p", {"sf2": 1}))) == set()

    def test_other_process_ignored(self):
        assert apply_rule(move("sf1", "act"), state(snapshot("q", {"sf1": 1}))) == set()

    def test_terminated_snapshot_has_no_tokens_to_match(self):
        assert apply_rule(move("sf1", "act"), state(snapshot("p", lifecycle=TERMINATED))) == set()

    def test_one_successor_per_focal_snapshot(self):
        s = state(snapshot("p", {"sf1": 1}), snapshot("p", {"sf1": 1, "x": 1}))
        assert len(successors(move("sf1", "act"), s)) == 2

    def test_identical_snapshots_collapse(self):
        s = state(snapshot("p", {"sf1": 1}), snapshot("p", {"sf1": 1}))
        assert len(successors(move("sf1", "act"), s)) == 1

    def test_nac(self):
        r = Rule("r", "n", "p", (TokenAt("a"), NoTokenAt("b")), (ConsumeToken("a"), ProduceToken("c")))
        assert apply_rule(r, state(snapshot("p", {"a": 1, "b": 1}))) == set()
        assert successors(r, state(snapshot("p", {"a": 1}))) == {state(snapshot("p", {"c": 1}))}

    def test_children_reached(self):
        child = snapshot("p", {"sf1": 1}, spawned_by="call")
        s = state(snapshot("q", {"call": 1}, children=[child]))
        (succ,) = successors(move("sf1", "act"), s)
        assert succ.snapshots[0].children[0].tokens == (("act", 1),)

    def test_pure(self):
        s = state(snapshot("p", {"sf1": 2}))
        assert apply_rule(move("sf1", "act"), s) == apply_rule(move("sf1", "act"), s)


class TestIllFormed:
    def test_bad_count(self):
        r = Rule("r", "n", "p", (TokenAt("a", 0),), (ConsumeToken("a"),))
        with pytest.raises(IllFormedRule):
            apply_rule(r, state(snapshot("p", {"a": 1})))

    def test_empty_eligibility(self):
        r = Rule("r", "n", "p", (TokenAt("a"),), (ConsumeToken("a"),), (OptionalMessageSend("mf", (), "q"),))
        with pytest.raises(IllFormedRule):
            apply_rule(r, state(snapshot("p", {"a": 1})))


class TestMessages:
    def setup_method(self):
        self.rs = generate_rules(models.message_two_recipients())
        self.rules = self.rs.by_name()

    def test_two_recipients_branch(self):
        sender = snapshot("sender", {"s1": 1})
        r1 = snapshot("receiver", {"r1": 1})
        r2 = snapshot("receiver", {"r1": 1, "r2": 1})
        out = successors(self.rules["throw_s1"], state(sender, r1, r2))
        assert len(out) == 2
        moved = snapshot("sender", {"s2": 1})
        assert out == {
            state(moved, r1._replace(messages=(("mf", 1),)), r2),
            state(moved, r1, r2._replace(messages=(("mf", 1),))),
        }

    def test_no_recipient_drops_message(self):
        out = successors(self.rules["throw_s1"], state(snapshot("sender", {"s1": 1}), snapshot("receiver", {"r2": 1})))
        assert out == {state(snapshot("sender", {"s2": 1}), snapshot("receiver", {"r2": 1}))}

    def test_catch_consumes_message_and_token(self):
        rec = snapshot("receiver", {"r1": 1}, {"mf": 1})
        out = successors(self.rules["catch_mf_r1"], state(rec))
        assert out == {state(snapshot("receiver", {"r2": 1}))}

    def test_catch_waits_for_message(self):
        assert apply_rule(self.rules["catch_mf_r1"], state(snapshot("receiver", {"r1": 1}))) == set()


class TestTerminate:
    def test_tee_clears_five_tokens(self):
        rs = generate_rules(models.terminate_model())
        rule = rs.by_name()["kill_sfk"]
        s = state(
            snapshot(
                "p",
                {"sfk": 1, "a": 1, "sfa": 2, "sfe": 1},
                children=[snapshot("c", {"x": 1}, spawned_by="y")],
            )
        )
        assert sum(c for _, c in s.snapshots[0].tokens) == 5
        (succ,) = successors(rule, s)
        assert succ == state(snapshot("p", lifecycle=TERMINATED))

    def test_generic_termination(self):
        rs = generate_rules(models.sequence())
        rule = rs.by_name()[TERMINATION_RULE]
        assert successors(rule, state(snapshot("p"))) == {state(snapshot("p", lifecycle=TERMINATED))}
        assert apply_rule(rule, state(snapshot("p", {"sf1": 1}))) == set()
        assert apply_rule(rule, state(snapshot("p", lifecycle=TERMINATED))) == set()
        running_child = snapshot("p", children=[snapshot("c", {"x": 1}, spawned_by="k")])
        assert apply_rule(rule, state(running_child)) == set()


class TestCalls:
    def test_spawn_and_return(self):
        rules = generate_rules(models.call_model()).by_name()
        (spawned,) = successors(rules["call1_start_p1"], state(snapshot("parent", {"p1": 1})))
        child = snapshot("child", {"c1": 1}, spawned_by="call1")
        assert spawned == state(snapshot("parent", children=[child]))
        done = state(snapshot("parent", children=[snapshot("child", spawned_by="call1", lifecycle=TERMINATED)]))
        assert successors(rules["call1_end"], done) == {state(snapshot("parent", {"p2": 1}))}
        # the other call site does not pick up this child
        assert apply_rule(rules["call2_end"], done) == set()


class TestSignals:
    def test_throw_releases_all_waiting_and_spawns(self):
        rules = generate_rules(models.signal_model()).by_name()
        s = state(
            snapshot("thrower", {"t1": 1, "t2": 1, "t3": 1}),
            snapshot("thrower", {"t1": 2}),
        )
        (succ,) = successors(rules["shout_t3"], s)
        assert succ == state(
            snapshot("thrower", {"t4": 1, "t5": 1, "t6": 1}),
            snapshot("thrower", {"t4": 2}),
            snapshot("listener", {"l1": 1}),
        )


# --- property-based checks -------------------------------------------------

ELEMS = ["a", "b", "c"]


@st.composite
def simple_rules(draw):
    src = draw(st.sampled_from(ELEMS))
    dsts = draw(st.lists(st.sampled_from(ELEMS), max_size=2))
    n = draw(st.integers(1, 2))
    return Rule("r", "n", "p", (TokenAt(src, n),), (ConsumeToken(src, n),) + tuple(ProduceToken(d) for d in dsts))


token_maps = st.dictionaries(st.sampled_from(ELEMS), st.integers(1, 3))
snap_st = st.builds(lambda t, proc: snapshot(proc, t), token_maps, st.sampled_from(["p", "q"]))


class TestRuleProperties:
    @settings(max_examples=300)
    @given(simple_rules(), st.lists(snap_st, min_size=1, max_size=3))
    def test_accounting_and_frame(self, rule, snaps):
        pre = state(*snaps)
        for succ in successors(rule, pre):
            before = Counter(canonical_key(ExecutionState((s,))) for s in pre.snapshots)
            after = Counter(canonical_key(ExecutionState((s,))) for s in succ.snapshots)
            # at most one snapshot changed, and only if the rule moves tokens
            changed = 1 if rule.compile_simple()[2] else 0
            assert sum((before - after).values()) == changed
            assert sum((after - before).values()) == changed
            total_pre = Counter()
            total_post = Counter()
            for s in pre.snapshots:
                total_pre.update(dict(s.tokens))
            for s in succ.snapshots:
                total_post.update(dict(s.tokens))
            expected = total_pre.copy()
            for e in rule.effects:
                expected[e.element] += -e.count if isinstance(e, ConsumeToken) else e.count
            assert +expected == total_post

    @settings(max_examples=100)
    @given(st.integers(1, 6), st.data())
    def test_terminated_implies_empty(self, n, data):
        rs = generate_rules(gen_parallel(n))
        s = rs.start_state
        for _ in range(data.draw(st.integers(0, 4 * n + 6))):
            options = sorted(
                (succ for r in rs.rules for succ in successors(r, s)), key=canonical_key
            )
            if not options:
                break
            s = data.draw(st.sampled_from(options))
            for _, snap in s.walk():
                if snap.lifecycle == TERMINATED:
                    assert not snap.tokens and not snap.children
                else:
                    assert snap.lifecycle == RUNNING


class TestWellFormed:
    def test_termination_rule(self):
        rs = generate_rules(models.sequence())
        assert check_rule_wellformed(rs.by_name()[TERMINATION_RULE], rs.model) == []

    def test_unknown_id(self):
        rs = generate_rules(models.sequence())
        rule = Rule("r", "task", "p", (TokenAt("sf1"),), (ConsumeToken("sf1"), ProduceToken("deleted")))
        assert len(check_rule_wellformed(rule, rs.model)) == 1

    def test_no_effects(self):
        rs = generate_rules(models.sequence())
        rule = Rule("r", "task", "p", (TokenAt("sf1"),), ())
        assert len(check_rule_wellformed(rule, rs.model)) == 1

    @pytest.mark.parametrize(
        "make",
        [lambda: gen_parallel(3), lambda: gen_blocks(12)] + models.ALL_FIXTURES,
    )
    def test_generated_rules_clean(self, make):
        rs = generate_rules(make())
        for rule in rs.rules:
            assert check_rule_wellformed(rule, rs.model) == []
