import pytest

from bpmncheck.benchgen import gen_blocks, gen_parallel
from bpmncheck.hot import (
    TERMINATION_RULE,
    expected_rule_count,
    generate_rules,
    generate_start_state,
    instantiation_tokens,
)
from bpmncheck.model import FlowNode, NodeKind as K, SequenceFlow, build_process
from bpmncheck.state import ExecutionState, snapshot

import models


def xor_2_3():
    nodes = [
        FlowNode("s1", "", K.NONE_START),
        FlowNode("s2", "", K.NONE_START),
        FlowNode("x", "", K.EXCLUSIVE_GATEWAY),
        FlowNode("e1", "", K.NONE_END),
        FlowNode("e2", "", K.NONE_END),
        FlowNode("e3", "", K.NONE_END),
    ]
    flows = [
        SequenceFlow("i1", "s1", "x"),
        SequenceFlow("i2", "s2", "x"),
        SequenceFlow("o1", "x", "e1"),
        SequenceFlow("o2", "x", "e2"),
        SequenceFlow("o3", "x", "e3"),
    ]
    return models.model("xor", build_process("p", "", nodes, flows))


class TestStartState:
    def test_sequence(self):
        assert generate_start_state(models.sequence()) == ExecutionState.of([snapshot("p", {"sf1": 1})])

    def test_message_start_only(self):
        m = models.model(
            "mse",
            build_process(
                "p",
                "",
                [FlowNode("ms", "", K.MESSAGE_START), FlowNode("e", "", K.NONE_END)],
                [SequenceFlow("f", "ms", "e")],
            ),
        )
        assert generate_start_state(m) == ExecutionState()

    def test_two_processes_two_tokens_each(self):
        def proc(pid):
            return build_process(
                pid,
                "",
                [FlowNode(f"{pid}s", "", K.NONE_START), FlowNode(f"{pid}a", "", K.NONE_END), FlowNode(f"{pid}b", "", K.NONE_END)],
                [SequenceFlow(f"{pid}1", f"{pid}s", f"{pid}a"), SequenceFlow(f"{pid}2", f"{pid}s", f"{pid}b")],
            )

        s = generate_start_state(models.model("two", proc("p"), proc("q")))
        assert len(s.snapshots) == 2
        assert all(sum(c for _, c in snap.tokens) == 2 for snap in s.snapshots)

    def test_startless_subprocess_tokens(self):
        sub = build_process(
            "sub",
            "",
            [FlowNode("t", "", K.TASK), FlowNode("g", "", K.PARALLEL_GATEWAY), FlowNode("u", "", K.TASK)],
            [SequenceFlow("f", "t", "u")],
        )
        m = models.model("sl", sub)
        assert instantiation_tokens(m, "sub") == (("t", 1), ("g", 1))


class TestRules:
    def test_one_branch(self):
        rs = generate_rules(gen_parallel(1))
        assert sorted(r.name for r in rs.rules) == sorted(
            ["end_sf_end", "fork", "join", "task1_start_sf_fork_1", "task1_end", TERMINATION_RULE]
        )

    def test_xor_every_combination(self):
        rs = generate_rules(xor_2_3())
        gw = [r for r in rs.rules if r.source_node == "x"]
        assert len(gw) == 6
        assert {(r.guards[0].element, r.effects[1].element) for r in gw} == {
            (i, o) for i in ("i1", "i2") for o in ("o1", "o2", "o3")
        }

    def test_tee_one_rule(self):
        rs = generate_rules(models.terminate_model())
        assert [r.name for r in rs.rules if r.source_node == "kill"] == ["kill_sfk"]

    def test_exactly_one_termination_rule(self):
        for make in models.ALL_FIXTURES:
            rs = generate_rules(make())
            assert [r.name for r in rs.rules].count(TERMINATION_RULE) == 1
            assert all(r.source_node for r in rs.rules if r.name != TERMINATION_RULE)

    def test_mice_pairs(self):
        rs = generate_rules(models.message_two_recipients())
        assert [r.name for r in rs.rules if r.source_node == "catch"] == ["catch_mf_r1"]

    def test_link_without_catch_warns(self):
        p = build_process(
            "p",
            "",
            [FlowNode("s", "", K.NONE_START), FlowNode("l", "jump", K.LINK_THROW)],
            [SequenceFlow("f", "s", "l")],
        )
        rs = generate_rules(models.model("link", p))
        (rule,) = [r for r in rs.rules if r.source_node == "l"]
        assert [type(e).__name__ for e in rule.effects] == ["ConsumeToken"]
        assert [d.node_id for d in rs.diagnostics] == ["l"]

    def test_link_moves_to_catch(self):
        p = build_process(
            "p",
            "",
            [
                FlowNode("s", "", K.NONE_START),
                FlowNode("l", "jump", K.LINK_THROW),
                FlowNode("c", "jump", K.LINK_CATCH),
                FlowNode("e", "", K.NONE_END),
            ],
            [SequenceFlow("f", "s", "l"), SequenceFlow("g", "c", "e")],
        )
        rs = generate_rules(models.model("link", p))
        (rule,) = [r for r in rs.rules if r.source_node == "l"]
        assert [e.element for e in rule.effects] == ["f", "g"]

    @pytest.mark.parametrize(
        "make", [lambda: gen_parallel(4), lambda: gen_blocks(30), xor_2_3] + models.ALL_FIXTURES
    )
    def test_count_formula(self, make):
        m = make()
        assert len(generate_rules(m).rules) == expected_rule_count(m)

    def test_deterministic(self):
        m = gen_blocks(20)
        a, b = generate_rules(m), generate_rules(m)
        assert [r.name for r in a.rules] == [r.name for r in b.rules]
        assert a.rules == b.rules

    def test_names_unique(self):
        for make in models.ALL_FIXTURES:
            names = [r.name for r in generate_rules(make()).rules]
            assert len(names) == len(set(names))
