"""Model-specific rule generation: BPMN model -> start state + rule set."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .model import (
    ACTIVITY_KINDS,
    GATEWAY_KINDS,
    START_KINDS,
    WARNING,
    BpmnModel,
    Diagnostic,
    NodeKind as K,
    UnsupportedElement,
)
from .rules import (
    ChildTerminated,
    ConsumeMessage,
    ConsumeToken,
    DeleteAllTokens,
    DeleteTerminatedChild,
    MessageAt,
    NoChildren,
    NoTokensAtAll,
    OptionalMessageSend,
    ProduceToken,
    Rule,
    SetTerminated,
    SignalCatch,
    SignalSpawn,
    SnapshotRunning,
    SpawnChild,
    SpawnTopLevel,
    TerminateSubtree,
    TokenAt,
)
from .state import ExecutionState, snapshot

TERMINATION_RULE = "ProcessSnapshotTermination"


@dataclass
class RuleSet:
    rules: list[Rule]
    start_state: ExecutionState
    model: BpmnModel
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def by_name(self) -> dict[str, Rule]:
        return {r.name: r for r in self.rules}


def generate_start_state(model: BpmnModel) -> ExecutionState:
    snaps = []
    for p in model.processes:
        starts = [n for n in p.flow_nodes if n.kind is K.NONE_START]
        if starts:
            toks = [(f, 1) for s in starts for f in s.outgoing]
            snaps.append(snapshot(p.id, toks))
    return ExecutionState.of(snaps)


def instantiation_tokens(model: BpmnModel, process_id: str) -> tuple:
    """Tokens of a freshly called subprocess instance."""
    p = model.process_map[process_id]
    if p.start_events():
        return tuple(
            (f, 1) for n in p.flow_nodes if n.kind is K.NONE_START for f in n.outgoing
        )
    return tuple(
        (n.id, 1)
        for n in p.flow_nodes
        if (n.kind in ACTIVITY_KINDS or n.kind in GATEWAY_KINDS) and not n.incoming
    )


def _produce(flows):
    return tuple(ProduceToken(f) for f in flows)


def _consume(sf):
    return (TokenAt(sf),), (ConsumeToken(sf),)


def _termination_rule():
    return Rule(
        TERMINATION_RULE,
        None,
        None,
        guards=(SnapshotRunning(), NoTokensAtAll(), NoChildren()),
        effects=(SetTerminated(),),
        role="terminate",
    )


class _Generator:
    def __init__(self, model: BpmnModel):
        self.model = model
        self.diagnostics = []
        # processes whose instances may hold tokens directly on nodes
        called = {n.called_process for n in model.nodes.values() if n.kind is K.CALL}
        self.startless = {
            pid for pid in called if pid in model.process_map and not model.process_map[pid].start_events()
        }

    def rules_for(self, node, pid) -> list[Rule]:
        k = node.kind
        nid = node.id
        model = self.model
        out = []

        def rule(name, guards, effects, role, optional=(), universal=()):
            out.append(Rule(name, nid, pid, tuple(guards), tuple(effects), tuple(optional), tuple(universal), role))

        if k in START_KINDS or k in (K.LINK_CATCH, K.SIGNAL_CATCH):
            pass
        elif k is K.NONE_END:
            for sf in node.incoming:
                rule(f"{nid}_{sf}", *_consume(sf), "end")
        elif k is K.TASK:
            for sf in node.incoming:
                g, e = _consume(sf)
                rule(f"{nid}_start_{sf}", g, e + (ProduceToken(nid),), "start")
            rule(f"{nid}_end", (TokenAt(nid),), (ConsumeToken(nid),) + _produce(node.outgoing), "end_activity")
        elif k is K.CALL:
            init = instantiation_tokens(model, node.called_process)
            spawn = SpawnChild(node.called_process, nid, init)
            for sf in node.incoming:
                g, e = _consume(sf)
                rule(f"{nid}_start_{sf}", g, e + (spawn,), "start")
            if pid in self.startless and not node.incoming:
                rule(f"{nid}_start_fromNode", (TokenAt(nid),), (ConsumeToken(nid), spawn), "start")
            rule(
                f"{nid}_end",
                (ChildTerminated(nid),),
                (DeleteTerminatedChild(nid),) + _produce(node.outgoing),
                "end_activity",
            )
        elif k is K.PARALLEL_GATEWAY:
            rule(
                nid,
                [TokenAt(sf) for sf in node.incoming],
                [ConsumeToken(sf) for sf in node.incoming] + list(_produce(node.outgoing)),
                "gateway",
            )
            if pid in self.startless and not node.incoming:
                rule(f"{nid}_fromNode_all", (TokenAt(nid),), (ConsumeToken(nid),) + _produce(node.outgoing), "gateway")
        elif k is K.EXCLUSIVE_GATEWAY:
            for sf in node.incoming:
                for o in node.outgoing:
                    g, e = _consume(sf)
                    rule(f"{nid}_{sf}_{o}", g, e + (ProduceToken(o),), "gateway")
            if pid in self.startless and not node.incoming:
                for o in node.outgoing:
                    rule(f"{nid}_fromNode_{o}", (TokenAt(nid),), (ConsumeToken(nid), ProduceToken(o)), "gateway")
        elif k in (K.MESSAGE_THROW, K.MESSAGE_END):
            optional, spawns = [], []
            for mf in model.outgoing_messages(nid):
                target = model.nodes[mf.target]
                tpid = model.owner[target.id]
                if target.kind is K.MESSAGE_CATCH:
                    if target.incoming:
                        optional.append(OptionalMessageSend(mf.id, target.incoming, tpid))
                    else:
                        self.diagnostics.append(
                            Diagnostic(WARNING, target.id, f"message catch event without incoming flow; {mf.id} is never delivered")
                        )
                elif target.kind is K.MESSAGE_START:
                    spawns.append(SpawnTopLevel(tpid, tuple((f, 1) for f in target.outgoing), mf.id))
            produced = _produce(node.outgoing) if k is K.MESSAGE_THROW else ()
            for sf in node.incoming:
                g, e = _consume(sf)
                rule(f"{nid}_{sf}", g, e + produced + tuple(spawns), "end" if k is K.MESSAGE_END else "event", optional)
        elif k is K.MESSAGE_CATCH:
            for mf in model.incoming_messages(nid):
                for sf in node.incoming:
                    rule(
                        f"{nid}_{mf.id}_{sf}",
                        (MessageAt(mf.id), TokenAt(sf)),
                        (ConsumeMessage(mf.id), ConsumeToken(sf)) + _produce(node.outgoing),
                        "event",
                    )
        elif k is K.LINK_THROW:
            targets = [
                f
                for c in model.process_map[pid].flow_nodes
                if c.kind is K.LINK_CATCH and c.name == node.name
                for f in c.outgoing
            ]
            if not any(c.kind is K.LINK_CATCH and c.name == node.name for c in model.process_map[pid].flow_nodes):
                self.diagnostics.append(Diagnostic(WARNING, nid, f"no link catch event named {node.name!r}; tokens are dropped"))
            for sf in node.incoming:
                g, e = _consume(sf)
                rule(f"{nid}_{sf}", g, e + _produce(targets), "event")
        elif k in (K.SIGNAL_THROW, K.SIGNAL_END):
            universal = []
            for other in sorted(model.nodes.values(), key=lambda n: n.id):
                if other.name != node.name:
                    continue
                if other.kind is K.SIGNAL_CATCH:
                    universal.extend(SignalCatch(sf, other.outgoing) for sf in other.incoming)
                elif other.kind is K.SIGNAL_START:
                    universal.append(SignalSpawn(model.owner[other.id], other.outgoing))
            produced = _produce(node.outgoing) if k is K.SIGNAL_THROW else ()
            for sf in node.incoming:
                g, e = _consume(sf)
                rule(f"{nid}_{sf}", g, e + produced, "end" if k is K.SIGNAL_END else "event", universal=universal)
        elif k is K.TERMINATE_END:
            for sf in node.incoming:
                rule(
                    f"{nid}_{sf}",
                    (TokenAt(sf),),
                    (ConsumeToken(sf), DeleteAllTokens(), SetTerminated(), TerminateSubtree()),
                    "end",
                )
        else:
            raise UnsupportedElement(k.value, nid)
        return out


def generate_rules(model: BpmnModel) -> RuleSet:
    """Run the transformation; rules are ordered by provenance node id
    with the generic termination rule last."""
    gen = _Generator(model)
    rules = []
    for node in sorted(model.nodes.values(), key=lambda n: n.id):
        rules.extend(gen.rules_for(node, model.owner[node.id]))
    rules.append(_termination_rule())
    rules = _unique_names(rules)
    return RuleSet(rules, generate_start_state(model), model, gen.diagnostics)


def _unique_names(rules):
    # ids like "a_b"+"c" and "a"+"b_c" can collide once joined
    taken = set()
    out = []
    for r in rules:
        name, n = r.name, 1
        while name in taken:
            n += 1
            name = f"{r.name}__{n}"
        taken.add(name)
        if name != r.name:
            r = replace(r, name=name)
        out.append(r)
    return out


def expected_rule_count(model: BpmnModel) -> int:
    """Closed-form rule count from node degrees (excludes the start-less
    subprocess ``fromNode`` extras)."""
    total = 1
    for n in model.nodes.values():
        k = n.kind
        if k is K.NONE_END or k in (K.MESSAGE_THROW, K.MESSAGE_END, K.SIGNAL_THROW, K.SIGNAL_END, K.TERMINATE_END, K.LINK_THROW):
            total += len(n.incoming)
        elif k in ACTIVITY_KINDS:
            total += len(n.incoming) + 1
        elif k is K.PARALLEL_GATEWAY:
            total += 1
        elif k is K.EXCLUSIVE_GATEWAY:
            total += len(n.incoming) * len(n.outgoing)
        elif k is K.MESSAGE_CATCH:
            total += len(model.incoming_messages(n.id)) * len(n.incoming)
    return total
