"""Generated-rule IR: guards (with negative conditions), effects,
optional message sends and universally quantified signal blocks, plus
their application to execution states."""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

from .model import ERROR, BpmnModel, Diagnostic, NodeKind
from .state import RUNNING, TERMINATED, ExecutionState, Snapshot, counts, replace_at


class IllFormedRule(ValueError):
    pass


# --- guards ----------------------------------------------------------------


@dataclass(frozen=True)
class TokenAt:
    element: str
    min_count: int = 1


@dataclass(frozen=True)
class NoTokenAt:
    element: str


@dataclass(frozen=True)
class MessageAt:
    message_flow: str


@dataclass(frozen=True)
class SnapshotRunning:
    pass


@dataclass(frozen=True)
class NoTokensAtAll:
    pass


@dataclass(frozen=True)
class NoChildren:
    pass


@dataclass(frozen=True)
class ChildTerminated:
    spawned_by: str


# --- effects ---------------------------------------------------------------


@dataclass(frozen=True)
class ConsumeToken:
    element: str
    count: int = 1


@dataclass(frozen=True)
class ProduceToken:
    element: str
    count: int = 1


@dataclass(frozen=True)
class ConsumeMessage:
    message_flow: str


@dataclass(frozen=True)
class SetTerminated:
    pass


@dataclass(frozen=True)
class DeleteAllTokens:
    pass


@dataclass(frozen=True)
class TerminateSubtree:
    pass


@dataclass(frozen=True)
class DeleteTerminatedChild:
    spawned_by: str


@dataclass(frozen=True)
class SpawnChild:
    process: str
    spawned_by: str
    initial_tokens: tuple = ()


@dataclass(frozen=True)
class SpawnTopLevel:
    process: str
    initial_tokens: tuple = ()
    incoming_message: str | None = None


# --- quantified blocks -----------------------------------------------------


@dataclass(frozen=True)
class OptionalMessageSend:
    message_flow: str
    eligibility: tuple[str, ...]
    target_process: str


@dataclass(frozen=True)
class SignalCatch:
    incoming: str
    outgoing: tuple[str, ...]


@dataclass(frozen=True)
class SignalSpawn:
    process: str
    outgoing: tuple[str, ...]


SIMPLE_GUARDS = (TokenAt, NoTokenAt)
SIMPLE_EFFECTS = (ConsumeToken, ProduceToken)


@dataclass(frozen=True)
class Rule:
    name: str
    source_node: str | None
    focal_process: str | None
    guards: tuple = ()
    effects: tuple = ()
    optional_blocks: tuple[OptionalMessageSend, ...] = ()
    universal_blocks: tuple = ()
    role: str = field(default="", compare=False)

    @property
    def is_simple(self) -> bool:
        """True for pure token moves on the focal snapshot."""
        return (
            self.focal_process is not None
            and not self.optional_blocks
            and not self.universal_blocks
            and all(isinstance(g, SIMPLE_GUARDS) for g in self.guards)
            and all(isinstance(e, SIMPLE_EFFECTS) for e in self.effects)
        )

    def compile_simple(self):
        """``(required, forbidden, delta)`` for the token-move kernel.

        ``required`` merges TokenAt minimums with consumed counts, so a
        compiled rule can never drive a count negative.
        """
        need, delta = {}, {}
        forbidden = set()
        for g in self.guards:
            if isinstance(g, TokenAt):
                need[g.element] = max(need.get(g.element, 0), g.min_count)
            else:
                forbidden.add(g.element)
        for e in self.effects:
            d = -e.count if isinstance(e, ConsumeToken) else e.count
            delta[e.element] = delta.get(e.element, 0) + d
        for k, d in delta.items():
            if d < 0:
                need[k] = max(need.get(k, 0), -d)
        return (
            tuple(sorted(need.items())),
            tuple(sorted(forbidden)),
            tuple(sorted((k, d) for k, d in delta.items() if d)),
        )

    def to_dict(self) -> dict:
        def item(x):
            return {"type": type(x).__name__, **asdict(x)}

        return {
            "name": self.name,
            "sourceNode": self.source_node,
            "focalProcess": self.focal_process,
            "role": self.role,
            "guards": [item(g) for g in self.guards],
            "effects": [item(e) for e in self.effects],
            "optionalBlocks": [item(b) for b in self.optional_blocks],
            "universalBlocks": [item(b) for b in self.universal_blocks],
        }


def dump_rules(rules, path):
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in rules], fh, indent=2)


# ---------------------------------------------------------------------------
# application


@dataclass(frozen=True)
class Binding:
    focal: tuple
    recipients: tuple = ()


class _Node:
    """Mutable snapshot used while applying a rule."""

    __slots__ = ("process", "spawned_by", "lifecycle", "tokens", "messages", "children")

    def __init__(self, s: Snapshot):
        self.process = s.process
        self.spawned_by = s.spawned_by
        self.lifecycle = s.lifecycle
        self.tokens = dict(s.tokens)
        self.messages = dict(s.messages)
        self.children = [_Node(c) for c in s.children]

    @classmethod
    def fresh(cls, process, tokens, spawned_by=None):
        n = cls.__new__(cls)
        n.process = process
        n.spawned_by = spawned_by
        n.lifecycle = RUNNING
        n.tokens = dict(counts(tokens))
        n.messages = {}
        n.children = []
        return n

    def freeze(self) -> Snapshot:
        return Snapshot(
            self.process,
            self.spawned_by,
            self.lifecycle,
            tuple(sorted((k, v) for k, v in self.tokens.items() if v)),
            tuple(sorted((k, v) for k, v in self.messages.items() if v)),
            tuple(sorted(c.freeze() for c in self.children)),
        )


def _thaw(state):
    roots = [_Node(s) for s in state.snapshots]
    index = {}
    stack = [((i,), n) for i, n in enumerate(roots)]
    while stack:
        path, n = stack.pop()
        index[path] = n
        stack.extend((path + (j,), c) for j, c in enumerate(n.children))
    return roots, index


def _add(d, key, amount):
    v = d.get(key, 0) + amount
    if v < 0:
        raise IllFormedRule(f"count of {key!r} would become negative")
    if v:
        d[key] = v
    else:
        d.pop(key, None)


def guards_hold(rule: Rule, s: Snapshot) -> bool:
    if rule.focal_process is not None and s.process != rule.focal_process:
        return False
    toks = dict(s.tokens)
    for g in rule.guards:
        t = type(g)
        if t is TokenAt:
            if toks.get(g.element, 0) < g.min_count:
                return False
        elif t is NoTokenAt:
            if g.element in toks:
                return False
        elif t is MessageAt:
            if s.message_count(g.message_flow) < 1:
                return False
        elif t is SnapshotRunning:
            if s.lifecycle != RUNNING:
                return False
        elif t is NoTokensAtAll:
            if s.tokens:
                return False
        elif t is NoChildren:
            if s.children:
                return False
        elif t is ChildTerminated:
            if not any(
                c.spawned_by == g.spawned_by and c.lifecycle == TERMINATED for c in s.children
            ):
                return False
        else:
            raise IllFormedRule(f"unknown guard {g!r}")
    # consumption always needs its tokens present, even without a guard
    for e in rule.effects:
        if type(e) is ConsumeToken and toks.get(e.element, 0) < e.count:
            return False
        if type(e) is ConsumeMessage and s.message_count(e.message_flow) < 1:
            return False
    return True


def _apply_effects(rule, node, roots):
    for e in rule.effects:
        t = type(e)
        if t is ConsumeToken:
            _add(node.tokens, e.element, -e.count)
        elif t is ProduceToken:
            _add(node.tokens, e.element, e.count)
        elif t is ConsumeMessage:
            _add(node.messages, e.message_flow, -1)
        elif t is SetTerminated:
            node.lifecycle = TERMINATED
        elif t is DeleteAllTokens:
            node.tokens.clear()
        elif t is TerminateSubtree:
            # children end up Terminated and empty, then are dropped
            node.children.clear()
        elif t is DeleteTerminatedChild:
            for i, c in enumerate(node.children):
                if c.spawned_by == e.spawned_by and c.lifecycle == TERMINATED:
                    del node.children[i]
                    break
            else:
                raise IllFormedRule(f"no terminated child spawned by {e.spawned_by!r}")
        elif t is SpawnChild:
            node.children.append(_Node.fresh(e.process, e.initial_tokens, e.spawned_by))
        elif t is SpawnTopLevel:
            roots.append(_Node.fresh(e.process, e.initial_tokens))
        else:
            raise IllFormedRule(f"unknown effect {e!r}")


def _check_structure(rule):
    for x in rule.guards:
        if isinstance(x, TokenAt) and x.min_count < 1:
            raise IllFormedRule(f"{rule.name}: TokenAt count must be >= 1")
    for x in rule.effects:
        if isinstance(x, (ConsumeToken, ProduceToken)) and x.count < 1:
            raise IllFormedRule(f"{rule.name}: token effect count must be >= 1")
    for b in rule.optional_blocks:
        if not b.eligibility:
            raise IllFormedRule(f"{rule.name}: optional send {b.message_flow} has no eligibility flows")


def apply_simple(rule: Rule, state: ExecutionState):
    """Fast path for token-move rules; yields ``(successor, binding)``."""
    need, forbidden, delta = rule.compile_simple()
    for path, s in state.walk():
        if s.process != rule.focal_process or not s.tokens:
            continue
        toks = dict(s.tokens)
        if any(toks.get(k, 0) < m for k, m in need) or any(k in toks for k in forbidden):
            continue
        for k, d in delta:
            v = toks.get(k, 0) + d
            if v:
                toks[k] = v
            else:
                del toks[k]
        new = s._replace(tokens=tuple(sorted(toks.items())))
        yield replace_at(state, path, new), Binding(path)


def apply_rule(rule: Rule, state: ExecutionState) -> set:
    """All one-step successors of ``state`` under ``rule``.

    Returns a set of ``(ExecutionState, Binding)`` pairs; the empty set
    means the rule is not applicable.
    """
    _check_structure(rule)
    if rule.is_simple:
        return set(apply_simple(rule, state))
    out = set()
    for path, s in state.walk():
        if not guards_hold(rule, s):
            continue
        # quantified parts match against the pre-state
        choices = []
        for block in rule.optional_blocks:
            elig = set(block.eligibility)
            found = [
                p
                for p, r in state.walk()
                if r.process == block.target_process
                and r.lifecycle == RUNNING
                and any(k in elig for k, _ in r.tokens)
            ]
            choices.append(found or [None])
        catches = []
        for block in rule.universal_blocks:
            if isinstance(block, SignalCatch):
                for p, r in state.walk():
                    n = r.token_count(block.incoming)
                    if n:
                        catches.append((p, block, n))
        for combo in itertools.product(*choices):
            roots, index = _thaw(state)
            focal = index[path]
            targets = [index[p] if p is not None else None for p in combo]
            caught = [(index[p], b, n) for p, b, n in catches]
            _apply_effects(rule, focal, roots)
            for node, block, n in caught:
                _add(node.tokens, block.incoming, -n)
                for o in block.outgoing:
                    _add(node.tokens, o, n)
            for block in rule.universal_blocks:
                if isinstance(block, SignalSpawn):
                    roots.append(_Node.fresh(block.process, [(o, 1) for o in block.outgoing]))
            for block, node in zip(rule.optional_blocks, targets):
                if node is not None:
                    _add(node.messages, block.message_flow, 1)
            succ = ExecutionState(tuple(sorted(n.freeze() for n in roots)))
            out.add((succ, Binding(path, tuple(combo))))
    return out


def successors(rule: Rule, state: ExecutionState) -> set:
    """Distinct successor states of ``state`` under ``rule``."""
    return {s for s, _ in apply_rule(rule, state)}


# ---------------------------------------------------------------------------
# well-formedness


def check_rule_wellformed(rule: Rule, model: BpmnModel) -> list[Diagnostic]:
    diags = []
    nodes, flows = model.nodes, model.sequence_flows
    mflows, procs = model.message_flow_map, model.process_map

    def bad(what, ident):
        diags.append(Diagnostic(ERROR, rule.source_node, f"rule {rule.name}: unknown {what} {ident!r}"))

    def token_pos(ident):
        if ident not in flows and ident not in nodes:
            bad("token position", ident)

    if rule.source_node is not None and rule.source_node not in nodes:
        bad("source node", rule.source_node)
    if rule.focal_process is not None and rule.focal_process not in procs:
        bad("process", rule.focal_process)
    for g in rule.guards:
        if isinstance(g, (TokenAt, NoTokenAt)):
            token_pos(g.element)
        elif isinstance(g, MessageAt) and g.message_flow not in mflows:
            bad("message flow", g.message_flow)
        elif isinstance(g, ChildTerminated) and g.spawned_by not in nodes:
            bad("call activity", g.spawned_by)
    if not rule.effects:
        diags.append(Diagnostic(ERROR, rule.source_node, f"rule {rule.name}: no effects"))
    guarded = {g.element: g.min_count for g in rule.guards if isinstance(g, TokenAt)}
    for e in rule.effects:
        if isinstance(e, (ConsumeToken, ProduceToken)):
            token_pos(e.element)
            if isinstance(e, ConsumeToken) and guarded.get(e.element, 0) < e.count:
                diags.append(
                    Diagnostic(ERROR, rule.source_node, f"rule {rule.name}: consumes {e.element} without guard")
                )
        elif isinstance(e, ConsumeMessage) and e.message_flow not in mflows:
            bad("message flow", e.message_flow)
        elif isinstance(e, (SpawnChild, SpawnTopLevel)):
            if e.process not in procs:
                bad("process", e.process)
            for k, _ in e.initial_tokens:
                token_pos(k)
            if isinstance(e, SpawnChild) and (
                e.spawned_by not in nodes or nodes[e.spawned_by].kind is not NodeKind.CALL
            ):
                bad("call activity", e.spawned_by)
    for b in rule.optional_blocks:
        if b.message_flow not in mflows:
            bad("message flow", b.message_flow)
        if b.target_process not in procs:
            bad("process", b.target_process)
        if not b.eligibility:
            diags.append(
                Diagnostic(ERROR, rule.source_node, f"rule {rule.name}: empty eligibility for {b.message_flow}")
            )
        for f in b.eligibility:
            if f not in flows:
                bad("sequence flow", f)
    for b in rule.universal_blocks:
        ids = (b.incoming, *b.outgoing) if isinstance(b, SignalCatch) else b.outgoing
        for f in ids:
            if f not in flows:
                bad("sequence flow", f)
        if isinstance(b, SignalSpawn) and b.process not in procs:
            bad("process", b.process)
    return diags
