"""Atomic propositions over execution states and the general BPMN checks
(safeness and the three parts of soundness)."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .ctl import AF, Atom, Graph, Labeling, check_ctl, path_to
from .model import ACTIVITY_KINDS, END_KINDS, BpmnModel
from .rules import ConsumeToken
from .state import ExecutionState, Lifecycle, Snapshot, is_all_terminated

UNSAFE = "Unsafe"
ALL_TERMINATED = "AllTerminated"


class UnknownElementId(KeyError):
    pass


@dataclass(frozen=True)
class SnapshotPattern:
    process: str | None = None
    lifecycle: Lifecycle | None = None
    tokens: tuple[tuple[str, int], ...] = ()
    no_tokens: tuple[str, ...] = ()
    messages: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if any(c < 1 for _, c in self.tokens) or any(c < 1 for _, c in self.messages):
            raise ValueError("required counts must be at least 1")
        if {e for e, _ in self.tokens} & set(self.no_tokens):
            raise ValueError("an element cannot be both required and forbidden")

    def matches(self, s: Snapshot) -> bool:
        if self.process is not None and s.process != self.process:
            return False
        if self.lifecycle is not None and s.lifecycle != self.lifecycle:
            return False
        toks = dict(s.tokens)
        if any(toks.get(e, 0) < c for e, c in self.tokens):
            return False
        if any(toks.get(e, 0) for e in self.no_tokens):
            return False
        msgs = dict(s.messages)
        return all(msgs.get(m, 0) >= c for m, c in self.messages)


@dataclass(frozen=True)
class Proposition:
    """Holds in a state when its patterns match pairwise distinct
    snapshots, or, for native propositions, when ``predicate`` holds."""

    name: str
    patterns: tuple[SnapshotPattern, ...] = ()
    predicate: Callable[[ExecutionState], bool] | None = field(default=None, compare=False)


def match_proposition(prop: Proposition, state: ExecutionState) -> bool:
    if prop.predicate is not None:
        return prop.predicate(state)
    snaps = [s for _, s in state.walk()]
    candidates = [[i for i, s in enumerate(snaps) if p.matches(s)] for p in prop.patterns]
    if any(not c for c in candidates):
        return False
    # injective assignment by backtracking, most constrained pattern first
    order = sorted(range(len(candidates)), key=lambda i: len(candidates[i]))
    used = set()

    def assign(k):
        if k == len(order):
            return True
        for i in candidates[order[k]]:
            if i not in used:
                used.add(i)
                if assign(k + 1):
                    return True
                used.discard(i)
        return False

    return assign(0)


def builtin_propositions(model: BpmnModel) -> list[Proposition]:
    """``Unsafe`` once per sequence flow, plus ``AllTerminated``."""
    props = [
        Proposition(UNSAFE, (SnapshotPattern(tokens=((sf, 2),)),)) for sf in sorted(model.sequence_flows)
    ]
    props.append(Proposition(ALL_TERMINATED, predicate=is_all_terminated))
    return props


# --- loading ---------------------------------------------------------------


def _check_ids(model, pattern):
    known = model.element_ids()
    mflows = model.message_flow_map
    if pattern.process is not None and pattern.process not in model.process_map:
        raise UnknownElementId(pattern.process)
    for e in [e for e, _ in pattern.tokens] + list(pattern.no_tokens):
        if e not in known:
            raise UnknownElementId(e)
    for m, _ in pattern.messages:
        if m not in mflows:
            raise UnknownElementId(m)


def _lifecycle(text):
    if text is None or text == "":
        return None
    for lc in Lifecycle:
        if lc.value.lower() == str(text).lower():
            return lc
    raise ValueError(f"unknown lifecycle {text!r}")


def pattern_from_dict(d: dict) -> SnapshotPattern:
    return SnapshotPattern(
        process=d.get("process"),
        lifecycle=_lifecycle(d.get("lifecycle")),
        tokens=tuple(sorted((k, int(v)) for k, v in d.get("tokens", {}).items())),
        no_tokens=tuple(sorted(d.get("noTokens", []))),
        messages=tuple(sorted((k, int(v)) for k, v in d.get("messages", {}).items())),
    )


def propositions_from_dict(data: dict, model: BpmnModel | None = None) -> list[Proposition]:
    props = []
    for entry in data.get("propositions", []):
        patterns = tuple(pattern_from_dict(p) for p in entry.get("patterns", []))
        if model is not None:
            for p in patterns:
                _check_ids(model, p)
        props.append(Proposition(entry["name"], patterns))
    return props


def load_propositions(path, model: BpmnModel | None = None) -> list[Proposition]:
    with open(path) as fh:
        return propositions_from_dict(json.load(fh), model)


def annotation_propositions(model: BpmnModel) -> list[Proposition]:
    """Propositions from ``processSnapshot``/``token`` extension elements.

    Each ``processSnapshot`` becomes one pattern of the proposition named
    by its ``name`` attribute (falling back to its id); snapshots sharing a
    name form one multi-pattern proposition. Tokens nested in a snapshot
    add requirements: ``elementID`` with an optional ``count`` (default 1),
    or a prohibition when ``shouldExist="false"``. Tokens placed directly
    in a process form a pattern of a proposition named by their
    ``proposition`` attribute, or by the process id.
    """
    snaps = {}  # key -> [name, process, lifecycle, tokens, forbidden]
    order = []
    for a in model.annotations:
        if a.kind == "processSnapshot":
            key = ("snapshot", a.get("id"))
            name = a.get("name") or a.get("id")
            snaps[key] = [name, a.get("processID") or a.process, a.get("lifecycle"), {}, set()]
            order.append(key)
    for a in model.annotations:
        if a.kind != "token":
            continue
        if a.snapshot is not None:
            key = ("snapshot", a.snapshot)
        else:
            name = a.get("proposition") or a.process
            key = ("loose", name, a.process)
            if key not in snaps:
                snaps[key] = [name, a.process, None, {}, set()]
                order.append(key)
        entry = snaps[key]
        elem = a.get("elementID")
        if a.get("shouldExist", "true").lower() == "false":
            entry[4].add(elem)
        else:
            entry[3][elem] = entry[3].get(elem, 0) + int(a.get("count", "1"))
    grouped = {}
    for key in order:
        name, process, lifecycle, toks, forbidden = snaps[key]
        pattern = SnapshotPattern(
            process, _lifecycle(lifecycle), tuple(sorted(toks.items())), tuple(sorted(forbidden))
        )
        _check_ids(model, pattern)
        grouped.setdefault(name, []).append(pattern)
    return [Proposition(name, tuple(ps)) for name, ps in grouped.items()]


# --- labeling --------------------------------------------------------------


def _token_alternatives(props):
    """``{(element, min)}`` if every proposition is a single pattern
    requiring one token count and nothing else, else ``None``."""
    alts = set()
    for p in props:
        if p.predicate is not None or len(p.patterns) != 1:
            return None
        pat = p.patterns[0]
        if pat.process or pat.lifecycle or pat.no_tokens or pat.messages or len(pat.tokens) != 1:
            return None
        alts.add(pat.tokens[0])
    return alts


def label_states(lts, props) -> Labeling:
    """Label every LTS state with the names of propositions holding there.

    Propositions sharing a name are alternatives: the name holds when any
    of them matches.
    """
    by_name = {}
    for p in props:
        by_name.setdefault(p.name, []).append(p)
    labels = [set() for _ in lts.states]
    for name, group in by_name.items():
        alts = _token_alternatives(group)
        if alts is not None:
            by_elem = {}
            for e, c in alts:
                by_elem[e] = min(by_elem.get(e, c), c)

            def holds(state):
                return any(
                    c >= by_elem.get(e, 1 << 62) for _, s in state.walk() for e, c in s.tokens
                )

        else:

            def holds(state, group=group):
                return any(match_proposition(p, state) for p in group)

        for i, state in enumerate(lts.states):
            if holds(state):
                labels[i].add(name)
    return Labeling(frozenset(by_name), [frozenset(ls) for ls in labels])


# --- verdicts --------------------------------------------------------------


@dataclass
class Verdict:
    name: str
    holds: bool
    witness: list[str] | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"name": self.name, "holds": self.holds}
        if self.witness is not None:
            d["witness"] = list(self.witness)
        d.update(self.details)
        return d


def _builtin_labeling(lts):
    return label_states(lts, builtin_propositions(lts.ruleset.model))


def check_safeness(lts, labeling: Labeling | None = None) -> Verdict:
    labeling = labeling or _builtin_labeling(lts)
    bad = labeling.holds(UNSAFE)
    if not bad:
        return Verdict("safeness", True)
    w = path_to(Graph.from_lts(lts), bad)
    return Verdict("safeness", False, w.rules, {"witnessStates": w.states})


def check_option_to_complete(lts, labeling: Labeling | None = None) -> Verdict:
    labeling = labeling or _builtin_labeling(lts)
    res = check_ctl(lts, labeling, AF(Atom(ALL_TERMINATED)))
    if res.holds:
        return Verdict("optionToComplete", True)
    w = res.witness
    return Verdict("optionToComplete", False, w.rules, {"witnessStates": w.states, "loopStart": w.loop_start})


def _end_rules(ruleset):
    """End-event node id -> names of rules consuming a token there."""
    model = ruleset.model
    out = {}
    for r in ruleset.rules:
        if r.role == "end" and r.source_node and model.nodes[r.source_node].kind in END_KINDS:
            out.setdefault(r.source_node, set()).add(r.name)
    return out


def _leaves_work(rule, state) -> bool:
    """Whether ``rule`` can fire on a snapshot that keeps tokens or
    children afterwards (so that instance may reach its end again)."""
    consumed = [e.element for e in rule.effects if isinstance(e, ConsumeToken)]
    for _, s in state.walk():
        if s.process != rule.focal_process or not all(s.token_count(c) for c in consumed):
            continue
        if s.children or sum(c for _, c in s.tokens) > len(consumed):
            return True
    return False


def check_proper_completion(lts) -> Verdict:
    """No run executes the same end event twice within one instance.

    Instances are anonymous, so a firing only opens a violation when the
    firing snapshot still has tokens or children left; a second firing of
    the same end event reachable from there is reported.
    """
    g = Graph.from_lts(lts)
    rules = lts.ruleset.by_name()
    for node, names in sorted(_end_rules(lts.ruleset).items()):
        fired = [(a, r, b) for a, r, b in lts.transitions if r in names]
        if not fired:
            continue
        sources = {a for a, _, _ in fired}
        # states from which an end firing of this node is still reachable
        back = set(sources)
        queue = deque(sources)
        while queue:
            b = queue.popleft()
            for a in g.pre[b]:
                if a not in back:
                    back.add(a)
                    queue.append(a)
        first = {
            a: (r, b) for a, r, b in reversed(fired) if b in back and _leaves_work(rules[r], lts.states[a])
        }
        if not first:
            continue
        stem = path_to(g, set(first))
        a = stem.states[-1]
        r, b = first[a]
        tail = path_to(g, sources, start=b)
        second = next((r2, c2) for a2, r2, c2 in fired if a2 == tail.states[-1])
        rules = stem.rules + [r] + tail.rules + [second[0]]
        states = stem.states + tail.states + [second[1]]
        return Verdict("properCompletion", False, rules, {"endEvent": node, "witnessStates": states})
    return Verdict("properCompletion", True)


def check_no_dead_activities(lts) -> Verdict:
    fired = {r for _, r, _ in lts.transitions}
    starts = {}
    for r in lts.ruleset.rules:
        if r.role == "start":
            starts.setdefault(r.source_node, set()).add(r.name)
    model = lts.ruleset.model
    dead = sorted(
        n.id for n in model.nodes.values() if n.kind in ACTIVITY_KINDS and not (starts.get(n.id, set()) & fired)
    )
    return Verdict("noDeadActivities", not dead, None, {"deadActivities": dead})


def check_soundness(lts, labeling: Labeling | None = None) -> list[Verdict]:
    labeling = labeling or _builtin_labeling(lts)
    return [
        check_option_to_complete(lts, labeling),
        check_proper_completion(lts),
        check_no_dead_activities(lts),
    ]
