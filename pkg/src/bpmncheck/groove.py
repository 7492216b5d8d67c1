"""Export of a generated rule set as a Groove grammar directory (``.gps``).

Graphs use the GXL dialect Groove reads: every node type and flag is a
self-edge label, attributes are edges to data nodes labelled
``string:"..."``, and rule roles are label prefixes (``del:``, ``new:``,
``not:``). Quantified parts hang off ``forall:``/``existsx:`` nodes via
``@`` edges.
"""

from __future__ import annotations

import os
import xml.etree.ElementTree as ET

from .hot import RuleSet
from .rules import (
    ChildTerminated,
    ConsumeMessage,
    ConsumeToken,
    DeleteAllTokens,
    DeleteTerminatedChild,
    MessageAt,
    NoChildren,
    NoTokenAt,
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
from .state import ExecutionState, Lifecycle, Snapshot, counts, snapshot

GXL_NS = "http://www.gupro.de/GXL/gxl-1.0.dtd"
GRAMMAR_VERSION = "3.7"
START_GRAPH = "start"


class UnrepresentableRule(ValueError):
    pass


class _Graph:
    def __init__(self, gid, role):
        self.gid = gid
        self.role = role
        self.nodes = []
        self.edges = []
        self._values = {}

    def node(self, *labels):
        nid = f"n{len(self.nodes)}"
        self.nodes.append(nid)
        for label in labels:
            self.edge(nid, nid, label)
        return nid

    def edge(self, src, tgt, label):
        self.edges.append((src, tgt, label))

    def value(self, text):
        """Shared data node for a string constant."""
        if text not in self._values:
            self._values[text] = self.node(f'string:"{text}"')
        return self._values[text]

    def attr(self, nid, name, text, prefix=""):
        self.edge(nid, self.value(text), prefix + name)

    def to_xml(self) -> bytes:
        ET.register_namespace("", GXL_NS)
        q = lambda tag: f"{{{GXL_NS}}}{tag}"  # noqa: E731
        root = ET.Element(q("gxl"))
        graph = ET.SubElement(root, q("graph"), role=self.role, edgeids="false", edgemode="directed", id=self.gid)
        for nid in self.nodes:
            ET.SubElement(graph, q("node"), id=nid)
        for src, tgt, label in self.edges:
            e = ET.SubElement(graph, q("edge"), {"from": src, "to": tgt})
            a = ET.SubElement(e, q("attr"), name="label")
            ET.SubElement(a, q("string")).text = label
        ET.indent(root)
        return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


# --- start graph -----------------------------------------------------------


def _emit_snapshot(g, s: Snapshot, parent=None):
    n = g.node("type:ProcessSnapshot")
    g.attr(n, "name", s.process)
    g.attr(n, "state", s.lifecycle.value)
    if parent is not None:
        g.edge(parent, n, "subprocess")
        g.attr(n, "spawnedBy", s.spawned_by)
    for elem, c in s.tokens:
        for _ in range(c):
            t = g.node("type:Token")
            g.edge(n, t, "tokens")
            g.attr(t, "elementID", elem)
    for mf, c in s.messages:
        for _ in range(c):
            m = g.node("type:Message")
            g.edge(n, m, "messages")
            g.attr(m, "elementID", mf)
    for child in s.children:
        _emit_snapshot(g, child, n)


def start_graph(state: ExecutionState) -> _Graph:
    g = _Graph(START_GRAPH, "graph")
    for s in state.snapshots:
        _emit_snapshot(g, s)
    return g


def read_start_graph(path) -> ExecutionState:
    """Rebuild an execution state from a start graph written by
    :func:`export_gps`."""
    tree = ET.parse(path)
    ns = {"g": GXL_NS}
    labels, edges = {}, []
    for e in tree.getroot().iterfind(".//g:edge", ns):
        text = e.find("g:attr/g:string", ns).text
        src, tgt = e.get("from"), e.get("to")
        if src == tgt:
            labels[src] = text
        else:
            edges.append((src, tgt, text))
    out = {}
    for src, tgt, label in edges:
        out.setdefault(src, []).append((label, tgt))

    def value(nid):
        return labels[nid][len('string:"') : -1]

    def attr(nid, name):
        return next((value(t) for lbl, t in out.get(nid, []) if lbl == name), None)

    def build(nid):
        toks, msgs, kids = [], [], []
        for lbl, t in out.get(nid, []):
            if lbl == "tokens":
                toks.append((attr(t, "elementID"), 1))
            elif lbl == "messages":
                msgs.append((attr(t, "elementID"), 1))
            elif lbl == "subprocess":
                kids.append(build(t))
        return snapshot(
            attr(nid, "name"),
            counts(toks),
            counts(msgs),
            kids,
            attr(nid, "spawnedBy"),
            Lifecycle(attr(nid, "state")),
        )

    children = {t for _, t, lbl in edges if lbl == "subprocess"}
    roots = [n for n, lbl in labels.items() if lbl == "type:ProcessSnapshot" and n not in children]
    return ExecutionState.of(build(n) for n in roots)


# --- rules -----------------------------------------------------------------


def _tokens(g, owner, elem, count, prefix="", quant=None):
    for _ in range(count):
        t = g.node(f"{prefix}type:Token")
        g.edge(owner, t, f"{prefix}tokens")
        g.attr(t, "elementID", elem, prefix if prefix != "del:" else "")
        if quant is not None:
            g.edge(t, quant, "@")


def _new_snapshot(g, process, tokens, parent=None, spawned_by=None):
    n = g.node("new:type:ProcessSnapshot")
    g.attr(n, "name", process, "new:")
    g.attr(n, "state", Lifecycle.RUNNING.value, "new:")
    if parent is not None:
        g.edge(parent, n, "new:subprocess")
        g.attr(n, "spawnedBy", spawned_by, "new:")
    for elem, c in tokens:
        _tokens(g, n, elem, c, "new:")
    return n


def rule_graph(rule: Rule) -> _Graph:
    g = _Graph(rule.name, "rule")
    focal = g.node("type:ProcessSnapshot")
    if rule.focal_process is not None:
        g.attr(focal, "name", rule.focal_process)
    consumed = {}
    for e in rule.effects:
        if isinstance(e, ConsumeToken):
            consumed[e.element] = consumed.get(e.element, 0) + e.count
    running = False
    for guard in rule.guards:
        if isinstance(guard, TokenAt):
            extra = max(0, guard.min_count - consumed.get(guard.element, 0))
            _tokens(g, focal, guard.element, extra)
        elif isinstance(guard, NoTokenAt):
            _tokens(g, focal, guard.element, 1, "not:")
        elif isinstance(guard, MessageAt):
            pass  # matched by the ConsumeMessage eraser
        elif isinstance(guard, SnapshotRunning):
            running = True
        elif isinstance(guard, NoTokensAtAll):
            t = g.node("not:type:Token")
            g.edge(focal, t, "not:tokens")
        elif isinstance(guard, NoChildren):
            c = g.node("not:type:ProcessSnapshot")
            g.edge(focal, c, "not:subprocess")
        elif isinstance(guard, ChildTerminated):
            pass  # matched by the DeleteTerminatedChild eraser
        else:
            raise UnrepresentableRule(f"{rule.name}: guard {guard!r}")
    terminating = any(isinstance(e, SetTerminated) for e in rule.effects)
    if running or terminating:
        g.attr(focal, "state", Lifecycle.RUNNING.value, "del:" if terminating else "")
    for e in rule.effects:
        if isinstance(e, ConsumeToken):
            _tokens(g, focal, e.element, e.count, "del:")
        elif isinstance(e, ProduceToken):
            _tokens(g, focal, e.element, e.count, "new:")
        elif isinstance(e, ConsumeMessage):
            m = g.node("del:type:Message")
            g.edge(focal, m, "del:messages")
            g.attr(m, "elementID", e.message_flow)
        elif isinstance(e, SetTerminated):
            g.attr(focal, "state", Lifecycle.TERMINATED.value, "new:")
        elif isinstance(e, DeleteAllTokens):
            q = g.node("forall:")
            t = g.node("del:type:Token")
            g.edge(focal, t, "del:tokens")
            g.edge(t, q, "@")
        elif isinstance(e, TerminateSubtree):
            q = g.node("forall:")
            c = g.node("type:ProcessSnapshot")
            g.edge(focal, c, "subprocess")
            g.edge(c, q, "@")
            g.attr(c, "state", Lifecycle.TERMINATED.value, "new:")
            inner = g.node("forall:")
            g.edge(inner, q, "in")
            t = g.node("del:type:Token")
            g.edge(c, t, "del:tokens")
            g.edge(t, inner, "@")
        elif isinstance(e, DeleteTerminatedChild):
            c = g.node("del:type:ProcessSnapshot")
            g.edge(focal, c, "del:subprocess")
            g.attr(c, "spawnedBy", e.spawned_by)
            g.attr(c, "state", Lifecycle.TERMINATED.value)
        elif isinstance(e, SpawnChild):
            _new_snapshot(g, e.process, e.initial_tokens, focal, e.spawned_by)
        elif isinstance(e, SpawnTopLevel):
            _new_snapshot(g, e.process, e.initial_tokens)
        else:
            raise UnrepresentableRule(f"{rule.name}: effect {e!r}")
    for block in rule.optional_blocks:
        if not isinstance(block, OptionalMessageSend):
            raise UnrepresentableRule(f"{rule.name}: block {block!r}")
        for elem in block.eligibility:
            q = g.node("existsx:")
            r = g.node("type:ProcessSnapshot")
            g.edge(r, q, "@")
            g.attr(r, "name", block.target_process)
            g.attr(r, "state", Lifecycle.RUNNING.value)
            t = g.node("type:Token")
            g.edge(r, t, "tokens")
            g.edge(t, q, "@")
            g.attr(t, "elementID", elem)
            m = g.node("new:type:Message")
            g.edge(r, m, "new:messages")
            g.edge(m, q, "@")
            g.attr(m, "elementID", block.message_flow, "new:")
    for block in rule.universal_blocks:
        if isinstance(block, SignalCatch):
            q = g.node("forall:")
            r = g.node("type:ProcessSnapshot")
            g.edge(r, q, "@")
            t = g.node("del:type:Token")
            g.edge(r, t, "del:tokens")
            g.edge(t, q, "@")
            g.attr(t, "elementID", block.incoming)
            for o in block.outgoing:
                n = g.node("new:type:Token")
                g.edge(r, n, "new:tokens")
                g.edge(n, q, "@")
                g.attr(n, "elementID", o, "new:")
        elif isinstance(block, SignalSpawn):
            _new_snapshot(g, block.process, [(o, 1) for o in block.outgoing])
        else:
            raise UnrepresentableRule(f"{rule.name}: block {block!r}")
    return g


def system_properties(ruleset: RuleSet) -> str:
    return "\n".join(
        [
            f"grammarVersion={GRAMMAR_VERSION}",
            f"startGraph={START_GRAPH}",
            f"location={ruleset.model.name}",
            "",
        ]
    )


def export_gps(ruleset: RuleSet, out_dir) -> list[str]:
    """Write ``start.gst``, one ``<rule>.gpr`` per rule and
    ``system.properties`` into ``out_dir``; return the written paths."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def put(name, data: bytes):
        path = os.path.join(out_dir, name)
        with open(path, "wb") as fh:
            fh.write(data)
        written.append(path)

    put(f"{START_GRAPH}.gst", start_graph(ruleset.start_state).to_xml())
    for rule in ruleset.rules:
        put(f"{rule.name}.gpr", rule_graph(rule).to_xml())
    put("system.properties", system_properties(ruleset).encode())
    return written
