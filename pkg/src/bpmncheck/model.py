"""BPMN 2.0 collaboration model: types, XML ingestion, XML emission and
static validation for the supported element subset."""

from __future__ import annotations

import enum
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from functools import cached_property

BPMN_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"


class BpmnError(Exception):
    """Base class for model ingestion errors."""


class XmlMalformed(BpmnError):
    pass


class UnsupportedElement(BpmnError):
    def __init__(self, tag, element_id=None, detail=""):
        self.tag = tag
        self.element_id = element_id
        msg = f"unsupported BPMN element <{tag}>"
        if element_id:
            msg += f" (id={element_id!r})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DanglingReference(BpmnError):
    def __init__(self, ref, detail=""):
        self.ref = ref
        super().__init__(f"dangling reference {ref!r}" + (f": {detail}" if detail else ""))


class NodeKind(str, enum.Enum):
    NONE_START = "NoneStartEvent"
    NONE_END = "NoneEndEvent"
    TASK = "Task"
    CALL = "SubProcessCall"
    PARALLEL_GATEWAY = "ParallelGateway"
    EXCLUSIVE_GATEWAY = "ExclusiveGateway"
    MESSAGE_START = "MessageStartEvent"
    MESSAGE_THROW = "MessageIntermediateThrowEvent"
    MESSAGE_CATCH = "MessageIntermediateCatchEvent"
    MESSAGE_END = "MessageEndEvent"
    LINK_THROW = "LinkThrowEvent"
    LINK_CATCH = "LinkCatchEvent"
    SIGNAL_START = "SignalStartEvent"
    SIGNAL_THROW = "SignalIntermediateThrowEvent"
    SIGNAL_CATCH = "SignalIntermediateCatchEvent"
    SIGNAL_END = "SignalEndEvent"
    TERMINATE_END = "TerminateEndEvent"


START_KINDS = frozenset({NodeKind.NONE_START, NodeKind.MESSAGE_START, NodeKind.SIGNAL_START})
END_KINDS = frozenset(
    {NodeKind.NONE_END, NodeKind.MESSAGE_END, NodeKind.SIGNAL_END, NodeKind.TERMINATE_END}
)
ACTIVITY_KINDS = frozenset({NodeKind.TASK, NodeKind.CALL})
GATEWAY_KINDS = frozenset({NodeKind.PARALLEL_GATEWAY, NodeKind.EXCLUSIVE_GATEWAY})
MESSAGE_SENDERS = frozenset({NodeKind.MESSAGE_THROW, NodeKind.MESSAGE_END})
MESSAGE_RECEIVERS = frozenset({NodeKind.MESSAGE_START, NodeKind.MESSAGE_CATCH})


@dataclass(frozen=True)
class SequenceFlow:
    id: str
    source: str
    target: str


@dataclass(frozen=True)
class MessageFlow:
    id: str
    source: str
    target: str


@dataclass(frozen=True)
class FlowNode:
    id: str
    name: str
    kind: NodeKind
    incoming: tuple[str, ...] = ()
    outgoing: tuple[str, ...] = ()
    called_process: str | None = None


@dataclass(frozen=True)
class Process:
    id: str
    name: str
    flow_nodes: tuple[FlowNode, ...] = ()
    sequence_flows: tuple[SequenceFlow, ...] = ()

    def start_events(self, kind=None):
        kinds = START_KINDS if kind is None else {kind}
        return [n for n in self.flow_nodes if n.kind in kinds]


@dataclass(frozen=True)
class Annotation:
    """A raw ``processSnapshot`` or ``token`` extension element.

    ``process`` is the id of the enclosing process (if any) and
    ``snapshot`` the id of the enclosing ``processSnapshot`` element for
    tokens nested inside one.
    """

    kind: str
    attrs: tuple[tuple[str, str], ...]
    process: str | None = None
    snapshot: str | None = None

    def get(self, name, default=None):
        for k, v in self.attrs:
            if k == name:
                return v
        return default


@dataclass(frozen=True)
class BpmnModel:
    name: str
    processes: tuple[Process, ...] = ()
    message_flows: tuple[MessageFlow, ...] = ()
    annotations: tuple[Annotation, ...] = field(default=(), compare=False)

    @cached_property
    def nodes(self) -> dict[str, FlowNode]:
        return {n.id: n for p in self.processes for n in p.flow_nodes}

    @cached_property
    def sequence_flows(self) -> dict[str, SequenceFlow]:
        return {f.id: f for p in self.processes for f in p.sequence_flows}

    @cached_property
    def message_flow_map(self) -> dict[str, MessageFlow]:
        return {f.id: f for f in self.message_flows}

    @cached_property
    def process_map(self) -> dict[str, Process]:
        return {p.id: p for p in self.processes}

    @cached_property
    def owner(self) -> dict[str, str]:
        """Map every flow-node and sequence-flow id to its process id."""
        out = {}
        for p in self.processes:
            for n in p.flow_nodes:
                out[n.id] = p.id
            for f in p.sequence_flows:
                out[f.id] = p.id
        return out

    def node(self, node_id) -> FlowNode:
        return self.nodes[node_id]

    def outgoing_messages(self, node_id):
        return [m for m in self.message_flows if m.source == node_id]

    def incoming_messages(self, node_id):
        return [m for m in self.message_flows if m.target == node_id]

    def element_ids(self) -> set[str]:
        ids = set(self.nodes) | set(self.sequence_flows) | set(self.message_flow_map)
        return ids | set(self.process_map)

    def counts(self):
        """Element statistics: processes, flow nodes, gateways, flows."""
        nodes = [n for p in self.processes for n in p.flow_nodes]
        return {
            "processes": len(self.processes),
            "nodes": len(nodes),
            "gateways": sum(n.kind in GATEWAY_KINDS for n in nodes),
            "flows": sum(len(p.sequence_flows) for p in self.processes),
            "messageFlows": len(self.message_flows),
        }


def build_process(pid, name, nodes, flows) -> Process:
    """Assemble a process, deriving node incoming/outgoing lists from the
    sequence flows (in flow order)."""
    incoming = {n.id: [] for n in nodes}
    outgoing = {n.id: [] for n in nodes}
    for f in flows:
        for ref, table in ((f.source, outgoing), (f.target, incoming)):
            if ref not in table:
                raise DanglingReference(ref, f"sequence flow {f.id!r} in process {pid!r}")
        outgoing[f.source].append(f.id)
        incoming[f.target].append(f.id)
    built = tuple(
        FlowNode(
            n.id, n.name, n.kind, tuple(incoming[n.id]), tuple(outgoing[n.id]), n.called_process
        )
        for n in nodes
    )
    return Process(pid, name, built, tuple(flows))


# ---------------------------------------------------------------------------
# XML ingestion

TASK_TAGS = frozenset(
    {"task", "userTask", "serviceTask", "manualTask", "scriptTask", "sendTask", "businessRuleTask"}
)
# Non-flow elements that carry no execution semantics in the supported subset.
IGNORED_TAGS = frozenset(
    {
        "laneSet", "lane", "textAnnotation", "association", "dataObject",
        "dataObjectReference", "dataStoreReference", "documentation",
        "extensionElements", "ioSpecification", "property", "dataInputAssociation",
        "dataOutputAssociation", "group", "incoming", "outgoing", "category",
        "participant", "conversation", "conversationLink", "callConversation",
        "subConversation", "correlationKey", "ioBinding", "auditing", "monitoring",
    }
)
LOOP_TAGS = frozenset({"standardLoopCharacteristics", "multiInstanceLoopCharacteristics"})
_EVENT_KINDS = {
    ("startEvent", None): NodeKind.NONE_START,
    ("startEvent", "message"): NodeKind.MESSAGE_START,
    ("startEvent", "signal"): NodeKind.SIGNAL_START,
    ("endEvent", None): NodeKind.NONE_END,
    ("endEvent", "message"): NodeKind.MESSAGE_END,
    ("endEvent", "signal"): NodeKind.SIGNAL_END,
    ("endEvent", "terminate"): NodeKind.TERMINATE_END,
    ("intermediateThrowEvent", "message"): NodeKind.MESSAGE_THROW,
    ("intermediateThrowEvent", "link"): NodeKind.LINK_THROW,
    ("intermediateThrowEvent", "signal"): NodeKind.SIGNAL_THROW,
    ("intermediateCatchEvent", "message"): NodeKind.MESSAGE_CATCH,
    ("intermediateCatchEvent", "link"): NodeKind.LINK_CATCH,
    ("intermediateCatchEvent", "signal"): NodeKind.SIGNAL_CATCH,
}


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1] if "}" in tag else tag


class _Parser:
    def __init__(self):
        self.processes = []
        self.annotations = []

    def parse(self, root):
        if _local(root.tag) != "definitions":
            raise XmlMalformed(f"root element is <{_local(root.tag)}>, expected <definitions>")
        message_flows = []
        self._annotations(root, None)
        for child in root:
            tag = _local(child.tag)
            if tag == "process":
                self._process(child, child.get("id"), child.get("name", ""))
            elif tag == "collaboration":
                for el in child:
                    t = _local(el.tag)
                    if t == "messageFlow":
                        message_flows.append(
                            MessageFlow(el.get("id"), el.get("sourceRef"), el.get("targetRef"))
                        )
                    elif t == "extensionElements":
                        for item in el:
                            self._annotation(item, None, None)
        name = root.get("name") or next(
            (c.get("name") for c in root if _local(c.tag) == "collaboration" and c.get("name")),
            "",
        )
        model = BpmnModel(name, tuple(self.processes), tuple(message_flows), tuple(self.annotations))
        _check_references(model)
        return model

    def _process(self, el, pid, name):
        if not pid:
            raise XmlMalformed("process without id")
        nodes, flows = [], []
        for child in el:
            tag = _local(child.tag)
            cid = child.get("id")
            if tag == "sequenceFlow":
                flows.append(SequenceFlow(cid, child.get("sourceRef"), child.get("targetRef")))
            elif tag == "extensionElements":
                for item in child:
                    self._annotation(item, pid, None)
            elif tag in IGNORED_TAGS:
                continue
            else:
                nodes.append(self._flow_node(child, tag, cid))
        self.processes.append(build_process(pid, name, nodes, flows))

    def _flow_node(self, el, tag, nid):
        if not nid:
            raise XmlMalformed(f"<{tag}> without id")
        name = el.get("name", "")
        child_tags = {_local(c.tag) for c in el}
        if tag in TASK_TAGS or tag in ("callActivity", "subProcess"):
            loops = child_tags & LOOP_TAGS
            if loops:
                raise UnsupportedElement(sorted(loops)[0], nid, "loop/multi-instance activity")
        if tag in TASK_TAGS:
            return FlowNode(nid, name, NodeKind.TASK)
        if tag == "callActivity":
            called = el.get("calledElement")
            if not called:
                raise DanglingReference(nid, "callActivity without calledElement")
            return FlowNode(nid, name, NodeKind.CALL, called_process=called)
        if tag == "subProcess":
            if el.get("triggeredByEvent") in ("true", "1"):
                raise UnsupportedElement("subProcess", nid, "event subprocess")
            synthetic = f"{nid}_process"
            self._process(el, synthetic, name)
            return FlowNode(nid, name, NodeKind.CALL, called_process=synthetic)
        if tag == "parallelGateway":
            return FlowNode(nid, name, NodeKind.PARALLEL_GATEWAY)
        if tag == "exclusiveGateway":
            return FlowNode(nid, name, NodeKind.EXCLUSIVE_GATEWAY)
        if tag in ("startEvent", "endEvent", "intermediateThrowEvent", "intermediateCatchEvent"):
            defs = [
                _local(c.tag)[: -len("EventDefinition")]
                for c in el
                if _local(c.tag).endswith("EventDefinition")
            ]
            defs += [d for d in (el.get("eventDefinitionRef"),) if d]
            if len(defs) > 1:
                raise UnsupportedElement(tag, nid, "multiple event definitions")
            kind = _EVENT_KINDS.get((tag, defs[0] if defs else None))
            if kind is None:
                trigger = defs[0] if defs else "none"
                raise UnsupportedElement(tag, nid, f"{trigger} trigger")
            return FlowNode(nid, name, kind)
        raise UnsupportedElement(tag, nid)

    def _annotations(self, el, pid):
        for ext in el:
            if _local(ext.tag) != "extensionElements":
                continue
            for item in ext:
                self._annotation(item, pid, None)

    def _annotation(self, item, pid, snapshot):
        tag = _local(item.tag)
        if tag not in ("processSnapshot", "token"):
            return
        attrs = tuple((_local(k), v) for k, v in item.attrib.items())
        self.annotations.append(Annotation(tag, attrs, pid, snapshot))
        if tag == "processSnapshot":
            for sub in item:
                self._annotation(sub, pid, item.get("id"))


def _check_references(model: BpmnModel):
    seen = set()
    for p in model.processes:
        for ident in [p.id] + [n.id for n in p.flow_nodes]:
            if ident in seen:
                raise XmlMalformed(f"duplicate id {ident!r}")
            seen.add(ident)
    for m in model.message_flows:
        for ref in (m.source, m.target):
            if ref not in model.nodes:
                raise DanglingReference(ref, f"message flow {m.id!r}")
    for n in model.nodes.values():
        if n.kind is NodeKind.CALL and n.called_process not in model.process_map:
            raise DanglingReference(n.called_process, f"called by {n.id!r}")


def parse_bpmn(xml_text) -> BpmnModel:
    """Parse BPMN 2.0 XML text (str or bytes) into a :class:`BpmnModel`."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise XmlMalformed(str(exc)) from exc
    return _Parser().parse(root)


def load_bpmn(path) -> BpmnModel:
    with open(path, "rb") as fh:
        return parse_bpmn(fh.read())


# ---------------------------------------------------------------------------
# XML emission

_KIND_XML = {
    NodeKind.NONE_START: ("startEvent", None),
    NodeKind.MESSAGE_START: ("startEvent", "message"),
    NodeKind.SIGNAL_START: ("startEvent", "signal"),
    NodeKind.NONE_END: ("endEvent", None),
    NodeKind.MESSAGE_END: ("endEvent", "message"),
    NodeKind.SIGNAL_END: ("endEvent", "signal"),
    NodeKind.TERMINATE_END: ("endEvent", "terminate"),
    NodeKind.MESSAGE_THROW: ("intermediateThrowEvent", "message"),
    NodeKind.LINK_THROW: ("intermediateThrowEvent", "link"),
    NodeKind.SIGNAL_THROW: ("intermediateThrowEvent", "signal"),
    NodeKind.MESSAGE_CATCH: ("intermediateCatchEvent", "message"),
    NodeKind.LINK_CATCH: ("intermediateCatchEvent", "link"),
    NodeKind.SIGNAL_CATCH: ("intermediateCatchEvent", "signal"),
    NodeKind.TASK: ("task", None),
    NodeKind.CALL: ("callActivity", None),
    NodeKind.PARALLEL_GATEWAY: ("parallelGateway", None),
    NodeKind.EXCLUSIVE_GATEWAY: ("exclusiveGateway", None),
}


def to_xml(model: BpmnModel) -> str:
    """Serialize a model as BPMN 2.0 XML. Inline subprocesses are written
    as call activities referencing their (synthetic) process."""
    ET.register_namespace("bpmn", BPMN_NS)

    def q(tag):
        return f"{{{BPMN_NS}}}{tag}"

    root = ET.Element(q("definitions"), {"id": "Definitions_1", "targetNamespace": "http://bpmn.io/schema/bpmn"})
    if model.name:
        root.set("name", model.name)
    if model.message_flows:
        collab = ET.SubElement(root, q("collaboration"), {"id": "Collaboration_1"})
        for p in model.processes:
            ET.SubElement(collab, q("participant"), {"id": f"Participant_{p.id}", "processRef": p.id})
        for m in model.message_flows:
            ET.SubElement(collab, q("messageFlow"), {"id": m.id, "sourceRef": m.source, "targetRef": m.target})
    for p in model.processes:
        pel = ET.SubElement(root, q("process"), {"id": p.id, "isExecutable": "true"})
        if p.name:
            pel.set("name", p.name)
        for n in p.flow_nodes:
            tag, trigger = _KIND_XML[n.kind]
            attrs = {"id": n.id}
            if n.name:
                attrs["name"] = n.name
            if n.kind is NodeKind.CALL:
                attrs["calledElement"] = n.called_process
            nel = ET.SubElement(pel, q(tag), attrs)
            for f in n.incoming:
                ET.SubElement(nel, q("incoming")).text = f
            for f in n.outgoing:
                ET.SubElement(nel, q("outgoing")).text = f
            if trigger:
                ET.SubElement(nel, q(f"{trigger}EventDefinition"), {"id": f"{n.id}_def"})
        for f in p.sequence_flows:
            ET.SubElement(pel, q("sequenceFlow"), {"id": f.id, "sourceRef": f.source, "targetRef": f.target})
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


# ---------------------------------------------------------------------------
# Validation

ERROR = "ERROR"
WARNING = "WARNING"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    node_id: str | None
    message: str

    def __str__(self):
        where = f" [{self.node_id}]" if self.node_id else ""
        return f"{self.severity}{where}: {self.message}"


def validate_model(model: BpmnModel) -> list[Diagnostic]:
    """Static checks; returns diagnostics rather than raising."""
    diags = []
    nodes = model.nodes
    for p in model.processes:
        local = {n.id for n in p.flow_nodes}
        for f in p.sequence_flows:
            for ref in (f.source, f.target):
                if ref not in local:
                    diags.append(Diagnostic(ERROR, ref, f"sequence flow {f.id} references unknown node"))
        for n in p.flow_nodes:
            if n.kind in START_KINDS and n.incoming:
                diags.append(Diagnostic(ERROR, n.id, "start event has incoming sequence flows"))
            if n.kind in END_KINDS and n.outgoing:
                diags.append(Diagnostic(ERROR, n.id, "end event has outgoing sequence flows"))
            if n.kind not in GATEWAY_KINDS:
                if len(n.incoming) > 1:
                    diags.append(Diagnostic(WARNING, n.id, "multiple incoming sequence flows (implicit exclusive merge)"))
                if len(n.outgoing) > 1:
                    diags.append(Diagnostic(WARNING, n.id, "multiple outgoing sequence flows (implicit parallel split)"))
            if n.kind is NodeKind.CALL and n.called_process not in model.process_map:
                diags.append(Diagnostic(ERROR, n.id, f"called process {n.called_process} does not exist"))
        if not p.start_events():
            diags.append(Diagnostic(WARNING, None, f"process {p.id} has no start event"))
    for m in model.message_flows:
        src, tgt = nodes.get(m.source), nodes.get(m.target)
        if src is None or tgt is None:
            diags.append(Diagnostic(ERROR, m.source if src is None else m.target, f"message flow {m.id} references unknown node"))
            continue
        if src.kind not in MESSAGE_SENDERS:
            diags.append(Diagnostic(ERROR, src.id, f"message flow {m.id}: {src.kind.value} cannot send messages"))
        if tgt.kind not in MESSAGE_RECEIVERS:
            diags.append(Diagnostic(ERROR, tgt.id, f"message flow {m.id}: {tgt.kind.value} cannot receive messages"))
    for n in nodes.values():
        if n.kind is NodeKind.LINK_THROW:
            owner = model.owner[n.id]
            if not any(
                c.kind is NodeKind.LINK_CATCH and c.name == n.name
                for c in model.process_map[owner].flow_nodes
            ):
                diags.append(Diagnostic(WARNING, n.id, f"no link catch event named {n.name!r}"))
    diags.extend(_call_cycles(model))
    return diags


def _call_cycles(model):
    calls = {p.id: [] for p in model.processes}
    for p in model.processes:
        for n in p.flow_nodes:
            if n.kind is NodeKind.CALL and n.called_process in calls:
                calls[p.id].append((n.id, n.called_process))
    color = dict.fromkeys(calls, 0)
    found = []
    for root in calls:
        if color[root]:
            continue
        color[root] = 1
        stack = [(root, iter(calls[root]))]
        while stack:
            pid, it = stack[-1]
            step = next(it, None)
            if step is None:
                color[pid] = 2
                stack.pop()
                continue
            call_id, target = step
            if color[target] == 1:
                found.append(Diagnostic(ERROR, call_id, f"subprocess call cycle through process {target}"))
            elif color[target] == 0:
                color[target] = 1
                stack.append((target, iter(calls[target])))
    return found
