"""Synthetic benchmark models: parallel-branch models and models chained
from three block types."""

from __future__ import annotations

from .model import BpmnModel, FlowNode, NodeKind as K, SequenceFlow, build_process


def gen_parallel(n: int) -> BpmnModel:
    """start -> fork -> n x (task) -> join -> end."""
    if n < 1:
        raise ValueError("need at least one branch")
    nodes = [
        FlowNode("start", "start", K.NONE_START),
        FlowNode("fork", "fork", K.PARALLEL_GATEWAY),
        FlowNode("join", "join", K.PARALLEL_GATEWAY),
        FlowNode("end", "end", K.NONE_END),
    ]
    flows = [SequenceFlow("sf_start", "start", "fork")]
    for i in range(1, n + 1):
        nodes.insert(-2, FlowNode(f"task{i}", f"Task {i}", K.TASK))
        flows.append(SequenceFlow(f"sf_fork_{i}", "fork", f"task{i}"))
        flows.append(SequenceFlow(f"sf_join_{i}", f"task{i}", "join"))
    flows.append(SequenceFlow("sf_end", "join", "end"))
    proc = build_process("parallel", f"{n} parallel branches", nodes, flows)
    return BpmnModel(f"parallel-{n}", (proc,))


def block_type(i: int) -> int:
    """Block type (1, 2 or 3) of the zero-based block index ``i``."""
    return i % 3 + 1


def gen_blocks(k: int) -> BpmnModel:
    """start -> block_1 -> ... -> block_k -> end, cycling block types.

    Type 1 is three tasks in sequence; type 2 an exclusive split into two
    single-task branches and a merge; type 3 the same with parallel
    gateways.
    """
    if k < 1:
        raise ValueError("need at least one block")
    nodes = [FlowNode("start", "start", K.NONE_START)]
    flows = []
    prev = "start"

    def link(src, dst):
        flows.append(SequenceFlow(f"sf_{src}_{dst}", src, dst))

    for i in range(k):
        b = f"b{i + 1}"
        t = block_type(i)
        if t == 1:
            names = [f"{b}_t{j}" for j in (1, 2, 3)]
            for name in names:
                nodes.append(FlowNode(name, name, K.TASK))
                link(prev, name)
                prev = name
        else:
            gw = K.EXCLUSIVE_GATEWAY if t == 2 else K.PARALLEL_GATEWAY
            split, merge = f"{b}_split", f"{b}_merge"
            nodes.append(FlowNode(split, split, gw))
            link(prev, split)
            for j in (1, 2):
                task = f"{b}_t{j}"
                nodes.append(FlowNode(task, task, K.TASK))
                link(split, task)
                link(task, merge)
            nodes.append(FlowNode(merge, merge, gw))
            prev = merge
    nodes.append(FlowNode("end", "end", K.NONE_END))
    link(prev, "end")
    return BpmnModel(f"blocks-{k}", (build_process("blocks", f"{k} blocks", nodes, flows),))


def block_counts(k: int) -> dict:
    """Closed-form element counts for ``gen_blocks(k)``."""
    t1 = sum(1 for i in range(k) if block_type(i) == 1)
    t23 = k - t1
    gateways = 2 * t23
    flow_nodes = 2 + 3 * t1 + 4 * t23
    seq = 4 + 3 * (t1 - 1) + 5 * t23
    return {"gateways": gateways, "flowNodes": flow_nodes, "sequenceFlows": seq, "total": flow_nodes + seq}
