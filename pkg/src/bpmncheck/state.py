"""Execution states: forests of process snapshots holding tokens and
messages, plus canonical keys and the JSON state dump."""

from __future__ import annotations

import enum
import json
from collections import Counter
from typing import NamedTuple


class Lifecycle(str, enum.Enum):
    RUNNING = "Running"
    TERMINATED = "Terminated"


RUNNING = Lifecycle.RUNNING
TERMINATED = Lifecycle.TERMINATED

Counts = tuple  # sorted tuple of (element id, count > 0) pairs


class Snapshot(NamedTuple):
    """One process instance. ``tokens``/``messages`` are sorted
    ``(id, count)`` tuples; ``children`` is a sorted tuple of snapshots.

    Top-level snapshots have ``spawned_by=None``; children always carry the
    id of the call activity that spawned them, so siblings never mix the
    two and plain tuple ordering is total.
    """

    process: str
    spawned_by: str | None
    lifecycle: Lifecycle
    tokens: Counts = ()
    messages: Counts = ()
    children: tuple = ()

    def token_count(self, element_id) -> int:
        for k, v in self.tokens:
            if k == element_id:
                return v
        return 0

    def message_count(self, flow_id) -> int:
        for k, v in self.messages:
            if k == flow_id:
                return v
        return 0


class ExecutionState(NamedTuple):
    snapshots: tuple = ()

    @classmethod
    def of(cls, snapshots):
        """Build a state in canonical form from arbitrary snapshots."""
        return cls(tuple(sorted(normalize_snapshot(s) for s in snapshots)))

    def walk(self):
        """Yield ``(path, snapshot)`` for every snapshot at any depth.

        A path is a tuple of sibling indices from the top level down.
        """
        stack = [((i,), s) for i, s in reversed(list(enumerate(self.snapshots)))]
        while stack:
            path, snap = stack.pop()
            yield path, snap
            for j in range(len(snap.children) - 1, -1, -1):
                stack.append((path + (j,), snap.children[j]))

    def at(self, path) -> Snapshot:
        snap = self.snapshots[path[0]]
        for i in path[1:]:
            snap = snap.children[i]
        return snap


def counts(mapping) -> Counts:
    """Canonical ``(id, count)`` tuple from a mapping or pair iterable."""
    c = Counter()
    items = mapping.items() if hasattr(mapping, "items") else mapping
    for k, v in items:
        c[k] += v
    if any(v < 0 for v in c.values()):
        raise ValueError("negative count")
    return tuple(sorted((k, v) for k, v in c.items() if v))


def snapshot(process, tokens=(), messages=(), children=(), spawned_by=None, lifecycle=RUNNING):
    """Convenience constructor returning a normalized :class:`Snapshot`."""
    return normalize_snapshot(
        Snapshot(process, spawned_by, Lifecycle(lifecycle), tokens, messages, tuple(children))
    )


def normalize_snapshot(s: Snapshot) -> Snapshot:
    return Snapshot(
        s.process,
        s.spawned_by,
        Lifecycle(s.lifecycle),
        counts(s.tokens),
        counts(s.messages),
        tuple(sorted(normalize_snapshot(c) for c in s.children)),
    )


def replace_at(state: ExecutionState, path, new: Snapshot | None) -> ExecutionState:
    """Return ``state`` with the snapshot at ``path`` replaced (or removed
    when ``new`` is None), re-sorting the affected sibling lists."""
    if len(path) == 1:
        sibs = list(state.snapshots)
        if new is None:
            del sibs[path[0]]
        else:
            sibs[path[0]] = new
        if len(sibs) > 1:
            sibs.sort()
        return ExecutionState(tuple(sibs))
    parent_path = path[:-1]
    parent = state.at(parent_path)
    kids = list(parent.children)
    if new is None:
        del kids[path[-1]]
    else:
        kids[path[-1]] = new
    kids.sort()
    return replace_at(state, parent_path, parent._replace(children=tuple(kids)))


# ---------------------------------------------------------------------------
# canonical keys


def _enc_str(s, out):
    b = s.encode()
    out += len(b).to_bytes(4, "big")
    out += b


def _enc_counts(items, out):
    items = counts(items)
    out += len(items).to_bytes(4, "big")
    for k, v in items:
        _enc_str(k, out)
        out += v.to_bytes(4, "big")


def _enc_snapshot(s) -> bytes:
    out = bytearray()
    _enc_str(s.process, out)
    if s.spawned_by is None:
        out += b"\x00"
    else:
        out += b"\x01"
        _enc_str(s.spawned_by, out)
    out += b"R" if Lifecycle(s.lifecycle) is RUNNING else b"T"
    _enc_counts(s.tokens, out)
    _enc_counts(s.messages, out)
    _enc_forest(s.children, out)
    return bytes(out)


def _enc_forest(snaps, out):
    parts = sorted(_enc_snapshot(s) for s in snaps)
    out += len(parts).to_bytes(4, "big")
    for p in parts:
        out += len(p).to_bytes(4, "big")
        out += p


def canonical_key(state: ExecutionState) -> bytes:
    """Order-independent byte encoding of a state.

    Every field is length-prefixed, and sibling encodings are sorted, so
    two states share a key exactly when they are equal as multiset forests.
    """
    out = bytearray()
    _enc_forest(state.snapshots, out)
    return bytes(out)


def is_all_terminated(state: ExecutionState) -> bool:
    return all(s.lifecycle != RUNNING for _, s in state.walk())


# ---------------------------------------------------------------------------
# JSON dump


def snapshot_to_dict(s: Snapshot) -> dict:
    return {
        "process": s.process,
        "spawnedBy": s.spawned_by,
        "lifecycle": Lifecycle(s.lifecycle).value,
        "tokens": dict(s.tokens),
        "messages": dict(s.messages),
        "children": [snapshot_to_dict(c) for c in s.children],
    }


def snapshot_from_dict(d: dict) -> Snapshot:
    return snapshot(
        d["process"],
        tokens=d.get("tokens", {}),
        messages=d.get("messages", {}),
        children=[snapshot_from_dict(c) for c in d.get("children", [])],
        spawned_by=d.get("spawnedBy"),
        lifecycle=d.get("lifecycle", "Running"),
    )


def state_to_json(state: ExecutionState, **kw) -> str:
    return json.dumps({"snapshots": [snapshot_to_dict(s) for s in state.snapshots]}, **kw)


def state_from_json(text) -> ExecutionState:
    data = json.loads(text)
    return ExecutionState.of(snapshot_from_dict(s) for s in data["snapshots"])
