"""Exhaustive breadth-first construction of the labelled transition system."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

from . import kernel
from .hot import RuleSet
from .rules import apply_rule
from .state import ExecutionState, canonical_key, replace_at

DEFAULT_MAX_STATES = 5_000_000
DEFAULT_MAX_MILLIS = 300_000


@dataclass
class Lts:
    states: list[ExecutionState]
    transitions: list[tuple[int, str, int]]
    ruleset: RuleSet | None = None
    truncated: bool = False
    time_ms: float = 0.0
    index: dict = field(default_factory=dict, repr=False)

    @property
    def state_count(self) -> int:
        return len(self.states)

    @property
    def transition_count(self) -> int:
        return len(self.transitions)

    @cached_property
    def keys(self) -> list[bytes]:
        return [canonical_key(s) for s in self.states]

    @cached_property
    def successors(self) -> list[list[tuple[str, int]]]:
        out = [[] for _ in self.states]
        for a, r, b in self.transitions:
            out[a].append((r, b))
        return out

    def deadlocks(self) -> list[int]:
        return [i for i, succ in enumerate(self.successors) if not succ]

    def stats(self) -> dict:
        return {
            "states": self.state_count,
            "transitions": self.transition_count,
            "truncated": self.truncated,
            "timeMs": round(self.time_ms, 3),
        }

    def canonical(self):
        """Order-independent view: (state keys, transitions over keys)."""
        keys = self.keys
        return (
            frozenset(keys),
            frozenset((keys[a], r, keys[b]) for a, r, b in self.transitions),
        )


class _Expander:
    def __init__(self, ruleset: RuleSet, backend=None):
        self.fire_all = kernel.get(backend).fire_all
        self.names = [r.name for r in ruleset.rules]
        self.tables = {}
        self.complex = []
        for i, r in enumerate(ruleset.rules):
            if r.is_simple:
                self.tables.setdefault(r.focal_process, []).append((i, *r.compile_simple()))
            else:
                self.complex.append(r)

    def __call__(self, state: ExecutionState):
        out = []
        names = self.names
        tables = self.tables
        fire_all = self.fire_all
        snaps = state.snapshots
        if len(snaps) == 1 and not snaps[0].children:
            # common case: one flat snapshot
            s = snaps[0]
            table = tables.get(s.process)
            if table and s.tokens:
                for idx, toks in fire_all(s.tokens, table):
                    out.append((names[idx], ExecutionState((s._replace(tokens=toks),))))
        else:
            for path, s in state.walk():
                table = tables.get(s.process)
                if table and s.tokens:
                    for idx, toks in fire_all(s.tokens, table):
                        out.append((names[idx], replace_at(state, path, s._replace(tokens=toks))))
        for r in self.complex:
            for succ, _ in apply_rule(r, state):
                out.append((r.name, succ))
        return out


def explore(
    ruleset: RuleSet,
    max_states: int = DEFAULT_MAX_STATES,
    max_millis: float = DEFAULT_MAX_MILLIS,
    threads: int = 1,
    backend: str | None = None,
) -> Lts:
    """Breadth-first closure from the start state.

    Each frontier level is expanded (optionally on a thread pool) and then
    merged in frontier order, so state numbering and the transition list
    do not depend on ``threads``.
    """
    t0 = time.perf_counter()
    deadline = t0 + max_millis / 1000.0
    expand = _Expander(ruleset, backend)
    start = ruleset.start_state
    states = [start]
    index = {start: 0}
    transitions = []
    seen = set()
    frontier = [0]
    truncated = False
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        while frontier and not truncated:
            if pool is not None:
                chunk = max(1, len(frontier) // (threads * 4))
                results = pool.map(expand, [states[i] for i in frontier], chunksize=chunk)
            else:
                results = map(expand, [states[i] for i in frontier])
            nxt = []
            for src, succs in zip(frontier, results):
                for name, tgt in succs:
                    j = index.get(tgt)
                    if j is None:
                        if len(states) >= max_states:
                            truncated = True
                            continue
                        j = len(states)
                        index[tgt] = j
                        states.append(tgt)
                        nxt.append(j)
                    tr = (src, name, j)
                    if tr not in seen:
                        seen.add(tr)
                        transitions.append(tr)
                if time.perf_counter() > deadline:
                    truncated = True
                    break
            frontier = nxt
    finally:
        if pool is not None:
            pool.shutdown()
    lts = Lts(states, transitions, ruleset, truncated, (time.perf_counter() - t0) * 1000.0)
    lts.index = index
    return lts
