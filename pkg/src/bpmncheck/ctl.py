"""CTL formulas: parser and fixpoint model checker over an explored LTS.

Deadlock states are totalized with an implicit self-loop before
evaluation.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass

DEADLOCK_LABEL = "<deadlock>"


class CtlSyntaxError(ValueError):
    def __init__(self, message, pos):
        self.pos = pos
        super().__init__(f"{message} at position {pos}")


class UnknownAtom(KeyError):
    pass


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class TrueF:
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class FalseF:
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Not:
    arg: object

    def __str__(self):
        return f"!{_wrap(self.arg)}"


@dataclass(frozen=True)
class And:
    left: object
    right: object

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or:
    left: object
    right: object

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Implies:
    left: object
    right: object

    def __str__(self):
        return f"({self.left} -> {self.right})"


@dataclass(frozen=True)
class Unary:
    op: str  # one of AX EX AF EF AG EG
    arg: object

    def __str__(self):
        return f"{self.op}{_wrap(self.arg)}"


@dataclass(frozen=True)
class Until:
    quant: str  # "A" or "E"
    left: object
    right: object

    def __str__(self):
        return f"{self.quant}[{self.left} U {self.right}]"


def _wrap(f):
    s = str(f)
    return s if s.startswith("(") else f"({s})"


def AX(f):
    return Unary("AX", f)


def EX(f):
    return Unary("EX", f)


def AF(f):
    return Unary("AF", f)


def EF(f):
    return Unary("EF", f)


def AG(f):
    return Unary("AG", f)


def EG(f):
    return Unary("EG", f)


def AU(f, g):
    return Until("A", f, g)


def EU(f, g):
    return Until("E", f, g)


# --- parser ----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(->)|([!&|()\[\]])|([A-Za-z_][A-Za-z0-9_\-.]*))")
_TEMPORAL = {"AX", "EX", "AF", "EF", "AG", "EG"}
_RESERVED = _TEMPORAL | {"A", "E", "U", "true", "false"}


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            at = len(text) - len(text[pos:].lstrip())
            raise CtlSyntaxError(f"unexpected character {text[at]!r}", at)
        start = m.start(m.lastindex)
        out.append((m.group(m.lastindex), start))
        pos = m.end()
    out.append(("<eof>", len(text)))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i][0]

    def take(self, expected=None):
        tok, pos = self.toks[self.i]
        if expected is not None and tok != expected:
            raise CtlSyntaxError(f"expected {expected!r}, found {tok!r}", pos)
        self.i += 1
        return tok

    def parse(self):
        f = self.implies()
        if self.peek() != "<eof>":
            raise CtlSyntaxError(f"unexpected {self.peek()!r}", self.toks[self.i][1])
        return f

    def implies(self):
        left = self.disj()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def disj(self):
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self):
        f = self.unary()
        while self.peek() == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self):
        tok, pos = self.toks[self.i]
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok in _TEMPORAL:
            self.take()
            return Unary(tok, self.unary())
        if tok in ("A", "E") and self.toks[self.i + 1][0] == "[":
            self.take()
            self.take("[")
            left = self.implies()
            self.take("U")
            right = self.implies()
            self.take("]")
            return Until(tok, left, right)
        return self.primary()

    def primary(self):
        tok, pos = self.toks[self.i]
        if tok == "(":
            self.take()
            f = self.implies()
            self.take(")")
            return f
        if tok == "true":
            self.take()
            return TrueF()
        if tok == "false":
            self.take()
            return FalseF()
        if tok not in _RESERVED and re.match(r"[A-Za-z_]", tok):
            self.take()
            return Atom(tok)
        raise CtlSyntaxError(f"unexpected {tok!r}", pos)


def parse_ctl(text: str):
    return _Parser(text).parse()


def atoms(f) -> set[str]:
    if isinstance(f, Atom):
        return {f.name}
    out = set()
    for v in vars(f).values():
        if not isinstance(v, str):
            out |= atoms(v)
    return out


# --- graph view ------------------------------------------------------------


class Graph:
    """Totalized successor/predecessor lists over state indices."""

    def __init__(self, n, edges, initial=0):
        self.n = n
        self.initial = initial
        succ = [[] for _ in range(n)]
        for a, label, b in edges:
            succ[a].append((label, b))
        for i in range(n):
            if not succ[i]:
                succ[i].append((DEADLOCK_LABEL, i))
        self.succ = [sorted(set(s), key=lambda x: (x[1], x[0])) for s in succ]
        self.post = [sorted({b for _, b in s}) for s in self.succ]
        pre = [[] for _ in range(n)]
        for a in range(n):
            for b in self.post[a]:
                pre[b].append(a)
        self.pre = pre

    @classmethod
    def from_lts(cls, lts):
        return cls(len(lts.states), lts.transitions)


@dataclass
class Labeling:
    """Proposition names holding in each state (indexed like the LTS)."""

    names: frozenset
    labels: list

    def holds(self, name):
        return {i for i, ls in enumerate(self.labels) if name in ls}


@dataclass
class Witness:
    """A run from the initial state: ``rules[i]`` leads from ``states[i]``
    to ``states[i + 1]``. With ``loop_start`` set, the run continues
    forever by returning from the last state to ``states[loop_start]``
    (the closing step is the last entry of ``rules``)."""

    states: list
    rules: list
    loop_start: int | None = None

    def to_dict(self):
        d = {"rules": self.rules, "states": self.states}
        if self.loop_start is not None:
            d["loopStart"] = self.loop_start
        return d


@dataclass
class CtlResult:
    holds: bool
    sat: frozenset
    witness: Witness | None = None


# --- evaluation ------------------------------------------------------------


def _ex(g, s):
    return {a for b in s for a in g.pre[b]}


def _ax(g, s):
    return {a for a in range(g.n) if all(b in s for b in g.post[a])}


def _eu(g, f, h):
    sat = set(h)
    queue = deque(sat)
    while queue:
        b = queue.popleft()
        for a in g.pre[b]:
            if a not in sat and a in f:
                sat.add(a)
                queue.append(a)
    return sat


def _au(g, f, h):
    # least fixpoint with per-state counters of successors not yet in sat
    remaining = [len(g.post[a]) for a in range(g.n)]
    sat = set(h)
    queue = deque(sat)
    while queue:
        b = queue.popleft()
        for a in g.pre[b]:
            if a in sat:
                continue
            remaining[a] -= 1
            if remaining[a] == 0 and a in f:
                sat.add(a)
                queue.append(a)
    return sat


def _eg(g, f):
    # greatest fixpoint: drop states with no successor left inside
    sat = set(f)
    inside = [sum(1 for b in g.post[a] if b in sat) if a in sat else 0 for a in range(g.n)]
    queue = deque(a for a in sat if inside[a] == 0)
    while queue:
        a = queue.popleft()
        if a not in sat:
            continue
        sat.discard(a)
        for p in g.pre[a]:
            if p in sat:
                inside[p] -= 1
                if inside[p] == 0:
                    queue.append(p)
    return sat


def _ag(g, f):
    # greatest fixpoint: drop states with any successor outside
    sat = set(f)
    queue = deque(a for a in range(g.n) if a not in sat)
    dropped = set(queue)
    while queue:
        b = queue.popleft()
        for a in g.pre[b]:
            if a in sat:
                sat.discard(a)
                if a not in dropped:
                    dropped.add(a)
                    queue.append(a)
    return sat


def _af(g, f):
    return _au(g, set(range(g.n)), f)


def _ef(g, f):
    sat = set(f)
    queue = deque(sat)
    while queue:
        b = queue.popleft()
        for a in g.pre[b]:
            if a not in sat:
                sat.add(a)
                queue.append(a)
    return sat


def sat_set(g: Graph, labeling: Labeling, f) -> set:
    everything = set(range(g.n))
    t = type(f)
    if t is TrueF:
        return everything
    if t is FalseF:
        return set()
    if t is Atom:
        if f.name not in labeling.names:
            raise UnknownAtom(f.name)
        return labeling.holds(f.name)
    if t is Not:
        return everything - sat_set(g, labeling, f.arg)
    if t is And:
        return sat_set(g, labeling, f.left) & sat_set(g, labeling, f.right)
    if t is Or:
        return sat_set(g, labeling, f.left) | sat_set(g, labeling, f.right)
    if t is Implies:
        return (everything - sat_set(g, labeling, f.left)) | sat_set(g, labeling, f.right)
    if t is Until:
        left, right = sat_set(g, labeling, f.left), sat_set(g, labeling, f.right)
        return _eu(g, left, right) if f.quant == "E" else _au(g, left, right)
    if t is Unary:
        inner = sat_set(g, labeling, f.arg)
        return {"EX": _ex, "AX": _ax, "EF": _ef, "AF": _af, "EG": _eg, "AG": _ag}[f.op](g, inner)
    raise TypeError(f"not a CTL formula: {f!r}")


def check_ctl(lts_or_graph, labeling: Labeling, formula) -> CtlResult:
    """Evaluate ``formula`` (text or AST); ``holds`` refers to the initial
    state. Refuted top-level AG/AF formulas come with a witness run."""
    if isinstance(formula, str):
        formula = parse_ctl(formula)
    g = lts_or_graph if isinstance(lts_or_graph, Graph) else Graph.from_lts(lts_or_graph)
    for name in atoms(formula):
        if name not in labeling.names:
            raise UnknownAtom(name)
    sat = sat_set(g, labeling, formula)
    holds = g.initial in sat
    witness = None
    if not holds and isinstance(formula, Unary):
        inner = sat_set(g, labeling, formula.arg)
        if formula.op == "AG":
            witness = path_to(g, set(range(g.n)) - inner)
        elif formula.op == "AF":
            witness = lasso(g, _eg(g, set(range(g.n)) - inner))
    return CtlResult(holds, frozenset(sat), witness)


def path_to(g: Graph, targets, allowed=None, start=None) -> Witness | None:
    """Shortest run from ``start`` (default: initial) to any target state,
    staying inside ``allowed`` if given."""
    src = g.initial if start is None else start
    if src in targets:
        return Witness([src], [])
    parent = {src: None}
    queue = deque([src])
    while queue:
        a = queue.popleft()
        for label, b in g.succ[a]:
            if b in parent or (allowed is not None and b not in allowed):
                continue
            parent[b] = (a, label)
            if b in targets:
                return _unwind(parent, b)
            queue.append(b)
    return None


def _unwind(parent, b):
    states, rules = [b], []
    while parent[b] is not None:
        a, label = parent[b]
        states.append(a)
        rules.append(label)
        b = a
    states.reverse()
    rules.reverse()
    return Witness(states, rules)


def lasso(g: Graph, region) -> Witness | None:
    """Run from the initial state that stays in ``region`` forever:
    BFS to the nearest state on a cycle inside ``region``, then the
    shortest cycle back to it."""
    if g.initial not in region:
        return None
    on_cycle = _cyclic_states(g, region)
    stem = path_to(g, on_cycle, allowed=region)
    if stem is None:
        return None
    anchor = stem.states[-1]
    # shortest cycle anchor -> ... -> anchor inside region
    best = None
    for label, b in g.succ[anchor]:
        if b not in region:
            continue
        if b == anchor:
            best = ([], [label])
            break
        back = path_to(g, {anchor}, allowed=region, start=b)
        if back is not None and (best is None or len(back.rules) + 1 < len(best[1])):
            best = (back.states[:-1], [label] + back.rules)
    states = stem.states + best[0]
    return Witness(states, stem.rules + best[1], loop_start=len(stem.states) - 1)


def _cyclic_states(g, region):
    """States of ``region`` lying on a cycle within ``region`` (iterative
    Tarjan over the induced subgraph)."""
    index, low, on_stack = {}, {}, set()
    stack, result = [], set()
    counter = 0
    for root in sorted(region):
        if root in index:
            continue
        work = [(root, iter(g.post[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in region:
                    continue
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(g.post[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or v in g.post[v]:
                    result.update(comp)
    return result
