"""Geodesic automatic structures: storage, validation and builders.

An automaton is a deterministic labeled graph whose paths from the initial
state spell geodesic words, one per group element.  Edges keep their file
order; that order indexes the edge shift used by :mod:`hypflow.spectral`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ball import bfs_ball, keyer_for, MAX_RADIUS
from .errors import (
    InvalidOrder,
    NondeterministicLabel,
    ParseError,
    RadiusTooLarge,
    UnreachableState,
    ValidationFailed,
)
from .words import Presentation, bundled_text, letter, relator_half_length


@dataclass(frozen=True)
class Automaton:
    state_count: int
    initial: int
    edges: tuple  # (origin, target, letter) in file order
    generator_names: tuple
    name: str = ""

    def __post_init__(self):
        seen = set()
        for o, t, a in self.edges:
            if not (0 <= o < self.state_count and 0 <= t < self.state_count):
                raise ValueError(f"edge ({o}, {t}) leaves the state range")
            if not 0 <= a < 2 * len(self.generator_names):
                raise ValueError(f"edge label {a} is not a letter")
            if (o, a) in seen:
                raise NondeterministicLabel(f"state {o} has two edges labeled {self.letter_name(a)}")
            seen.add((o, a))

    @property
    def letter_count(self) -> int:
        return 2 * len(self.generator_names)

    def letter_name(self, a: int) -> str:
        name = self.generator_names[a >> 1]
        return name + "^-1" if a & 1 else name

    @property
    def origins(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.intp)

    @property
    def targets(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.intp)

    @property
    def labels(self) -> np.ndarray:
        return np.array([e[2] for e in self.edges], dtype=np.intp)

    def transition_table(self) -> np.ndarray:
        """``table[v, a]`` is the target of the ``a``-edge out of ``v`` or -1."""
        table = np.full((self.state_count, self.letter_count), -1, dtype=np.intp)
        for o, t, a in self.edges:
            table[o, a] = t
        return table

    def edge_table(self) -> np.ndarray:
        """Like :meth:`transition_table` but holding edge ids."""
        table = np.full((self.state_count, self.letter_count), -1, dtype=np.intp)
        for i, (o, _, a) in enumerate(self.edges):
            table[o, a] = i
        return table

    def state_adjacency(self) -> np.ndarray:
        m = np.zeros((self.state_count, self.state_count), dtype=np.int64)
        for o, t, _ in self.edges:
            m[o, t] += 1
        return m

    def edge_adjacency(self, edge_ids=None) -> np.ndarray:
        """0/1 matrix with ``A[e, f] = 1`` when ``e`` ends where ``f`` starts."""
        ids = np.arange(len(self.edges)) if edge_ids is None else np.asarray(edge_ids)
        o, t = self.origins[ids], self.targets[ids]
        return (t[:, None] == o[None, :]).astype(np.int64)

    def reachable(self) -> set:
        table = self.transition_table()
        seen = {self.initial}
        queue = deque([self.initial])
        while queue:
            v = queue.popleft()
            for t in table[v]:
                if t >= 0 and t not in seen:
                    seen.add(int(t))
                    queue.append(int(t))
        return seen

    def run(self, word) -> Optional[int]:
        """Final state after reading ``word``, or None when rejected."""
        table = self.transition_table()
        v = self.initial
        for a in word:
            v = table[v, a]
            if v < 0:
                return None
        return int(v)

    def path_counts(self, n_max: int) -> list:
        """Exact numbers of accepted paths of lengths ``0..n_max``."""
        adj = [[0] * self.state_count for _ in range(self.state_count)]
        for o, t, _ in self.edges:
            adj[o][t] += 1
        vec = [0] * self.state_count
        vec[self.initial] = 1
        counts = [1]
        for _ in range(n_max):
            new = [0] * self.state_count
            for v, c in enumerate(vec):
                if c:
                    for t, m in enumerate(adj[v]):
                        if m:
                            new[t] += c * m
            vec = new
            counts.append(sum(vec))
        return counts

    def paths(self, n: int) -> tuple:
        """All accepted words of length ``n`` as an int8 array, lex ordered, with end states."""
        table = self.transition_table()
        words = np.zeros((1, 0), dtype=np.int8)
        states = np.array([self.initial], dtype=np.intp)
        for _ in range(n):
            nxt = table[states]  # (N, letters)
            par, let = np.nonzero(nxt >= 0)
            words = np.concatenate([words[par], let[:, None].astype(np.int8)], axis=1)
            states = nxt[par, let]
        return words, states

    def relabeled(self, perm) -> "Automaton":
        """Same machine with state ``v`` renamed ``perm[v]``."""
        edges = tuple((perm[o], perm[t], a) for o, t, a in self.edges)
        return Automaton(self.state_count, perm[self.initial], edges, self.generator_names, self.name)


def _with_fresh_initial(a: Automaton) -> Automaton:
    if all(t != a.initial for _, t, _ in a.edges):
        return a
    new = a.state_count
    extra = tuple((new, t, lab) for o, t, lab in a.edges if o == a.initial)
    return Automaton(a.state_count + 1, new, a.edges + extra, a.generator_names, a.name)


def _check_reachable(a: Automaton) -> None:
    missing = sorted(set(range(a.state_count)) - a.reachable())
    if missing:
        raise UnreachableState(f"states {missing} are not reachable from the initial state")


def load_automaton(text: str, generator_names=None, name: str = "") -> Automaton:
    """Parse the line format ``states: N`` / ``initial: i`` / ``edge: o t label``.

    Optional ``name:`` and ``generators:`` lines fix the automaton name and
    the letter order; otherwise ``generator_names`` must be passed.
    """
    states = initial = None
    raw_edges = []
    names = tuple(generator_names) if generator_names is not None else None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ParseError("expected 'key: value'", lineno, 1)
        key = key.strip()
        col = raw.index(":") + 2
        fields = value.split()
        if key == "states" or key == "initial":
            if len(fields) != 1 or not fields[0].isdigit():
                raise ParseError(f"'{key}' takes one nonnegative integer", lineno, col)
            if key == "states":
                states = int(fields[0])
            else:
                initial = int(fields[0])
        elif key == "generators":
            if names is not None and tuple(fields) != names:
                raise ParseError("generators line disagrees with the given generator names", lineno, col)
            names = tuple(fields)
        elif key == "name":
            name = name or value.strip()
        elif key == "edge":
            if len(fields) != 3 or not (fields[0].isdigit() and fields[1].isdigit()):
                raise ParseError("edge line must be 'edge: origin target label'", lineno, col)
            raw_edges.append((int(fields[0]), int(fields[1]), fields[2], lineno, col))
        else:
            raise ParseError(f"unknown key {key!r}", lineno, 1)
    if states is None or initial is None:
        raise ParseError("missing 'states' or 'initial' line")
    if names is None:
        raise ParseError("no generator names: add a 'generators:' line")
    if initial >= states:
        raise ParseError(f"initial state {initial} out of range")
    edges = []
    for o, t, lab, lineno, col in raw_edges:
        inverted = lab.endswith("^-1")
        base = lab[:-3] if inverted else lab
        if base not in names:
            raise ParseError(f"unknown label {lab!r}", lineno, col)
        if o >= states or t >= states:
            raise ParseError(f"state out of range in edge {o} {t}", lineno, col)
        edges.append((o, t, letter(names.index(base), inverted)))
    a = Automaton(states, initial, tuple(edges), names, name)
    _check_reachable(a)
    return _with_fresh_initial(a)


def automaton_to_text(a: Automaton) -> str:
    lines = []
    if a.name:
        lines.append(f"name: {a.name}")
    lines.append("generators: " + " ".join(a.generator_names))
    lines.append(f"states: {a.state_count}")
    lines.append(f"initial: {a.initial}")
    lines += [f"edge: {o} {t} {a.letter_name(lab)}" for o, t, lab in a.edges]
    return "\n".join(lines) + "\n"


def save_automaton(a: Automaton, path) -> None:
    with open(path, "w") as fh:
        fh.write(automaton_to_text(a))


def bundled_automaton(name: str) -> Automaton:
    """``"octagon"`` (37 states) or ``"z4z6"``."""
    return load_automaton(bundled_text(f"{name}.aut"), name=name)


def read_automaton(path_or_name: str) -> Automaton:
    stem = path_or_name.removesuffix(".aut")
    if stem in ("octagon", "z4z6"):
        return bundled_automaton(stem)
    with open(path_or_name) as fh:
        return load_automaton(fh.read(), name=stem.rsplit("/", 1)[-1])


# ---------------------------------------------------------------------------
# Validation


@dataclass
class ValidationReport:
    max_verified_radius: int
    condition1_ok: bool
    condition2_ok: bool
    condition3_ok: bool
    counterexample: Optional[tuple] = None
    detail: str = ""
    path_counts: list = field(default_factory=list)
    sphere_sizes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.condition1_ok and self.condition2_ok and self.condition3_ok

    def as_dict(self) -> dict:
        return {
            "max_verified_radius": self.max_verified_radius,
            "condition1_ok": self.condition1_ok,
            "condition2_ok": self.condition2_ok,
            "condition3_ok": self.condition3_ok,
            "counterexample": None if self.counterexample is None else list(self.counterexample),
            "detail": self.detail,
            "path_counts": self.path_counts,
            "sphere_sizes": self.sphere_sizes,
        }


def validate(a: Automaton, p: Presentation, R: int, *, max_radius: int = MAX_RADIUS) -> ValidationReport:
    """Check reachability, geodesicity and bijectivity on the ball of radius ``R``.

    Accepted words of each length are evaluated through the ball keyer and
    compared with the exhaustive ball enumeration: a path of length ``n``
    must land on the sphere of radius ``n`` (geodesic), distinct paths on
    distinct elements, and every element must be hit.
    """
    if R > max_radius:
        raise RadiusTooLarge(f"radius {R} exceeds the cap {max_radius}")
    cond1 = len(a.reachable()) == a.state_count
    cond2 = cond3 = True
    counter = None
    detail = "" if cond1 else "unreachable states"
    ball = bfs_ball(p, R, max_radius=max_radius)
    keyer = keyer_for(p)
    table = a.transition_table()
    words = np.zeros((1, 0), dtype=np.int8)
    states = np.array([a.initial], dtype=np.intp)
    elems = keyer.identity(1)
    counts = [1]
    for n in range(1, R + 1):
        nxt = table[states]
        par, let = np.nonzero(nxt >= 0)
        words = np.concatenate([words[par], let[:, None].astype(np.int8)], axis=1)
        states = nxt[par, let]
        elems = keyer.right(elems[par], let)
        counts.append(len(words))
        keys = keyer.key(elems)
        dist, _ = ball.lookup(keys)
        bad = np.flatnonzero(dist != n)
        if len(bad) and cond2:
            cond2 = False
            counter = tuple(int(x) for x in words[bad[0]])
            detail = f"accepted word of length {n} is not geodesic"
        uniq, first, mult = np.unique(keys, return_index=True, return_counts=True)
        if cond3 and np.any(mult > 1):
            cond3 = False
            dup = np.flatnonzero(keys == uniq[np.argmax(mult > 1)])
            counter = counter or tuple(int(x) for x in words[dup[1]])
            detail = detail or f"two accepted words of length {n} name the same element"
        if cond3:
            missing = ~np.isin(ball.keys[n], keys)
            if np.any(missing):
                cond3 = False
                counter = counter or tuple(int(x) for x in ball.spheres[n][np.argmax(missing)])
                detail = detail or f"element at distance {n} has no accepted path"
    return ValidationReport(R, cond1, cond2, cond3, counter, detail, counts, ball.sizes)


# ---------------------------------------------------------------------------
# Builders


def canonical_numbering(a: Automaton) -> Automaton:
    """Renumber states in breadth-first order from the initial state, edges by (origin, label)."""
    table = a.transition_table()
    order = {a.initial: 0}
    queue = deque([a.initial])
    while queue:
        v = queue.popleft()
        for t in table[v]:
            if t >= 0 and int(t) not in order:
                order[int(t)] = len(order)
                queue.append(int(t))
    edges = sorted(((order[o], order[t], lab) for o, t, lab in a.edges if o in order), key=lambda e: (e[0], e[2]))
    return Automaton(len(order), 0, tuple(edges), a.generator_names, a.name)


def build_freeproduct_automaton(p: int, q: int, generator_names=("s1", "s2")) -> Automaton:
    """Acceptor of geodesic normal forms in ``Z/p * Z/q``.

    Syllables are ``x^k`` with ``-ceil(n/2) < k <= n/2`` for a factor of
    order ``n``, so the tie ``k = n/2`` is written with a positive exponent.
    """
    if p < 2 or q < 2:
        raise InvalidOrder(f"orders must be at least 2, got ({p}, {q})")
    states = {("start", 0): 0}
    edges = []

    def state(key):
        return states.setdefault(key, len(states))

    limits = [(p // 2, (p - 1) // 2), (q // 2, (q - 1) // 2)]  # (max positive, max negative)
    for g, (pos, neg) in enumerate(limits):
        for k in range(1, pos + 1):
            state((g, k))
        for k in range(1, neg + 1):
            state((g, -k))

    def entries(g):
        pos, neg = limits[g]
        out = [(letter(g), (g, 1))]
        if neg >= 1:
            out.append((letter(g, True), (g, -1)))
        return out

    for key, v in list(states.items()):
        g, k = key
        for h in (0, 1):
            if key == ("start", 0) or h != g:
                for lab, target in entries(h):
                    edges.append((v, states[target], lab))
        if key[0] == "start":
            continue
        pos, neg = limits[g]
        if 0 < k < pos:
            edges.append((v, states[(g, k + 1)], letter(g)))
        if -neg < k < 0:
            edges.append((v, states[(g, k - 1)], letter(g, True)))
    a = Automaton(len(states), 0, tuple(edges), tuple(generator_names), f"z{p}z{q}")
    return canonical_numbering(a)


def build_free_automaton(rank: int) -> Automaton:
    """Reduced-word acceptor of the free group of the given rank."""
    names = tuple(f"s{i + 1}" for i in range(rank))
    L = 2 * rank
    edges = [(0, a + 1, a) for a in range(L)]
    edges += [(b + 1, a + 1, a) for b in range(L) for a in range(L) if a != b ^ 1]
    return Automaton(L + 1, 0, tuple(edges), names, f"free{rank}")


def _difference_tables(p: Presentation, k: int):
    ball = bfs_ball(p, k)
    keyer = keyer_for(p)
    words = np.concatenate(
        [np.pad(s.astype(np.intp), ((0, 0), (0, k - n))) for n, s in enumerate(ball.spheres)]
    )
    lengths = np.concatenate([np.full(len(s), n) for n, s in enumerate(ball.spheres)])
    elems = keyer.identity(len(words))
    for j in range(k):
        live = lengths > j
        if np.any(live):
            elems[live] = keyer.right(elems[live], words[live, j])
    # ball element i has flat index i in the concatenated key order
    L = p.letter_count
    right = np.stack([ball.lookup(keyer.key(keyer.right(elems, b)))[1] for b in range(L)], axis=1)
    left = np.stack([ball.lookup(keyer.key(keyer.left(a, elems)))[1] for a in range(L)], axis=0)
    return right.tolist(), left.tolist()


_LESS, _GREATER, _EQUAL = 0, 1, 2


def _subset_construction(right, left, L, state_cap=500_000):
    """Shortlex geodesic acceptor from word differences inside a ball.

    A state records, for the word read so far, the differences ``u^-1 v``
    to competing words ``v`` of the same length that stay within the ball,
    split by whether ``v`` is shortlex-smaller or larger, together with the
    last letters of equal-element competitors.
    """

    def step(state, a):
        less, greater, last = state
        if a ^ 1 in last:
            return None
        ai = a ^ 1
        nl, ng, ne = set(), set(), set()
        for d, flag in [(0, _EQUAL)] + [(d, _LESS) for d in less] + [(d, _GREATER) for d in greater]:
            x = left[ai][d]
            for b in range(L):
                if x >= 0:
                    dp = right[x][b]
                else:
                    y = right[d][b]
                    dp = left[ai][y] if y >= 0 else -1
                if dp < 0:
                    continue
                f = flag
                if flag == _EQUAL:
                    f = _LESS if b < a else (_GREATER if b > a else _EQUAL)
                if dp == 0:
                    if f == _LESS:
                        return None
                    ne.add(b)
                elif f == _LESS:
                    nl.add(dp)
                elif f == _GREATER:
                    ng.add(dp)
        return frozenset(nl), frozenset(ng), frozenset(ne)

    init = (frozenset(), frozenset(), frozenset())
    index = {init: 0}
    queue = deque([init])
    trans = []
    while queue:
        st = queue.popleft()
        row = []
        for a in range(L):
            ns = step(st, a)
            if ns is None:
                row.append(-1)
                continue
            if ns not in index:
                if len(index) >= state_cap:
                    raise RadiusTooLarge(f"subset construction exceeded {state_cap} states")
                index[ns] = len(index)
                queue.append(ns)
            row.append(index[ns])
        trans.append(row)
    return np.array(trans, dtype=np.intp)


def _minimize(T: np.ndarray) -> tuple:
    """Moore partition refinement; every state accepts, -1 is the dead state."""
    part = np.zeros(len(T), dtype=np.intp)
    count = 1
    while True:
        sig = {}
        new = np.empty_like(part)
        for i, row in enumerate(T):
            key = (part[i],) + tuple(part[j] if j >= 0 else -1 for j in row)
            new[i] = sig.setdefault(key, len(sig))
        if len(sig) == count:
            return new, count
        part, count = new, len(sig)


def build_conetype_automaton(p: Presentation, k: int, *, check_radius: Optional[int] = MAX_RADIUS) -> Automaton:
    """Build a geodesic automatic structure from the ball of radius ``k``.

    States are classes of words that agree on which shortlex-competing
    geodesics stay within distance ``k``; they are minimized afterwards.
    For the octagon group ``k = 4`` already yields the 37-state machine.
    When ``check_radius`` is set, the result is validated and
    :class:`ValidationFailed` is raised with the report on failure, which is
    how too-small ``k`` shows up.
    """
    if k > MAX_RADIUS:
        raise RadiusTooLarge(f"k = {k} exceeds the ball cap {MAX_RADIUS}")
    right, left = _difference_tables(p, k)
    T = _subset_construction(right, left, p.letter_count)
    part, count = _minimize(T)
    edges = set()
    for i, row in enumerate(T):
        for a, j in enumerate(row):
            if j >= 0:
                edges.add((int(part[i]), int(part[j]), a))
    a = Automaton(count, int(part[0]), tuple(sorted(edges)), p.generator_names, p.name or "conetype")
    a = canonical_numbering(_with_fresh_initial(a))
    if check_radius is not None:
        report = validate(a, p, check_radius)
        if not report.ok:
            raise ValidationFailed(report)
    return a


def half_length_ok(p: Presentation, k: int) -> bool:
    return k >= relator_half_length(p)
