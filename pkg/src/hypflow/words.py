"""Group presentations, words and exact word reduction.

Letters are small integers: generator ``i`` is ``2*i`` and its inverse is
``2*i + 1``, so ``a ^ 1`` inverts a letter.  The integer order
``s1 < s1^-1 < s2 < s2^-1 < ...`` is the lexicographic order used for
tie-breaking everywhere.  Words are tuples of letters.

Two presentation families are supported by the reduction routines:

* ``free-product``: ``<s1, ..., sg | s1^p1, ..., sg^pg>``;
* ``dehn-small-cancellation``: relators satisfying C'(1/6), where Dehn's
  algorithm solves the word problem.  Geodesic lengths are exact for the
  bundled surface-group presentation (verified exhaustively against the
  ball enumeration in the test-suite).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

from .errors import ParseError, UnsupportedPresentation

Word = tuple

FREE_PRODUCT = "free-product"
DEHN = "dehn-small-cancellation"
FREE = "free"
_FAMILY_ALIASES = {
    "free-product": FREE_PRODUCT,
    "dehn": DEHN,
    "dehn-small-cancellation": DEHN,
    "free": FREE,
}


def letter(generator: int, inverted: bool = False) -> int:
    return 2 * generator + int(inverted)


def generator_of(a: int) -> int:
    return a >> 1


def is_inverted(a: int) -> bool:
    return bool(a & 1)


def inverse(w: Sequence[int]) -> Word:
    return tuple(a ^ 1 for a in reversed(w))


def free_reduce(w: Sequence[int]) -> Word:
    out: list[int] = []
    for a in w:
        if out and out[-1] == a ^ 1:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def cyclic_conjugates(w: Sequence[int]) -> list[Word]:
    w = tuple(w)
    return [w[i:] + w[:i] for i in range(len(w))]


@dataclass(frozen=True)
class Presentation:
    generator_names: tuple
    relators: tuple
    family: str
    torsion: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.family not in (FREE_PRODUCT, DEHN, FREE):
            raise UnsupportedPresentation(f"unknown family {self.family!r}")
        g = len(self.generator_names)
        for r in self.relators:
            if not r:
                raise ValueError("relators must be nonempty")
            if any(not 0 <= a < 2 * g for a in r):
                raise ValueError(f"relator {r} uses an unknown letter")
            if free_reduce(r) != tuple(r):
                raise ValueError(f"relator {r} is not freely reduced")
        if self.family == FREE_PRODUCT:
            expected = tuple((letter(i),) * n for i, n in self.torsion)
            if tuple(self.relators) != expected:
                raise ValueError("free-product relators must be exactly the torsion relators")

    @property
    def rank(self) -> int:
        return len(self.generator_names)

    @property
    def letter_count(self) -> int:
        return 2 * self.rank

    def letter_name(self, a: int) -> str:
        name = self.generator_names[generator_of(a)]
        return name + "^-1" if is_inverted(a) else name

    def format_word(self, w: Iterable[int]) -> str:
        return " ".join(self.letter_name(a) for a in w)

    def parse_letter(self, token: str) -> int:
        m = _LETTER_RE.fullmatch(token)
        if not m or m.group(1) not in self.generator_names:
            raise ParseError(f"unknown letter {token!r}")
        if m.group(2) not in (None, "-1"):
            raise ParseError(f"letter {token!r} must have exponent 1 or -1")
        return letter(self.generator_names.index(m.group(1)), m.group(2) == "-1")

    def parse_word(self, text: str) -> Word:
        """Parse ``"s1 s2^-1 s3^2"``; integer powers expand in place."""
        out = []
        for token in text.replace("*", " ").split():
            m = _LETTER_RE.fullmatch(token)
            if not m or m.group(1) not in self.generator_names:
                raise ParseError(f"unknown letter {token!r}")
            k = int(m.group(2)) if m.group(2) else 1
            a = letter(self.generator_names.index(m.group(1)), k < 0)
            out.extend([a] * abs(k))
        return tuple(out)


_LETTER_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\^(-?\d+))?")


def load_presentation(text: str, name: str = "") -> Presentation:
    names = None
    family = None
    torsion = []
    relator_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ParseError("expected 'key: value'", lineno, 1)
        key, value = key.strip(), value.strip()
        if key == "generators":
            names = tuple(value.split())
        elif key == "family":
            if value not in _FAMILY_ALIASES:
                raise ParseError(f"unknown family {value!r}", lineno, raw.index(value) + 1)
            family = _FAMILY_ALIASES[value]
        elif key == "torsion":
            parts = value.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise ParseError("torsion line must be 'torsion: <generator> <order>'", lineno)
            torsion.append((parts[0], int(parts[1]), lineno))
        elif key == "relator":
            relator_lines.append((value, lineno))
        elif key == "name":
            name = name or value
        else:
            raise ParseError(f"unknown key {key!r}", lineno, 1)
    if names is None:
        raise ParseError("missing 'generators' line")
    if family is None:
        raise ParseError("missing 'family' line")
    tors = []
    for gen, order, lineno in torsion:
        if gen not in names:
            raise ParseError(f"unknown generator {gen!r}", lineno)
        tors.append((names.index(gen), order))
    tors.sort()
    scratch = Presentation(names, (), FREE)
    relators = []
    for value, lineno in relator_lines:
        try:
            relators.append(scratch.parse_word(value))
        except ParseError as exc:
            raise ParseError(str(exc), lineno) from None
    if family == FREE_PRODUCT:
        if relators:
            raise ParseError("free-product presentations take torsion lines, not relators")
        relators = [(letter(i),) * n for i, n in tors]
    elif tors:
        raise ParseError("torsion lines are only allowed for the free-product family")
    return Presentation(names, tuple(relators), family, tuple(tors), name)


def presentation_to_text(p: Presentation) -> str:
    lines = []
    if p.name:
        lines.append(f"name: {p.name}")
    lines.append(f"family: {'dehn' if p.family == DEHN else p.family}")
    lines.append("generators: " + " ".join(p.generator_names))
    if p.family == FREE_PRODUCT:
        lines += [f"torsion: {p.generator_names[i]} {n}" for i, n in p.torsion]
    else:
        lines += ["relator: " + p.format_word(r) for r in p.relators]
    return "\n".join(lines) + "\n"


def bundled_text(filename: str) -> str:
    return resources.files("hypflow").joinpath("data", filename).read_text()


@lru_cache(maxsize=None)
def bundled_presentation(name: str) -> Presentation:
    """``"octagon"`` or ``"z4z6"``."""
    return load_presentation(bundled_text(f"{name}.grp"), name=name)


def read_presentation(path_or_name: str) -> Presentation:
    stem = path_or_name.removesuffix(".grp")
    if stem in ("octagon", "z4z6"):
        return bundled_presentation(stem)
    with open(path_or_name) as fh:
        return load_presentation(fh.read(), name=stem.rsplit("/", 1)[-1])


# ---------------------------------------------------------------------------
# Rewriting system


_END = -1


@dataclass(frozen=True)
class _RuleSet:
    rules: dict          # lhs -> rhs
    trie: dict           # reversed-lhs trie, terminal key _END -> (len, rhs)
    halves: dict         # half-relator subword -> its complement (both orientations)
    long_lhs: frozenset  # subwords of length half+1
    half: int            # 0 when ties do not occur


def _check_family(p: Presentation):
    if p.family == FREE and p.relators:
        raise UnsupportedPresentation("free family with relators")


@lru_cache(maxsize=None)
def _ruleset(p: Presentation) -> _RuleSet:
    _check_family(p)
    cyclic = set()
    for r in p.relators:
        cyclic.update(cyclic_conjugates(r))
        cyclic.update(cyclic_conjugates(inverse(r)))
    rules = {}
    halves = {}
    for c in cyclic:
        n = len(c)
        for m in range((n + 1) // 2, n + 1):
            u, v = c[:m], inverse(c[m:])
            if 2 * m == n:
                halves[u] = v
                if not v < u:
                    continue
            elif 2 * m < n:
                continue
            rules[u] = v
    trie: dict = {}
    for lhs, rhs in rules.items():
        node = trie
        for a in reversed(lhs):
            node = node.setdefault(a, {})
        node[_END] = (len(lhs), rhs)
    lengths = {len(r) for r in p.relators}
    half = 0
    if p.family == DEHN and len(lengths) == 1 and min(lengths) % 2 == 0:
        half = min(lengths) // 2
    long_lhs = frozenset(u for u in rules if half and len(u) == half + 1)
    return _RuleSet(rules, trie, halves, long_lhs, half)


def _push(out: list, a: int, trie: dict) -> None:
    pending = [a]
    while pending:
        x = pending.pop()
        if out and out[-1] == x ^ 1:
            out.pop()
            continue
        out.append(x)
        node = trie
        best = None
        i = len(out) - 1
        while i >= 0:
            node = node.get(out[i])
            if node is None:
                break
            hit = node.get(_END)
            if hit is not None:
                best = hit
            i -= 1
        if best is not None:
            depth, rhs = best
            del out[-depth:]
            pending.extend(reversed(rhs))


class Reducer:
    """Mutable Dehn normal form, updated one letter at a time.

    Each push rewrites only a suffix: the stored word is always a fixed
    point of the rewrite system, so any new redex must end at the last
    letter.
    """

    def __init__(self, p: Presentation, word: Iterable[int] = ()):
        self._trie = _ruleset(p).trie
        self.letters: list[int] = []
        for a in word:
            _push(self.letters, a, self._trie)

    def push(self, a: int) -> None:
        _push(self.letters, a, self._trie)

    def extend(self, w: Iterable[int]) -> None:
        for a in w:
            _push(self.letters, a, self._trie)

    @property
    def word(self) -> Word:
        return tuple(self.letters)

    def __len__(self):
        return len(self.letters)


def dehn_reduce(w: Sequence[int], p: Presentation) -> Word:
    """Rewrite ``w`` to the fixed point of Dehn's rules plus lex-ordered ties.

    Subwords longer than half a cyclic relator are replaced by the shorter
    complement; exact halves are replaced only by a lexicographically
    smaller complement.  The result is empty iff ``w`` is trivial.
    """
    if p.family not in (FREE_PRODUCT, DEHN, FREE):
        raise UnsupportedPresentation(p.family)
    trie = _ruleset(p).trie
    out: list[int] = []
    for a in w:
        _push(out, a, trie)
    return tuple(out)


def multiply_normal(w: Sequence[int], a: int, p: Presentation) -> Word:
    out = list(w)
    _push(out, a, _ruleset(p).trie)
    return tuple(out)


def _shortening_chain(w: list, rs: _RuleSet):
    """Find a chain of half-relator swaps ending in a Dehn-reducible window.

    Swapping a half relator moves the path to the far side of its face; if
    the next face is then entered along a full half, the swap can be
    repeated.  Returns the strictly shorter rewritten word, or None when no
    chain exists.
    """
    h = rs.half
    n = len(w)
    halves = rs.halves
    for i in range(n - h + 1):
        if tuple(w[i:i + h]) not in halves:
            continue
        cur = list(w)
        j = i
        while True:
            cur[j:j + h] = halves[tuple(cur[j:j + h])]
            k = j + h - 1
            window = tuple(cur[k:k + h + 1])
            if window in rs.long_lhs:
                # rewrite here: a later Dehn pass would undo the swaps through the tie rule
                cur[k:k + h + 1] = rs.rules[window]
                return cur
            if k + h <= n and tuple(cur[k:k + h]) in halves:
                j = k
                continue
            break
    return None


def geodesic_reduce(w: Sequence[int], p: Presentation, *, reduced: bool = False) -> Word:
    """Return a geodesic word for the element represented by ``w``.

    Pass ``reduced=True`` when ``w`` is already a Dehn normal form.
    """
    if p.family not in (FREE_PRODUCT, DEHN, FREE):
        raise UnsupportedPresentation(p.family)
    rs = _ruleset(p)
    out = list(w) if reduced else list(dehn_reduce(w, p))
    if not rs.half:
        return tuple(out)
    while True:
        chained = _shortening_chain(out, rs)
        if chained is None:
            return tuple(out)
        out = list(dehn_reduce(chained, p))


def geodesic_length(w: Sequence[int], p: Presentation, *, reduced: bool = False) -> int:
    return len(geodesic_reduce(w, p, reduced=reduced))


def word_power(w: Sequence[int], n: int) -> Word:
    return tuple(w) * n


def stable_length(w: Sequence[int], p: Presentation, n_max: int = 64, *, history: bool = False):
    """Estimate ``lim |w^n| / n`` from the largest power ``n <= n_max``.

    Powers are doubled (2, 4, 8, ...) and each is reduced from the previous
    reduced power, so the cost stays linear in ``n_max * |w|``.  With
    ``history=True`` also return the list of ``(n, |w^n|/n)`` pairs and a
    flag telling whether the sequence was non-increasing (it is, up to the
    ``O(1/n)`` boundary term, by subadditivity).
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if p.family not in (FREE_PRODUCT, DEHN, FREE):
        raise UnsupportedPresentation(p.family)
    base = geodesic_reduce(w, p)
    hist = [(1, float(len(base)))]
    power, n = base, 1
    while 2 * n <= n_max:
        power = geodesic_reduce(power + power, p)
        n *= 2
        hist.append((n, len(power) / n))
    value = hist[-1][1]
    if not history:
        return value
    monotone = all(b[1] <= a[1] + 1e-12 for a, b in zip(hist, hist[1:]))
    return value, hist, monotone


def relator_half_length(p: Presentation) -> int:
    return max((len(r) for r in p.relators), default=0) // 2


def log_binomial(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
