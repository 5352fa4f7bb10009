"""Exhaustive ball enumeration: the ground-truth oracle for word lengths.

Elements are identified through a *keyer*, a homomorphism from the group
to objects with exact integer keys:

* free products use the Dehn normal form itself, which is canonical there;
* the genus-two surface group uses its octagon representation reduced
  modulo a prime ``p = 1 (mod 16)`` in which ``sqrt(2)/2`` has a square
  root, so every matrix entry is exact.  The image lives in PSL(2, p) and
  equal elements always get equal keys.

Different keys therefore always mean different elements.  With
``confirm=True`` every merge of equal keys is additionally checked with
Dehn's algorithm, so the counts rest on the word-problem solution alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import HypflowError, RadiusTooLarge, UnsupportedPresentation
from .words import (
    DEHN,
    FREE,
    FREE_PRODUCT,
    Presentation,
    cyclic_conjugates,
    dehn_reduce,
    inverse,
    multiply_normal,
)

MAX_RADIUS = 8
CONFIRM_RADIUS = 5

_OCTAGON_RELATOR = (7, 5, 3, 1, 6, 4, 2, 0)


class FingerprintCollision(HypflowError):
    pass


def _is_prime(n: int) -> bool:
    if n < 2 or n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@lru_cache(maxsize=None)
def _octagon_generators_mod_p():
    """Generator images of the octagon representation over GF(p), as (8, 4) rows."""
    p = (1 << 21) - 1
    while True:
        p -= 1
        if p % 16 != 1 or not _is_prime(p):
            continue
        z = next(z for z in (pow(a, (p - 1) // 16, p) for a in range(2, p)) if pow(z, 8, p) == p - 1)
        half = pow(2, -1, p)
        i = pow(z, 4, p)

        def cos(k):
            return (pow(z, k % 16, p) + pow(z, -k % 16, p)) * half % p

        def sin(k):
            return (pow(z, k % 16, p) - pow(z, -k % 16, p)) * pow(2 * i, -1, p) % p

        c2 = cos(2)
        squares = np.arange(p, dtype=np.int64) ** 2 % p
        roots = np.flatnonzero(squares == c2)
        if len(roots) == 0:
            continue
        s = int(roots[0])
        eu = (s + cos(1)) * pow(sin(1), -1, p) % p
        a_u = (eu, 0, 0, pow(eu, -1, p))

        def mul(x, y):
            return (
                (x[0] * y[0] + x[1] * y[2]) % p,
                (x[0] * y[1] + x[1] * y[3]) % p,
                (x[2] * y[0] + x[3] * y[2]) % p,
                (x[2] * y[1] + x[3] * y[3]) % p,
            )

        def rot(k):
            return (cos(k), -sin(k) % p, sin(k), cos(k))

        gens = [a_u] + [mul(mul(rot(k), a_u), rot(-k)) for k in (3, 6, 1)]
        mats = []
        for g in gens:
            mats.append(g)
            mats.append((g[3], -g[1] % p, -g[2] % p, g[0]))
        prod = (1, 0, 0, 1)
        for a in _OCTAGON_RELATOR:
            prod = mul(prod, mats[a])
        if prod not in ((1, 0, 0, 1), (p - 1, 0, 0, p - 1)):
            continue
        return p, np.array(mats, dtype=np.int64)


class MatrixKeyer:
    """Keys elements of the genus-two surface group via PSL(2, p)."""

    def __init__(self):
        self.p, self.gens = _octagon_generators_mod_p()

    def identity(self, n: int = 1) -> np.ndarray:
        return np.tile(np.array([1, 0, 0, 1], dtype=np.int64), (n, 1))

    def right(self, m: np.ndarray, letters) -> np.ndarray:
        g = self.gens[letters]
        if g.ndim == 1:
            g = g[None, :]
        p = self.p
        out = np.empty_like(m)
        out[:, 0] = (m[:, 0] * g[:, 0] + m[:, 1] * g[:, 2]) % p
        out[:, 1] = (m[:, 0] * g[:, 1] + m[:, 1] * g[:, 3]) % p
        out[:, 2] = (m[:, 2] * g[:, 0] + m[:, 3] * g[:, 2]) % p
        out[:, 3] = (m[:, 2] * g[:, 1] + m[:, 3] * g[:, 3]) % p
        return out

    def left(self, letters, m: np.ndarray) -> np.ndarray:
        g = self.gens[letters]
        if g.ndim == 1:
            g = g[None, :]
        p = self.p
        out = np.empty_like(m)
        out[:, 0] = (g[:, 0] * m[:, 0] + g[:, 1] * m[:, 2]) % p
        out[:, 1] = (g[:, 0] * m[:, 1] + g[:, 1] * m[:, 3]) % p
        out[:, 2] = (g[:, 2] * m[:, 0] + g[:, 3] * m[:, 2]) % p
        out[:, 3] = (g[:, 2] * m[:, 1] + g[:, 3] * m[:, 3]) % p
        return out

    def key(self, m: np.ndarray) -> np.ndarray:
        p = self.p
        lead = np.where(m[:, 0] != 0, m[:, 0], m[:, 1])
        flip = lead > p // 2
        m = np.where(flip[:, None], (p - m) % p, m)
        last = np.where(m[:, 0] != 0, m[:, 2], m[:, 3])
        return (m[:, 0] << 42) | (m[:, 1] << 21) | last

    def of_words(self, words: np.ndarray) -> np.ndarray:
        m = self.identity(len(words))
        for j in range(words.shape[1]):
            m = self.right(m, words[:, j].astype(np.intp))
        return m


class NormalFormKeyer:
    """Keys elements by their (canonical) Dehn normal form."""

    def __init__(self, p: Presentation):
        self.presentation = p

    def identity(self, n: int = 1):
        out = np.empty(n, dtype=object)
        out[:] = [()] * n
        return out

    def right(self, m, letters):
        letters = np.broadcast_to(np.asarray(letters), (len(m),))
        out = np.empty(len(m), dtype=object)
        out[:] = [multiply_normal(w, int(a), self.presentation) for w, a in zip(m, letters)]
        return out

    def left(self, letters, m):
        letters = np.broadcast_to(np.asarray(letters), (len(m),))
        out = np.empty(len(m), dtype=object)
        out[:] = [dehn_reduce((int(a),) + w, self.presentation) for w, a in zip(m, letters)]
        return out

    def key(self, m) -> np.ndarray:
        # base-(2g+1) digits, most significant first; fits int64 for short forms
        base = self.presentation.letter_count + 1
        keys = np.empty(len(m), dtype=np.int64)
        for i, w in enumerate(m):
            k = len(w)
            for a in w:
                k = k * base + a + 1
            keys[i] = k
        return keys

    def of_words(self, words: np.ndarray):
        out = np.empty(len(words), dtype=object)
        out[:] = [dehn_reduce(tuple(int(a) for a in w), self.presentation) for w in words]
        return out


def _is_octagon(p: Presentation) -> bool:
    if p.family != DEHN or p.rank != 4 or len(p.relators) != 1:
        return False
    r = p.relators[0]
    return r in cyclic_conjugates(_OCTAGON_RELATOR) or r in cyclic_conjugates(inverse(_OCTAGON_RELATOR))


def keyer_for(p: Presentation):
    if p.family in (FREE_PRODUCT, FREE):
        return NormalFormKeyer(p)
    if _is_octagon(p):
        return MatrixKeyer()
    raise UnsupportedPresentation(
        "ball enumeration needs a faithful exact keyer; only free products and the octagon group have one"
    )


@dataclass
class Ball:
    """Spheres of a Cayley ball with shortlex-least representatives.

    ``spheres[n]`` is an ``(N_n, n)`` int8 array of words listed in shortlex
    order; ``keys[n]`` holds the matching element keys.
    """

    presentation: Presentation
    radius: int
    spheres: list
    keys: list
    confirmed: bool = False
    _index: tuple = field(default=None, repr=False)

    @property
    def sizes(self) -> list:
        return [len(s) for s in self.spheres]

    def __len__(self):
        return sum(self.sizes)

    def sphere_words(self, n: int) -> list:
        return [tuple(int(a) for a in w) for w in self.spheres[n]]

    def as_map(self) -> dict:
        """Radius -> (element count, representative normal forms)."""
        return {n: (len(s), self.sphere_words(n)) for n, s in enumerate(self.spheres)}

    def truncate(self, radius: int) -> "Ball":
        return Ball(self.presentation, radius, self.spheres[: radius + 1], self.keys[: radius + 1], self.confirmed)

    def _lookup_tables(self):
        if self._index is None:
            allk = np.concatenate(self.keys)
            dist = np.concatenate([np.full(len(k), n, dtype=np.int16) for n, k in enumerate(self.keys)])
            order = np.argsort(allk, kind="stable")
            self._index = (allk[order], dist[order], order)
        return self._index

    def lookup(self, keys: np.ndarray):
        """Return (distance, flat index) for each key, -1 where outside the ball."""
        sk, sd, order = self._lookup_tables()
        i = np.minimum(np.searchsorted(sk, keys), len(sk) - 1)
        hit = sk[i] == keys
        return np.where(hit, sd[i], -1), np.where(hit, order[i], -1)

    def distance(self, word) -> int | None:
        keyer = keyer_for(self.presentation)
        w = np.asarray([tuple(word)], dtype=np.int8).reshape(1, len(word))
        d, _ = self.lookup(keyer.key(keyer.of_words(w)))
        return None if d[0] < 0 else int(d[0])


def _confirm_merges(p, words, letters, parents, prev_words, keys, prev_keys, accepted_words, accepted_keys):
    """Check with Dehn's algorithm that every merged candidate equals its namesake."""
    table = {}
    for ws, ks in zip(prev_words, prev_keys):
        for w, k in zip(ws, ks):
            table.setdefault(int(k), tuple(int(a) for a in w))
    for w, k in zip(accepted_words, accepted_keys):
        table.setdefault(int(k), tuple(int(a) for a in w))
    for par, a, k in zip(parents, letters, keys):
        cand = tuple(int(x) for x in words[par]) + (int(a),)
        rep = table[int(k)]
        if cand != rep and dehn_reduce(cand + inverse(rep), p):
            raise FingerprintCollision(f"{cand} and {rep} share a key but differ")


def _enumerate(p: Presentation, R: int, confirm: bool) -> Ball:
    keyer = keyer_for(p)
    nletters = p.letter_count
    words = np.zeros((1, 0), dtype=np.int8)
    states = keyer.identity(1)
    keys_cur = keyer.key(states)
    keys_prev = np.zeros(0, dtype=np.int64)
    spheres, keys = [words], [keys_cur]
    for n in range(1, R + 1):
        N = len(words)
        cand = np.concatenate([keyer.right(states, a) for a in range(nletters)])
        # parent-major order so the first hit of each key is shortlex-least
        perm = np.arange(N * nletters).reshape(nletters, N).T.ravel()
        cand = cand[perm]
        ck = keyer.key(cand)
        par = np.repeat(np.arange(N), nletters)
        let = np.tile(np.arange(nletters), N)
        fresh = ~np.isin(ck, keys_prev) & ~np.isin(ck, keys_cur)
        _, first = np.unique(np.where(fresh, ck, -1), return_index=True)
        first = np.sort(first[fresh[first]])
        if confirm:
            merged = np.setdiff1d(np.arange(len(ck)), first)
            _confirm_merges(
                p, words, let[merged], par[merged], spheres[-2:], ck[merged], keys[-2:],
                [np.append(words[par[i]], let[i]) for i in first], ck[first],
            )
        words = np.concatenate([words[par[first]], let[first, None].astype(np.int8)], axis=1)
        states = cand[first]
        keys_prev, keys_cur = keys_cur, ck[first]
        spheres.append(words)
        keys.append(keys_cur)
    return Ball(p, R, spheres, keys, confirm)


_CACHE: dict = {}


def bfs_ball(p: Presentation, R: int, *, max_radius: int = MAX_RADIUS, confirm: bool | None = None) -> Ball:
    """Enumerate the ball of radius ``R`` sphere by sphere.

    ``confirm`` defaults to True for ``R <= 5``; larger radii rely on the
    keyer being a homomorphism (distinct keys are always distinct
    elements) and on the radius-8 sphere sizes matching the known growth
    series, which the test-suite checks.
    """
    if R < 0:
        raise ValueError("radius must be nonnegative")
    if R > max_radius:
        raise RadiusTooLarge(f"radius {R} exceeds the cap {max_radius}")
    if p.family not in (FREE_PRODUCT, DEHN, FREE):
        raise UnsupportedPresentation(p.family)
    if confirm is None:
        confirm = R <= CONFIRM_RADIUS
    for (pres, radius, confirmed), ball in _CACHE.items():
        if pres == p and radius >= R and (confirmed or not confirm):
            return ball if radius == R else ball.truncate(R)
    ball = _enumerate(p, R, confirm)
    _CACHE[(p, R, confirm)] = ball
    return ball


def sphere_sizes(p: Presentation, R: int, **kw) -> list:
    return bfs_ball(p, R, **kw).sizes
