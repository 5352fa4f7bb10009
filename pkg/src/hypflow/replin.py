"""Linear representations of the example groups and their geometry.

Matrices act on column vectors; a word ``w = a1 a2 ... an`` is sent to
``rho(a1) rho(a2) ... rho(an)``.  Long products are kept in
:class:`LogScaledMatrix` form: an ``m x m`` array together with an integer
power-of-two exponent, so rescaling never rounds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ball import bfs_ball
from .spectral import scc_decompose
from .errors import DegenerateInterval, RadiusTooLarge
from .words import FREE_PRODUCT, Presentation

RESCALE_EXP = 128  # rescale once max |entry| exceeds 2**128
LN2 = math.log(2.0)


def rotation(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


def hyperbolic(u: float) -> np.ndarray:
    return np.diag([math.exp(u), math.exp(-u)])


@dataclass(frozen=True, eq=False)
class Representation:
    """Images of the letters: ``matrices[2*i]`` is rho(s_i), ``matrices[2*i+1]`` its inverse."""

    matrices: np.ndarray
    generator_names: tuple
    name: str = ""

    @classmethod
    def from_generators(cls, images, generator_names=None, name=""):
        images = [np.asarray(g, dtype=float) for g in images]
        mats = []
        for g in images:
            mats.append(g)
            mats.append(np.linalg.inv(g))
        names = tuple(generator_names or (f"s{i + 1}" for i in range(len(images))))
        return cls(np.array(mats), names, name)

    @property
    def dimension(self) -> int:
        return self.matrices.shape[1]

    @property
    def letter_count(self) -> int:
        return self.matrices.shape[0]

    def generator_images(self) -> np.ndarray:
        return self.matrices[0::2]

    def consistency(self, p: Optional[Presentation] = None) -> dict:
        """Max deviation of inverse pairs from I and of relator images from +-I."""
        eye = np.eye(self.dimension)
        inv_err = max(np.abs(self.matrices[2 * i] @ self.matrices[2 * i + 1] - eye).max()
                      for i in range(self.letter_count // 2))
        rel_err = 0.0
        if p is not None:
            for r in p.relators:
                g = product(self, r)
                rel_err = max(rel_err, min(np.abs(g - eye).max(), np.abs(g + eye).max()))
        return {"inverse_error": float(inv_err), "relator_error": float(rel_err)}

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name,
            "dimension": self.dimension,
            "generators": {n: self.matrices[2 * i].ravel().tolist() for i, n in enumerate(self.generator_names)},
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Representation":
        data = json.loads(text)
        m = data["dimension"]
        names = tuple(data["generators"])
        images = [np.array(data["generators"][n], dtype=float).reshape(m, m) for n in names]
        return cls.from_generators(images, names, data.get("name", ""))


def octagon_u() -> float:
    t = math.pi / 8
    return math.log((math.sqrt(math.cos(2 * t)) + math.cos(t)) / math.sin(t))


def octagon_rep() -> Representation:
    """Holonomy of the regular hyperbolic octagon with translation generators."""
    t = math.pi / 8
    A = hyperbolic(octagon_u())
    images = [A] + [rotation(k * t) @ A @ rotation(-k * t) for k in (3, 6, 1)]
    return Representation.from_generators(images, name="octagon")


def freeproduct_rep(u: float) -> Representation:
    """``s1 -> A_{-u} R(pi/2) A_u`` and ``s2 -> R(pi/3)``; dominated for large ``|u|``."""
    s1 = hyperbolic(-u) @ rotation(math.pi / 2) @ hyperbolic(u)
    return Representation.from_generators([s1, rotation(math.pi / 3)], name=f"z4z6_u{u:g}")


def bundled_rep(name: str, u: float = 1.0) -> Representation:
    if name == "octagon":
        return octagon_rep()
    if name in ("z4z6", "freeproduct"):
        return freeproduct_rep(u)
    raise ValueError(f"unknown representation {name!r}")


def product(rho: Representation, word) -> np.ndarray:
    g = np.eye(rho.dimension)
    for a in word:
        g = g @ rho.matrices[a]
    return g


# ---------------------------------------------------------------------------
# Log-scaled products


@dataclass
class LogScaledMatrix:
    """``true matrix = 2**exponent * matrix``; ``log_scale`` is ``exponent * ln 2``."""

    matrix: np.ndarray
    exponent: int = 0
    log_abs_det: float = 0.0

    @property
    def log_scale(self) -> float:
        return self.exponent * LN2

    def renormalize(self) -> "LogScaledMatrix":
        top = np.abs(self.matrix).max()
        if top > 2.0 ** RESCALE_EXP:
            e = math.frexp(top)[1]
            self.matrix = np.ldexp(self.matrix, -e)
            self.exponent += e
        return self

    def log_norm(self) -> float:
        """log of the operator norm (largest singular value)."""
        return self.log_scale + math.log(singular_values(self.matrix)[0])

    def true_matrix(self) -> np.ndarray:
        return np.ldexp(self.matrix, self.exponent)


def evaluate(rho: Representation, word) -> LogScaledMatrix:
    out = LogScaledMatrix(np.eye(rho.dimension))
    dets = np.log(np.abs(np.linalg.det(rho.matrices)))
    for a in word:
        out.matrix = out.matrix @ rho.matrices[a]
        out.log_abs_det += dets[a]
        out.renormalize()
    return out


def evaluate_batch(rho: Representation, words: np.ndarray, lengths=None):
    """Vectorized :func:`evaluate` for an ``(N, n)`` array of letters.

    Rows shorter than ``n`` are given by ``lengths``; their trailing
    entries are ignored.  Returns ``(matrices, exponents)``.
    """
    words = np.asarray(words, dtype=np.intp)
    N, n = words.shape
    m = rho.dimension
    table = np.concatenate([rho.matrices, np.eye(m)[None]])  # last slot: identity padding
    if lengths is not None:
        words = np.where(np.arange(n)[None, :] < np.asarray(lengths)[:, None], words, len(rho.matrices))
    if m == 2:
        return _evaluate_batch_2x2(table, words)
    mats = np.broadcast_to(np.eye(m), (N, m, m)).copy()
    exps = np.zeros(N, dtype=np.int64)
    for j in range(n):
        mats = mats @ table[words[:, j]]
        if j % 16 == 15:
            mats, exps = _rescale_batch(mats, exps)
    return _rescale_batch(mats, exps)


def _evaluate_batch_2x2(table, words):
    N, n = words.shape
    ta, tb, tc, td = (np.ascontiguousarray(table[:, i, j]) for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    a, b, c, d = np.ones(N), np.zeros(N), np.zeros(N), np.ones(N)
    exps = np.zeros(N, dtype=np.int64)
    for j in range(n):
        w = words[:, j]
        A, B, C, D = ta[w], tb[w], tc[w], td[w]
        a, b, c, d = a * A + b * C, a * B + b * D, c * A + d * C, c * B + d * D
        if j % 16 == 15:
            mats, exps = _rescale_batch(np.stack([a, b, c, d], axis=1).reshape(N, 2, 2), exps)
            a, b, c, d = mats[:, 0, 0].copy(), mats[:, 0, 1].copy(), mats[:, 1, 0].copy(), mats[:, 1, 1].copy()
    return _rescale_batch(np.stack([a, b, c, d], axis=1).reshape(N, 2, 2), exps)


def evaluate_sorted_words(rho: Representation, words: np.ndarray):
    """:func:`evaluate_batch` for lexicographically sorted rows, sharing common prefixes.

    Each distinct prefix is multiplied once, so a sorted list of all
    words of length ``n`` costs little more than its last level.
    """
    words = np.asarray(words, dtype=np.intp)
    N, n = words.shape
    if N == 0 or n == 0:
        return evaluate_batch(rho, words)
    fresh = np.ones((N, n), dtype=bool)
    fresh[1:] = np.logical_or.accumulate(words[1:] != words[:-1], axis=1)
    mats = np.broadcast_to(np.eye(rho.dimension), (1, rho.dimension, rho.dimension)).copy()
    exps = np.zeros(1, dtype=np.int64)
    parent = np.zeros(N, dtype=np.intp)
    for j in range(n):
        ids = np.cumsum(fresh[:, j]) - 1
        first = np.flatnonzero(fresh[:, j])
        step, e = evaluate_batch(rho, words[first, j:j + 1])
        mats, exps = _rescale_batch(mats[parent[first]] @ step, exps[parent[first]] + e)
        parent = ids
    return mats[parent], exps[parent]


def _rescale_batch(mats, exps):
    top = np.abs(mats).max(axis=(1, 2))
    big = top > 2.0 ** RESCALE_EXP
    if np.any(big):
        e = np.frexp(top[big])[1]
        mats[big] = np.ldexp(mats[big], -e[:, None, None])
        exps = exps.copy()
        exps[big] += e
    return mats, exps


def log_sigma1_batch(mats: np.ndarray, exps=None) -> np.ndarray:
    s1 = singular_values_batch(mats)[:, 0]
    out = np.log(s1)
    if exps is not None:
        out = out + exps * LN2
    return out


# ---------------------------------------------------------------------------
# Singular values and spectral radii


def singular_values(g) -> np.ndarray:
    """Singular values, largest first; closed form for 2 x 2."""
    g = np.asarray(g, dtype=float)
    if g.shape == (2, 2):
        return singular_values_batch(g[None])[0]
    ev = np.linalg.eigvalsh(g.T @ g)
    return np.sqrt(np.clip(ev[::-1], 0, None))


def singular_values_batch(mats: np.ndarray) -> np.ndarray:
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    det = np.abs(a * d - b * c)
    # sigma1 +- sigma2 are the norms of (a + d, b - c) and (a - d, b + c); no cancellation near sigma1 = sigma2
    s1 = (np.hypot(a + d, b - c) + np.hypot(a - d, b + c)) / 2
    s2 = np.divide(det, s1, out=np.zeros_like(s1), where=s1 > 0)
    return np.stack([s1, s2], axis=1)


def spectral_radius_elem(g) -> float:
    g = np.asarray(g, dtype=float)
    if g.shape == (2, 2):
        tr = g[0, 0] + g[1, 1]
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        disc = tr * tr - 4 * det
        if disc < 0:
            return math.sqrt(abs(det))
        return (abs(tr) + math.sqrt(disc)) / 2
    return float(np.max(np.abs(np.linalg.eigvals(g))))


# ---------------------------------------------------------------------------
# Hyperbolic plane

_CAYLEY = np.array([[1, -1j], [1, 1j]])
_CAYLEY_INV = np.linalg.inv(_CAYLEY)


def to_disk_form(g) -> np.ndarray:
    """Conjugate a real 2 x 2 matrix into the form acting on the unit disk."""
    g = np.asarray(g)
    return _CAYLEY @ g @ _CAYLEY_INV


def mobius_act(g, z):
    """Action of ``g`` (det > 0) on the unit disk, through the Cayley transform of the half-plane."""
    G = to_disk_form(g)
    z = np.asarray(z, dtype=complex)
    return (G[0, 0] * z + G[0, 1]) / (G[1, 0] * z + G[1, 1])


def disk_distance(z, w=0.0) -> float:
    z, w = complex(z), complex(w)
    x = abs((z - w) / (1 - np.conj(w) * z))
    return 2 * math.atanh(x)


def displacement(g: LogScaledMatrix) -> float:
    """Hyperbolic distance from the disk center to ``g . 0``.

    With ``G = [[alpha, beta], [conj(beta), conj(alpha)]]`` the disk form,
    ``g . 0 = beta / conj(alpha)`` and the distance is
    ``log((|alpha| + |beta|) / (|alpha| - |beta|))``; the denominator is
    written as ``det / (|alpha| + |beta|)`` to avoid cancellation.
    """
    G = to_disk_form(g.matrix)
    alpha, beta = abs(G[0, 0]), abs(G[0, 1])
    s = alpha + beta
    log_det = g.log_abs_det - 2 * g.log_scale
    return 2 * (math.log(s) + g.log_scale) - (log_det + 2 * g.log_scale)


def displacement_identity_check(rho: Representation, sample_words) -> float:
    """max |d(o, rho(w) o) - 2 log sigma1(rho(w))| over the sample words."""
    worst = 0.0
    for w in sample_words:
        g = evaluate(rho, w)
        worst = max(worst, abs(displacement(g) - 2 * g.log_norm()))
    return worst


def disk_angle(mats: np.ndarray) -> np.ndarray:
    """arg of ``g . 0`` in the disk for a batch of real 2 x 2 matrices."""
    G = _CAYLEY @ mats.astype(complex) @ _CAYLEY_INV
    return np.angle(G[:, 0, 1] / np.conj(G[:, 0, 0]))


# ---------------------------------------------------------------------------
# Domination


def projective_order(g, n: int, tol: float = 1e-9) -> int:
    """Smallest divisor ``k`` of ``n`` with ``g**k = +-I``."""
    eye = np.eye(len(g))
    for k in range(1, n + 1):
        if n % k:
            continue
        h = np.linalg.matrix_power(g, k)
        if min(np.abs(h - eye).max(), np.abs(h + eye).max()) <= tol:
            return k
    return n


def collapsed_presentation(rho: Representation, p: Presentation) -> Presentation:
    """Free-product presentation with torsion orders cut down to the projective image orders.

    When a generator power maps to ``-I`` the ball of ``p`` holds many
    elements with the same projective image (for example ``s1^2 s2^3``
    maps to the identity); counting each image once at its shortest
    length means running over this quotient instead.
    """
    if p.family != FREE_PRODUCT:
        return p
    torsion = tuple((i, projective_order(rho.matrices[2 * i], n)) for i, n in p.torsion)
    if torsion == tuple(p.torsion):
        return p
    relators = tuple((2 * i,) * n for i, n in torsion)
    return Presentation(p.generator_names, relators, p.family, torsion, p.name + "_projective")


@dataclass
class DominationFit:
    c: float
    C: float
    fit_quality: float
    passed: bool
    envelope: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"c": self.c, "C": self.C, "fit_quality": self.fit_quality, "pass": self.passed,
                "envelope": self.envelope}


def domination_fit(rho: Representation, p: Presentation, R: int, *, min_length: int = 3,
                   min_quality: float = 0.9, max_radius: int = 8) -> DominationFit:
    """Fit ``-log(sigma2/sigma1) >= c |x| - log C`` over the ball of radius ``R``.

    Elements whose projective image already occurs at a shorter length
    are dropped (see :func:`collapsed_presentation`).  The slope comes from a least-squares line through the per-radius
    minimum gap for ``|x| >= min_length``; ``C`` is then the smallest
    constant for which every element of the ball (identity excluded)
    satisfies the bound.  The fit passes when ``c > 0`` and the envelope
    is close to linear (``R^2 >= min_quality``).
    """
    if R > max_radius:
        raise RadiusTooLarge(f"radius {R} exceeds the cap {max_radius}")
    ball = bfs_ball(collapsed_presentation(rho, p), R, max_radius=max_radius)
    ns, gaps = [], []
    envelope = []
    for n in range(1, R + 1):
        mats, exps = evaluate_batch(rho, ball.spheres[n])
        sv = singular_values_batch(mats)
        gap = np.log(sv[:, 0]) - np.log(sv[:, 1])
        ns.append(np.full(len(gap), n))
        gaps.append(gap)
        envelope.append((n, float(gap.min())))
    ns, gaps = np.concatenate(ns), np.concatenate(gaps)
    pts = np.array([e for e in envelope if e[0] >= min_length])
    if len(pts) < 2:
        return DominationFit(0.0, math.inf, 0.0, False, envelope)
    slope, intercept = np.polyfit(pts[:, 0], pts[:, 1], 1)
    pred = slope * pts[:, 0] + intercept
    ss_res = float(np.sum((pts[:, 1] - pred) ** 2))
    ss_tot = float(np.sum((pts[:, 1] - pts[:, 1].mean()) ** 2))
    quality = 1 - ss_res / ss_tot if ss_tot > 0 else 0.0
    log_C = float(np.max(slope * ns - gaps))
    passed = bool(slope > 0 and quality >= min_quality)
    return DominationFit(float(slope), math.exp(log_C), quality, passed, envelope)


# ---------------------------------------------------------------------------
# Multicones on the projective line (angles mod pi)


def projective_image(g, theta):
    """Angle in [0, pi) of the line ``g . (cos theta, sin theta)``."""
    g = np.asarray(g)
    theta = np.asarray(theta, dtype=float)
    x = g[0, 0] * np.cos(theta) + g[0, 1] * np.sin(theta)
    y = g[1, 0] * np.cos(theta) + g[1, 1] * np.sin(theta)
    return np.mod(np.arctan2(y, x), math.pi)


def _arc(lo, hi):
    """(start, length) of the counter-clockwise arc from lo to hi on R / pi Z."""
    length = (hi - lo) % math.pi
    return lo % math.pi, length


def _image_arc(g, lo, hi):
    a, b = projective_image(g, [lo, hi])
    if np.linalg.det(g) < 0:
        a, b = b, a
    start, length = _arc(a, b)
    return start, length


def _inside_margin(arc, target):
    """Margin by which ``arc`` sits inside ``target`` (negative when not contained)."""
    (a, la), (b, lb) = arc, target
    off = (a - b) % math.pi
    if off > lb:
        off -= math.pi  # arc starts before the target
    return min(off, lb - off - la)


@dataclass
class MulticoneReport:
    passed: bool
    min_margin: float
    violations: list

    def as_dict(self) -> dict:
        return {"pass": self.passed, "min_margin": self.min_margin, "violations": self.violations}


def _check_intervals(cones):
    out = {}
    for v, ivs in cones.items():
        arcs = []
        for lo, hi in ivs:
            if not (0 <= lo < math.pi and 0 <= hi < math.pi):
                raise DegenerateInterval(f"state {v}: endpoints must lie in [0, pi)")
            start, length = _arc(lo, hi)
            if length <= 0:
                raise DegenerateInterval(f"state {v}: interval ({lo}, {hi}) is empty or the whole line")
            arcs.append((start, length))
        out[int(v)] = arcs
    return out


def multicone_check(rho: Representation, cones: dict, a, eps: float = 1e-6) -> MulticoneReport:
    """Verify ``rho(s) . cone(v')`` lies inside ``cone(v)`` with margin ``eps`` for every edge ``v -s-> v'``.

    ``cones`` maps each state to a list of ``(lo, hi)`` angle pairs in
    ``[0, pi)``; an interval with ``lo > hi`` wraps through the angle 0.
    Cones are shadows of cone types: reading ``s`` and continuing from
    ``v'`` stays inside what is visible from ``v``, so along a path the
    matrices compose in word order.  Only edges on cycles are checked
    (transient edges out of the initial state carry no constraint), and
    each of their endpoints needs a nonempty cone.
    """
    arcs = _check_intervals(cones)
    worst = math.inf
    violations = []
    for idx, o, t, lab in recurrent_edges(a):
        src, dst = arcs.get(t, []), arcs.get(o, [])
        if not src or not dst:
            violations.append({"edge": idx, "origin": o, "target": t, "label": lab, "margin": -math.inf})
            worst = -math.inf
            continue
        g = rho.matrices[lab]
        for lo, length in src:
            img = _image_arc(g, lo, lo + length)
            margin = max(_inside_margin(img, d) for d in dst)
            worst = min(worst, margin)
            if margin < eps:
                violations.append({"edge": idx, "origin": o, "target": t, "label": lab, "margin": margin})
    return MulticoneReport(not violations, worst, violations)


def _merge(arcs, pad):
    """Union of padded arcs as sorted disjoint (start, length) pairs, or None if it covers the line."""
    if not arcs:
        return []
    ivs = []
    for s, l in arcs:
        s, l = (s - pad) % math.pi, l + 2 * pad
        if l >= math.pi:
            return None
        ivs.append((s, s + l))
    ivs.sort()
    merged = [list(ivs[0])]
    for s, e in ivs[1:]:
        if s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    # join across the wrap point
    if len(merged) > 1 and merged[-1][1] >= merged[0][0] + math.pi:
        merged[0][0] = merged[-1][0] - math.pi
        merged[0][1] = max(merged[0][1], merged[-1][1] - math.pi)
        merged.pop()
    out = []
    for s, e in merged:
        if e - s >= math.pi:
            return None
        out.append((s % math.pi, e - s))
    return out


def recurrent_edges(a) -> list:
    """Edges lying on cycles; the initial state sees the whole boundary and carries no cone."""
    ids = sorted(i for c in scc_decompose(a) for i in c.edge_ids)
    return [(i, *a.edges[i]) for i in ids]


def _pull_back(rho, edges, cones, pad):
    new = {v: [] for v in cones}
    for _, o, t, lab in edges:
        g = rho.matrices[lab]
        for s, l in cones[t]:
            new[o].append(_image_arc(g, s, s + l))
    out = {}
    for v, arcs in new.items():
        merged = _merge(arcs, pad)
        if merged is None:
            raise DegenerateInterval(f"cone of state {v} grew to the whole projective line")
        out[v] = merged
    return out


def attracting_direction(g) -> float:
    """Projective angle of the eigenvector of the eigenvalue with largest modulus."""
    w, v = np.linalg.eig(np.asarray(g, dtype=float))
    vec = np.real(v[:, int(np.argmax(np.abs(w)))])
    return math.atan2(vec[1], vec[0]) % math.pi


def _cycle_word(edges, v):
    """Labels of a shortest cycle from ``v`` back to ``v`` inside the recurrent edges."""
    out = {}
    for _, o, t, lab in edges:
        out.setdefault(o, []).append((t, lab))
    prev = {v: None}
    frontier = [v]
    while frontier:
        nxt = []
        for x in frontier:
            for t, lab in out.get(x, []):
                if t == v:
                    word = [lab]
                    while prev[x] is not None:
                        x, l = prev[x]
                        word.append(l)
                    return word[::-1]
                if t not in prev:
                    prev[t] = (x, lab)
                    nxt.append(t)
        frontier = nxt
    raise ValueError(f"state {v} lies on no cycle")


def _as_pairs(cones):
    return {v: [(s, (s + l) % math.pi) for s, l in c] for v, c in cones.items()}


def find_multicones(rho: Representation, a, pad: float = 1e-2, max_depth: int = 40,
                    eps: float = 1e-6) -> dict:
    """Search for a strictly invariant multicone family.

    Each recurrent state ``v`` is seeded with the attracting direction of
    a cycle through ``v``.  ``D_0(v)`` is that direction padded by
    ``pad`` and ``D_n(v)`` is the padded union of ``rho(s) D_{n-1}(v')``
    over edges ``v -s-> v'``.  The candidate ``C_N = D_0 u ... u D_{N-1}``
    satisfies ``rho(s) D_n(v') inside int D_{n+1}(v)`` by construction,
    so only the deepest layer needs to land inside; the first ``N`` for
    which :func:`multicone_check` passes is returned as
    ``{state: [(lo, hi), ...]}``.
    """
    edges = recurrent_edges(a)
    states = sorted({v for _, o, t, _ in edges for v in (o, t)})
    layer = {}
    for v in states:
        theta = attracting_direction(product(rho, _cycle_word(edges, v)))
        layer[v] = [((theta - pad) % math.pi, 2 * pad)]
    union = {v: list(c) for v, c in layer.items()}
    for _ in range(max_depth):
        cones = _as_pairs(union)
        if multicone_check(rho, cones, a, eps).passed:
            return cones
        layer = _pull_back(rho, edges, layer, pad)
        union = {v: _merge(union[v] + layer[v], 0.0) for v in states}
        if any(u is None for u in union.values()):
            raise DegenerateInterval("a cone grew to the whole projective line")
    raise DegenerateInterval(f"no strictly invariant family found up to depth {max_depth}")


def _same(a, b, tol):
    if len(a) != len(b):
        return False
    return all(abs(x[0] - y[0]) <= tol and abs(x[1] - y[1]) <= tol for x, y in zip(a, b))


def cones_to_json(cones: dict) -> str:
    return json.dumps({str(v): [[lo, hi] for lo, hi in ivs] for v, ivs in cones.items()}, indent=1)


def cones_from_json(text: str) -> dict:
    return {int(v): [tuple(iv) for iv in ivs] for v, ivs in json.loads(text).items()}
