"""Pressure, equilibrium chains and pressure curves for locally constant potentials.

A potential of block length ``k`` assigns a real number to every run of
``k`` consecutive symbols along a path in a recurrent component.  Symbols
are either component edges (alphabet ``"edges"``, local edge indices) or
edge labels (alphabet ``"labels"``).  Pressures are computed exactly on
the higher-block graph whose nodes are runs of ``m = max(k - 1, 1)``
symbols; a transition appends one symbol and carries the weight
``exp(psi)`` of the block it ends with (weights sit on the target).

For label potentials nodes are pairs (label word, end state).  Since the
automaton is deterministic this graph is conjugate to the edge recoding,
so the pressure is the same, while the node count is far smaller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from . import spectral
from .errors import MissingBlockWeight, NoBracketing, NoConvergence, RecodingTooLarge, SupremumOnBoundary
from .replin import Representation, evaluate_sorted_words, log_sigma1_batch
from .spectral import EIG_TOL, MAX_ITERS, Component, MarkovChain

_LOG_TINY = math.log(np.finfo(float).tiny)

EDGES, LABELS = "edges", "labels"
MAX_BLOCKS = 10_000_000
RICHARDSON_STEPS = (1e-3, 1e-4)


# ---------------------------------------------------------------------------
# Potentials


@dataclass(frozen=True, eq=False)
class EdgePotential:
    """Locally constant potential on ``k``-blocks.

    ``blocks`` is an ``(n, k)`` integer array and ``values`` the matching
    reals.  A potential with ``default`` set takes that value on every
    block not listed, so ``EdgePotential.constant(c)`` needs no table.
    """

    k: int
    alphabet: str = EDGES
    blocks: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    default: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("block length must be at least 1")
        if self.alphabet not in (EDGES, LABELS):
            raise ValueError(f"unknown alphabet {self.alphabet!r}")
        if self.values is not None and not np.all(np.isfinite(self.values)):
            raise ValueError("potential values must be finite")

    @classmethod
    def constant(cls, value: float, alphabet: str = EDGES, name: str = "") -> "EdgePotential":
        return cls(1, alphabet, None, None, float(value), name or f"const({value:g})")

    @classmethod
    def from_map(cls, mapping: dict, alphabet: str = EDGES, name: str = "") -> "EdgePotential":
        keys = list(mapping)
        k = len(keys[0])
        blocks = np.array(keys, dtype=np.int64).reshape(len(keys), k)
        return cls(k, alphabet, blocks, np.array([mapping[b] for b in keys], dtype=float), None, name)

    @property
    def is_constant(self) -> bool:
        return self.blocks is None

    def scaled(self, a: float) -> "EdgePotential":
        vals = None if self.values is None else a * self.values
        default = None if self.default is None else a * self.default
        return EdgePotential(self.k, self.alphabet, self.blocks, vals, default, f"{a:g}*{self.name}")

    def shifted(self, b: float) -> "EdgePotential":
        vals = None if self.values is None else self.values + b
        default = None if self.default is None else self.default + b
        return EdgePotential(self.k, self.alphabet, self.blocks, vals, default, f"{self.name}+{b:g}")

    def lookup(self, codes: np.ndarray, base: int) -> np.ndarray:
        """Values on blocks given as base-``base`` integer codes."""
        codes = np.asarray(codes, dtype=np.int64)
        if self.blocks is None:
            return np.full(codes.shape, self.default, dtype=float)
        own = _encode(self.blocks, base)
        order = np.argsort(own)
        own, vals = own[order], self.values[order]
        pos = np.searchsorted(own, codes)
        pos_c = np.minimum(pos, len(own) - 1)
        hit = own[pos_c] == codes
        out = np.where(hit, vals[pos_c], 0.0 if self.default is None else self.default)
        if self.default is None and not np.all(hit):
            miss = _decode(codes[~hit][:1], base, self.k)[0]
            raise MissingBlockWeight(f"no weight for block {tuple(int(x) for x in miss)}")
        return out


def _encode(blocks: np.ndarray, base: int) -> np.ndarray:
    blocks = np.asarray(blocks, dtype=np.int64)
    code = np.zeros(blocks.shape[0], dtype=np.int64)
    for j in range(blocks.shape[1]):
        code = code * base + blocks[:, j]
    return code


def _decode(codes: np.ndarray, base: int, k: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64).copy()
    out = np.zeros((len(codes), k), dtype=np.int64)
    for j in range(k - 1, -1, -1):
        out[:, j] = codes % base
        codes //= base
    return out


def combine(*terms) -> list:
    """Normalize ``(coefficient, potential)`` pairs; see :func:`pressure`."""
    return [(float(a), p) for a, p in terms]


# ---------------------------------------------------------------------------
# Higher-block graphs


@dataclass(eq=False)
class RecodedGraph:
    component: Component
    alphabet: str
    m: int
    base: int
    node_code: np.ndarray
    node_end: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    word_code: np.ndarray  # (m+1)-symbol code of each transition
    last_symbol: np.ndarray
    _classes: Optional[np.ndarray] = None
    _warm: dict = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return len(self.node_code)

    @property
    def transition_count(self) -> int:
        return len(self.src)

    def block_codes(self, k: int) -> np.ndarray:
        """Code of the last ``k`` symbols of every transition's word."""
        if k > self.m + 1:
            raise ValueError(f"graph with node length {self.m} cannot see {k}-blocks")
        return self.word_code % (self.base ** k)

    def blocks(self, k: int) -> np.ndarray:
        return _decode(np.unique(self.block_codes(k)), self.base, k)

    def matrix(self, logw: np.ndarray) -> tuple:
        shift = float(np.max(logw)) if len(logw) else 0.0
        w = np.exp(logw - shift)
        n = self.node_count
        return sp.csr_matrix((w, (self.src, self.dst)), shape=(n, n)), shift

    def classes(self) -> np.ndarray:
        if self._classes is None:
            p = self.component.period
            if p == 1:
                self._classes = np.zeros(self.node_count, dtype=np.int64)
            else:
                pattern = sp.csr_matrix((np.ones(len(self.src)), (self.src, self.dst)),
                                        shape=(self.node_count,) * 2)
                self._classes = spectral._cyclic_classes(pattern, p)
        return self._classes


_RECODED: dict = {}


def recode(c: Component, alphabet: str, m: int, max_blocks: int = MAX_BLOCKS) -> RecodedGraph:
    """Graph on runs of ``m`` symbols inside ``c`` (cached per component)."""
    key = (id(c.automaton), c.edge_ids, alphabet, m)
    hit = _RECODED.get(key)
    if hit is not None and hit.component is c:
        return hit
    a = c.automaton
    origins, targets = c.origins, c.targets
    symbols = np.arange(c.size, dtype=np.int64) if alphabet == EDGES else c.labels.astype(np.int64)
    base = c.size if alphabet == EDGES else a.letter_count
    states = a.state_count
    if base ** (m + 1) * states >= 2 ** 62:
        raise RecodingTooLarge(f"{m + 1}-blocks over {base} symbols do not fit the block codes")
    order = np.argsort(origins, kind="stable")
    out_ptr = np.zeros(states + 1, dtype=np.int64)
    np.add.at(out_ptr, origins + 1, 1)
    out_ptr = np.cumsum(out_ptr)
    out_edges = order

    def extend(code, end):
        deg = out_ptr[end + 1] - out_ptr[end]
        total = int(deg.sum())
        if total > max_blocks:
            raise RecodingTooLarge(f"recoding needs {total} blocks, above the limit {max_blocks}")
        rep = np.repeat(np.arange(len(code)), deg)
        start = np.repeat(out_ptr[end], deg)
        offset = np.arange(total) - np.repeat(np.cumsum(deg) - deg, deg)
        e = out_edges[start + offset]
        return rep, code[rep] * base + symbols[e], targets[e], symbols[e]

    # level 1: one node per (symbol, end state)
    keys = np.unique(symbols * states + targets)
    code, end = keys // states, keys % states
    for _ in range(m - 1):
        _, ncode, nend, _ = extend(code, end)
        keys = np.unique(ncode * states + nend)
        code, end = keys // states, keys % states
    src, wcode, wend, last = extend(code, end)
    tkeys = (wcode % (base ** m)) * states + wend
    dst = np.searchsorted(keys, tkeys)
    g = RecodedGraph(c, alphabet, m, base, code, end, src, dst, wcode, last)
    if len(_RECODED) >= 4:
        _RECODED.pop(next(iter(_RECODED)))
    _RECODED[key] = g
    return g


def _graph_for(c: Component, terms) -> RecodedGraph:
    alphabets = {p.alphabet for _, p in terms if not p.is_constant}
    if len(alphabets) > 1:
        raise ValueError("potentials on edges and on labels cannot be mixed")
    alphabet = alphabets.pop() if alphabets else EDGES
    k = max(p.k for _, p in terms)
    return recode(c, alphabet, max(k - 1, 1))


def _terms(psi) -> list:
    if isinstance(psi, EdgePotential):
        return [(1.0, psi)]
    return combine(*psi)


def transition_potential(g: RecodedGraph, psi) -> np.ndarray:
    """Value of ``psi`` (a potential or list of ``(coef, potential)``) on every transition."""
    out = np.zeros(g.transition_count)
    for a, p in _terms(psi):
        out += a * p.lookup(g.block_codes(p.k), g.base)
    return out


def _underflows(logw: np.ndarray) -> bool:
    # an edge weight that rounds to zero deletes the edge and lowers the Perron root
    return len(logw) > 0 and float(np.min(logw) - np.max(logw)) < _LOG_TINY


def _log_perron(g: RecodedGraph, logw: np.ndarray, tol: float, max_iters: int) -> float:
    if _underflows(logw):
        raise NoConvergence("edge weights underflow; the potential spans too many orders of magnitude",
                            iterations=0, residual=math.inf)
    W, shift = g.matrix(logw)
    rho, h, _, _ = spectral._power(W, g.classes(), g.component.period, tol, max_iters,
                                   g._warm.get("right"))
    g._warm["right"] = h
    return math.log(rho) + shift


def _pressure_sign_estimate(g: RecodedGraph, logw: np.ndarray, max_iters: int = MAX_ITERS) -> float:
    """Pressure estimate whose sign is certain.

    Sweeps stop as soon as the Collatz-Wielandt bracket on the Perron root
    excludes ``exp(0)``; the returned value is the log of the bracket's
    geometric midpoint, which then has the sign of the true pressure.
    """
    if g.component.period != 1:
        return _log_perron(g, logw, EIG_TOL, max_iters)
    W, shift = g.matrix(logw)
    certified_hi = not _underflows(logw)
    x = g._warm.get("right")
    x = np.ones(g.node_count) if x is None else x.copy()
    tiny = np.finfo(float).tiny
    for _ in range(max_iters):
        y = W @ x
        ratios = y / x
        # an underflowed entry only loosens the lower bound, which stays valid
        rmin = ratios.min()
        lo = (math.log(rmin) if rmin > 0 else -math.inf) + shift
        hi = math.log(ratios.max()) + shift if certified_hi else math.inf
        if lo > 0 or hi < 0 or (certified_hi and hi - lo <= EIG_TOL):
            return (lo + hi) / 2 if math.isfinite(lo) else hi
        x = np.maximum(y / y.sum(), tiny)
    raise NoBracketing("sign of the pressure could not be settled"
                       + ("" if certified_hi else " (edge weights underflow)"))


def pressure(c: Component, psi, tol: float = EIG_TOL, max_iters: int = MAX_ITERS) -> float:
    """Pressure of ``psi`` on the component: log Perron root of the weighted block graph.

    ``psi`` is an :class:`EdgePotential` or a list of
    ``(coefficient, potential)`` pairs summed on each block.
    """
    terms = _terms(psi)
    g = _graph_for(c, terms)
    return _log_perron(g, transition_potential(g, terms), tol, max_iters)


def equilibrium_markov(c: Component, psi, tol: float = EIG_TOL, max_iters: int = MAX_ITERS) -> MarkovChain:
    """Equilibrium chain of ``psi`` on the block graph.

    For ``k = 1`` edge potentials the chain states are the component
    edges, as for :func:`hypflow.spectral.parry_chain`.  ``meta`` carries
    the pressure, the per-transition potential values and the graph.
    """
    terms = _terms(psi)
    g = _graph_for(c, terms)
    logw = transition_potential(g, terms)
    W, shift = g.matrix(logw)
    chain, _ = _equilibrium(W, shift, g, logw, c.period, tol, max_iters)
    return chain


def _equilibrium(W, shift, g, logw, period, tol, max_iters):
    node_last = np.zeros(g.node_count, dtype=np.int64)
    node_last[g.dst] = g.last_symbol
    chain, pd = spectral.markov_from_weights(W, period, tol, max_iters)
    meta = {
        "pressure": pd.log_eigenvalue + shift,
        "alphabet": g.alphabet,
        "block_length": g.m,
        "graph": g,
        "node_last": node_last,
        "transition_potential": _align(chain.transition, g, logw),
    }
    last = node_last if g.alphabet == EDGES else None
    return MarkovChain(chain.transition, chain.stationary, last, None, meta), pd


def _align(P: sp.csr_matrix, g: RecodedGraph, logw: np.ndarray) -> sp.csr_matrix:
    """Potential values as a sparse matrix over the transitions of ``g``."""
    n = g.node_count
    return sp.csr_matrix((logw, (g.src, g.dst)), shape=(n, n))


def entropy(m: MarkovChain) -> float:
    """``-sum_i pi(i) sum_j P(i, j) log P(i, j)``."""
    P = m.transition.tocoo()
    p = P.data
    logs = np.log(p, out=np.zeros_like(p), where=p > 0)
    return float(-np.sum(m.stationary[P.row] * p * logs))


def mean_potential(m: MarkovChain) -> float:
    """Stationary mean of the potential carried by an equilibrium chain."""
    P = m.transition.tocoo()
    V = m.meta["transition_potential"].tocsr()
    vals = np.asarray(V[P.row, P.col]).ravel()
    return float(np.sum(m.stationary[P.row] * P.data * vals))


def variational_gap(c: Component, psi, tol: float = 1e-12) -> dict:
    """Pressure against entropy plus mean potential of the equilibrium chain."""
    chain = equilibrium_markov(c, psi, tol)
    pr = pressure(c, psi, tol)
    h, mean = entropy(chain), mean_potential(chain)
    return {"pressure": pr, "entropy": h, "mean": mean, "gap": abs(pr - h - mean)}


def gibbs_ratios(c: Component, psi: EdgePotential, n_max: int = 6, tol: float = 1e-12) -> dict:
    """Gibbs ratios ``mu[cyl] / exp(-n Pr + S_n psi)`` over all edge cylinders of length ``<= n_max``.

    Only ``k = 1`` edge potentials are supported: then chain states are
    component edges and ``mu[e0 .. e_{n-1}] = pi(e0) prod P(e_i, e_{i+1})``.
    """
    if psi.k != 1 or (psi.alphabet != EDGES and not psi.is_constant):
        raise ValueError("Gibbs check is implemented for k = 1 edge potentials")
    chain = equilibrium_markov(c, psi, tol)
    pr = chain.meta["pressure"]
    g = chain.meta["graph"]
    node_val = np.zeros(g.node_count)
    node_val[g.dst] = transition_potential(g, psi)
    P = chain.dense()
    pi = chain.stationary
    mass = pi.copy()
    birk = node_val.copy()
    last = np.arange(len(pi))
    lo, hi = math.inf, -math.inf
    count = 0
    for n in range(1, n_max + 1):
        if n > 1:
            rows, cols = np.nonzero(P[last] > 0)
            mass = mass[rows] * P[last[rows], cols]
            birk = birk[rows] + node_val[cols]
            last = cols
        ratio = mass / np.exp(-n * pr + birk)
        lo, hi = min(lo, ratio.min()), max(hi, ratio.max())
        count += len(ratio)
    return {"c1": float(lo), "c2": float(hi), "spread": float(hi / lo), "cylinders": count}


# ---------------------------------------------------------------------------
# Potentials from lengths and representations


def label_words(c: Component, k: int) -> np.ndarray:
    """All label words of length ``k`` read along paths of the component."""
    g = recode(c, LABELS, max(k - 1, 1))
    return g.blocks(k)


def increment_potential(c: Component, k: int, length: Callable) -> EdgePotential:
    """``psi(L) = length(L) - length(L[1:])`` on label ``k``-words.

    ``length`` maps an ``(N, j)`` array of label words to ``N`` reals.
    Birkhoff sums then telescope to ``length`` of the whole word up to
    boundary terms of ``k`` letters.
    """
    words = label_words(c, k)
    head = np.asarray(length(words), dtype=float)
    tail = np.asarray(length(words[:, 1:]), dtype=float) if k > 1 else np.zeros(len(words))
    return EdgePotential(k, LABELS, words, head - tail, None, f"increment{k}")


def rep_potential(rho: Representation, c: Component, k: int) -> EdgePotential:
    """``psi(L) = log||rho(L)|| - log||rho(L[1:])||`` on label ``k``-words."""

    def log_norm(words):
        if words.shape[1] == 0:
            return np.zeros(len(words))
        order = np.lexsort(words.T[::-1])
        mats, exps = evaluate_sorted_words(rho, words[order])
        out = np.empty(len(words))
        out[order] = log_sigma1_batch(mats, exps)
        return out

    p = increment_potential(c, k, log_norm)
    return EdgePotential(p.k, LABELS, p.blocks, p.values, None, f"rep{k}[{rho.name}]")


def word_length_table(p, extra_words: Sequence, radius: int) -> tuple:
    """Word lengths for generators ``S`` plus ``extra_words``, by breadth-first search.

    Each extra word and its inverse counts as one generator.  Elements are
    identified by the ball keyer; a key match is confirmed with the Dehn
    word problem, so a fingerprint collision raises instead of merging two
    elements.  Returns ``(keyer, {key: length})`` for every element of
    length at most ``radius`` in the enlarged generating set.
    """
    from .ball import FingerprintCollision, keyer_for
    from .words import dehn_reduce, inverse

    keyer = keyer_for(p)
    gens = [(a,) for a in range(p.letter_count)]
    for w in extra_words:
        gens += [tuple(w), inverse(tuple(w))]

    def key(w):
        return int(keyer.key(keyer.of_words(np.array([w], dtype=np.intp).reshape(1, len(w))))[0])

    seen = {key(()): ((), 0)}
    frontier = [()]
    for r in range(1, radius + 1):
        nxt = []
        for x in frontier:
            for s in gens:
                y = dehn_reduce(x + s, p)
                ky = key(y)
                if ky in seen:
                    if dehn_reduce(y + inverse(seen[ky][0]), p):
                        raise FingerprintCollision(f"distinct elements share the key {ky}")
                    continue
                seen[ky] = (y, r)
                nxt.append(y)
        frontier = nxt
    return keyer, {k: r for k, (_, r) in seen.items()}


def extended_length_potential(c: Component, p, extra_words: Sequence, k: int) -> EdgePotential:
    """Increment potential for the word length in ``S`` plus ``extra_words``."""
    keyer, table = word_length_table(p, extra_words, k)

    def length(words):
        if words.shape[1] == 0:
            return np.zeros(len(words))
        keys = keyer.key(keyer.of_words(words))
        return np.array([table[int(x)] for x in keys], dtype=float)

    return increment_potential(c, k, length)


# ---------------------------------------------------------------------------
# Pressure and Manhattan curves


def manhattan_theta(c: Component, psi_star: EdgePotential, s: float, tol: float = EIG_TOL) -> float:
    """``theta(s) = Pr(-s psi*)``: the Manhattan curve against the word metric."""
    return pressure(c, [(-s, psi_star)], tol)


def manhattan_root(c: Component, psi: EdgePotential, psi_star: EdgePotential, s: float,
                   tol: float = 1e-12, bracket=(-10.0, 10.0), max_expand: int = 30) -> float:
    """Root ``t`` of ``Pr(-s psi* - t psi) = 0``.

    The map is decreasing in ``t`` when ``psi`` has positive averages.  The
    bracket is doubled outward until the signs differ; failure raises
    :class:`NoBracketing`, which points at a non-dominated input.
    """
    terms = [(-s, psi_star), (-1.0, psi)]
    g = _graph_for(c, terms)
    a = transition_potential(g, [(1.0, psi_star)])
    b = transition_potential(g, [(1.0, psi)])

    known = {}

    def f(t):
        if t in known:
            return known[t]
        return _log_perron(g, -s * a - t * b, tol, MAX_ITERS)

    def sign_only(t):
        # bracket ends only need a sign; brentq falls back to bisection if the value is rough
        try:
            known[t] = _pressure_sign_estimate(g, -s * a - t * b)
        except NoBracketing:
            raise NoBracketing(f"pressure sign undetermined at t={t:g}; the pair looks non-dominated") from None
        return known[t]

    lo, hi = bracket
    flo, fhi = sign_only(lo), sign_only(hi)
    for _ in range(max_expand):
        if flo > 0 > fhi:
            break
        width = hi - lo
        if flo <= 0:
            hi, fhi = lo, flo
            lo -= width
            flo = sign_only(lo)
        if fhi >= 0:
            lo, flo = hi, fhi
            hi += width
            fhi = sign_only(hi)
    else:
        raise NoBracketing(f"pressure does not change sign on [{lo:g}, {hi:g}]")
    if not flo > 0 > fhi:
        raise NoBracketing(f"pressure does not change sign on [{lo:g}, {hi:g}]")
    return brentq(f, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)


def manhattan_rep(rho: Optional[Representation], rho_star: Representation, c: Component, s: float,
                  k: int, tol: float = 1e-12) -> float:
    """Manhattan curve of a representation pair at ``s`` using ``k``-block potentials.

    ``rho = None`` stands for the word metric (potential identically 1).
    """
    psi_star = rep_potential(rho_star, c, k)
    if rho is None:
        psi = EdgePotential.constant(1.0, LABELS)
    else:
        psi = psi_star if rho is rho_star else rep_potential(rho, c, k)
    return manhattan_root(c, psi, psi_star, s, tol)


@dataclass
class PressureCurve:
    samples: list
    k_used: Optional[int]
    derivative_at_zero: float

    @property
    def s(self) -> np.ndarray:
        return np.array([x for x, _ in self.samples])

    @property
    def theta(self) -> np.ndarray:
        return np.array([y for _, y in self.samples])

    def is_convex(self, tol: float = 1e-6) -> bool:
        s, th = self.s, self.theta
        if len(s) < 3:
            return True
        slopes = np.diff(th) / np.diff(s)
        return bool(np.all(np.diff(slopes) >= -tol))

    def is_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.theta) < 0))

    def to_csv(self) -> str:
        return "s,theta\n" + "".join(f"{x:.12g},{y:.12g}\n" for x, y in self.samples)

    def as_dict(self) -> dict:
        return {"k_used": self.k_used, "derivative_at_zero": self.derivative_at_zero,
                "samples": [[x, y] for x, y in self.samples]}


def richardson_derivative(f: Callable, x: float = 0.0, steps=RICHARDSON_STEPS) -> float:
    """Centered differences at two steps combined to cancel the ``h^2`` term."""
    h1, h2 = steps
    d1 = (f(x + h1) - f(x - h1)) / (2 * h1)
    d2 = (f(x + h2) - f(x - h2)) / (2 * h2)
    return (h1 ** 2 * d2 - h2 ** 2 * d1) / (h1 ** 2 - h2 ** 2)


def pressure_curve(theta: Callable, s_grid, k_used: Optional[int] = None) -> PressureCurve:
    samples = [(float(s), float(theta(s))) for s in s_grid]
    return PressureCurve(samples, k_used, richardson_derivative(theta))


@dataclass
class RateFunction:
    grid: list
    zero_location: float

    def to_csv(self) -> str:
        return "t,I\n" + "".join(f"{t:.12g},{v:.12g}\n" for t, v in self.grid)

    def as_dict(self) -> dict:
        return {"zero_location": self.zero_location, "grid": [[t, v] for t, v in self.grid]}


def legendre_rate(curve: PressureCurve, t_grid, on_boundary: str = "raise") -> RateFunction:
    """``I(t) = sup_s {t s - theta(-s)} + theta(0)`` on the sampled grid.

    The grid must be symmetric about 0 and contain 0.  The maximizing
    sample is refined by the vertex of the parabola through it and its
    neighbors.  A maximum at the edge of the grid raises
    :class:`SupremumOnBoundary` unless ``on_boundary="clip"``.
    """
    s, th = curve.s, curve.theta
    order = np.argsort(s)
    s, th = s[order], th[order]
    if not np.allclose(s, -s[::-1], atol=1e-12):
        raise ValueError("s-grid must be symmetric about 0")
    zero = np.flatnonzero(np.abs(s) < 1e-12)
    if len(zero) != 1:
        raise ValueError("s-grid must contain 0")
    th0 = th[zero[0]]
    th_neg = th[::-1]  # theta(-s) on the same grid
    out = []
    for t in t_grid:
        f = t * s - th_neg
        j = int(np.argmax(f))
        if j in (0, len(s) - 1):
            if on_boundary != "clip":
                raise SupremumOnBoundary(f"supremum for t = {t:g} sits at the grid edge s = {s[j]:g}")
            best = f[j]
        else:
            best = _parabola_peak(s[j - 1:j + 2], f[j - 1:j + 2])
        out.append((float(t), float(best + th0)))
    vals = np.array([v for _, v in out])
    return RateFunction(out, float(out[int(np.argmin(np.abs(vals)))][0]))


def _parabola_peak(x, y) -> float:
    (x0, x1, x2), (y0, y1, y2) = x, y
    d01, d12 = (y1 - y0) / (x1 - x0), (y2 - y1) / (x2 - x1)
    a = (d12 - d01) / (x2 - x0)
    if a >= 0:
        return float(max(y))
    b = d01 - a * (x0 + x1)
    xv = -b / (2 * a)
    return float(max(y1, a * xv * xv + b * xv + (y0 - a * x0 * x0 - b * x0)))


def convergence_table(values: dict) -> list:
    """Rows ``(k, value, |value_k - value_{k-1}|, ratio of successive differences)``."""
    ks = sorted(values)
    rows = []
    prev_diff = None
    for i, k in enumerate(ks):
        diff = abs(values[k] - values[ks[i - 1]]) if i else None
        ratio = diff / prev_diff if diff is not None and prev_diff else None
        rows.append({"k": k, "value": values[k], "diff": diff, "ratio": ratio})
        prev_diff = diff
    return rows


def rep_pressure_table(rho: Representation, c: Component, ks: Sequence, s: float) -> list:
    """``Pr(-s psi_k)`` for the representation potentials at each ``k``."""
    return convergence_table({k: pressure(c, [(-s, rep_potential(rho, c, k))], 1e-12) for k in ks})
