"""Recurrent components of the edge shift, Perron data and Parry chains.

The shift is indexed by automaton *edges*: ``A[e, f] = 1`` when the target
of ``e`` is the origin of ``f``.  Components are the strongly connected
pieces of that edge graph which carry at least one cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .automaton import Automaton
from .errors import NoConvergence, NoCycles, NotIrreducible

EIG_TOL = 1e-10
MAX_ITERS = 100_000
TIE_RTOL = 1e-8


@dataclass(frozen=True)
class PerronData:
    """Perron root and vectors of an irreducible nonnegative matrix.

    ``right`` sums to one and ``left @ right == 1``.  ``residual`` is
    ``max|M h - rho h| / (rho max h)``; ``history`` holds the relative
    width of the Collatz-Wielandt bracket after each sweep, which can only
    shrink.
    """

    eigenvalue: float
    right: np.ndarray
    left: np.ndarray
    residual: float
    iterations: int
    history: tuple = ()

    @property
    def log_eigenvalue(self) -> float:
        return math.log(self.eigenvalue)


def _as_csr(m) -> sp.csr_matrix:
    if sp.issparse(m):
        return sp.csr_matrix(m, dtype=float)
    return sp.csr_matrix(np.asarray(m, dtype=float))


def is_irreducible(m) -> bool:
    m = _as_csr(m)
    n = m.shape[0]
    if n == 0:
        return False
    if n == 1:
        return m[0, 0] > 0
    count, _ = connected_components(m > 0, directed=True, connection="strong")
    return count == 1


def period_of(m) -> int:
    """gcd of cycle lengths of an irreducible pattern, from BFS level differences."""
    m = _as_csr(m)
    pattern = (m > 0).tocoo()
    order, pred = breadth_first_order(m > 0, 0, directed=True, return_predecessors=True)
    level = np.full(m.shape[0], -1, dtype=np.int64)
    level[0] = 0
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    diffs = level[pattern.row] + 1 - level[pattern.col]
    g = 0
    for d in np.unique(np.abs(diffs)):
        g = math.gcd(g, int(d))
    return g


def _cyclic_classes(m: sp.csr_matrix, period: int) -> np.ndarray:
    order, pred = breadth_first_order(m > 0, 0, directed=True, return_predecessors=True)
    level = np.zeros(m.shape[0], dtype=np.int64)
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    cls = level % period
    coo = (m > 0).tocoo()
    if np.any(cls[coo.col] != (cls[coo.row] + 1) % period):
        raise ValueError(f"matrix does not have period {period}")
    return cls


def _zero_entry(m) -> Exception:
    """Error for a power iterate with a zero entry: structural, or underflow of extreme weights."""
    if not is_irreducible(m):
        return NotIrreducible("zero entry appeared in a power iterate")
    return NoConvergence("power iterate underflowed; the weights span too many orders of magnitude",
                         iterations=0, residual=math.inf)


def _power(m, cls, period, tol, max_iters, x0=None):
    if period == 1:
        return _power_primitive(m, tol, max_iters, x0)
    n = m.shape[0]
    on = cls == 0
    x = np.zeros(n)
    if x0 is not None and np.all(np.asarray(x0)[on] > 0):
        x[on] = np.asarray(x0, dtype=float)[on]
    else:
        x[on] = 1.0
    x /= x.sum()
    history = []
    mu = None
    for it in range(1, max_iters + 1):
        y = x
        for _ in range(period):
            y = m @ y
        y0, x0_ = y[on], x[on]
        if np.any(y0 <= 0):
            raise _zero_entry(m)
        ratios = y0 / x0_
        lo, hi = ratios.min(), ratios.max()
        mu = y0.sum()
        width = (hi - lo) / hi
        history.append(width)
        x = np.zeros(n)
        x[on] = y0 / mu
        if width <= tol:
            break
    else:
        raise NoConvergence(
            f"power iteration did not reach {tol:g} in {max_iters} sweeps", iterations=max_iters, residual=width
        )
    rho = mu ** (1.0 / period)
    h = x.copy()
    y = x
    for j in range(1, period):
        y = m @ y / rho
        h += y
    return rho, h, it, history


def _power_primitive(m, tol, max_iters, x0=None):
    n = m.shape[0]
    x = np.ones(n) if x0 is None or np.any(np.asarray(x0) <= 0) else np.array(x0, dtype=float)
    x /= x.sum()
    history = []
    width = math.inf
    for it in range(1, max_iters + 1):
        y = m @ x
        if np.any(y <= 0):
            raise _zero_entry(m)
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        mu = y.sum()
        width = (hi - lo) / hi
        history.append(width)
        x = y / mu
        if width <= tol:
            return mu, x, it, history
    raise NoConvergence(
        f"power iteration did not reach {tol:g} in {max_iters} sweeps", iterations=max_iters, residual=width
    )


def perron(m, component_period: int = 1, tol: float = EIG_TOL, max_iters: int = MAX_ITERS, *, x0=None,
           check: bool = True) -> PerronData:
    """Perron eigenvalue and positive eigenvectors of an irreducible matrix.

    For period ``p > 1`` the ``p``-th power is iterated on one cyclic class,
    which is primitive, and the other classes are rebuilt by applying the
    matrix.  Convergence is declared when the Collatz-Wielandt bracket
    ``min (M^p x)/x <= rho^p <= max (M^p x)/x`` has relative width ``tol``.
    """
    m = _as_csr(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if (m.data < 0).any():
        raise ValueError("matrix must be nonnegative")
    if check and not is_irreducible(m):
        raise NotIrreducible("matrix is not irreducible")
    period = int(component_period)
    cls = _cyclic_classes(m, period) if period > 1 else np.zeros(m.shape[0], dtype=np.int64)
    rho, h, iters, hist = _power(m, cls, period, tol, max_iters, x0)
    mt = m.T.tocsr()
    _, l, _, _ = _power(mt, cls, period, tol, max_iters)
    h /= h.sum()
    l /= l @ h
    residual = float(np.max(np.abs(m @ h - rho * h)) / (rho * h.max()))
    return PerronData(float(rho), h, l, residual, iters, tuple(hist))


@dataclass(frozen=True)
class Component:
    """A recurrent component of the edge shift of ``automaton``."""

    automaton: Automaton
    edge_ids: tuple
    period: int

    @property
    def size(self) -> int:
        return len(self.edge_ids)

    @cached_property
    def adjacency(self) -> np.ndarray:
        return self.automaton.edge_adjacency(list(self.edge_ids))

    @cached_property
    def states(self) -> tuple:
        o = self.automaton.origins[list(self.edge_ids)]
        return tuple(sorted(set(o.tolist())))

    @cached_property
    def labels(self) -> np.ndarray:
        return self.automaton.labels[list(self.edge_ids)]

    @cached_property
    def origins(self) -> np.ndarray:
        return self.automaton.origins[list(self.edge_ids)]

    @cached_property
    def targets(self) -> np.ndarray:
        return self.automaton.targets[list(self.edge_ids)]

    def perron(self, tol: float = EIG_TOL, max_iters: int = MAX_ITERS) -> PerronData:
        return perron(self.adjacency, self.period, tol, max_iters)

    def record(self, index: int, tol: float = EIG_TOL, max_iters: int = MAX_ITERS) -> dict:
        return {
            "id": index,
            "edges": self.size,
            "states": len(self.states),
            "period": self.period,
            "log_eigenvalue": self.perron(tol, max_iters).log_eigenvalue,
        }


def scc_decompose(a: Automaton) -> list:
    """All recurrent components of the edge graph, ordered by lowest edge id."""
    n = len(a.edges)
    if n == 0:
        return []
    adj = sp.csr_matrix(a.edge_adjacency())
    count, label = connected_components(adj, directed=True, connection="strong")
    comps = []
    for c in range(count):
        ids = np.flatnonzero(label == c)
        sub = adj[ids][:, ids]
        if sub.nnz == 0:
            continue
        comps.append(Component(a, tuple(int(i) for i in ids), period_of(sub)))
    comps.sort(key=lambda c: c.edge_ids[0])
    return comps


def growth_rate(a: Automaton, tol: float = EIG_TOL, max_iters: int = MAX_ITERS) -> float:
    """Exponential growth rate: log of the largest component Perron root."""
    comps = scc_decompose(a)
    if not comps:
        raise NoCycles("automaton graph is acyclic")
    return max(c.perron(tol, max_iters).log_eigenvalue for c in comps)


def maximal_components(a: Automaton, rtol: float = TIE_RTOL, tol: float = EIG_TOL,
                       max_iters: int = MAX_ITERS) -> list:
    comps = scc_decompose(a)
    if not comps:
        raise NoCycles("automaton graph is acyclic")
    eig = [c.perron(tol, max_iters).eigenvalue for c in comps]
    top = max(eig)
    return [c for c, e in zip(comps, eig) if e >= top * (1 - rtol)]


@dataclass(frozen=True)
class MarkovChain:
    """Row-stochastic chain over component edges (or higher blocks).

    ``last_edge[i]`` is the component-local edge that chain state ``i``
    ends with; for edge chains it is the identity.
    """

    transition: sp.csr_matrix
    stationary: np.ndarray
    last_edge: Optional[np.ndarray] = None
    first_edge: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.transition.shape[0]

    def dense(self) -> np.ndarray:
        return self.transition.toarray()

    def check(self, row_tol: float = 1e-12, inv_tol: float = 1e-10) -> dict:
        rows = np.asarray(self.transition.sum(axis=1)).ravel()
        pi = self.stationary
        return {
            "row_error": float(np.max(np.abs(rows - 1))),
            "invariance_error": float(np.max(np.abs(pi @ self.transition - pi))),
            "positive": bool(np.all(pi > 0)),
            "ok": bool(np.max(np.abs(rows - 1)) <= row_tol and np.max(np.abs(pi @ self.transition - pi)) <= inv_tol
                       and np.all(pi > 0)),
        }


def markov_from_weights(w: sp.csr_matrix, period: int, tol: float = EIG_TOL, max_iters: int = MAX_ITERS,
                        **extra) -> tuple:
    """Equilibrium chain of a nonnegative irreducible weight matrix.

    ``P(i, j) = W(i, j) h(j) / (rho h(i))`` and ``pi(i) = l(i) h(i)``.
    Returns ``(chain, perron_data)``.
    """
    w = _as_csr(w)
    pd = perron(w, period, tol, max_iters, check=False)
    h, l, rho = pd.right, pd.left, pd.eigenvalue
    coo = w.tocoo()
    vals = coo.data * h[coo.col] / (rho * h[coo.row])
    P = sp.csr_matrix((vals, (coo.row, coo.col)), shape=w.shape)
    # renormalize rows to absorb the power-iteration residual
    rows = np.asarray(P.sum(axis=1)).ravel()
    P = sp.diags(1 / rows) @ P
    pi = l * h
    pi /= pi.sum()
    pi = _refine_stationary(P, pi)
    return MarkovChain(sp.csr_matrix(P), pi, **extra), pd


def _refine_stationary(P, pi, sweeps: int = 50):
    for _ in range(sweeps):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < 1e-15:
            return nxt
        pi = nxt
    return pi


def parry_chain(c: Component, tol: float = EIG_TOL, max_iters: int = MAX_ITERS) -> MarkovChain:
    """Maximal-entropy chain: ``P(e, f) = A(e, f) h(f) / (rho h(e))``."""
    ids = np.arange(c.size)
    chain, pd = markov_from_weights(
        sp.csr_matrix(c.adjacency, dtype=float), c.period, tol, max_iters, last_edge=ids, first_edge=ids,
        meta={"log_eigenvalue": math.log(c.perron(tol, max_iters).eigenvalue)},
    )
    return chain
