"""Seeded Monte Carlo estimators over Parry chains and simple random walks.

Every sample ``i`` of an experiment with root seed ``r`` draws from its
own Philox stream keyed by ``(r, i)``, so results do not depend on how
samples are split across worker processes.  Means are summed with
``math.fsum`` in sample order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .automaton import Automaton
from .ball import bfs_ball
from .errors import InsufficientRange, UnsupportedPresentation
from .replin import Representation, disk_angle, evaluate_batch, log_sigma1_batch
from .spectral import Component, MarkovChain
from .words import FREE, Presentation, Reducer, geodesic_length

DEFAULT_SEED = 20240601


@dataclass(frozen=True)
class Seed:
    root: int
    stream_index: int = 0

    def generator(self, attempt: int = 0) -> np.random.Generator:
        key = (self.stream_index,) if attempt == 0 else (self.stream_index, attempt)
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(self.root, spawn_key=key)))


def seed_from_env(value: Optional[int] = None) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("HYPFLOW_SEED")
    return int(env) if env else DEFAULT_SEED


@dataclass
class Estimate:
    mean: float
    stderr: float
    n_samples: int
    n_steps: int
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values, n_steps: int, **diagnostics) -> "Estimate":
        values = np.asarray(values, dtype=float)
        if len(values) < 2:
            raise ValueError("an estimate needs at least two samples")
        mean = math.fsum(values) / len(values)
        var = math.fsum((values - mean) ** 2) / (len(values) - 1)
        return cls(mean, math.sqrt(var / len(values)), len(values), n_steps, diagnostics)

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n_samples": self.n_samples, "n_steps": self.n_steps,
                **self.diagnostics}

    def to_csv(self, seed: int) -> str:
        return f"mean,stderr,n_samples,n_steps,seed\n{self.mean:.12g},{self.stderr:.12g},{self.n_samples},{self.n_steps},{seed}\n"


def _chunks(count: int, workers: int) -> list:
    workers = max(1, min(workers, count))
    bounds = np.linspace(0, count, workers + 1).astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def _run(fn, count: int, workers: int, *args) -> np.ndarray:
    """Evaluate ``fn(lo, hi, *args)`` over sample ranges and concatenate in order."""
    parts = _chunks(count, workers)
    if len(parts) <= 1:
        return fn(0, count, *args)
    with ProcessPoolExecutor(len(parts)) as pool:
        futures = [pool.submit(fn, lo, hi, *args) for lo, hi in parts]
        return np.concatenate([f.result() for f in futures])


# ---------------------------------------------------------------------------
# Parry-chain sampling


def _successor_tables(chain: MarkovChain):
    P = chain.transition.tocsr()
    deg = np.diff(P.indptr)
    width = int(deg.max())
    succ = np.zeros((P.shape[0], width), dtype=np.intp)
    cum = np.full((P.shape[0], width), 2.0)
    for i in range(P.shape[0]):
        cols = P.indices[P.indptr[i]:P.indptr[i + 1]]
        probs = P.data[P.indptr[i]:P.indptr[i + 1]]
        succ[i, :len(cols)] = cols
        cum[i, :len(cols)] = np.cumsum(probs)
        cum[i, len(cols) - 1] = 1.0 + 1e-12  # guard against rounding in the last bucket
    return succ, cum


def sample_parry_edges(chain: MarkovChain, n: int, root: int, lo: int, hi: int) -> np.ndarray:
    """Edge paths (component-local ids) of length ``n`` for samples ``lo .. hi - 1``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    u = np.stack([Seed(root, i).generator().random(n) for i in range(lo, hi)])
    succ, cum = _successor_tables(chain)
    start = np.cumsum(chain.stationary)
    start[-1] = 1.0 + 1e-12
    path = np.empty((hi - lo, n), dtype=np.intp)
    cur = np.searchsorted(start, u[:, 0], side="right")
    path[:, 0] = cur
    for j in range(1, n):
        k = (u[:, j, None] >= cum[cur]).sum(axis=1)
        cur = succ[cur, k]
        path[:, j] = cur
    return path


def sample_parry_word(chain: MarkovChain, a: Automaton, c: Component, n: int, seed: Seed) -> tuple:
    """Label word of a length-``n`` Parry path, started from the stationary edge law."""
    edges = sample_parry_edges(chain, n, seed.root, seed.stream_index, seed.stream_index + 1)[0]
    return tuple(int(x) for x in c.labels[edges])


def _tau_ps_chunk(lo, hi, rho, chain, labels, n, root):
    words = labels[sample_parry_edges(chain, n, root, lo, hi)]
    if rho is None:
        return np.ones(hi - lo)
    mats, exps = evaluate_batch(rho, words)
    return log_sigma1_batch(mats, exps) / n


def estimate_tau_ps(rho: Optional[Representation], chain: MarkovChain, a: Automaton, c: Component, n: int,
                    samples: int, seed: int, workers: int = 1) -> Estimate:
    """Mean of ``log sigma1(rho(w_n)) / n`` over Parry samples.

    ``rho = None`` measures word length instead, which is ``n`` exactly.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    vals = _run(_tau_ps_chunk, samples, workers, rho, chain, c.labels, n, seed)
    return Estimate.from_values(vals, n)


# ---------------------------------------------------------------------------
# Simple random walks


def _walk(p: Presentation, steps: int, gen: np.random.Generator) -> tuple:
    letters = gen.integers(0, p.letter_count, size=steps)
    red = Reducer(p)
    red.extend(int(x) for x in letters)
    return letters, red.word


def srw_endpoint(p: Presentation, steps: int, seed: Seed) -> tuple:
    """Normal form of the endpoint of a simple random walk with ``steps`` uniform letters."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if p.family == FREE and p.relators:
        raise UnsupportedPresentation("free family cannot carry relators")
    return _walk(p, steps, seed.generator())[1]


def _harmonic_chunk(lo, hi, rho, p, steps, root):
    vals = np.empty(hi - lo)
    letters = np.empty((hi - lo, steps), dtype=np.intp)
    resampled = 0
    for i in range(lo, hi):
        attempt = 0
        while True:
            raw, nf = _walk(p, steps, Seed(root, i).generator(attempt))
            length = geodesic_length(nf, p, reduced=True)
            if length > 0:
                break
            attempt += 1
            resampled += 1
        letters[i - lo] = raw
        vals[i - lo] = length
    if rho is None:
        out = np.ones(hi - lo)
    else:
        mats, exps = evaluate_batch(rho, letters)
        out = log_sigma1_batch(mats, exps) / vals
    return np.concatenate([out, [resampled]])


def estimate_tau_harmonic(rho: Optional[Representation], p: Presentation, steps: int, samples: int, seed: int,
                          workers: int = 1) -> Estimate:
    """Mean of ``log sigma1(rho(w)) / |w|`` at the end of simple random walks.

    Walks that end at the identity are redrawn from a fresh sub-stream of
    the same sample; the number of redraws is reported as ``resampled``.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    parts = _chunks(samples, workers)
    if len(parts) <= 1:
        chunks = [_harmonic_chunk(0, samples, rho, p, steps, seed)]
    else:
        with ProcessPoolExecutor(len(parts)) as pool:
            futures = [pool.submit(_harmonic_chunk, lo, hi, rho, p, steps, seed) for lo, hi in parts]
            chunks = [f.result() for f in futures]
    vals = np.concatenate([ch[:-1] for ch in chunks])
    resampled = int(sum(ch[-1] for ch in chunks))
    return Estimate.from_values(vals, steps, resampled=resampled)


def escape_rate(p: Presentation, steps: int, samples: int, seed: int, first_stream: int = 0) -> Estimate:
    vals = []
    for i in range(first_stream, first_stream + samples):
        nf = srw_endpoint(p, steps, Seed(seed, i))
        vals.append(geodesic_length(nf, p, reduced=True) / steps)
    return Estimate.from_values(vals, steps)


# ---------------------------------------------------------------------------
# Growth by counting


def estimate_v_rho(rho: Representation, p: Presentation, R: int, L: float = 1.5, step: float = 0.25) -> dict:
    """Exponential growth of ``#{x : log||rho(x)|| in [t - L, t + L]}`` in ``t``.

    Counts are trusted only up to ``t + L <= m_R``, where ``m_R`` is the
    smallest log-norm on the sphere of radius ``R``: beyond it, elements
    longer than ``R`` can fall into the window.  The slope is a least
    squares fit of the log counts over the usable ``t`` values.
    """
    if L < 1:
        raise ValueError("window half-width L must be at least 1")
    ball = bfs_ball(p, R)
    norms = [np.zeros(1)]
    for n in range(1, R + 1):
        mats, exps = evaluate_batch(rho, ball.spheres[n])
        norms.append(log_sigma1_batch(mats, exps))
    ceiling = float(norms[R].min())
    allv = np.sort(np.concatenate(norms))
    ts = np.arange(L, ceiling - L + 1e-12, step)
    if len(ts) < 3:
        raise InsufficientRange(f"log-norms reach only {ceiling:.3g}; no usable window of half-width {L}")
    counts = np.searchsorted(allv, ts + L, side="right") - np.searchsorted(allv, ts - L, side="left")
    if np.any(counts == 0):
        raise InsufficientRange("empty counting window")
    slope, intercept = np.polyfit(ts, np.log(counts), 1)
    return {"v_rho": float(slope), "t_range": [float(ts[0]), float(ts[-1])], "points": len(ts),
            "ceiling": ceiling, "counts": counts.tolist()}


# ---------------------------------------------------------------------------
# Angle histograms


def _angles_parry(lo, hi, rho, chain, labels, n, root):
    words = labels[sample_parry_edges(chain, n, root, lo, hi)]
    mats, _ = evaluate_batch(rho, words)
    return disk_angle(mats)


def _angles_srw(lo, hi, rho, p, steps, root):
    words = np.stack([Seed(root, i).generator().integers(0, p.letter_count, size=steps) for i in range(lo, hi)])
    mats, _ = evaluate_batch(rho, words)
    return disk_angle(mats)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def to_csv(self) -> str:
        return "bin_left,count\n" + "".join(f"{e:.12g},{int(c)}\n" for e, c in zip(self.edges[:-1], self.counts))

    def as_dict(self) -> dict:
        return {"bin_left": self.edges[:-1].tolist(), "count": self.counts.tolist()}


def angle_histogram(rho: Representation, sampler: str, bins: int, steps: int, samples: int, seed: int, *,
                    chain: Optional[MarkovChain] = None, c: Optional[Component] = None,
                    p: Optional[Presentation] = None, workers: int = 1) -> Histogram:
    """Histogram of ``arg(rho(w) . 0)`` in the disk over ``[-pi, pi]``."""
    if bins < 2:
        raise ValueError("bins must be at least 2")
    if sampler == "parry":
        angles = _run(_angles_parry, samples, workers, rho, chain, c.labels, steps, seed)
    elif sampler == "srw":
        angles = _run(_angles_srw, samples, workers, rho, p, steps, seed)
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    counts, edges = np.histogram(angles, bins=bins, range=(-math.pi, math.pi))
    return Histogram(edges, counts)


def chi_squared(h1: Histogram, h2: Histogram) -> dict:
    """Two-sample homogeneity statistic with its 99% critical value."""
    n1, n2 = h1.counts.astype(float), h2.counts.astype(float)
    keep = (n1 + n2) > 0
    n1, n2 = n1[keep], n2[keep]
    N1, N2 = n1.sum(), n2.sum()
    stat = float(np.sum((math.sqrt(N2 / N1) * n1 - math.sqrt(N1 / N2) * n2) ** 2 / (n1 + n2)))
    dof = int(keep.sum()) - 1
    return {"statistic": stat, "dof": dof, "critical_99": float(stats.chi2.ppf(0.99, dof))}
