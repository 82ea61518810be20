"""Entropy, Lyapunov exponents and Lyapunov dimension of Bernoulli measures.

Exponents are Monte Carlo averages over i.i.d. words.  Samples are drawn in
fixed-size blocks, block ``b`` from ``numpy.random.default_rng(SeedSequence([seed, b]))``
(PCG64), so results depend only on ``seed`` and ``samples``, never on the
number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ifs import BASE_POINT, SystemSpec, project_many
from .symbolic import BernoulliWeights

BLOCK = 1 << 15


@dataclass(frozen=True)
class ErgodicSummary:
    h: float
    chi1: float
    chi2: float
    dimL: float
    samples: int
    seed: int
    se_chi1: float
    se_chi2: float
    depth: int


def entropy(p: BernoulliWeights) -> float:
    """``-sum p_i log p_i`` in nats, with ``0 log 0 = 0``."""
    return -math.fsum(v * math.log(v) for v in p.p if v > 0)


def lyapunov_dimension(h: float, chi1: float, chi2: float) -> float:
    if chi1 <= 0 or chi2 <= 0:
        raise ValueError("exponents must be positive")
    return min(2.0, h / chi1, 1.0 + (h - chi1) / chi2)


def default_depth(spec: SystemSpec) -> int:
    """Smallest ``n`` with ``rho**n < 1e-8``."""
    return math.floor(math.log(1e-8) / math.log(spec.rho)) + 1


def _block(spec: SystemSpec, p: np.ndarray, size: int, depth: int, seed: int, b: int):
    rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
    words = rng.choice(spec.n, size=(size, depth + 1), p=p)
    x, y = project_many(spec, words[:, 1:], BASE_POINT)
    first = words[:, 0]
    v1 = -np.log(np.abs(spec.eval_indexed("g_y", first, x, y)))
    v2 = -np.log(np.abs(spec.eval_indexed("f_x", first, x, y)))
    return v1, v2


def lyapunov_exponents(spec: SystemSpec, p: BernoulliWeights, samples: int = 100_000,
                       depth: int | None = None, seed: int = 0, workers: int = 1):
    """``(chi1, chi2, (se1, se2))`` from ``samples`` i.i.d. words."""
    if samples < 1:
        raise ValueError("samples must be positive")
    if p.n_symbols != spec.n:
        raise ValueError(f"weights have {p.n_symbols} entries, system has {spec.n} maps")
    depth = default_depth(spec) if depth is None else int(depth)
    sizes = [min(BLOCK, samples - s) for s in range(0, samples, BLOCK)]
    pa = p.array()
    jobs = [(sz, b) for b, sz in enumerate(sizes)]
    run = lambda job: _block(spec, pa, job[0], depth, seed, job[1])  # noqa: E731
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    v1 = np.concatenate([a for a, _ in parts])
    v2 = np.concatenate([b for _, b in parts])
    (chi1, se1), (chi2, se2) = _mean_se(v1), _mean_se(v2)
    return chi1, chi2, (se1, se2)


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    """Mean and standard error, centred on the first value so constant samples are exact."""
    n = v.size
    d = v - v[0]
    shift = math.fsum(d) / n
    mean = float(v[0]) + shift
    if n < 2:
        return mean, math.inf
    var = math.fsum((d - shift) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def summarize(spec: SystemSpec, p: BernoulliWeights | None = None, samples: int = 100_000,
              depth: int | None = None, seed: int = 0, workers: int = 1) -> ErgodicSummary:
    p = p or BernoulliWeights.uniform(spec.n)
    depth = default_depth(spec) if depth is None else int(depth)
    chi1, chi2, (se1, se2) = lyapunov_exponents(spec, p, samples, depth, seed, workers)
    h = entropy(p)
    return ErgodicSummary(h, chi1, chi2, lyapunov_dimension(h, chi1, chi2), samples, seed, se1, se2, depth)
