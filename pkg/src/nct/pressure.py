"""Singular value function, finite-level pressure and its root.

The level-``n`` sum runs over all ``N**n`` words.  Words are grouped into
chunks sharing a prefix of length ``m``; the ``N**(n-m)`` suffix orbits of the
base point are computed once and every chunk pushes them through its prefix
maps.  Chunk partial sums are combined with :func:`math.fsum`, whose result is
exactly rounded, so the total does not depend on chunk traversal order or on
the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ifs import BASE_POINT, SystemSpec, derivative_along, distortion_constant
from .symbolic import ENUMERATION_CAP, check_cap

CHUNK_SIZE = 1 << 19


class NonBracketingError(ValueError):
    pass


@dataclass(frozen=True)
class PressureEstimate:
    s: float
    depth: int
    value: float
    base_point: tuple = BASE_POINT


def branch_of(s: float) -> int:
    if s < 0:
        raise ValueError("s must be non-negative")
    return 1 if s <= 1 else (2 if s <= 2 else 3)


def _coeffs(s: float, branch: int) -> tuple[float, float]:
    """``log phi = a*log|g'_y| + b*log|f'|`` on the given branch."""
    if branch == 1:
        return s, 0.0
    if branch == 2:
        return 1.0, s - 1.0
    return s / 2.0, s / 2.0


def _dcoeffs(branch: int) -> tuple[float, float]:
    return {1: (1.0, 0.0), 2: (0.0, 1.0), 3: (0.5, 0.5)}[branch]


def phi_s(spec: SystemSpec, w: Sequence[int], point, s: float) -> float:
    """Singular value function of the word ``w`` at ``point``."""
    fw, gw, _ = derivative_along(spec, w, point)
    a, b = _coeffs(s, branch_of(s))
    if s == 0:
        return 1.0
    return math.exp(a * math.log(abs(gw)) + b * math.log(abs(fw))) if (fw and gw) else 0.0


def _suffix_tree(spec: SystemSpec, length: int, base):
    """Orbit data for all words of ``length`` symbols, lexicographic order."""
    x = np.array([float(base[0])])
    y = np.array([float(base[1])])
    F = np.ones(1)
    G = np.ones(1)
    for _ in range(length):
        xs, ys, Fs, Gs = [], [], [], []
        for m in spec.maps:
            xs.append(m.eval("f", x, y))
            ys.append(m.eval("g", x, y))
            Fs.append(F * m.eval("f_x", x, y))
            Gs.append(G * m.eval("g_y", x, y))
        x, y, F, G = (np.concatenate(a) for a in (xs, ys, Fs, Gs))
    return x, y, F, G


class _Summer:
    """Evaluates ``log S(s)`` and ``d/ds log S(s)`` for several ``(s, branch)`` pairs in one sweep."""

    def __init__(self, spec: SystemSpec, n: int, base=BASE_POINT, chunk_size: int = CHUNK_SIZE,
                 cap: int = ENUMERATION_CAP, workers: int = 1):
        check_cap(spec.n, n, cap)
        self.spec, self.n, self.base = spec, n, base
        self.workers = max(1, int(workers))
        N = spec.n
        m = 0 if n == 0 else 1
        while m < n and N ** (n - m) > chunk_size:
            m += 1
        self.m = m
        self.inner = _suffix_tree(spec, n - m, base)
        m0 = spec.maps[0]
        self.lf0 = math.log(abs(float(m0.eval("f_x", base[0], base[1]))))
        self.lg0 = math.log(abs(float(m0.eval("g_y", base[0], base[1]))))
        self.passes = 0

    def evaluate(self, pairs: Sequence[tuple[float, int]]):
        """``[(P_n(s), dP_n/ds on the branch), ...]`` for each ``(s, branch)``."""
        self.passes += 1
        n, N, m = self.n, self.spec.n, self.m
        self._coef = [_coeffs(s, b) for s, b in pairs]
        self._dcoef = [_dcoeffs(b) for _, b in pairs]
        self._shift = [n * (a * self.lg0 + b * self.lf0) for a, b in self._coef]
        if m == 0:
            _, _, F, G = self.inner
            parts = [self._chunk(F, G)]
        else:
            if self.workers > 1:
                with ThreadPoolExecutor(self.workers) as pool:
                    chunks = list(pool.map(self._branch, range(N)))
            else:
                chunks = [self._branch(t) for t in range(N)]
            table = {}
            for c in chunks:
                table.update(c)
            # lexicographic prefix order; fsum makes the order immaterial anyway
            parts = [table[k] for k in sorted(table)]
        out = []
        for j in range(len(pairs)):
            total = math.fsum(p[0][j] for p in parts)
            dtotal = math.fsum(p[1][j] for p in parts)
            if n == 0:
                out.append((0.0, 0.0))
                continue
            out.append(((self._shift[j] + math.log(total)) / n, dtotal / total / n))
        return out

    def _branch(self, top: int) -> dict:
        """All chunks whose innermost prefix symbol (applied first) is ``top``."""
        x, y, F, G = self.inner
        res = {}
        self._descend([top], x, y, F, G, res)
        return res

    def _descend(self, applied: list, x, y, F, G, res: dict):
        # applied[k] is the prefix symbol at position m-1-k (innermost first)
        mp = self.spec.maps[applied[-1]]
        fx = mp.eval("f_x", x, y)
        gy = mp.eval("g_y", x, y)
        if len(applied) == self.m:
            key = 0
            for s in reversed(applied):
                key = key * self.spec.n + s
            res[key] = self._chunk(F * fx, G * gy)
            return
        xn, yn = mp.eval("f", x, y), mp.eval("g", x, y)
        Fn, Gn = F * fx, G * gy
        for nxt in range(self.spec.n):
            self._descend(applied + [nxt], xn, yn, Fn, Gn, res)

    def _chunk(self, F, G):
        lF = np.log(np.abs(F))
        lG = np.log(np.abs(G))
        sums, dsums = [], []
        for (a, b), (da, db), c in zip(self._coef, self._dcoef, self._shift):
            e = np.exp(a * lG + b * lF - c)
            sums.append(float(np.sum(e)))
            d = 0.0
            if da:
                d += da * float(np.dot(e, lG))
            if db:
                d += db * float(np.dot(e, lF))
            dsums.append(d)
        return sums, dsums


def pressure_values(spec: SystemSpec, s_values: Sequence[float], n: int, base=BASE_POINT,
                    branches: Sequence[int] | None = None, workers: int = 1,
                    chunk_size: int = CHUNK_SIZE, cap: int = ENUMERATION_CAP) -> list[float]:
    """``P_n`` at several ``s`` in a single sweep over the words."""
    branches = branches or [branch_of(s) for s in s_values]
    summer = _Summer(spec, n, base, chunk_size=chunk_size, cap=cap, workers=workers)
    return [v for v, _ in summer.evaluate(list(zip(map(float, s_values), branches)))]


def pressure_approx(spec: SystemSpec, s: float, n: int, base=BASE_POINT, workers: int = 1,
                    chunk_size: int = CHUNK_SIZE, cap: int = ENUMERATION_CAP) -> PressureEstimate:
    """``(1/n) log sum_{|w|=n} phi^s(w, base)``."""
    if n < 1:
        raise ValueError("depth must be at least 1")
    value = pressure_values(spec, [s], n, base, workers=workers, chunk_size=chunk_size, cap=cap)[0]
    return PressureEstimate(float(s), int(n), value, tuple(base))


@dataclass(frozen=True)
class RootResult:
    s0: float
    depth: int
    lower: float
    upper: float
    passes: int

    @property
    def width(self) -> float:
        return self.upper - self.lower


def root_s0_detail(spec: SystemSpec, n: int, tol: float = 1e-8, base=BASE_POINT, guess: float | None = None,
                   workers: int = 1, chunk_size: int = CHUNK_SIZE, max_passes: int = 200,
                   cap: int = ENUMERATION_CAP) -> RootResult:
    """Root of ``P_n`` bracketed to width ``tol``.

    ``P_n`` is convex on each of the pieces ``[0,1]``, ``[1,2]``, ``[2,inf)``.
    On the piece holding the root, tangent zeros are lower bounds and chord
    zeros are upper bounds; every sweep also probes a bisection-safe point, so
    the bracket at least halves per sweep and shrinks quadratically once the
    tangent step is accurate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if n < 1:
        raise ValueError("depth must be at least 1")
    summer = _Summer(spec, n, base, chunk_size=chunk_size, cap=cap, workers=workers)

    def run(pairs):
        if summer.passes >= max_passes:
            raise RuntimeError("root search did not converge")
        return summer.evaluate(pairs)

    # first sweep: piece boundaries and the optional warm start; P_n(0) = log N needs no sweep
    p0 = math.log(spec.n)
    pairs = [(1.0, 1), (1.0, 2), (2.0, 2)]
    if guess is not None and guess > 0:
        pairs.append((float(guess), branch_of(float(guess))))
    res = run(pairs)
    p1, p2 = res[0][0], res[2][0]
    if p1 <= 0:
        piece, pts = 1, [(0.0, p0, None), (1.0, p1, res[0][1])]
    elif p2 <= 0:
        piece, pts = 2, [(1.0, p1, res[1][1]), (2.0, p2, res[2][1])]
    else:
        piece, s_max = 3, 4.0
        (v2, d2), (v, d) = run([(2.0, 3), (s_max, 3)])
        pts = [(2.0, v2, d2), (s_max, v, d)]
        while v >= 0:
            s_max *= 2
            (v, d), = run([(s_max, 3)])
            pts.append((s_max, v, d))
    if len(pairs) == 4 and branch_of(pairs[3][0]) == piece:
        pts.append((pairs[3][0], *res[3]))
    plo, phi_ = {1: (0.0, 1.0), 2: (1.0, 2.0), 3: (2.0, math.inf)}[piece]
    pts = [p for p in pts if plo <= p[0] <= phi_]

    while True:
        a = max((p for p in pts if p[1] > 0), key=lambda p: p[0])
        b = min((p for p in pts if p[1] <= 0), key=lambda p: p[0])
        if b[1] == 0.0:
            return RootResult(b[0], n, b[0], b[0], summer.passes)
        lower, upper = a[0], b[0]
        for p in pts:
            if p[2] is not None and p[2] < 0:
                z = p[0] - p[1] / p[2]
                if a[0] < z < b[0]:
                    lower = max(lower, z)
        z = a[0] - a[1] * (b[0] - a[0]) / (b[1] - a[1])
        if lower <= z < upper:
            upper = z
        if upper - lower <= tol:
            return RootResult(0.5 * (lower + upper), n, lower, upper, summer.passes)
        if lower > a[0]:
            probe = {lower, lower + min(0.45 * tol, 0.5 * (upper - lower))}
        else:
            probe = {0.5 * (lower + upper)}
        probe = sorted(s for s in probe if a[0] < s < b[0]) or [0.5 * (a[0] + b[0])]
        out = run([(s, piece) for s in probe])
        pts.extend((s, v, d) for s, (v, d) in zip(probe, out))


def root_s0(spec: SystemSpec, n: int, tol: float = 1e-8, base=BASE_POINT, **kw) -> float:
    """Root of the depth-``n`` pressure approximant (an upper-biased estimate of s0)."""
    return root_s0_detail(spec, n, tol, base, **kw).s0


def bias_bound(spec: SystemSpec, n: int, samples: int = 2000, seed: int = 0) -> float:
    """Bound on ``|s0_n - s0|`` from bounded distortion: ``log C / (n * (-log rho))``."""
    c = distortion_constant(spec, n, samples, seed)
    return math.log(c) / (n * -math.log(spec.rho))
