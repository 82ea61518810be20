"""Strong-stable bundle, its leaves and the non-linear projection.

For an infinite word ``i`` the slope field ``u(i, x, y)`` is the series

    u = sum_k -(g_{i_k})'_x(p_{k-1}) * f'_{k-1} / G_k

along the forward orbit ``p_0 = (x, y)``, ``p_k = F_{i_k}(p_{k-1})``, where
``f'_{k-1}`` and ``G_k`` are the accumulated ``f'`` and ``g'_y`` products.  The
terms are dominated by ``(gx_max/tau) * gamma**(k-1)``, which fixes the
truncation depth a priori.  Leaves are solutions of ``y' = u(i, x, y)``
computed with classical RK4 on a grid anchored at the starting abscissa.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .ifs import SystemSpec, canonical_projection
from .symbolic import TailedWord

DEFAULT_STEP = 1e-3
DEFAULT_TOL = 1e-10
MAX_STEP = 1e-2


class LeafEscapeError(ArithmeticError):
    """The leaf left the region where the bundle series is meaningful."""

    def __init__(self, x: float, y: float, anchor):
        self.x, self.y, self.anchor = x, y, anchor
        super().__init__(
            f"leaf from {tuple(anchor)} escaped near x = {x:.6g} (last y = {y:.6g}); "
            "restrict x_span to the side where the leaf stays bounded"
        )


# --------------------------------------------------------------------------
# truncation depths


def _geometric_depth(a: float, gamma: float, tol: float) -> int:
    """Smallest ``K >= 1`` with ``a * gamma**K / (1 - gamma) <= tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a <= 0 or gamma <= 0:
        return 1
    return max(1, math.ceil(math.log(tol * (1 - gamma) / a) / math.log(gamma)))


def u_tail(spec: SystemSpec, K: int) -> float:
    b = spec.bounds
    return b.gx_max / b.tau * b.gamma**K / (1 - b.gamma)


def u_depth(spec: SystemSpec, tol: float) -> int:
    b = spec.bounds
    return _geometric_depth(b.gx_max / b.tau, b.gamma, tol)


def u_y_tail(spec: SystemSpec, K: int) -> float:
    b = spec.bounds
    B = b.gxy_max / b.tau + (b.gx_max / b.tau) * (b.gyy_max / b.tau) / (1 - b.rho)
    return B * b.gamma**K / (1 - b.gamma)


def u_y_depth(spec: SystemSpec, tol: float) -> int:
    b = spec.bounds
    B = b.gxy_max / b.tau + (b.gx_max / b.tau) * (b.gyy_max / b.tau) / (1 - b.rho)
    return _geometric_depth(B, b.gamma, tol)


def u_t_tail(spec: SystemSpec, K: int) -> float:
    b = spec.bounds
    g = b.gamma
    c1 = b.gxy_max / (b.tau * (1 - b.rho))
    c2 = b.gx_max * b.gyy_max / (b.tau**2 * (1 - b.rho))
    return c1 * g**K / (1 - g) + c2 * g**K * ((K + 1) - K * g) / (1 - g) ** 2


def u_t_depth(spec: SystemSpec, tol: float) -> int:
    if tol <= 0:
        raise ValueError("tol must be positive")
    K = max(1, u_y_depth(spec, tol))
    while u_t_tail(spec, K) > tol:
        K = K + max(1, K // 8)
    return K


@dataclass(frozen=True)
class BundleQuery:
    word: TailedWord
    depth: int
    tail_bound: float


def bundle_query(spec: SystemSpec, i: TailedWord, tol: float = DEFAULT_TOL) -> BundleQuery:
    K = u_depth(spec, tol)
    return BundleQuery(i, K, u_tail(spec, K))


# --------------------------------------------------------------------------
# compiled context


class _Ctx:
    def __init__(self, spec: SystemSpec):
        self.jet = _kernels.jet_for(spec)
        self.k = _kernels.kernels()
        self.t1 = np.ascontiguousarray(spec.t1, dtype=float)
        self.t2 = np.ascontiguousarray(spec.t2, dtype=float)
        self.sign = np.asarray(spec.bounds.gy_sign, dtype=float)


def _ctx(spec: SystemSpec) -> _Ctx:
    c = spec.__dict__.get("_nct_ctx")
    if c is None:
        c = _Ctx(spec)
        spec.__dict__["_nct_ctx"] = c
    return c


def _check_word(spec: SystemSpec, i: TailedWord):
    if i.max_symbol() > spec.n:
        raise ValueError(f"word uses symbol {i.max_symbol()} but the system has {spec.n} maps")


def _check_x(x: float):
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x = {x} outside [0, 1]")


def _words_array(words: Sequence[TailedWord], K: int) -> np.ndarray:
    return np.ascontiguousarray(np.stack([w.indices(K) for w in words]), dtype=np.int64)


# --------------------------------------------------------------------------
# bundle and derivatives


def bundle_u(spec: SystemSpec, i: TailedWord, x: float, y: float, tol: float = DEFAULT_TOL) -> float:
    """Slope of the strong-stable direction at ``(x, y)``; truncation error at most ``tol``."""
    _check_word(spec, i)
    _check_x(x)
    c = _ctx(spec)
    K = u_depth(spec, tol)
    return float(c.k["u_one"](c.jet, i.indices(K), float(x), float(y), c.t1, c.t2, K, c.sign))


def bundle_u_y(spec: SystemSpec, i: TailedWord, x: float, y: float, tol: float = DEFAULT_TOL) -> float:
    """``d u / d y`` by the differentiated series; truncation error at most ``tol``."""
    _check_word(spec, i)
    _check_x(x)
    c = _ctx(spec)
    K = u_y_depth(spec, tol)
    return float(c.k["u_y_one"](c.jet, i.indices(K), float(x), float(y), c.t1, c.t2, K, c.sign))


def bundle_u_t(spec: SystemSpec, i: TailedWord, x: float, y: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Gradient of ``u`` in the vertical translations ``t_{k,2}``, ``k = 1..N``."""
    _require_additive(spec)
    _check_word(spec, i)
    _check_x(x)
    c = _ctx(spec)
    K = u_t_depth(spec, tol)
    return c.k["u_t_one"](c.jet, i.indices(K), float(x), float(y), c.t1, c.t2, K, c.sign).copy()


def _require_additive(spec: SystemSpec):
    if not spec.additive_t2:
        raise ValueError("translation derivatives need every g to depend on t2 as '+ t2'")


def _batch(kind: str, depth_fn, spec, words, xs, ys, tol):
    c = _ctx(spec)
    K = depth_fn(spec, tol)
    W = _words_array(words, K)
    xs = np.ascontiguousarray(xs, dtype=float)
    ys = np.ascontiguousarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.shape[0] != W.shape[0]:
        raise ValueError("words, xs and ys must have equal length")
    return c.k[kind](c.jet, W, xs, ys, c.t1, c.t2, K, c.sign)


def bundle_u_many(spec, words: Sequence[TailedWord], xs, ys, tol: float = DEFAULT_TOL) -> np.ndarray:
    return _batch("u_many", u_depth, spec, words, xs, ys, tol)


def bundle_u_y_many(spec, words: Sequence[TailedWord], xs, ys, tol: float = DEFAULT_TOL) -> np.ndarray:
    return _batch("u_y_many", u_y_depth, spec, words, xs, ys, tol)


def bundle_u_t_many(spec, words: Sequence[TailedWord], xs, ys, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``(count, N)`` array of translation gradients."""
    _require_additive(spec)
    return _batch("u_t_many", u_t_depth, spec, words, xs, ys, tol)


# --------------------------------------------------------------------------
# leaves


@dataclass
class LeafSolution:
    word: TailedWord
    anchor: tuple
    step: float
    x: np.ndarray
    y: np.ndarray
    slope: np.ndarray
    tol: float
    _spline: object = field(default=None, repr=False, compare=False)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def __call__(self, x):
        """Cubic Hermite interpolation through the stored values and slopes."""
        if self._spline is None:
            from scipy.interpolate import CubicHermiteSpline

            self._spline = CubicHermiteSpline(self.x, self.y, self.slope)
        lo, hi = self.span
        xa = np.asarray(x, dtype=float)
        if np.any(xa < lo - 1e-12) or np.any(xa > hi + 1e-12):
            raise ValueError(f"leaf is only solved on [{lo}, {hi}]")
        return self._spline(np.clip(xa, lo, hi))


def _nodes(x0: float, end: float, h: float) -> np.ndarray:
    """``x0, x0 +- h, ...`` up to ``end``, with a shorter last step landing on ``end``."""
    dist = abs(end - x0)
    m = int(math.floor(dist / h + 1e-9))
    direction = 1.0 if end >= x0 else -1.0
    nodes = x0 + direction * h * np.arange(m + 1)
    if dist - m * h > 1e-12:
        nodes = np.append(nodes, end)
    else:
        nodes[-1] = end if m else x0
    return nodes


def leaf_solve(spec: SystemSpec, i: TailedWord, anchor, step: float = DEFAULT_STEP, tol: float = DEFAULT_TOL,
               x_span: tuple = (0.0, 1.0)) -> LeafSolution:
    """Leaf of ``y' = u(i, x, y)`` through ``anchor``, solved on ``x_span`` extended to contain the anchor.

    Each slope evaluation uses the bundle series at tolerance ``tol / 10``.
    """
    _check_word(spec, i)
    x0, y0 = float(anchor[0]), float(anchor[1])
    if not (0 < step <= MAX_STEP):
        raise ValueError(f"step must lie in (0, {MAX_STEP}]")
    _check_x(x0)
    lo, hi = float(x_span[0]), float(x_span[1])
    if not (0.0 <= lo <= hi <= 1.0):
        raise ValueError(f"x_span {x_span} must satisfy 0 <= lo <= hi <= 1")
    lo, hi = min(lo, x0), max(hi, x0)
    c = _ctx(spec)
    K = u_depth(spec, tol / 10)
    word = i.indices(K)
    parts = []
    for end in (lo, hi):
        nodes = _nodes(x0, end, step)
        ys, sl, ok = c.k["rk4_path"](c.jet, word, nodes, y0, c.t1, c.t2, K, c.sign)
        if ok < len(nodes):
            raise LeafEscapeError(float(nodes[min(ok, len(nodes) - 1)]), float(ys[max(ok - 1, 0)]), (x0, y0))
        parts.append((nodes, ys, sl))
    (xl, yl, sl_l), (xr, yr, sl_r) = parts
    x = np.concatenate([xl[::-1], xr[1:]])
    y = np.concatenate([yl[::-1], yr[1:]])
    s = np.concatenate([sl_l[::-1], sl_r[1:]])
    return LeafSolution(i, (x0, y0), float(step), x, y, s, float(tol))


def nonlinear_projection(spec: SystemSpec, i: TailedWord, j: TailedWord, step: float = DEFAULT_STEP,
                         tol: float = DEFAULT_TOL) -> float:
    """Height at ``x = 0`` of the ``i``-leaf through ``pi(j)``."""
    _check_word(spec, j)
    p = canonical_projection(spec, j)
    leaf = leaf_solve(spec, i, p, step, tol, x_span=(0.0, p[0]))
    return float(leaf.y[0])


# --------------------------------------------------------------------------
# checks


def check_bundle_invariance(spec: SystemSpec, i: TailedWord, x: float, y: float, tol: float = DEFAULT_TOL) -> float:
    """``|u(i) - (-g'_x/g'_y + (f'/g'_y) u(shift i, F_{i_1}))|`` with both series cut at the same depth."""
    _check_word(spec, i)
    _check_x(x)
    c = _ctx(spec)
    K = u_depth(spec, tol)
    u0 = c.k["u_one"](c.jet, i.indices(K), float(x), float(y), c.t1, c.t2, K, c.sign)
    m = spec.maps[i.symbol(0) - 1]
    fx, gx, gy = (float(m.eval(p, x, y)) for p in ("f_x", "g_x", "g_y"))
    x1, y1 = float(m.eval("f", x, y)), float(m.eval("g", x, y))
    u1 = c.k["u_one"](c.jet, i.shift(1).indices(K), x1, y1, c.t1, c.t2, K, c.sign)
    return abs(u0 - (-gx / gy + fx / gy * u1))


def check_leaf_invariance(spec: SystemSpec, i: TailedWord, anchor, x_grid=None, step: float = DEFAULT_STEP,
                          tol: float = 1e-8, x_span: tuple = (0.0, 1.0)) -> float:
    """Max over ``x_grid`` of ``|g_{i_1}(x, y_i(x)) - y_{shift i}(f_{i_1}(x))|``.

    The right-hand leaf starts at ``F_{i_1}(anchor)`` and is solved over ``f_{i_1}(x_span)``.
    """
    left = leaf_solve(spec, i, anchor, step, tol, x_span)
    m = spec.maps[i.symbol(0) - 1]
    lo, hi = left.span
    flo, fhi = sorted(float(m.eval("f", v)) for v in (lo, hi))
    a1 = (float(m.eval("f", anchor[0], anchor[1])), float(m.eval("g", anchor[0], anchor[1])))
    right = leaf_solve(spec, i.shift(1), a1, step, tol, (max(0.0, flo), min(1.0, fhi)))
    xs = left.x if x_grid is None else np.asarray(x_grid, dtype=float)
    lhs = m.eval("g", xs, left(xs))
    rhs = right(np.clip(m.eval("f", xs), right.span[0], right.span[1]))
    return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class GronwallResult:
    passed: bool
    ratio: float
    bound: float
    c_hat: float
    gap0: float
    gap_max: float


def check_gronwall(spec: SystemSpec, i: TailedWord, anchor0, anchor1, step: float = DEFAULT_STEP,
                   tol: float = 1e-8, x_span: tuple = (0.0, 1.0), slack: float = 1e-3,
                   probes: int = 5) -> GronwallResult:
    """Compare ``max |y_0 - y_1|`` with ``e^{C span} |y_0 - y_1|`` at the left end of ``x_span``.

    ``C`` is the sampled maximum of ``|u'_y|`` on ``probes`` points of every
    vertical segment between the two leaves.
    """
    lo, hi = float(x_span[0]), float(x_span[1])
    l0 = leaf_solve(spec, i, anchor0, step, tol, x_span)
    l1 = leaf_solve(spec, i, anchor1, step, tol, x_span)
    n = max(2, int(round((hi - lo) / step)) + 1)
    xs = np.linspace(lo, hi, n)
    y0, y1 = l0(xs), l1(xs)
    gap = np.abs(y0 - y1)
    lam = np.linspace(0.0, 1.0, probes)
    px = np.repeat(xs, probes)
    py = (y0[:, None] + lam[None, :] * (y1 - y0)[:, None]).ravel()
    uy = bundle_u_y_many(spec, [i] * px.size, px, py, tol)
    c_hat = float(np.max(np.abs(uy)))
    growth = math.exp(c_hat * (hi - lo))
    gap0, gap_max = float(gap[0]), float(np.max(gap))
    if gap0 == 0.0:
        ratio = 0.0 if gap_max == 0.0 else math.inf
    else:
        ratio = gap_max / gap0
    bound = growth * (1 + slack)
    return GronwallResult(ratio <= bound, ratio, bound, c_hat, gap0, gap_max)
