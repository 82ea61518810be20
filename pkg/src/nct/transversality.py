"""Derivatives in the vertical translations and sampled transversality checks.

All derivatives are taken with respect to ``t_{k,2}`` and assume each ``g``
depends on its translation additively.  Map indices ``k`` are 1-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson

from . import foliation as fol
from .ifs import BASE_POINT, SystemSpec, canonical_projection, projection_depth, validate
from .symbolic import TailedWord, random_tailed_words

ROOT_TOL = 1e-10
SIGN_TOL = 1e-9
SEPARATION_TOL = 1e-6

# family B constants
B_UY = 112 / 135
B_UT_GAP = 28 / 81


def delta_b() -> float:
    """Closed-form transversality constant for family B."""
    a = B_UY
    return (2 / 3 - 5 / 12 * math.exp(2 * a) + 5 / 6 * math.exp(a)) * math.exp(-a)


def delta_a(rho: float, c_hat: float) -> float:
    """Lower bound ``(1 - rho/(1 - rho)) e^{-C}`` for family A."""
    return (1 - rho / (1 - rho)) * math.exp(-c_hat)


class ValidationFailedError(ValueError):
    def __init__(self, report):
        self.report = report
        bad = report.failures()
        first = bad[0] if bad else None
        detail = f"{first.name} (worst {first.worst:.6g}, witness {first.witness})" if first else "unknown"
        super().__init__(f"system fails family {report.family}: {detail}")


# --------------------------------------------------------------------------
# projection derivatives


def default_depth(spec: SystemSpec) -> int:
    """Smallest ``d`` with ``rho**d <= 1e-10``."""
    return max(1, math.ceil(math.log(1e-10) / math.log(spec.rho)))


def dpi2_dt_many(spec: SystemSpec, words, depth: int | None = None) -> np.ndarray:
    """``(count, N)`` array of ``d pi^2(j) / d t_{k,2}`` for each word and every ``k``.

    Uses the recursion ``D(j) = e_{j_1} + (g_{j_1})'_y(pi(shift j)) D(shift j)``
    cut after ``depth`` symbols; the neglected tail is at most ``rho**depth / (1 - rho)``.
    """
    fol._require_additive(spec)
    depth = default_depth(spec) if depth is None else int(depth)
    if depth < 1:
        raise ValueError("depth must be at least 1")
    extra = projection_depth(spec, 1e-13)
    W = np.stack([w.indices(depth + extra) for w in words])
    count = W.shape[0]
    # q[:, l] = pi(shift^l j) approximated from a deeper base
    x = np.full(count, BASE_POINT[0])
    y = np.full(count, BASE_POINT[1])
    qx = np.empty((count, depth))
    qy = np.empty((count, depth))
    for col in range(depth + extra - 1, 0, -1):
        x, y = spec.apply_indexed(W[:, col], x, y)
        if col < depth:
            qx[:, col], qy[:, col] = x, y
    out = np.zeros((count, spec.n))
    prod = np.ones(count)
    rows = np.arange(count)
    for m in range(depth):
        np.add.at(out, (rows, W[:, m]), prod)
        if m + 1 < depth:
            prod = prod * spec.eval_indexed("g_y", W[:, m], qx[:, m + 1], qy[:, m + 1])
    return out


def dpi2_dt(spec: SystemSpec, j: TailedWord, k: int, depth: int | None = None) -> float:
    """``d pi^2(j) / d t_{k,2}``."""
    if not 1 <= k <= spec.n:
        raise ValueError(f"map index {k} outside 1..{spec.n}")
    return float(dpi2_dt_many(spec, [j], depth)[0, k - 1])


def separation_derivative(spec: SystemSpec, j: TailedWord, h: TailedWord, depth: int | None = None) -> float:
    """``d/dt_{j_1,2} (pi^2(j) - pi^2(h))`` for words with different first symbols."""
    if j.symbol(0) == h.symbol(0):
        raise ValueError("words must differ in their first symbol")
    d = dpi2_dt_many(spec, [j, h], depth)
    k = j.symbol(0) - 1
    return float(d[0, k] - d[1, k])


def du_dt(spec: SystemSpec, i: TailedWord, x: float, y: float, k: int, tol: float = fol.DEFAULT_TOL) -> float:
    if not 1 <= k <= spec.n:
        raise ValueError(f"map index {k} outside 1..{spec.n}")
    return float(fol.bundle_u_t(spec, i, x, y, tol)[k - 1])


# --------------------------------------------------------------------------
# leaf derivative


def dy_dt(spec: SystemSpec, i: TailedWord, j: TailedWord, k: int, x: float, step: float = fol.DEFAULT_STEP,
          tol: float = fol.DEFAULT_TOL) -> float:
    """``d/dt_{k,2} y(i, pi(j), x)`` by variation of constants along the leaf through ``pi(j)``.

    The inner integrals of ``u'_y`` use the trapezoid rule on the leaf nodes;
    the outer integral uses composite Simpson.
    """
    if not 1 <= k <= spec.n:
        raise ValueError(f"map index {k} outside 1..{spec.n}")
    fol._check_x(x)
    p = canonical_projection(spec, j)
    d0 = dpi2_dt(spec, j, k)
    if x == p[0]:
        return d0
    leaf = fol.leaf_solve(spec, i, p, step, tol, (min(x, p[0]), max(x, p[0])))
    xs, ys = leaf.x, leaf.y
    if x < p[0]:
        xs, ys = xs[::-1], ys[::-1]
    words = [i] * xs.size
    uy = fol.bundle_u_y_many(spec, words, xs, ys, tol)
    ut = fol.bundle_u_t_many(spec, words, xs, ys, tol)[:, k - 1]
    inner = cumulative_trapezoid(uy, xs, initial=0.0)
    total = inner[-1]
    return float(d0 * math.exp(total) + simpson(np.exp(total - inner) * ut, x=xs))


def dy_dt_fd(spec: SystemSpec, i: TailedWord, j: TailedWord, k: int, x: float, eps: float = 1e-6,
             step: float = fol.DEFAULT_STEP, tol: float = fol.DEFAULT_TOL) -> float:
    """Central difference of the leaf height in ``t_{k,2}``; an oracle for :func:`dy_dt`."""
    vals = []
    for sgn in (1.0, -1.0):
        t2 = spec.t2.copy()
        t2[k - 1] += sgn * eps
        s = spec.with_translations(t2=t2, strict=False)
        p = canonical_projection(s, j)
        leaf = fol.leaf_solve(s, i, p, step, tol, (min(x, p[0]), max(x, p[0])))
        vals.append(float(leaf.y[0] if x <= p[0] else leaf.y[-1]))
    return (vals[0] - vals[1]) / (2 * eps)


# --------------------------------------------------------------------------
# verification


@dataclass
class InequalityRow:
    name: str
    bound: float
    worst: float
    margin: float
    passed: bool
    witness: dict = field(default_factory=dict)


@dataclass
class TransversalityReport:
    family: str
    rows: list
    sup_u_y: float
    max_u_t_gap: float
    min_separation: float
    delta: float
    constants: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, name: str) -> InequalityRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_rows(self) -> list[list]:
        return [[r.name, repr(r.bound), repr(r.worst), repr(r.margin), "PASS" if r.passed else "FAIL"] for r in self.rows]


def _lower(name, bound, values, slack, witnesses=None) -> InequalityRow:
    values = np.asarray(values, dtype=float)
    k = int(np.nanargmin(values)) if np.isfinite(values).any() else 0
    worst = float(np.min(values))
    ok = bool(np.all(np.isfinite(values)) and worst >= bound - slack)
    return InequalityRow(name, bound, worst, worst - bound, ok, witnesses(k) if witnesses else {})


def _upper(name, bound, values, slack, witnesses=None) -> InequalityRow:
    values = np.asarray(values, dtype=float)
    k = int(np.nanargmax(values)) if np.isfinite(values).any() else 0
    worst = float(np.max(values))
    ok = bool(np.all(np.isfinite(values)) and worst <= bound + slack)
    return InequalityRow(name, bound, worst, bound - worst, ok, witnesses(k) if witnesses else {})


def _pair_witness(prs, k) -> dict:
    return {"j": prs[k][0].first(8), "h": prs[k][1].first(8)}


def _sample_pairs(spec, rng, count, length):
    """Word pairs with different first symbols, ordered so that ``pi^1(j) <= pi^1(h)``."""
    js = random_tailed_words(rng, count, spec.n, length)
    hs = random_tailed_words(rng, count, spec.n, length)
    out = []
    for j, h in zip(js, hs):
        if j.symbol(0) == h.symbol(0):
            s = (h.symbol(0) % spec.n) + 1
            h = TailedWord((s,) + h.prefix[1:], h.tail)
        out.append((j, h))
    return out


def _coincidence_terms(spec, i, j, h, step, tol, x_mid: bool):
    """Leaf data for the coincident-leaf expressions; the leaf through ``pi(h)`` plays the common leaf."""
    pj, ph = canonical_projection(spec, j), canonical_projection(spec, h)
    if pj[0] > ph[0]:
        j, h, pj, ph = h, j, ph, pj
    a, b = pj[0], ph[0]
    n = max(3, int(math.ceil((b - a) / step)) | 1)
    if x_mid:
        m = 0.5 * (a + b)
        xs = np.unique(np.concatenate([np.linspace(a, m, n), np.linspace(m, b, n)]))
        lo = a
    else:
        n0 = max(3, int(math.ceil(a / step)) | 1)
        xs = np.unique(np.concatenate([np.linspace(0.0, a, n0), np.linspace(a, b, n)]))
        lo = 0.0
    leaf = fol.leaf_solve(spec, i, ph, step, tol, (lo, b))
    ys = leaf(xs)
    words = [i] * xs.size
    uy = fol.bundle_u_y_many(spec, words, xs, ys, tol)
    ut = fol.bundle_u_t_many(spec, words, xs, ys, tol)
    I = cumulative_trapezoid(uy, xs, initial=0.0)
    ia = int(np.searchsorted(xs, a))
    ib = xs.size - 1
    D = dpi2_dt_many(spec, [j, h])
    return dict(j=j, h=h, xs=xs, uy=uy, ut=ut, I=I, ia=ia, ib=ib, D=D)


def coincidence_a(spec, i, j, h, step=fol.DEFAULT_STEP, tol=fol.DEFAULT_TOL):
    """Family A expression for ``d/dt_{j_1,2}`` of the leaf gap at every sampled ``x`` in ``[0, pi^1(h)]``.

    Also returns the pointwise floor ``(1 - rho/(1 - rho)) exp(-int_x^{pi^1(h)} u'_y)``.
    """
    c = _coincidence_terms(spec, i, j, h, step, tol, x_mid=False)
    k = c["j"].symbol(0) - 1
    D, I, xs, ia, ib = c["D"], c["I"], c["xs"], c["ia"], c["ib"]
    sep = D[0, k] - D[1, k]
    seg = slice(ia, ib + 1)
    integrand = np.exp(-I[seg]) * (c["ut"][seg, k] + D[0, k] * c["uy"][seg])
    J = simpson(integrand, x=xs[seg]) if ib > ia else 0.0
    values = sep * np.exp(I - I[ib]) + np.exp(I) * J
    floor = (1 - spec.rho / (1 - spec.rho)) * np.exp(I - I[ib])
    return values, floor, float(np.max(np.abs(c["uy"])))


def coincidence_b(spec, i, j, h, step=fol.DEFAULT_STEP, tol=fol.DEFAULT_TOL):
    """Family B expression (difference of the ``j_1`` and ``h_1`` leaf-gap derivatives) at the midpoint."""
    c = _coincidence_terms(spec, i, j, h, step, tol, x_mid=True)
    kj, kh = c["j"].symbol(0) - 1, c["h"].symbol(0) - 1
    D, I, xs, ib = c["D"], c["I"], c["xs"], c["ib"]
    im = int(np.argmin(np.abs(xs - 0.5 * (xs[0] + xs[ib]))))
    term_j = (D[0, kj] - D[0, kh]) * math.exp(I[im] - I[0])
    term_h = (D[1, kh] - D[1, kj]) * math.exp(I[im] - I[ib])
    integrand = np.exp(I[im] - I) * (c["ut"][:, kj] - c["ut"][:, kh])
    integral = simpson(integrand, x=xs) if ib > 0 else 0.0
    return float(term_j + term_h + integral), float(np.max(np.abs(c["uy"])))


def verify_transversality(spec: SystemSpec, family: str, samples: int = 10_000, seed: int = 0,
                          pairs: int = 1000, leaves: int = 20, tol: float = fol.DEFAULT_TOL,
                          step: float = fol.DEFAULT_STEP, word_length: int = 24) -> TransversalityReport:
    """Sampled check of the ingredient bounds and of the coincident-leaf expressions."""
    family = family.upper()
    if family not in ("A", "B"):
        raise ValueError("family must be 'A' or 'B'")
    rep = validate(spec, family)
    if not rep.passed:
        raise ValidationFailedError(rep)
    fol._require_additive(spec)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    words = random_tailed_words(rng, samples, spec.n, word_length)
    pts = rng.random((samples, 2))
    uy = fol.bundle_u_y_many(spec, words, pts[:, 0], pts[:, 1], tol)
    ut = fol.bundle_u_t_many(spec, words, pts[:, 0], pts[:, 1], tol)

    def wq(k):
        return {"x": float(pts[k, 0]), "y": float(pts[k, 1]), "i": words[k].first(8)}

    prs = _sample_pairs(spec, np.random.default_rng(np.random.SeedSequence([seed, 1])), pairs, word_length)
    D = dpi2_dt_many(spec, [w for p in prs for w in p])
    first = np.array([j.symbol(0) - 1 for j, _ in prs])
    sep = D[0::2][np.arange(pairs), first] - D[1::2][np.arange(pairs), first]
    rho = spec.rho
    usual = 1 - rho / (1 - rho)

    rows = [
        _lower("usual_transversality", usual, sep, SEPARATION_TOL, lambda k: _pair_witness(prs, k)),
        _lower("dpi2_dt.nonnegative", 0.0, D.ravel(), SIGN_TOL),
        _upper("dpi2_dt.bounded", 1 / (1 - rho), D.ravel(), SIGN_TOL),
    ]
    lrng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    lprs = _sample_pairs(spec, lrng, leaves, word_length)
    lwords = random_tailed_words(lrng, leaves, spec.n, word_length)
    gap = float(np.max(np.max(ut, axis=1) - np.min(ut, axis=1)))
    if family == "A":
        vals, gaps, sups = [], [], []
        for (j, h), i in zip(lprs, lwords):
            v, floor, s = coincidence_a(spec, i, j, h, step, tol)
            vals.append(float(np.min(v)))
            gaps.append(float(np.min(v - floor)))
            sups.append(s)
        c_hat = max(float(np.max(np.abs(uy))), max(sups, default=0.0))
        delta = delta_a(rho, c_hat)
        rows += [
            _lower("bundle.u_y_nonnegative", 0.0, uy, SIGN_TOL, wq),
            _lower("bundle.du_dt_nonnegative", 0.0, np.min(ut, axis=1), SIGN_TOL, wq),
            _lower("delta.positive", 0.0, [delta], 0.0),
            _lower("coincidence.lower_bound", delta, vals, SEPARATION_TOL,
                   lambda k: {"i": lwords[k].first(8), **_pair_witness(lprs, k)}),
            _lower("coincidence.pointwise", 0.0, gaps, SEPARATION_TOL,
                   lambda k: {"i": lwords[k].first(8), **_pair_witness(lprs, k)}),
        ]
    else:
        c_hat = float(np.max(np.abs(uy)))
        delta = delta_b()
        vals = [coincidence_b(spec, i, j, h, step, tol)[0] for (j, h), i in zip(lprs, lwords)]
        rows += [
            _upper("bundle.u_y_bound", B_UY, np.abs(uy), SIGN_TOL, wq),
            _upper("bundle.du_dt_gap", B_UT_GAP, np.max(ut, axis=1) - np.min(ut, axis=1), SIGN_TOL, wq),
            _lower("delta.positive", 0.0, [delta], 0.0),
            _lower("coincidence.lower_bound", 2 * delta, vals, SEPARATION_TOL,
                   lambda k: {"i": lwords[k].first(8), **_pair_witness(lprs, k)}),
        ]
    return TransversalityReport(family, rows, c_hat, gap, float(np.min(sep)), delta,
                                {"rho": rho, "usual": usual, "samples": samples, "pairs": pairs, "leaves": leaves})
