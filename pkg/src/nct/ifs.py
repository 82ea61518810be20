"""Triangular iterated function systems on the unit square.

A map is ``F(x, y) = (f(x), g(x, y))`` where ``f`` may use the translation
symbol ``t1`` and ``g`` may use ``t2``; the numeric values of both symbols are
stored on the map.  Derivative bounds used throughout the package are sampled
on a square grid when a :class:`SystemSpec` is built.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from . import expr as E
from .symbolic import TailedWord, Word

BASE_POINT = (0.5, 0.5)
MARGIN = 1e-9
NONSTRICT_TOL = 1e-12
ESCAPE_TOL = 1e-12
LOAD_GRID = 33
RANDOM_POINTS = 10_000

# names of the per-map derivative slots, in the order used by the numeric kernels
F_PARTS = ("f", "f_x", "f_xx")
G_PARTS = ("g", "g_x", "g_y", "g_xx", "g_xy", "g_yy")


class SpecError(ValueError):
    """A system definition violates a structural requirement or a standing bound."""


class EscapeError(SpecError):
    def __init__(self, point, step: int):
        self.point = point
        self.step = step
        super().__init__(f"orbit left the unit square at step {step}: {point}")


@lru_cache(maxsize=None)
def _compiled(e: E.Expression):
    return E.compile_numpy(e)


@dataclass(frozen=True)
class TriangularMap:
    f: E.Expression
    g: E.Expression
    t1: float = 0.0
    t2: float = 0.0

    @classmethod
    def from_text(cls, f: str, g: str, t1: float = 0.0, t2: float = 0.0) -> "TriangularMap":
        return cls(E.parse(f), E.parse(g), float(t1), float(t2))

    def __post_init__(self):
        fv, gv = self.f.variables(), self.g.variables()
        if not fv <= {"x", "t1"}:
            raise SpecError(f"f may only use x and t1, found {sorted(fv - {'x', 't1'})} in {self.f}")
        if not gv <= {"x", "y", "t2"}:
            raise SpecError(f"g may only use x, y and t2, found {sorted(gv - {'x', 'y', 't2'})} in {self.g}")

    @cached_property
    def parts(self) -> dict:
        """Symbolic derivatives keyed by slot name."""
        return {
            "f": self.f,
            "f_x": self.f.derivative("x"),
            "f_xx": self.f.derivative("xx"),
            "g": self.g,
            "g_x": self.g.derivative("x"),
            "g_y": self.g.derivative("y"),
            "g_xx": self.g.derivative("xx"),
            "g_xy": self.g.derivative("xy"),
            "g_yy": self.g.derivative("yy"),
            "g_t2": self.g.derivative("t2"),
            "f_t1": self.f.derivative("t1"),
        }

    def eval(self, part: str, x, y=0.0, t1: float | None = None, t2: float | None = None) -> np.ndarray:
        """Vectorized value of one derivative slot."""
        t1 = self.t1 if t1 is None else t1
        t2 = self.t2 if t2 is None else t2
        return _compiled(self.parts[part])(x, y, t1, t2)

    def with_translation(self, t1: float, t2: float) -> "TriangularMap":
        return TriangularMap(self.f, self.g, float(t1), float(t2))

    def to_dict(self) -> dict:
        return {"f": E.to_source(self.f), "g": E.to_source(self.g), "t1": self.t1, "t2": self.t2}


def _grid(n: int):
    s = np.linspace(0.0, 1.0, n)
    x, y = np.meshgrid(s, s, indexing="ij")
    return x.ravel(), y.ravel()


@dataclass(frozen=True)
class Bounds:
    tau: float
    rho: float
    gamma: float
    gx_max: float
    gxy_max: float
    gyy_max: float
    f_sign: tuple
    gy_sign: tuple


class SystemSpec:
    """An immutable triangular IFS with grid-sampled derivative bounds."""

    def __init__(self, maps: Sequence[TriangularMap], grid_resolution: int = 64,
                 name: str = "", strict: bool = True):
        self.maps = tuple(maps)
        self.grid_resolution = int(grid_resolution)
        self.name = name
        if len(self.maps) < 2:
            raise SpecError("a system needs at least two maps")
        if self.grid_resolution < 2:
            raise SpecError("grid_resolution must be at least 2")
        self._check_finite()
        self.bounds = self._compute_bounds()
        if strict:
            self._check_standing()

    @property
    def n(self) -> int:
        return len(self.maps)

    @property
    def tau(self) -> float:
        return self.bounds.tau

    @property
    def rho(self) -> float:
        return self.bounds.rho

    @property
    def gamma(self) -> float:
        return self.bounds.gamma

    @property
    def t1(self) -> np.ndarray:
        return np.array([m.t1 for m in self.maps])

    @property
    def t2(self) -> np.ndarray:
        return np.array([m.t2 for m in self.maps])

    def __repr__(self) -> str:
        return f"SystemSpec(name={self.name!r}, n={self.n}, tau={self.tau:.6g}, rho={self.rho:.6g}, gamma={self.gamma:.6g})"

    # ---- construction helpers

    def _check_finite(self):
        x, y = _grid(LOAD_GRID)
        for idx, m in enumerate(self.maps, start=1):
            for part in m.parts:
                v = m.eval(part, x, y)
                if not np.all(np.isfinite(v)):
                    k = int(np.flatnonzero(~np.isfinite(v))[0])
                    try:
                        E.evaluate(m.parts[part], x[k], y[k], m.t1, m.t2)
                        detail = "non-finite value"
                    except E.DomainError as exc:
                        detail = str(exc)
                    raise SpecError(f"map {idx}: {part} is not finite at ({x[k]:.6g}, {y[k]:.6g}): {detail}")

    def _compute_bounds(self) -> Bounds:
        x, y = _grid(self.grid_resolution)
        fx_min, gy_min, gy_max, ratio = np.inf, np.inf, 0.0, 0.0
        gx, gxy, gyy = 0.0, 0.0, 0.0
        f_sign, gy_sign = [], []
        for m in self.maps:
            fx = m.eval("f_x", x, y)
            gy = m.eval("g_y", x, y)
            afx, agy = np.abs(fx), np.abs(gy)
            fx_min = min(fx_min, afx.min())
            gy_min = min(gy_min, agy.min())
            gy_max = max(gy_max, agy.max())
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = max(ratio, float(np.max(afx / agy)))
            gx = max(gx, float(np.abs(m.eval("g_x", x, y)).max()))
            gxy = max(gxy, float(np.abs(m.eval("g_xy", x, y)).max()))
            gyy = max(gyy, float(np.abs(m.eval("g_yy", x, y)).max()))
            f_sign.append(1.0 if np.median(fx) >= 0 else -1.0)
            gy_sign.append(1.0 if np.median(gy) >= 0 else -1.0)
        return Bounds(
            tau=float(min(fx_min, gy_min)) - MARGIN,
            rho=float(gy_max) + MARGIN,
            gamma=float(ratio) + MARGIN,
            gx_max=gx + MARGIN,
            gxy_max=gxy + MARGIN,
            gyy_max=gyy + MARGIN,
            f_sign=tuple(f_sign),
            gy_sign=tuple(gy_sign),
        )

    def _check_standing(self):
        b = self.bounds
        if not b.tau > 0:
            raise SpecError(f"derivatives vanish on the square (tau = {b.tau:.3g})")
        if not b.rho < 1:
            raise SpecError(f"vertical derivative is not contracting (rho = {b.rho:.6g})")
        if not b.gamma < 1:
            raise SpecError(f"no domination |f'| < |g'_y| (gamma = {b.gamma:.6g})")
        x, y = _grid(self.grid_resolution)
        for idx, m in enumerate(self.maps, start=1):
            fx, gx = m.eval("f", x, y), m.eval("g", x, y)
            lo = min(fx.min(), gx.min())
            hi = max(fx.max(), gx.max())
            if lo < -ESCAPE_TOL or hi > 1 + ESCAPE_TOL:
                raise SpecError(f"map {idx} does not send the unit square into itself (range [{lo:.6g}, {hi:.6g}])")

    # ---- derived objects

    @cached_property
    def additive_t2(self) -> bool:
        """True when every ``g`` has ``dg/dt2 == 1`` identically."""
        for m in self.maps:
            d = m.parts["g_t2"]
            while isinstance(d, E.Group):
                d = d.inner
            if not (isinstance(d, E.Const) and d.value == 1.0):
                return False
        return True

    def with_translations(self, t1: Sequence[float] | None = None, t2: Sequence[float] | None = None,
                          strict: bool = True) -> "SystemSpec":
        t1 = self.t1 if t1 is None else np.asarray(t1, dtype=float)
        t2 = self.t2 if t2 is None else np.asarray(t2, dtype=float)
        maps = [m.with_translation(a, b) for m, a, b in zip(self.maps, t1, t2)]
        return SystemSpec(maps, self.grid_resolution, self.name, strict=strict)

    def to_dict(self) -> dict:
        return {"maps": [m.to_dict() for m in self.maps], "grid_resolution": self.grid_resolution}

    def check_word(self, w: Sequence[int]):
        for s in w:
            if not 1 <= s <= self.n:
                raise ValueError(f"symbol {s} outside 1..{self.n}")

    # ---- vectorized application

    def apply(self, i: int, x, y):
        """Image of points under map ``i`` (0-based)."""
        m = self.maps[i]
        return m.eval("f", x, y), m.eval("g", x, y)

    def apply_indexed(self, idx: np.ndarray, x: np.ndarray, y: np.ndarray):
        """Apply map ``idx[k]`` (0-based) to point ``k``."""
        xn, yn = np.empty_like(x), np.empty_like(y)
        for i in range(self.n):
            sel = idx == i
            if sel.any():
                xn[sel], yn[sel] = self.apply(i, x[sel], y[sel])
        return xn, yn

    def eval_indexed(self, part: str, idx: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        out = np.empty(np.shape(x))
        for i in range(self.n):
            sel = idx == i
            if sel.any():
                out[sel] = self.maps[i].eval(part, x[sel], y[sel])
        return out


# --------------------------------------------------------------------------
# presets and loading


def _example_a() -> list[TriangularMap]:
    g = "(y^2+2*y+1-x*y+12*x^3+2*x)/24+t2"
    return [TriangularMap.from_text(f"(x+{i})/25+t1", g) for i in range(1, 25)]


def _example_b() -> list[TriangularMap]:
    return [
        TriangularMap.from_text(
            f"exp((x-{i})/25)+t1", f"y/5*exp((x-{i})/25)+cos(x)/2+({i}-6)/25+t2"
        )
        for i in range(1, 14)
    ]


def _affine_test() -> list[TriangularMap]:
    return [
        TriangularMap.from_text("0.3*x+t1", "0.4*y+0.1*x+t2"),
        TriangularMap.from_text("0.3*x+0.6+t1", "0.4*y+0.1*x+0.5+t2"),
    ]


PRESETS = {"example-a": _example_a, "example-b": _example_b, "affine-test": _affine_test}


def spec_from_dict(data: dict, name: str = "", strict: bool = True) -> SystemSpec:
    try:
        raw = data["maps"]
        maps = [
            TriangularMap.from_text(m["f"], m["g"], float(m.get("t1", 0.0)), float(m.get("t2", 0.0)))
            for m in raw
        ]
    except (KeyError, TypeError) as exc:
        raise SpecError(f"malformed system definition: {exc}") from None
    return SystemSpec(maps, int(data.get("grid_resolution", 64)), name=name, strict=strict)


def load_spec(source, strict: bool = True, grid_resolution: int | None = None) -> SystemSpec:
    """Build a system from a preset name, a JSON file path or an already parsed dict."""
    if isinstance(source, SystemSpec):
        return source
    if isinstance(source, dict):
        return spec_from_dict(source, strict=strict)
    source = str(source)
    if source in PRESETS:
        return SystemSpec(PRESETS[source](), grid_resolution or 64, name=source, strict=strict)
    if not os.path.exists(source):
        raise SpecError(f"{source!r} is neither a preset ({', '.join(PRESETS)}) nor a readable file")
    with open(source, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{source}: invalid JSON: {exc}") from None
    if grid_resolution:
        data = dict(data, grid_resolution=grid_resolution)
    return spec_from_dict(data, name=os.path.basename(source), strict=strict)


# --------------------------------------------------------------------------
# composition, projection and chain-rule derivatives


def compose(spec: SystemSpec, w: Sequence[int], point) -> tuple[float, float]:
    """``F_w(point)`` with the last symbol applied first."""
    spec.check_word(w)
    x, y = float(point[0]), float(point[1])
    for step, s in enumerate(reversed(tuple(w)), start=1):
        m = spec.maps[s - 1]
        x, y = E.evaluate(m.f, x, y, m.t1, m.t2), E.evaluate(m.g, x, y, m.t1, m.t2)
        if not (-ESCAPE_TOL <= x <= 1 + ESCAPE_TOL and -ESCAPE_TOL <= y <= 1 + ESCAPE_TOL):
            raise EscapeError((x, y), step)
    return x, y


def projection_depth(spec: SystemSpec, tol: float) -> int:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return max(1, math.ceil(math.log(tol) / math.log(spec.rho)))


def canonical_projection(spec: SystemSpec, i: TailedWord, tol: float = 1e-12, base=BASE_POINT):
    """Limit point of ``F_{i|n}(base)`` to within ``tol``."""
    n = projection_depth(spec, tol)
    return compose(spec, i.first(n), base)


def project_many(spec: SystemSpec, words: np.ndarray, base=BASE_POINT) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``F_w(base)`` for the rows of a 0-based ``(count, n)`` symbol array."""
    words = np.asarray(words)
    count, n = words.shape
    x = np.full(count, float(base[0]))
    y = np.full(count, float(base[1]))
    for k in range(n - 1, -1, -1):
        x, y = spec.apply_indexed(words[:, k], x, y)
    return x, y


def derivative_along(spec: SystemSpec, w: Sequence[int], point) -> tuple[float, float, float]:
    """Chain-rule products ``(f_w', (g_w)'_y, (g_w)'_x)`` at ``point``."""
    spec.check_word(w)
    x, y = float(point[0]), float(point[1])
    a, c, d = 1.0, 0.0, 1.0  # lower-triangular Jacobian [[a, 0], [c, d]]
    for s in reversed(tuple(w)):
        m = spec.maps[s - 1]
        fx = E.evaluate(m.parts["f_x"], x, y, m.t1, m.t2)
        gx = E.evaluate(m.parts["g_x"], x, y, m.t1, m.t2)
        gy = E.evaluate(m.parts["g_y"], x, y, m.t1, m.t2)
        a, c, d = fx * a, gx * a + gy * c, gy * d
        x, y = E.evaluate(m.f, x, y, m.t1, m.t2), E.evaluate(m.g, x, y, m.t1, m.t2)
    return a, d, c


def distortion_constant(spec: SystemSpec, depth: int, samples: int = 2000, seed: int = 0) -> float:
    """Monte Carlo lower estimate of the bounded-distortion constant.

    Sample ``k`` grows its word by prepending one symbol per level, and each
    level draws its symbols from a stream keyed only by ``(seed, level)``, so a
    deeper run sees a superset of the words of a shallower one.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    prng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    pts = prng.random((samples, 4))
    x0, y0, x1, y1 = (pts[:, k].copy() for k in range(4))
    fa, fb = np.ones(samples), np.ones(samples)
    ga, gb = np.ones(samples), np.ones(samples)
    worst = 1.0
    for level in range(1, depth + 1):
        sym = np.random.default_rng(np.random.SeedSequence([seed, level])).integers(spec.n, size=samples)
        fa *= spec.eval_indexed("f_x", sym, x0, y0)
        ga *= spec.eval_indexed("g_y", sym, x0, y0)
        fb *= spec.eval_indexed("f_x", sym, x1, y1)
        gb *= spec.eval_indexed("g_y", sym, x1, y1)
        x0, y0 = spec.apply_indexed(sym, x0, y0)
        x1, y1 = spec.apply_indexed(sym, x1, y1)
        rf = np.abs(fa / fb)
        rg = np.abs(ga / gb)
        worst = max(worst, float(np.max(np.maximum(rf, 1 / rf))), float(np.max(np.maximum(rg, 1 / rg))))
    return worst


# --------------------------------------------------------------------------
# condition validation


@dataclass
class Check:
    name: str
    description: str
    passed: bool
    worst: float
    margin: float
    witness: dict | None = None


@dataclass
class ValidationReport:
    family: str
    passed: bool
    checks: list = field(default_factory=list)
    ranges: dict = field(default_factory=dict)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_rows(self) -> list[list]:
        rows = []
        for c in self.checks:
            w = c.witness or {}
            rows.append([c.name, c.description, "pass" if c.passed else "fail", repr(c.worst),
                         repr(c.margin), w.get("map", ""), w.get("x", ""), w.get("y", ""), w.get("value", "")])
        return rows


def _sample_points(spec: SystemSpec, seed: int = 0):
    gx, gy = _grid(spec.grid_resolution)
    r = np.random.default_rng(seed).random((RANDOM_POINTS, 2))
    r = np.clip(r, 1e-12, 1 - 1e-12)
    return np.concatenate([gx, r[:, 0]]), np.concatenate([gy, r[:, 1]])


class _Sampler:
    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.x, self.y = _sample_points(spec)
        self._cache = {}

    def q(self, part: str) -> np.ndarray:
        """``(n_maps, n_points)`` values of a derivative slot."""
        if part not in self._cache:
            self._cache[part] = np.stack([m.eval(part, self.x, self.y) for m in self.spec.maps])
        return self._cache[part]

    def check(self, name: str, description: str, slack: np.ndarray, values: np.ndarray | None = None,
              strict: bool = True) -> Check:
        """``slack >= MARGIN`` (strict) or ``slack >= -NONSTRICT_TOL`` passes; the minimum is the witness."""
        slack = np.where(np.isfinite(slack), slack, -np.inf)
        k = int(np.argmin(slack))
        mi, pi = divmod(k, slack.shape[1])
        worst = float(slack[mi, pi])
        ok = worst >= MARGIN if strict else worst >= -NONSTRICT_TOL
        val = values[mi, pi] if values is not None else worst
        witness = {"map": mi + 1, "x": float(self.x[pi]), "y": float(self.y[pi]), "value": float(val)}
        return Check(name, description, bool(ok), float(val), worst, witness)

    def scalar_check(self, name: str, description: str, value: float, bound: float, witness: dict,
                     strict: bool = False) -> Check:
        slack = bound - value
        ok = slack >= MARGIN if strict else slack >= -NONSTRICT_TOL
        return Check(name, description, bool(ok), float(value), float(slack), witness)

    def argmax_witness(self, arr: np.ndarray) -> dict:
        k = int(np.argmax(arr))
        mi, pi = divmod(k, arr.shape[1])
        return {"map": mi + 1, "x": float(self.x[pi]), "y": float(self.y[pi]), "value": float(arr[mi, pi])}


def _into_square(s: _Sampler, name: str) -> Check:
    f, g = s.q("f"), s.q("g")
    slack = np.minimum(np.minimum(f, 1 - f), np.minimum(g, 1 - g))
    return s.check(name, "F_i maps [0,1]^2 into itself", slack, strict=False)


def _family_g(s: _Sampler) -> list:
    fx, gy = np.abs(s.q("f_x")), np.abs(s.q("g_y"))
    finite = np.ones_like(fx)
    for part in ("f", "f_x", "f_xx", "g", "g_x", "g_y", "g_xx", "g_xy", "g_yy"):
        finite = np.where(np.isfinite(s.q(part)), finite, -np.inf)
    return [
        s.check("G1.C2", "f, g and their partials up to order 2 are finite", finite, strict=False),
        _into_square(s, "G1.into"),
        s.check("G2.tau", "0 < tau < |f'|, |g'_y|", np.minimum(fx, gy), np.minimum(fx, gy)),
        s.check("G2.domination", "|f'| < |g'_y|", gy - fx, fx / gy),
        s.check("G2.rho", "|g'_y| < rho < 1", 1 - gy, gy),
    ]


def _family_a(s: _Sampler) -> list:
    fx, gy = s.q("f_x"), s.q("g_y")
    return [
        s.check("A1.tau", "0 < tau < f'", fx, fx),
        s.check("A1.domination", "f' < g'_y", gy - fx, fx / gy),
        s.check("A1.rho", "g'_y < rho < 1/2", 0.5 - gy, gy),
        s.check("A2.g_xy", "g''_xy <= 0", -s.q("g_xy"), s.q("g_xy"), strict=False),
        s.check("A2.g_x", "g'_x >= 0", s.q("g_x"), s.q("g_x"), strict=False),
        s.check("A2.g_yy", "g''_yy >= 0", s.q("g_yy"), s.q("g_yy"), strict=False),
        _into_square(s, "A3.into"),
    ]


def _family_b(s: _Sampler) -> list:
    fx, gy = np.abs(s.q("f_x")), np.abs(s.q("g_y"))
    mixed = np.abs(s.q("g_xy")) / gy
    rx = np.abs(s.q("g_x")) / gy
    ryy = np.abs(s.q("g_yy")) / gy
    prod = float(rx.max() * ryy.max())
    w = s.argmax_witness(rx if ryy.max() == 0 else ryy)
    w["value"] = prod
    return [
        s.check("B1.tau", "0 < 4 tau < 4|f'|", fx, fx),
        s.check("B1.domination", "4|f'| < |g'_y|", gy - 4 * fx, 4 * fx / gy),
        s.check("B1.rho", "|g'_y| < 1/4", 0.25 - gy, gy),
        s.check("B2.mixed", "|g''_xy| / |g'_y| <= 1/3", 1 / 3 - mixed, mixed, strict=False),
        s.scalar_check("B2.product", "max|g'_x|/|g'_y| * max|g''_yy|/|g'_y| <= 1/3", prod, 1 / 3, w),
        _into_square(s, "B3.into"),
    ]


def _log_ratio_rate(spec: SystemSpec, part: str, delta: float, length: int = 10, count: int = 2000,
                    seed: int = 0) -> float:
    """Max over sampled words of ``|log(D_t / D_t0)| / |w|`` after moving all translations by ``delta``."""
    rng = np.random.default_rng(seed)
    words = rng.integers(spec.n, size=(count, length))
    direction = rng.standard_normal(2 * spec.n)
    direction /= np.linalg.norm(direction)
    moved = spec.with_translations(spec.t1 + delta * direction[: spec.n],
                                   spec.t2 + delta * direction[spec.n:], strict=False)
    pts = rng.random((count, 2))
    out = []
    for sp in (spec, moved):
        x, y = pts[:, 0].copy(), pts[:, 1].copy()
        logd = np.zeros(count)
        for k in range(length - 1, -1, -1):
            logd += np.log(np.abs(sp.eval_indexed(part, words[:, k], x, y)))
            x, y = sp.apply_indexed(words[:, k], x, y)
        out.append(logd)
    return float(np.max(np.abs(out[1] - out[0]))) / length


def _family_t(spec: SystemSpec, s: _Sampler) -> list:
    b = spec.bounds
    fx, gy = np.abs(s.q("f_x")), np.abs(s.q("g_y"))
    c_t1 = max(b.gx_max, b.gxy_max, b.gyy_max)
    checks = [
        Check("T1.bounded", "max(|g'_x|, |g''_xy|, |g''_yy|) < C", bool(np.isfinite(c_t1)), c_t1, 0.0,
              s.argmax_witness(np.abs(s.q("g_x")))),
        s.check("T2.tau", "tau > 0", np.minimum(fx, gy), np.minimum(fx, gy)),
        s.check("T2.gamma", "gamma^-1 |f'| < |g'_y| with gamma < 1", 1 - fx / gy, fx / gy),
        s.check("T2.rho", "|g'_y| < rho < 1", 1 - gy, gy),
    ]
    # parameter continuity: translating by h must move the maps by O(h)
    h = 1e-6
    shifted = [m.with_translation(m.t1 + h, m.t2 + h) for m in spec.maps]
    moves = []
    for m0, m1 in zip(spec.maps, shifted):
        moves.append(np.maximum(np.abs(m1.eval("f", s.x, s.y) - m0.eval("f", s.x, s.y)),
                                np.abs(m1.eval("g", s.x, s.y) - m0.eval("g", s.x, s.y))))
    moves = np.stack(moves)
    checks.append(s.check("T3.continuity", "|F^(t+h) - F^t| <= 10 h", 10 * h - moves, moves, strict=False))
    # distortion in the parameter: the per-symbol log ratio must shrink with the move
    for name, part in (("T4.g_y", "g_y"), ("T6.f_x", "f_x")):
        r1 = _log_ratio_rate(spec, part, 1e-4)
        r2 = _log_ratio_rate(spec, part, 5e-5)
        ok = np.isfinite(r1) and np.isfinite(r2) and r2 <= 0.6 * r1 + 1e-13
        checks.append(Check(name, f"log ratio of {part} products per symbol -> 0 with the parameter move",
                            bool(ok), r2, 0.6 * r1 + 1e-13 - r2,
                            {"map": "", "x": "", "y": "", "value": r1}))
    return checks


FAMILIES = ("G", "A", "B", "T")


def validate(spec: SystemSpec, family: str) -> ValidationReport:
    """Sample every inequality of a condition family on the grid plus random points."""
    family = family.upper()
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    s = _Sampler(spec)
    if family == "G":
        checks = _family_g(s)
    elif family == "A":
        checks = _family_a(s)
    elif family == "B":
        checks = _family_b(s)
    else:
        checks = _family_t(spec, s)
    ranges = {}
    for part in ("f_x", "g_x", "g_y", "g_xy", "g_yy"):
        v = s.q(part)
        ranges[part] = (float(v.min()), float(v.max()))
    return ValidationReport(family, all(c.passed for c in checks), checks, ranges)
