"""Attractor point clouds, box counting and PPM rendering."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ifs import BASE_POINT, SystemSpec
from .symbolic import ENUMERATION_CAP, BernoulliWeights, check_cap

BURN_IN = 100
MAX_CHAINS = 1 << 14
POINT_TOL = 1e-9


@dataclass
class PointCloud:
    points: np.ndarray  # (count, 2)
    depth: int
    mode: str
    rho: float = 0.5

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]


def _full(spec: SystemSpec, depth: int, base, cap: int) -> np.ndarray:
    check_cap(spec.n, depth, cap)
    x = np.array([float(base[0])])
    y = np.array([float(base[1])])
    for _ in range(depth):
        xs, ys = zip(*(spec.apply(i, x, y) for i in range(spec.n)))
        x, y = np.concatenate(xs), np.concatenate(ys)
    return np.column_stack([x, y])


def _chaos(spec: SystemSpec, count: int, seed: int, p: BernoulliWeights | None, base) -> np.ndarray:
    """Independent chains, chain ``c`` driven by ``SeedSequence([seed, c])``, each burnt in for ``BURN_IN`` steps."""
    chains = min(count, MAX_CHAINS)
    per = -(-count // chains)
    probs = None if p is None else p.array()
    sym = np.empty((chains, BURN_IN + per), dtype=np.int64)
    for c in range(chains):
        rng = np.random.default_rng(np.random.SeedSequence([seed, c]))
        sym[c] = rng.choice(spec.n, size=BURN_IN + per, p=probs)
    x = np.full(chains, float(base[0]))
    y = np.full(chains, float(base[1]))
    out = np.empty((chains, per, 2))
    for k in range(BURN_IN + per):
        x, y = spec.apply_indexed(sym[:, k], x, y)
        if k >= BURN_IN:
            out[:, k - BURN_IN, 0] = x
            out[:, k - BURN_IN, 1] = y
    return out.reshape(-1, 2)[:count]


def sample_attractor(spec: SystemSpec, depth: int = 8, mode: str = "full", count: int = 100_000, seed: int = 0,
                     p: BernoulliWeights | None = None, base=BASE_POINT, cap: int = ENUMERATION_CAP) -> PointCloud:
    """``{F_w(base) : |w| = depth}`` in full mode, random orbits in chaos mode."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if mode == "full":
        pts = _full(spec, depth, base, cap)
    elif mode == "chaos":
        if count < 1:
            raise ValueError("count must be positive")
        pts = _chaos(spec, int(count), seed, p, base)
    else:
        raise ValueError(f"mode must be 'full' or 'chaos', not {mode!r}")
    return PointCloud(pts, int(depth), mode, spec.rho)


@dataclass(frozen=True)
class BoxDimEstimate:
    exponents: tuple
    counts: tuple
    slope: float
    intercept: float
    residual: float
    warning: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["e", "boxes"])
        for e, n in zip(self.exponents, self.counts):
            w.writerow([e, n])
        return buf.getvalue()


def box_counts(points: np.ndarray, exponents) -> list[int]:
    """Occupied half-open dyadic boxes ``[k 2^-e, (k+1) 2^-e)`` at each exponent; 1.0 joins the last box."""
    exponents = list(exponents)
    if len(points) == 0:
        return [0] * len(exponents)
    top = max(exponents)
    side = 1 << top
    ix = np.clip(np.floor(points[:, 0] * side), 0, side - 1).astype(np.int64)
    iy = np.clip(np.floor(points[:, 1] * side), 0, side - 1).astype(np.int64)
    codes = np.unique(ix * side + iy)
    ix, iy = codes // side, codes % side
    out = []
    for e in exponents:
        s = top - e
        out.append(int(np.unique(((ix >> s) << e) | (iy >> s)).size))
    return out


def box_dimension(cloud: PointCloud, min_exp: int = 3, max_exp: int = 8) -> BoxDimEstimate:
    """Least-squares slope of ``log N(e)`` against ``e log 2``."""
    if not (2 <= min_exp < max_exp <= 12):
        raise ValueError("need 2 <= min_exp < max_exp <= 12")
    exps = list(range(min_exp, max_exp + 1))
    counts = box_counts(cloud.points, exps)
    warning = ""
    if cloud.mode == "full" and cloud.depth * -math.log(cloud.rho) < max_exp * math.log(2):
        warning = (f"depth {cloud.depth} resolves about 2^-{cloud.depth * -math.log2(cloud.rho):.1f}; "
                   f"finest box is 2^-{max_exp}")
    if min(counts) == 0:
        return BoxDimEstimate(tuple(exps), tuple(counts), 0.0, 0.0, 0.0, warning or "empty cloud")
    X = np.array(exps, dtype=float) * math.log(2)
    Y = np.log(np.array(counts, dtype=float))
    slope, intercept = np.polyfit(X, Y, 1)
    res = float(np.sqrt(np.mean((Y - (slope * X + intercept)) ** 2)))
    return BoxDimEstimate(tuple(exps), tuple(counts), float(slope), float(intercept), res, warning)


def ppm_bytes(cloud: PointCloud, width: int, height: int) -> bytes:
    """Binary P6 image: white background, black occupied pixels, ``(0, 0)`` at the bottom left."""
    if width < 16 or height < 16:
        raise ValueError("width and height must be at least 16")
    img = np.full((height, width, 3), 255, dtype=np.uint8)
    pts = cloud.points
    if len(pts):
        ok = np.all((pts >= -POINT_TOL) & (pts <= 1 + POINT_TOL), axis=1)
        pts = pts[ok]
        col = np.clip(np.floor(pts[:, 0] * width), 0, width - 1).astype(np.int64)
        row = height - 1 - np.clip(np.floor(pts[:, 1] * height), 0, height - 1).astype(np.int64)
        img[row, col] = 0
    return f"P6\n{width} {height}\n255\n".encode("ascii") + img.tobytes()


def render_ppm(cloud: PointCloud, width: int, height: int, path) -> Path:
    data = ppm_bytes(cloud, width, height)
    path = Path(path)
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_ppm(path) -> np.ndarray:
    """``(height, width, 3)`` pixels of a binary P6 file written by :func:`render_ppm`."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
