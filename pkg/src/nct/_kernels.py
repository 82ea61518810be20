"""Compiled inner loops for the bundle series and the leaf ODE.

Each system gets a generated ``jet(i, x, y, t1, t2, out)`` that writes the
value and derivatives of map ``i`` at ``(x, y)`` into ``out`` (slot order in
``SLOTS``).  The generic kernels below take the jet as a first-class function,
so numba specializes them once per jet source.  Translations are runtime
arrays, which lets perturbed systems reuse the compiled code.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from . import expr as E

SLOTS = ("f", "f_x", "f_xx", "g", "g_x", "g_y", "g_xx", "g_xy", "g_yy")
F, FX, FXX, G, GX, GY, GXX, GXY, GYY = range(len(SLOTS))

Y_LIMIT = 10.0

_K = None


def _numba():
    import numba

    return numba


def jet_source(spec) -> str:
    lines = ["import math", "", "def jet(i, x, y, t1, t2, out):"]
    for idx, m in enumerate(spec.maps):
        names = {"t1": f"t1[{idx}]", "t2": f"t2[{idx}]"}
        lines.append(f"    {'if' if idx == 0 else 'elif'} i == {idx}:")
        for k, slot in enumerate(SLOTS):
            lines.append(f"        out[{k}] = {E.to_python(m.parts[slot], names)}")
    return "\n".join(lines) + "\n"


@lru_cache(maxsize=32)
def _compile_jet(src: str):
    nb = _numba()
    ns: dict = {}
    exec(compile(src, "<jet>", "exec"), ns)  # noqa: S102 - generated from parsed expressions
    return nb.njit(nogil=True, error_model="numpy")(ns["jet"])


def jet_for(spec):
    return _compile_jet(jet_source(spec))


def kernels():
    """Lazily compiled kernel namespace."""
    global _K
    if _K is None:
        _K = _build()
    return _K


def _build():
    nb = _numba()
    jit = nb.njit(nogil=True, error_model="numpy")

    @jit
    def u_one(jet, word, x, y, t1, t2, K, sign):
        out = np.empty(9)
        r = 1.0
        s = 0.0
        for k in range(K):
            i = word[k]
            jet(i, x, y, t1, t2, out)
            if out[GY] * sign[i] <= 0.0:
                return np.nan
            r /= out[GY]
            s -= out[GX] * r
            r *= out[FX]
            x, y = out[F], out[G]
        return s

    @jit
    def u_y_one(jet, word, x, y, t1, t2, K, sign):
        out = np.empty(9)
        r = 1.0
        gprev = 1.0
        acc = 0.0
        s = 0.0
        for k in range(K):
            i = word[k]
            jet(i, x, y, t1, t2, out)
            if out[GY] * sign[i] <= 0.0:
                return np.nan
            acc += out[GYY] / out[GY] * gprev
            r /= out[GY]
            s += -out[GXY] * gprev * r + out[GX] * r * acc
            r *= out[FX]
            gprev *= out[GY]
            x, y = out[F], out[G]
        return s

    @jit
    def u_t_one(jet, word, x, y, t1, t2, K, sign):
        n = t2.shape[0]
        out = np.empty(9)
        d = np.zeros(n)
        acc = np.zeros(n)
        res = np.zeros(n)
        r = 1.0
        for k in range(K):
            i = word[k]
            jet(i, x, y, t1, t2, out)
            if out[GY] * sign[i] <= 0.0:
                res[:] = np.nan
                return res
            c = out[GYY] / out[GY]
            for j in range(n):
                acc[j] += c * d[j]
            r /= out[GY]
            for j in range(n):
                res[j] += -out[GXY] * r * d[j] + out[GX] * r * acc[j]
            for j in range(n):
                d[j] *= out[GY]
            d[i] += 1.0
            r *= out[FX]
            x, y = out[F], out[G]
        return res

    @jit
    def u_many(jet, words, xs, ys, t1, t2, K, sign):
        m = xs.shape[0]
        res = np.empty(m)
        for q in range(m):
            res[q] = u_one(jet, words[q], xs[q], ys[q], t1, t2, K, sign)
        return res

    @jit
    def u_y_many(jet, words, xs, ys, t1, t2, K, sign):
        m = xs.shape[0]
        res = np.empty(m)
        for q in range(m):
            res[q] = u_y_one(jet, words[q], xs[q], ys[q], t1, t2, K, sign)
        return res

    @jit
    def u_t_many(jet, words, xs, ys, t1, t2, K, sign):
        m = xs.shape[0]
        res = np.empty((m, t2.shape[0]))
        for q in range(m):
            res[q] = u_t_one(jet, words[q], xs[q], ys[q], t1, t2, K, sign)
        return res

    @jit
    def rk4_path(jet, word, xs, y0, t1, t2, K, sign):
        """Integrate ``y' = u`` through the nodes ``xs``; returns values, slopes and the count of valid nodes."""
        m = xs.shape[0]
        ys = np.full(m, np.nan)
        sl = np.full(m, np.nan)
        y = y0
        ys[0] = y
        k1 = u_one(jet, word, xs[0], y, t1, t2, K, sign)
        sl[0] = k1
        if not math.isfinite(k1):
            return ys, sl, 0
        for q in range(m - 1):
            x = xs[q]
            h = xs[q + 1] - x
            k2 = u_one(jet, word, x + 0.5 * h, y + 0.5 * h * k1, t1, t2, K, sign)
            k3 = u_one(jet, word, x + 0.5 * h, y + 0.5 * h * k2, t1, t2, K, sign)
            k4 = u_one(jet, word, x + h, y + h * k3, t1, t2, K, sign)
            y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not math.isfinite(y) or abs(y) > Y_LIMIT:
                return ys, sl, q + 1
            k1 = u_one(jet, word, xs[q + 1], y, t1, t2, K, sign)
            if not math.isfinite(k1):
                return ys, sl, q + 1
            ys[q + 1] = y
            sl[q + 1] = k1
        return ys, sl, m

    return {
        "u_one": u_one,
        "u_y_one": u_y_one,
        "u_t_one": u_t_one,
        "u_many": u_many,
        "u_y_many": u_y_many,
        "u_t_many": u_t_many,
        "rk4_path": rk4_path,
    }
