import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nct import foliation as F
from nct.ifs import canonical_projection
from nct.symbolic import TailedWord

unit = st.floats(0, 1)


def tailed(n):
    return st.builds(TailedWord, st.lists(st.integers(1, n), max_size=8).map(tuple),
                     st.lists(st.integers(1, n), min_size=1, max_size=3).map(tuple))


def _random_queries(spec, count, seed=0):
    rng = np.random.default_rng(seed)
    words = [TailedWord(tuple(int(s) for s in rng.integers(1, spec.n + 1, size=6)), (1, 2)) for _ in range(count)]
    return words, rng.random(count), rng.random(count)


# --------------------------------------------------------------------------
# bundle series


@given(tailed(2), unit, unit)
def test_affine_slope_is_minus_one(affine, w, x, y):
    assert F.bundle_u(affine, w, x, y) == pytest.approx(-1.0, abs=1e-9)
    assert F.bundle_u_y(affine, w, x, y) == 0.0
    assert np.all(F.bundle_u_t(affine, w, x, y) == 0.0)


@given(tailed(2), unit, unit)
def test_flat_system_has_zero_slope(flat, w, x, y):
    assert F.bundle_u(flat, w, x, y) == 0.0


def test_bundle_query_tail(ex_a):
    q = F.bundle_query(ex_a, TailedWord((1,)), 1e-10)
    assert q.tail_bound <= 1e-10 < F.u_tail(ex_a, q.depth - 1)
    b = ex_a.bounds
    assert q.tail_bound == pytest.approx(b.gx_max / b.tau * b.gamma**q.depth / (1 - b.gamma))


@pytest.mark.parametrize("name", ["ex_a", "ex_b"])
def test_slope_bound(name, request):
    spec = request.getfixturevalue(name)
    b = spec.bounds
    words, xs, ys = _random_queries(spec, 500)
    u = F.bundle_u_many(spec, words, xs, ys)
    assert np.all(np.abs(u) <= b.gx_max / b.tau / (1 - b.gamma))
    assert np.all(np.abs(u) <= b.gx_max / b.tau / (b.tau * (1 - b.gamma)))


def test_batch_matches_scalar(ex_b):
    words, xs, ys = _random_queries(ex_b, 20, seed=1)
    u = F.bundle_u_many(ex_b, words, xs, ys)
    uy = F.bundle_u_y_many(ex_b, words, xs, ys)
    ut = F.bundle_u_t_many(ex_b, words, xs, ys)
    for k, (w, x, y) in enumerate(zip(words, xs, ys)):
        assert u[k] == F.bundle_u(ex_b, w, x, y)
        assert uy[k] == F.bundle_u_y(ex_b, w, x, y)
        np.testing.assert_array_equal(ut[k], F.bundle_u_t(ex_b, w, x, y))


@pytest.mark.parametrize("name", ["ex_a", "ex_b"])
def test_u_y_matches_finite_difference(name, request):
    spec = request.getfixturevalue(name)
    words, xs, ys = _random_queries(spec, 10, seed=2)
    h = 1e-5
    for w, x, y in zip(words, xs, 0.1 + 0.8 * ys):
        fd = (F.bundle_u(spec, w, x, y + h, 1e-14) - F.bundle_u(spec, w, x, y - h, 1e-14)) / (2 * h)
        assert F.bundle_u_y(spec, w, x, y, 1e-12) == pytest.approx(fd, abs=1e-7)


@pytest.mark.parametrize("name", ["ex_a", "ex_b"])
def test_u_t_matches_finite_difference(name, request):
    spec = request.getfixturevalue(name)
    words, xs, ys = _random_queries(spec, 3, seed=3)
    h = 1e-6
    for w, x, y in zip(words, xs, ys):
        ut = F.bundle_u_t(spec, w, x, y, 1e-12)
        for k in (0, spec.n // 2, spec.n - 1):
            dt = np.zeros(spec.n)
            dt[k] = h
            up = spec.with_translations(spec.t1, spec.t2 + dt, strict=False)
            dn = spec.with_translations(spec.t1, spec.t2 - dt, strict=False)
            fd = (F.bundle_u(up, w, x, y, 1e-14) - F.bundle_u(dn, w, x, y, 1e-14)) / (2 * h)
            assert ut[k] == pytest.approx(fd, abs=1e-7)


def test_bundle_arguments_checked(ex_a):
    with pytest.raises(ValueError):
        F.bundle_u(ex_a, TailedWord((25,)), 0.5, 0.5)
    with pytest.raises(ValueError):
        F.bundle_u(ex_a, TailedWord((1,)), 1.5, 0.5)
    with pytest.raises(ValueError):
        F.bundle_u(ex_a, TailedWord((1,)), 0.5, 0.5, tol=0.0)


# --------------------------------------------------------------------------
# invariance


@pytest.mark.parametrize("name", ["affine", "ex_a", "ex_b"])
def test_bundle_invariance(name, request):
    spec = request.getfixturevalue(name)
    words, xs, ys = _random_queries(spec, 100, seed=4)
    tol = 1e-10
    worst = max(F.check_bundle_invariance(spec, w, x, y, tol) for w, x, y in zip(words, xs, ys))
    assert worst <= 10 * tol
    if name == "affine":
        exact = max(F.check_bundle_invariance(spec, w, x, y, 1e-13) for w, x, y in zip(words, xs, ys))
        assert exact <= 1e-12


def test_bundle_invariance_tracks_tolerance(ex_b):
    words, xs, ys = _random_queries(ex_b, 50, seed=5)
    worst = [max(F.check_bundle_invariance(ex_b, w, x, y, tol) for w, x, y in zip(words, xs, ys))
             for tol in (1e-6, 1e-7, 1e-8)]
    assert worst[1] <= 0.5 * worst[0] and worst[2] <= 0.5 * worst[1]


@pytest.mark.parametrize("name", ["ex_a", "ex_b"])
def test_matrix_form(name, request):
    """``DF_{i_1} (1, u(i)) = f'_{i_1} (1, u(shift i, F_{i_1}))``."""
    spec = request.getfixturevalue(name)
    words, xs, ys = _random_queries(spec, 50, seed=6)
    for w, x, y in zip(words, xs, ys):
        m = spec.maps[w.symbol(0) - 1]
        fx, gx, gy = (float(m.eval(p, x, y)) for p in ("f_x", "g_x", "g_y"))
        x1, y1 = float(m.eval("f", x, y)), float(m.eval("g", x, y))
        lhs = (fx, gx + gy * F.bundle_u(spec, w, x, y, 1e-12))
        rhs = (fx, fx * F.bundle_u(spec, w.shift(1), x1, y1, 1e-12))
        assert lhs == pytest.approx(rhs, abs=1e-8)


# --------------------------------------------------------------------------
# leaves


def test_flat_leaf_is_horizontal(flat):
    leaf = F.leaf_solve(flat, TailedWord((1, 2)), (0.4, 0.3))
    assert np.all(leaf.y == 0.3)
    assert leaf.span == (0.0, 1.0)


def test_affine_leaf_is_a_line(affine):
    leaf = F.leaf_solve(affine, TailedWord((2,)), (0.5, 0.5))
    assert leaf.y[0] == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(leaf.y, 0.5 - (leaf.x - 0.5), atol=1e-9)
    assert leaf.x[np.searchsorted(leaf.x, 0.5)] == 0.5
    assert leaf(0.5) == 0.5


def test_leaf_nodes_and_anchor(ex_b):
    leaf = F.leaf_solve(ex_b, TailedWord((3,)), (0.4567, 0.2), step=1e-2)
    k = int(np.flatnonzero(leaf.x == 0.4567)[0])
    assert leaf.y[k] == 0.2
    assert leaf.x[0] == 0.0 and leaf.x[-1] == 1.0
    assert np.all(np.diff(leaf.x) <= 1e-2 + 1e-15) and np.all(np.diff(leaf.x) > 0)


def test_leaf_residual_small(ex_b):
    w = TailedWord((3, 1, 4))
    leaf = F.leaf_solve(ex_b, w, (0.3, 0.6), tol=1e-12)
    u = F.bundle_u_many(ex_b, [w] * leaf.x.size, leaf.x, leaf.y, 1e-12)
    np.testing.assert_allclose(leaf.slope, u, atol=1e-12)
    mid = 0.5 * (leaf.x[1:] + leaf.x[:-1])
    h = 1e-6
    deriv = (leaf(mid + h) - leaf(mid - h)) / (2 * h)
    u_mid = F.bundle_u_many(ex_b, [w] * mid.size, mid, leaf(mid), 1e-12)
    assert np.max(np.abs(deriv - u_mid)) <= 1e-6


def test_rk4_fourth_order(ex_a):
    w = TailedWord((2, 5, 1, 3), (1, 2))
    ends = [F.leaf_solve(ex_a, w, (0.7, 0.4), h, 1e-13, (0.0, 0.7)).y[0] for h in (1e-2, 5e-3, 2.5e-3)]
    e1, e2 = abs(ends[0] - ends[1]), abs(ends[1] - ends[2])
    assert e1 / e2 >= 12


def test_leaf_escape_guard(ex_a):
    with pytest.raises(F.LeafEscapeError, match="escaped"):
        F.leaf_solve(ex_a, TailedWord((2, 5, 1, 3), (1, 2)), (0.1, 0.5))


def test_leaf_step_validated(ex_b):
    with pytest.raises(ValueError):
        F.leaf_solve(ex_b, TailedWord((1,)), (0.5, 0.5), step=0.05)


def test_leaf_interpolation_outside_span(ex_a):
    leaf = F.leaf_solve(ex_a, TailedWord((1,)), (0.5, 0.5), x_span=(0.0, 0.5))
    assert leaf.span == (0.0, 0.5)
    with pytest.raises(ValueError):
        leaf(0.9)


def test_nonlinear_projection(affine, flat):
    j = TailedWord((2, 1), (2,))
    p = canonical_projection(affine, j)
    assert F.nonlinear_projection(affine, TailedWord((1,)), j) == pytest.approx(p[0] + p[1], abs=1e-9)
    q = canonical_projection(flat, j)
    assert F.nonlinear_projection(flat, TailedWord((1,)), j) == pytest.approx(q[1], abs=1e-12)
    same = TailedWord((2, 1, 2), (2,))
    assert canonical_projection(affine, same) == pytest.approx(p, abs=1e-12)
    assert F.nonlinear_projection(affine, TailedWord((1,)), same) == pytest.approx(
        F.nonlinear_projection(affine, TailedWord((1,)), j), abs=1e-9)


def test_leaf_invariance_affine_and_flat(affine, flat):
    w = TailedWord((2, 1))
    assert F.check_leaf_invariance(affine, w, (0.5, 0.5)) <= 1e-10
    assert F.check_leaf_invariance(flat, w, (0.5, 0.5)) == 0.0


def test_leaf_invariance_presets(ex_a, ex_b):
    rng = np.random.default_rng(7)
    for spec, left in ((ex_a, True), (ex_b, False)):
        for _ in range(3):
            w = TailedWord(tuple(int(s) for s in rng.integers(1, spec.n + 1, size=5)), (1,))
            x0, y0 = rng.random(2)
            span = (0.0, x0) if left else (0.0, 1.0)
            assert F.check_leaf_invariance(spec, w, (x0, y0), step=1e-3, tol=1e-8, x_span=span) <= 1e-5


# --------------------------------------------------------------------------
# Gronwall


def test_gronwall_affine(affine):
    r = F.check_gronwall(affine, TailedWord((1,)), (0.5, 0.2), (0.5, 0.6))
    assert r.passed and r.c_hat == 0.0
    assert r.ratio == pytest.approx(1.0, abs=1e-12)
    same = F.check_gronwall(affine, TailedWord((1,)), (0.5, 0.2), (0.5, 0.2))
    assert same.gap0 == 0.0 and same.gap_max == 0.0 and same.passed


def test_gronwall_presets(ex_a, ex_b):
    rng = np.random.default_rng(8)
    for spec in (ex_a, ex_b):
        for _ in range(4):
            w = TailedWord(tuple(int(s) for s in rng.integers(1, spec.n + 1, size=4)), (1,))
            x0 = 0.2 + 0.8 * rng.random()
            a0, a1 = (x0, rng.random()), (x0, rng.random())
            span = (0.0, x0) if spec is ex_a else (0.0, 1.0)
            r = F.check_gronwall(spec, w, a0, a1, x_span=span)
            assert r.passed, r
            if spec is ex_b:
                assert r.ratio <= math.exp(112 / 135) + 1e-3
