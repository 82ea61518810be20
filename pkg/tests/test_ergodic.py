import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nct import expr as E
from nct.ergodic import default_depth, entropy, lyapunov_dimension, lyapunov_exponents, summarize
from nct.ifs import canonical_projection
from nct.pressure import root_s0
from nct.symbolic import BernoulliWeights, TailedWord

CHI1_AFFINE = -math.log(0.4)
CHI2_AFFINE = -math.log(0.3)


def test_entropy_examples():
    assert entropy(BernoulliWeights.uniform(24)) == pytest.approx(math.log(24), rel=1e-15)
    assert entropy(BernoulliWeights((1.0, 0.0, 0.0))) == 0.0
    assert entropy(BernoulliWeights((0.3, 0.7))) == pytest.approx(0.610864, abs=1e-6)


def test_lyapunov_dimension_examples():
    assert lyapunov_dimension(math.log(2), CHI1_AFFINE, CHI2_AFFINE) == pytest.approx(0.756470, abs=1e-6)
    assert lyapunov_dimension(math.log(4), CHI1_AFFINE, CHI2_AFFINE) == pytest.approx(1 + (math.log(4) - CHI1_AFFINE) / CHI2_AFFINE, rel=1e-15)
    assert lyapunov_dimension(math.log(4), CHI1_AFFINE, CHI2_AFFINE) == pytest.approx(1.390377, abs=1e-6)
    assert lyapunov_dimension(1e6, CHI1_AFFINE, CHI2_AFFINE) == 2.0
    with pytest.raises(ValueError):
        lyapunov_dimension(1.0, 0.0, 1.0)


exps = st.floats(0.01, 10)


@given(st.floats(0, 20), st.floats(0, 20), exps, exps)
def test_dimension_monotone_and_bounded(h1, h2, a, b):
    chi1, chi2 = min(a, b), max(a, b)
    lo, hi = sorted((h1, h2))
    d_lo, d_hi = lyapunov_dimension(lo, chi1, chi2), lyapunov_dimension(hi, chi1, chi2)
    assert 0 <= d_lo <= d_hi <= 2


@pytest.mark.parametrize("p", [(0.5, 0.5), (0.2, 0.8)])
def test_affine_exponents_exact(affine, p):
    chi1, chi2, (se1, se2) = lyapunov_exponents(affine, BernoulliWeights(p), samples=5000, seed=3)
    assert chi1 == pytest.approx(CHI1_AFFINE, rel=1e-15)
    assert chi2 == pytest.approx(CHI2_AFFINE, rel=1e-15)
    assert se1 == 0.0 and se2 == 0.0


def test_affine_dimension_equals_root(affine):
    s = summarize(affine, samples=1000)
    assert s.dimL == pytest.approx(root_s0(affine, 8, 1e-10), abs=1e-3)
    assert s.h == pytest.approx(math.log(2))


def test_example_a_chi2_is_log_25(ex_a):
    _, chi2, (_, se2) = lyapunov_exponents(ex_a, BernoulliWeights.uniform(24), samples=4000)
    assert chi2 == pytest.approx(math.log(25), rel=1e-15)
    assert se2 == 0.0


def test_default_depth(ex_a, affine):
    for spec in (ex_a, affine):
        n = default_depth(spec)
        assert spec.rho**n < 1e-8 <= spec.rho ** (n - 1)


def test_chi1_le_chi2(ex_b, ex_a):
    for spec in (ex_a, ex_b):
        s = summarize(spec, samples=20000)
        assert 0 < s.chi1 <= s.chi2 + 4 * s.se_chi2


def test_stderr_shrinks_like_root_two(ex_b):
    p = BernoulliWeights.uniform(13)
    se = [lyapunov_exponents(ex_b, p, samples=n, seed=11)[2][0] for n in (1 << 16, 1 << 17)]
    assert se[1] / se[0] == pytest.approx(1 / math.sqrt(2), rel=0.1)


def test_seeded_and_worker_independent(ex_b):
    p = BernoulliWeights.uniform(13)
    a = lyapunov_exponents(ex_b, p, samples=70000, seed=4)
    b = lyapunov_exponents(ex_b, p, samples=70000, seed=4, workers=3)
    assert a == b
    assert lyapunov_exponents(ex_b, p, samples=70000, seed=5) != a


def test_chi1_matches_scalar_oracle(ex_b):
    """Independent estimate through the scalar evaluator and ``canonical_projection``."""
    rng = np.random.default_rng(99)
    vals = []
    for _ in range(1500):
        w = tuple(int(s) + 1 for s in rng.integers(13, size=20))
        x, y = canonical_projection(ex_b, TailedWord(w[1:]), 1e-12)
        m = ex_b.maps[w[0] - 1]
        vals.append(-math.log(abs(E.evaluate(m.parts["g_y"], x, y, m.t1, m.t2))))
    oracle, se_o = np.mean(vals), np.std(vals, ddof=1) / math.sqrt(len(vals))
    chi1, _, (se, _) = lyapunov_exponents(ex_b, BernoulliWeights.uniform(13), samples=50000)
    assert abs(chi1 - oracle) <= 4 * math.hypot(se, se_o)


def test_weights_must_match(ex_b):
    with pytest.raises(ValueError):
        lyapunov_exponents(ex_b, BernoulliWeights.uniform(3), samples=10)
