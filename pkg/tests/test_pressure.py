import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nct.ifs import SystemSpec, TriangularMap, distortion_constant, load_spec
from nct.pressure import (
    NonBracketingError, bias_bound, branch_of, phi_s, pressure_approx, pressure_values, root_s0, root_s0_detail,
)
from nct.symbolic import EnumerationCapError

S0_AFFINE = math.log(2) / -math.log(0.4)


def _three_map(a=0.2, b=0.45):
    return SystemSpec([
        TriangularMap.from_text(f"{a}*x+{k * 0.4}+t1", f"{b}*y+{k * 0.275}+t2") for k in range(3)
    ], name="three-map")


def test_phi_s_examples(affine, ex_a):
    assert phi_s(ex_a, (3, 1, 7), (0.2, 0.9), 0.0) == 1.0
    assert phi_s(affine, (1, 2), (0.5, 0.5), 1.5) == pytest.approx(0.4**2 * 0.3, rel=1e-14)
    assert phi_s(affine, (1, 2), (0.5, 0.5), 1.5) == pytest.approx(0.048, rel=1e-14)
    assert phi_s(affine, (1, 2), (0.5, 0.5), 3.0) == pytest.approx((0.16 * 0.09) ** 1.5, rel=1e-14)


@given(st.lists(st.integers(1, 13), min_size=1, max_size=5).map(tuple), st.sampled_from([1.0, 2.0]))
def test_phi_s_continuous_at_breakpoints(w, s):
    spec = load_spec("example-b")
    p = (0.3, 0.6)
    lo, at, hi = (phi_s(spec, w, p, v) for v in (s - 1e-12, s, s + 1e-12))
    assert abs(lo - at) <= 1e-9 * at and abs(hi - at) <= 1e-9 * at


def test_branch_of():
    assert [branch_of(s) for s in (0, 0.5, 1, 1.5, 2, 7)] == [1, 1, 1, 2, 2, 3]
    with pytest.raises(ValueError):
        branch_of(-0.1)


@pytest.mark.parametrize("name", ["affine-test", "example-b"])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_pressure_at_zero_is_log_n(name, n):
    spec = load_spec(name)
    assert abs(pressure_approx(spec, 0.0, n).value - math.log(spec.n)) <= 1e-12


@pytest.mark.parametrize("n", [1, 3, 7, 12])
def test_affine_pressure_closed_form(affine, n):
    assert pressure_approx(affine, 1.0, n).value == pytest.approx(math.log(2) + math.log(0.4), abs=1e-12)
    assert pressure_approx(affine, 1.0, n).value == pytest.approx(-0.223144, abs=1e-6)
    assert pressure_approx(affine, 1.5, n).value == pytest.approx(math.log(2) + math.log(0.4) + 0.5 * math.log(0.3),
                                                                  abs=1e-12)
    assert pressure_approx(affine, 3.0, n).value == pytest.approx(math.log(2) + 1.5 * math.log(0.12), abs=1e-12)


def test_pressure_strictly_decreasing_and_continuous(ex_b):
    grid = np.linspace(0, 3, 50)
    vals = pressure_values(ex_b, grid, 3)
    assert all(a > b for a, b in zip(vals, vals[1:]))
    for s in (1.0, 2.0):
        left, right = pressure_values(ex_b, [s, s], 3, branches=[branch_of(s), branch_of(s) + 1])
        assert abs(left - right) <= 1e-9
    assert pressure_approx(ex_b, 0.5, 3).value > pressure_approx(ex_b, 1.5, 3).value


def test_pressure_independent_of_chunking_and_workers(ex_b):
    ref = pressure_approx(ex_b, 1.3, 4).value
    assert pressure_approx(ex_b, 1.3, 4, chunk_size=97).value == pytest.approx(ref, abs=1e-13)
    a = pressure_approx(ex_b, 1.3, 4, chunk_size=97, workers=1).value
    b = pressure_approx(ex_b, 1.3, 4, chunk_size=97, workers=3).value
    assert a == b


def test_pressure_cap(ex_a):
    with pytest.raises(EnumerationCapError):
        pressure_approx(ex_a, 1.0, 3, cap=1000)


def test_root_affine(affine):
    assert root_s0(affine, 10, 1e-4) == pytest.approx(S0_AFFINE, abs=1e-4)
    assert S0_AFFINE == pytest.approx(0.756470, abs=1e-6)
    assert root_s0(affine, 5, 1e-10, base=(0, 0)) == pytest.approx(root_s0(affine, 5, 1e-10), abs=1e-10)


def test_root_three_map_branch_two():
    spec = _three_map()
    want = 1 + (math.log(3) + math.log(0.45)) / -math.log(0.2)
    assert want == pytest.approx(1.186465, abs=1e-6)
    assert root_s0(spec, 4, 1e-10) == pytest.approx(want, abs=1e-9)


def test_root_branch_three():
    spec = SystemSpec([TriangularMap.from_text(f"0.45*x+{k * 0.11}+t1", f"0.46*y+{k * 0.108}+t2")
                       for k in range(6)])
    want = 2 * math.log(6) / -math.log(0.45 * 0.46)
    assert want > 2
    assert root_s0(spec, 2, 1e-10) == pytest.approx(want, abs=1e-9)


def test_root_bracket_width(ex_b):
    r = root_s0_detail(ex_b, 3, 1e-9)
    assert r.width <= 1e-9
    assert pressure_approx(ex_b, r.lower, 3).value >= -1e-14
    assert pressure_approx(ex_b, r.upper, 3).value <= 1e-14
    warm = root_s0_detail(ex_b, 3, 1e-9, guess=r.s0)
    assert warm.s0 == pytest.approx(r.s0, abs=1e-9)


def test_root_errors(affine):
    with pytest.raises(ValueError):
        root_s0(affine, 3, 0.0)


def test_non_bracketing_is_a_value_error():
    assert issubclass(NonBracketingError, ValueError)


def test_root_depth_consistency(ex_b):
    n = 2
    c = distortion_constant(ex_b, 2 * n)
    s_n, s_2n = root_s0(ex_b, n, 1e-10), root_s0(ex_b, 2 * n, 1e-10)
    assert abs(s_n - s_2n) <= 2 * math.log(c) / n
    assert bias_bound(ex_b, n) >= 0
