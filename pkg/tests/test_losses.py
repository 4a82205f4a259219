import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from svmpi.losses import TubeParams, cwc, pinball, tube_branch, tube_loss

levels = st.floats(0.001, 0.999)
reals = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.mark.parametrize("q,u,expected", [(0.5, 2.0, 1.0), (0.95, -1.0, 0.05), (0.1, 3.0, 0.3)])
def test_pinball_examples(q, u, expected):
    assert pinball(q, u) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5])
def test_pinball_rejects_levels(q):
    with pytest.raises(ValueError):
        pinball(q, 1.0)


@settings(max_examples=200)
@given(levels, reals, reals)
def test_pinball_convex(q, ua, ub):
    mid = pinball(q, 0.5 * (ua + ub))
    assert mid <= 0.5 * (pinball(q, ua) + pinball(q, ub)) + 1e-9 * (1 + abs(ua) + abs(ub))


@settings(max_examples=200)
# subnormal u can underflow to an exact zero loss, e.g. 0.5 * 5e-324 == 0.0
@given(levels, st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False))
def test_pinball_nonnegative_zero_only_at_origin(q, u):
    v = pinball(q, u)
    assert v >= 0
    assert (v == 0) == (u == 0)


TUBE = TubeParams(coverage_target=0.9, r=0.5)


@pytest.mark.parametrize("u2,u1,expected,branch", [
    (2.0, 3.0, 1.8, 1),
    (-1.0, 3.0, 0.1, 2),
    (-3.0, -2.0, 1.8, 4),
])
def test_tube_examples(u2, u1, expected, branch):
    assert tube_loss(TUBE, u2, u1) == pytest.approx(expected, abs=1e-12)
    assert tube_branch(TUBE, u2, u1) == branch


def test_tube_third_branch():
    # r*u2 + (1-r)*u1 = -1.5 + 0.5 < 0
    assert tube_branch(TUBE, -3.0, 1.0) == 3
    assert tube_loss(TUBE, -3.0, 1.0) == pytest.approx(0.1 * 1.0)


def test_tube_zero_boundary_uses_printed_conditions():
    # u2 = 0 belongs to the u2 <= 0 branches; both neighbouring pieces give 0
    assert tube_branch(TUBE, 0.0, 1.0) == 2
    assert tube_loss(TUBE, 0.0, 1.0) == 0.0


def test_tube_rejects_crossed_pair():
    with pytest.raises(ValueError):
        tube_loss(TUBE, 1.0, 0.5)


@pytest.mark.parametrize("kw", [dict(coverage_target=1.0), dict(r=0.0), dict(r=1.0),
                                dict(delta=-1.0), dict(lam=-1.0)])
def test_tube_params_validation(kw):
    with pytest.raises(ValueError):
        TubeParams(**kw)


@settings(max_examples=300)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), reals, st.floats(0, 1e3))
def test_tube_nonnegative(cov, r, u2, gap):
    p = TubeParams(coverage_target=cov, r=r)
    assert tube_loss(p, u2, u2 + gap) >= 0


@settings(max_examples=200)
@given(st.floats(0.01, 0.99), st.floats(0.01, 100))
def test_tube_continuous_across_movement_boundary(cov, s):
    # boundary 0.5*u2 + 0.5*u1 = 0 with u2 = -s, u1 = s, approached from both sides
    p = TubeParams(coverage_target=cov, r=0.5)
    eps = 1e-12 * s
    above = tube_loss(p, -s, s + eps)
    below = tube_loss(p, -s, s - eps)
    assert abs(above - below) <= 1e-9 * max(1.0, s)


def test_cwc_examples():
    assert cwc(2.0, 0.96, 4.0, coverage_target=0.95) == pytest.approx(0.5)
    assert cwc(2.0, 0.95, 4.0, coverage_target=0.95) == pytest.approx(0.5)
    assert cwc(2.0, 0.90, 4.0, eta=50.0, coverage_target=0.95) == pytest.approx(0.5 * (1 + math.exp(2.5)), rel=1e-12)
    assert cwc(2.0, 0.90, 4.0, eta=50.0, coverage_target=0.95) == pytest.approx(6.5912, abs=1e-4)


def test_cwc_rejects_bad_range():
    with pytest.raises(ValueError):
        cwc(1.0, 0.9, 0.0)


@settings(max_examples=100)
@given(st.floats(0.0, 0.94), st.floats(0.0, 0.94))
def test_cwc_decreases_with_coverage_below_target(p1, p2):
    assume(abs(p1 - p2) > 1e-6)
    lo, hi = sorted((p1, p2))
    assert cwc(2.0, hi, 4.0, coverage_target=0.95) < cwc(2.0, lo, 4.0, coverage_target=0.95)
