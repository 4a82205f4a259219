import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from svmpi.metrics import (
    coverage_probability, crossing_fraction, evaluate_interval, mpiw, pice, picp, quantile_rmse,
    repair_crossing, stable_std,
)


def test_picp_examples():
    assert picp([0, 0], [1, 1], [0.5, 0.7]) == 1.0
    assert picp([0], [1], [1.0]) == 1.0  # endpoints count
    assert picp([0, 0], [1, 1], [0.5, 2]) == 0.5


def test_mpiw_examples():
    assert mpiw([0, 0], [2, 4]) == 3.0
    assert mpiw([1, 2], [1, 2]) == 0.0
    assert mpiw(np.arange(5.0), np.arange(5.0) + 1.5) == 1.5


def test_pice_examples():
    assert pice(0.96, 0.95) == 0.0
    assert pice(0.90, 0.95) == pytest.approx(0.05)
    assert pice(0.95, 0.95) == 0.0


def test_coverage_probability_examples():
    assert coverage_probability([1, 1], [0, 0]) == 1.0
    assert coverage_probability([0, 0], [1, 1]) == 0.0
    assert coverage_probability([0, 0], [-1, 1]) == 0.5


def test_quantile_rmse_examples():
    assert quantile_rmse([1, 2], [1, 2]) == 0.0
    assert quantile_rmse([3, 4], [1, 2]) == pytest.approx(2.0)
    assert quantile_rmse([0, 0], [3, 4]) == pytest.approx(3.5355, abs=1e-4)


def test_length_mismatch():
    with pytest.raises(ValueError):
        picp([0, 0], [1], [0, 0])
    with pytest.raises(ValueError):
        mpiw([0], [1, 2])
    with pytest.raises(ValueError):
        quantile_rmse([0], [1, 2])


vec = arrays(np.float64, 10, elements=st.floats(-100, 100))


@settings(max_examples=100)
@given(vec, vec, vec)
def test_picp_plus_outside_is_one(a, b, y):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    outside = np.mean((y < lo) | (y > hi))
    assert picp(lo, hi, y) + outside == 1.0


@settings(max_examples=100)
@given(vec, st.floats(-50, 50))
def test_rmse_detects_translation(v, d):
    assert quantile_rmse(v + d, v) == pytest.approx(abs(d), abs=1e-9)


def test_crossing_repair():
    lo, hi = repair_crossing([0, 2], [1, 1])
    np.testing.assert_array_equal(lo, [0, 1])
    np.testing.assert_array_equal(hi, [1, 2])
    assert crossing_fraction([0, 2], [1, 1]) == 0.5


def test_evaluate_interval_bundle():
    y = np.array([0.5, 1.5, 3.0, -1.0])
    rep = evaluate_interval([0, 0, 0, 0], [2, 2, 2, 2], y, 0.95, truth_lower=[0, 0, 0, 0],
                            truth_upper=[2, 2, 2, 2], sparsity=(10.0, 20.0))
    assert rep.picp == 0.5 and rep.mpiw == 2.0
    assert rep.pice == pytest.approx(0.45)
    assert rep.cp_lower == 0.25 and rep.cp_upper == 0.75
    assert rep.rmse_lower == 0.0 and rep.sparsity_upper_pct == 20.0
    assert rep.pice == max(0.0, 0.95 - rep.picp)


def test_stable_std():
    assert stable_std([0.1 + 0.2] * 7) == 0.0
    assert stable_std([1.0, 3.0]) == pytest.approx(1.0)
