import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from svmpi.forecast import (
    ForecastConfig, TimeSeries, chrono_split, forecast_pi, lag_embed, read_series,
)

SMALL = ForecastConfig(c_grid=(0.25, 1.0, 4.0, 16.0), width_grid=(0.125, 0.5, 2.0, 8.0))


def seasonal(seed, n=600):
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    t = np.arange(n)
    return TimeSeries(10 + 3 * np.sin(2 * np.pi * t / 12) + rng.normal(0, 0.5, n))


def test_lag_embed_example():
    emb = lag_embed(TimeSeries([1.0, 2.0, 3.0, 4.0]), 2)
    np.testing.assert_array_equal(emb.windows, [[1, 2], [2, 3]])
    np.testing.assert_array_equal(emb.targets, [3, 4])


def test_lag_embed_constant_and_boundary():
    emb = lag_embed(TimeSeries(np.full(6, 2.5)), 3)
    assert np.all(emb.windows == 2.5) and np.all(emb.targets == 2.5)
    one = lag_embed(TimeSeries(np.arange(5.0)), 4)
    assert one.windows.shape == (1, 4)
    with pytest.raises(ValueError):
        lag_embed(TimeSeries(np.arange(5.0)), 5)


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=40), st.integers(1, 10))
def test_embedding_round_trip(values, p):
    series = TimeSeries(values)
    if p >= len(series):
        return
    emb = lag_embed(series, p)
    assert emb.windows.shape[0] == len(series) - p
    rebuilt = np.concatenate([emb.windows[0], emb.targets])
    np.testing.assert_array_equal(rebuilt, series.values)
    for j in range(emb.windows.shape[0]):
        np.testing.assert_array_equal(emb.windows[j], series.values[j:j + p])


def test_chrono_split_examples():
    s = chrono_split(100, 0.7, 0.1)
    assert (s.n_train, s.n_val, s.n_test) == (63, 7, 30)
    with pytest.raises(ValueError):
        chrono_split(10, 0.7, 0.0)
    s = chrono_split(10, 0.7, 0.0, allow_empty_val=True)
    assert (s.n_train, s.n_val, s.n_test) == (7, 0, 3)


def test_series_validation():
    with pytest.raises(ValueError):
        TimeSeries([1.0])
    with pytest.raises(ValueError):
        TimeSeries([1.0, 2.0], timestamps=[2, 1])


def test_read_series_variants(tmp_path):
    plain = tmp_path / "a.csv"
    plain.write_text("1.5\n2.5\n3.5\n")
    np.testing.assert_array_equal(read_series(plain).values, [1.5, 2.5, 3.5])
    named = tmp_path / "b.csv"
    named.write_text("date,sales,other\n2020-01-01,1,9\n2020-01-02,2,8\n2020-01-03,4,7\n")
    s = read_series(named, header=True, column="sales", time_column="date")
    np.testing.assert_array_equal(s.values, [1, 2, 4])
    assert len(s.timestamps) == 3
    with pytest.raises(ValueError, match="unknown value column"):
        read_series(named, header=True, column="nope")
    bad = tmp_path / "c.csv"
    bad.write_text("1\n2\n1\n")
    with pytest.raises(ValueError):
        read_series(bad, column=0, time_column=0)


def test_no_leakage_and_report():
    r = forecast_pi(seasonal(0, 200), 0.95, "svqr", ForecastConfig(lags=(4,), c_grid=(1.0,), width_grid=(0.5,)))
    assert r.split.n_fit + r.split.n_test == 200
    assert r.index.min() >= r.split.n_fit
    # every training window's values come from before the first test target
    assert r.index.min() - r.lag >= 0
    assert len(r.rows()) == r.split.n_test
    assert np.all(r.lower <= r.upper)


def test_split_and_embedding_are_method_agnostic():
    cfg = ForecastConfig(lags=(4,), c_grid=(1.0,), width_grid=(0.5,))
    series = seasonal(1, 150)
    hashes = {forecast_pi(series, 0.95, m, cfg).split_hash for m in ("svqr", "ssvqr", "lssvr")}
    assert len(hashes) == 1


def test_trend_interval_width_vanishes_with_c():
    series = TimeSeries(0.5 * np.arange(100.0) + 3)
    widths = []
    for c in (1e2, 1e4, 1e6):
        cfg = ForecastConfig(lags=(2,), c_grid=(c,), width_grid=(1.0,), family="linear")
        widths.append(forecast_pi(series, 0.95, "lssvr", cfg).report.mpiw)
    assert widths[0] > widths[1] > widths[2]
    assert widths[2] < 1e-4


@pytest.mark.xfail(strict=True, reason="ridge bias on the extrapolated trend exceeds 1.96 sigma-hat; "
                                       "both shrink like 1/C, so the ratio never falls below one")
def test_trend_full_coverage():
    series = TimeSeries(0.5 * np.arange(100.0) + 3)
    cfg = ForecastConfig(lags=(2,), c_grid=(1e6,), width_grid=(1.0,), family="linear")
    assert forecast_pi(series, 0.95, "lssvr", cfg).report.picp == 1.0


@pytest.mark.slow
def test_seasonal_series_coverage_and_sparsity():
    results = [forecast_pi(seasonal(s), 0.95, "ssvqr", SMALL) for s in range(5)]
    picps = [r.report.picp for r in results]
    assert 0.90 <= np.median(picps) <= 0.99
    for r in results:
        assert r.report.sparsity_lower_pct > 0 and r.report.sparsity_upper_pct > 0


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="validation tail of 42 windows; tuning by PICE then MPIW "
                                       "picks intervals that under-cover on two of the five seeds")
def test_seasonal_series_coverage_every_seed():
    for s in range(5):
        assert 0.90 <= forecast_pi(seasonal(s), 0.95, "ssvqr", SMALL).report.picp <= 0.99
