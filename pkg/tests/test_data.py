import numpy as np
import pytest
from scipy import stats

from svmpi.data import (
    AD_IDS, Dataset, generate_ad, generate_sparse_linear, holdout_split, mean_function,
    noise_quantile, read_csv, sample_noise, train_test_split, true_quantile, write_dataset,
)


def test_mean_function_at_zero():
    assert mean_function(0.0) == 1.0


def test_generate_is_deterministic():
    for ad in AD_IDS:
        a, b = generate_ad(ad, 50, seed=7), generate_ad(ad, 50, seed=7)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.targets, b.targets)
    c = generate_ad("AD1", 50, seed=8)
    assert not np.array_equal(c.targets, generate_ad("AD1", 50, seed=7).targets)


def test_inputs_are_uniform_on_the_stated_range():
    d = generate_ad("AD3", 20_000, seed=1)
    assert d.inputs.min() >= -5 and d.inputs.max() <= 5
    assert stats.kstest(d.inputs[:, 0], stats.uniform(-5, 10).cdf).pvalue > 1e-3


def test_ad2_noise_mean_is_three():
    d = generate_ad("AD2", 100_000, seed=0)
    noise = d.targets - mean_function(d.inputs[:, 0])
    assert abs(noise.mean() - 3.0) <= 0.05


@pytest.mark.parametrize("ad", AD_IDS)
def test_oracle_band_covers_95_percent(ad):
    d = generate_ad(ad, 100_000, seed=123)
    lo = true_quantile(ad, 0.025, d.inputs)
    hi = true_quantile(ad, 0.975, d.inputs)
    cover = np.mean((lo <= d.targets) & (d.targets <= hi))
    assert abs(cover - 0.95) <= 0.005


def test_true_quantile_examples():
    assert true_quantile("AD5", 0.5, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert true_quantile("AD6", 0.975, 0.0) == pytest.approx(4.8, abs=1e-12)
    assert true_quantile("AD1", 0.975, 0.0) == pytest.approx(1 + 1.959964 * 0.6, abs=1e-6)
    assert true_quantile("AD1", 0.975, 0.0, variance=True) == pytest.approx(1 + 1.959964 * np.sqrt(0.6), abs=1e-6)


@pytest.mark.parametrize("ad", AD_IDS)
def test_true_quantile_monotone_in_level(ad):
    levels = np.linspace(0.01, 0.99, 50)
    values = [true_quantile(ad, q, 0.7) for q in levels]
    assert np.all(np.diff(values) > 0)


def test_chi2_quantile_inverts_cdf():
    for q in (0.025, 0.5, 0.975):
        assert stats.chi2.cdf(noise_quantile("AD2", q), 3) == pytest.approx(q, abs=1e-10)


def test_variance_flag_changes_normal_scale_only():
    rng1, rng2 = np.random.default_rng(0), np.random.default_rng(0)
    a = sample_noise("AD4", 5, rng1)
    b = sample_noise("AD4", 5, rng2, variance=True)
    np.testing.assert_allclose(b, a / 0.8 * np.sqrt(0.8))


def test_unknown_generator():
    with pytest.raises(ValueError):
        generate_ad("AD7", 3)
    with pytest.raises(ValueError):
        true_quantile("AD0", 0.5, 0.0)


def test_sparse_linear_shape_and_relevance():
    d = generate_sparse_linear(2000, n_features=20, n_relevant=5, seed=0)
    assert d.inputs.shape == (2000, 20)
    coef, *_ = np.linalg.lstsq(d.inputs, d.targets, rcond=None)
    np.testing.assert_allclose(coef[:5], [3, -2, 1.5, -1, 0.5], atol=0.1)
    assert np.max(np.abs(coef[5:])) < 0.1


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 1)), np.zeros(2))
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 0)), np.zeros(3))


def test_splits():
    d = generate_ad("AD1", 20, seed=0)
    tr, te = train_test_split(d, 15)
    assert len(tr) == 15 and len(te) == 5
    fit, val = holdout_split(d, 0.1, seed=3)
    assert len(fit) == 18 and len(val) == 2
    fit2, val2 = holdout_split(d, 0.1, seed=3)
    np.testing.assert_array_equal(val.targets, val2.targets)
    fit_c, val_c = holdout_split(d, 0.1, chronological=True)
    np.testing.assert_array_equal(val_c.targets, d.targets[-2:])


def test_csv_roundtrip(tmp_path):
    d = generate_ad("AD2", 30, seed=4)
    path = tmp_path / "d.csv"
    write_dataset(path, d)
    back = read_csv(path)
    np.testing.assert_array_equal(back.inputs, d.inputs)
    np.testing.assert_array_equal(back.targets, d.targets)
    assert back.column_names == ["x"] and back.target_name == "y"


def test_csv_target_selection_and_headerless(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("1,10,100\n2,20,200\n3,30,300\n")
    d = read_csv(path, header=False)
    np.testing.assert_array_equal(d.targets, [100, 200, 300])
    d0 = read_csv(path, header=False, target=0)
    np.testing.assert_array_equal(d0.targets, [1, 2, 3])
    np.testing.assert_array_equal(d0.inputs, [[10, 100], [20, 200], [30, 300]])


def test_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,x\n")
    with pytest.raises(ValueError, match="non-numeric"):
        read_csv(bad)
    named = tmp_path / "n.csv"
    named.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="unknown target"):
        read_csv(named, target="zz")
