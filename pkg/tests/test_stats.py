from __future__ import annotations

import numpy as np
import pytest
import scipy.stats
from statsmodels.stats.weightstats import ttest_ind

from teleopsim.stats import (
    DegenerateSampleError,
    bin_conditional_stats,
    cohens_d,
    f_sf,
    levene_test,
    regularized_incomplete_beta,
    t_sf_two_sided,
    welch_t,
)


def random_dataset(rng):
    nx = int(rng.integers(5, 200))
    ny = int(rng.integers(5, 200))
    loc = rng.normal(scale=3.0, size=2)
    scale = rng.uniform(0.5, 4.0, size=2)
    return rng.normal(loc[0], scale[0], nx), rng.normal(loc[1], scale[1], ny)


class TestSpecialFunctions:
    def test_incomplete_beta_against_scipy(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            a = rng.uniform(0.3, 60.0)
            b = rng.uniform(0.3, 60.0)
            x = rng.uniform(0.0, 1.0)
            ours = regularized_incomplete_beta(x, a, b)
            ref = scipy.stats.beta.cdf(x, a, b)
            assert abs(ours - ref) < 1e-10

    def test_t_survival_against_scipy(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            t = rng.normal(scale=3.0)
            dof = rng.uniform(1.0, 300.0)
            ours = t_sf_two_sided(t, dof)
            ref = 2.0 * scipy.stats.t.sf(abs(t), dof)
            assert abs(ours - ref) < 1e-10

    def test_f_survival_against_scipy(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            w = rng.uniform(0.0, 20.0)
            d1 = rng.uniform(1.0, 10.0)
            d2 = rng.uniform(2.0, 400.0)
            ours = f_sf(w, d1, d2)
            ref = scipy.stats.f.sf(w, d1, d2)
            assert abs(ours - ref) < 1e-10


class TestWelch:
    def test_identical_samples(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        res = welch_t(x, x.copy())
        assert res.t == 0.0
        assert abs(res.p - 1.0) < 1e-12

    def test_large_shift_gives_negative_t(self):
        x = np.array([1.0, 2.0, 3.0])
        res = welch_t(x, x + 10.0)
        assert res.t < -5.0
        assert res.p < 0.01

    def test_antisymmetry_exact(self):
        rng = np.random.default_rng(10)
        x, y = random_dataset(rng)
        a = welch_t(x, y)
        b = welch_t(y, x)
        assert a.t == -b.t
        assert a.p == b.p
        assert a.dof == b.dof

    def test_oracle_equivalence_100_datasets(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            x, y = random_dataset(rng)
            ours = welch_t(x, y)
            t_ref, p_ref = scipy.stats.ttest_ind(x, y, equal_var=False)
            _, p_sm, dof_sm = ttest_ind(x, y, usevar="unequal")
            assert abs(ours.t - t_ref) < 1e-6
            assert abs(ours.p - p_ref) < 1e-3
            assert abs(ours.dof - dof_sm) < 1e-6

    def test_degenerate_signaled(self):
        with pytest.raises(DegenerateSampleError):
            welch_t([1.0, 1.0, 1.0], [2.0, 2.0])

    def test_too_small_sample(self):
        with pytest.raises(ValueError):
            welch_t([1.0], [1.0, 2.0])


class TestCohensD:
    def test_identical_samples_zero(self):
        x = np.array([1.0, 2.0, 3.0])
        res = cohens_d(x, x.copy())
        assert res.d == 0.0
        assert res.ci_low < 0.0 < res.ci_high

    def test_gap_equal_pooled_sd_gives_one(self):
        rng = np.random.default_rng(12)
        x = rng.normal(0.0, 1.0, 2000)
        y = x.copy()  # identical spread, pooled sd = sd(x)
        pooled = np.sqrt(np.var(x, ddof=1))
        res = cohens_d(x + pooled, y)
        assert abs(res.d - 1.0) < 1e-9

    def test_oracle_equivalence_100_datasets(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            x, y = random_dataset(rng)
            ours = cohens_d(x, y)
            # independent computation of the pooled-sd effect size
            nx, ny = len(x), len(y)
            s = np.sqrt(((nx - 1) * np.var(x, ddof=1) + (ny - 1) * np.var(y, ddof=1)) / (nx + ny - 2))
            ref = (np.mean(x) - np.mean(y)) / s
            assert abs(ours.d - ref) < 1e-3
            assert ours.ci_low < ours.d < ours.ci_high

    def test_degenerate_signaled(self):
        with pytest.raises(DegenerateSampleError):
            cohens_d([1.0, 1.0], [1.0, 1.0])


class TestLevene:
    def test_identical_samples_zero(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        res = levene_test(x, x.copy())
        assert res.w == 0.0

    def test_scaled_sample_detected(self):
        rng = np.random.default_rng(14)
        x = rng.normal(0.0, 1.0, 100)
        res = levene_test(x, x * 10.0)
        assert res.p < 0.01

    def test_permutation_invariance(self):
        rng = np.random.default_rng(15)
        x, y = random_dataset(rng)
        a = levene_test(x, y)
        b = levene_test(rng.permutation(x), rng.permutation(y))
        assert abs(a.w - b.w) < 1e-9
        assert abs(a.p - b.p) < 1e-9

    def test_oracle_equivalence_100_datasets(self):
        rng = np.random.default_rng(16)
        for _ in range(100):
            x, y = random_dataset(rng)
            ours = levene_test(x, y)
            w_ref, p_ref = scipy.stats.levene(x, y, center="median")
            assert abs(ours.w - w_ref) < 1e-6
            assert abs(ours.p - p_ref) < 1e-3


class TestBinning:
    def test_default_bin_count(self):
        bins = bin_conditional_stats([0.001], [1.0], 0.0, 0.007, 0.0001)
        assert len(bins.centers) == 70

    def test_single_record_flagged(self):
        bins = bin_conditional_stats([0.00035], [2.5], 0.0, 0.007, 0.0001)
        idx = 3
        assert bins.counts[idx] == 1
        assert bins.means[idx] == 2.5
        assert np.isnan(bins.variances[idx])
        assert bins.single[idx]
        assert bins.empty.sum() == 69

    def test_linear_relation_oracle(self):
        rng = np.random.default_rng(17)
        b = rng.uniform(0.0, 0.007, 20_000)
        a = 100.0 * b
        bins = bin_conditional_stats(b, a, 0.0, 0.007, 0.0001)
        for center, count, mean in zip(bins.centers, bins.counts, bins.means):
            if count > 0:
                assert abs(mean - 100.0 * center) <= 100.0 * 0.00005 + 1e-12

    def test_mass_conservation(self):
        rng = np.random.default_rng(18)
        b = rng.uniform(-0.001, 0.009, 5000)
        a = rng.normal(size=5000)
        bins = bin_conditional_stats(b, a, 0.0, 0.007, 0.0001)
        in_range = (b >= 0.0) & (b <= 0.007)
        total = float(a[in_range].sum())
        binned = float(np.nansum(bins.means * bins.counts))
        assert abs(total - binned) < 1e-9
        assert bins.counts.sum() == int(in_range.sum())

    def test_edges_left_closed_right_open_last_closed(self):
        bins = bin_conditional_stats([0.0, 0.0001, 0.007], [1.0, 2.0, 3.0], 0.0, 0.007, 0.0001)
        assert bins.counts[0] == 1  # 0.0 lands in the first bin
        assert bins.counts[1] == 1  # left edge of the second bin
        assert bins.counts[-1] == 1  # b_max folds into the last bin

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            bin_conditional_stats([0.0], [1.0], 0.0, 0.007, 0.0)
        with pytest.raises(ValueError):
            bin_conditional_stats([0.0], [1.0, 2.0], 0.0, 0.007, 0.0001)
