import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from riskcap.sampling import (ISSpec, log_weight, mean_shift,
                              pilot_monotonicity_profile, validate_profile,
                              variance_criterion)


def test_scalar_put_direction():
    # oracle: standard-normal quantile (scipy), frozen
    spec = mean_shift(np.array([[1.0]]), [-1.0], 0.995)
    assert spec.mean_shift[0] == pytest.approx(-2.5758293035489004, abs=1e-9)
    assert spec.mean_shift[0] == pytest.approx(-norm.ppf(0.995), abs=1e-9)


def test_zero_profile_gives_identity():
    spec = mean_shift(np.eye(3), [0.0, 0.0, 0.0], 0.99)
    assert spec.is_identity
    assert np.all(spec.mean_shift == 0.0)


def test_two_dim_normalization():
    spec = mean_shift(np.eye(2), [1.0, 1.0], 0.99)
    expected = norm.ppf(0.99) / math.sqrt(2.0)
    np.testing.assert_allclose(spec.mean_shift, [expected, expected], atol=1e-9)


def test_shift_norm_is_quantile():
    rng = np.random.default_rng(0)
    for alpha in (0.9, 0.99, 0.995):
        a = rng.normal(size=(6, 4))
        v = rng.choice([-1.0, 0.0, 1.0], size=6)
        spec = mean_shift(a, v, alpha)
        if not spec.is_identity:
            assert np.linalg.norm(spec.mean_shift) == pytest.approx(
                abs(norm.ppf(alpha)), abs=1e-9)


def test_profile_validation():
    with pytest.raises(ValueError):
        validate_profile([0.5, 1.0])
    with pytest.raises(ValueError):
        mean_shift(np.eye(2), [1.0, 2.0], 0.99)
    with pytest.raises(ValueError):
        mean_shift(np.eye(2), [1.0], 0.99)


def test_log_weight_identity_measure():
    spec = ISSpec.identity(3)
    z = np.random.default_rng(1).normal(size=(50, 3))
    assert np.all(log_weight(z, spec) == 0.0)


def test_log_weight_at_mode():
    m = np.array([0.7, -1.1])
    spec = ISSpec(m)
    assert log_weight(m, spec) == pytest.approx(-0.5 * float(m @ m), rel=1e-14)


def test_log_weight_matches_density_ratio():
    # direct Gaussian density-ratio oracle
    rng = np.random.default_rng(11)
    m = np.array([1.3, -0.4, 0.9])
    spec = ISSpec(m)
    z = rng.normal(size=(200, 3)) + m

    def logpdf(x, mean):
        diff = x - mean
        return -0.5 * np.sum(diff * diff, axis=-1) - 1.5 * math.log(2 * math.pi)

    expected = logpdf(z, np.zeros(3)) - logpdf(z, m)
    np.testing.assert_allclose(np.exp(log_weight(z, spec)), np.exp(expected), rtol=1e-12)


def test_unbiasedness_of_weighted_means():
    # bounded test functions under the shifted measure reproduce plain means
    rng = np.random.default_rng(23)
    n = 100_000
    spec = ISSpec(np.array([1.7, -0.8]))
    z_shift = rng.standard_normal((n, 2)) + spec.mean_shift
    w = np.exp(log_weight(z_shift, spec))
    z_plain = rng.standard_normal((n, 2))
    for xi in (lambda z: np.cos(z[:, 0] + 0.5 * z[:, 1]),
               lambda z: (z[:, 0] > 1.0).astype(float)):
        weighted = xi(z_shift) * w
        gap = abs(weighted.mean() - xi(z_plain).mean())
        band = 4.0 * math.sqrt(weighted.var(ddof=1) / n + xi(z_plain).var(ddof=1) / n)
        assert gap <= band


def test_proposal_dominates_on_tail_region():
    # f(z) < f_m(z) for z in D = {v.Az/||A^T v|| >= z_alpha}, spot-checked on samples
    rng = np.random.default_rng(5)
    a = np.array([[1.0, 0.2], [0.1, 0.8], [-0.3, 0.5]])
    v = np.array([1.0, -1.0, 0.0])
    alpha = 0.99
    spec = mean_shift(a, v, alpha)
    direction = a.T @ v
    direction /= np.linalg.norm(direction)
    z_alpha = norm.ppf(alpha)
    z = rng.normal(size=(200_000, 2))
    in_d = z @ direction >= z_alpha
    assert in_d.sum() > 100
    lw = log_weight(z[in_d], spec)  # log f - log f_m
    assert np.all(lw < 0.0)


def test_variance_criterion_identity_equals_plain_tail():
    rng = np.random.default_rng(9)
    z = rng.standard_normal((50_000, 1))
    losses = z[:, 0]
    spec = ISSpec.identity(1)
    crit = variance_criterion(z, losses, spec, 1.5)
    assert crit == pytest.approx(np.mean(losses >= 1.5), rel=1e-14)
    assert variance_criterion(z, losses, spec, losses.min() - 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("alpha", [0.99, 0.995])
def test_variance_criterion_shift_reduces_second_moment(alpha):
    # paired-seed comparison on the monotone Gaussian toy L = Z
    z_alpha = norm.ppf(alpha)
    spec = ISSpec(np.array([z_alpha]), alpha)
    rng_seed = 1234
    n = 100_000
    base = np.random.default_rng(rng_seed).standard_normal((n, 1))
    z_plain = base
    z_shift = base + spec.mean_shift
    crit_plain = variance_criterion(z_plain, z_plain[:, 0], ISSpec.identity(1), z_alpha)
    crit_shift = variance_criterion(z_shift, z_shift[:, 0], spec, z_alpha)
    assert crit_shift < crit_plain


def test_pilot_profile_recovers_signs():
    rng = np.random.default_rng(31)
    z = rng.standard_normal((10_000, 3))
    y = 2.0 * z[:, 0] - 0.5 * z[:, 1] + 0.01 * rng.standard_normal(10_000)
    # threshold above the ~1/sqrt(n) rank-correlation noise floor
    profile = pilot_monotonicity_profile(z, y, min_abs_corr=0.05)
    assert profile[0] == 1.0
    assert profile[1] == -1.0
    assert profile[2] == 0.0


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=-3, max_value=3))
@settings(max_examples=50)
def test_log_weight_linear_in_z(z1, z2):
    spec = ISSpec(np.array([0.8]))
    a = log_weight(np.array([z1]), spec)
    b = log_weight(np.array([z2]), spec)
    mid = log_weight(np.array([(z1 + z2) / 2]), spec)
    assert mid == pytest.approx((a + b) / 2, abs=1e-9)
