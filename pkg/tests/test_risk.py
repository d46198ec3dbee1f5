import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from riskcap.normal import standard_normal_quantile
from riskcap.risk import (InsufficientTailWeightError, empirical_var_es,
                          exceedance_probability, var_es_with_trace, weighted_var_es)
from riskcap.sampling import ISSpec, log_weight

loss_lists = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=2, max_size=200)
levels = st.floats(min_value=0.01, max_value=0.99)


def test_hand_example_descending_integers():
    losses = np.arange(10, 0, -1, dtype=float)
    est = empirical_var_es(losses, 0.8)
    assert est.tail_index == 3
    assert est.var == 8.0
    assert est.es == pytest.approx(9.5, rel=1e-12)


def test_degenerate_all_equal():
    for alpha in (0.1, 0.5, 0.9, 0.995):
        est = empirical_var_es(np.full(57, 3.25), alpha)
        assert est.var == 3.25
        assert est.es == pytest.approx(3.25, rel=1e-12)


def test_single_atom_tail():
    est = weighted_var_es(np.array([5.0, 1.0]), np.array([0.9, 0.1]), 0.95)
    assert est.tail_index == 1
    assert est.var == 5.0
    assert est.es == 5.0


def test_lognormal_oracle_millions():
    # closed-form oracle: VaR = exp(z_alpha); ES = e^{1/2} Phi(1 - z_alpha)/(1-alpha)
    rng = np.random.default_rng(321)
    losses = np.exp(rng.standard_normal(1_000_000))
    alpha = 0.995
    z = norm.ppf(alpha)
    var_true = math.exp(z)
    es_true = math.exp(0.5) * norm.cdf(1.0 - z) / (1.0 - alpha)
    est = empirical_var_es(losses, alpha)
    assert abs(est.var - var_true) / var_true < 0.01
    assert abs(est.es - es_true) / es_true < 0.01


def test_uniform_weights_bitwise_equal():
    rng = np.random.default_rng(7)
    losses = rng.normal(size=1001)
    losses[10] = losses[20]  # a tie, to exercise stable ordering
    n = losses.size
    for alpha in (0.9, 0.95, 0.995):
        a = empirical_var_es(losses, alpha)
        b = weighted_var_es(losses, np.full(n, 1.0 / n), alpha)
        assert a.var == b.var and a.es == b.es and a.tail_index == b.tail_index


def test_insufficient_tail_weight_is_hard_error():
    with pytest.raises(InsufficientTailWeightError):
        weighted_var_es(np.array([3.0, 2.0, 1.0]), np.array([1e-4, 1e-4, 1e-4]), 0.99)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        empirical_var_es(np.array([]), 0.9)
    with pytest.raises(ValueError):
        empirical_var_es(np.array([1.0, 2.0]), 1.0)
    with pytest.raises(ValueError):
        weighted_var_es(np.array([1.0, 2.0]), np.array([0.5, -0.5]), 0.9)


def test_is_agrees_with_plain_at_ten_times_sample():
    # plain-MC oracle at 10x the IS sample size, mutual 3-SE bands over replicates
    alpha = 0.99
    spec = ISSpec(np.array([standard_normal_quantile(alpha)]), alpha)
    n_is, n_plain, reps = 20_000, 200_000, 12
    is_var, is_es, pl_var, pl_es = [], [], [], []
    for rep in range(reps):
        rng = np.random.default_rng(5000 + rep)
        z = rng.standard_normal((n_is, 1)) + spec.mean_shift
        losses = np.exp(z[:, 0])
        w = np.exp(log_weight(z, spec)) / n_is
        est = weighted_var_es(losses, w, alpha)
        is_var.append(est.var)
        is_es.append(est.es)
        plain = np.exp(np.random.default_rng(9000 + rep).standard_normal(n_plain))
        est_p = empirical_var_es(plain, alpha)
        pl_var.append(est_p.var)
        pl_es.append(est_p.es)
    for a, b in ((is_var, pl_var), (is_es, pl_es)):
        a, b = np.asarray(a), np.asarray(b)
        gap = abs(a.mean() - b.mean())
        band = 3.0 * math.sqrt(a.var(ddof=1) / reps + b.var(ddof=1) / reps)
        assert gap <= band


def test_exceedance_trivial_bounds():
    losses = np.array([1.0, 2.0, 3.0])
    w = np.full(3, 1.0 / 3.0)
    assert exceedance_probability(losses, w, 0.0)[0] == pytest.approx(1.0)
    assert exceedance_probability(losses, w, 10.0)[0] == 0.0


def test_exceedance_is_unbiased_and_tighter():
    # closed-form normal tail oracle; IS must beat plain-MC std error at equal n
    alpha = 0.99
    x = norm.ppf(alpha)
    n = 100_000
    spec = ISSpec(np.array([x]), alpha)
    rng = np.random.default_rng(88)
    z_is = rng.standard_normal((n, 1)) + spec.mean_shift
    w_is = np.exp(log_weight(z_is, spec)) / n
    est_is, se_is = exceedance_probability(z_is[:, 0], w_is, x)
    z_pl = rng.standard_normal(n)
    est_pl, se_pl = exceedance_probability(z_pl, np.full(n, 1.0 / n), x)
    assert abs(est_is - 0.01) <= 3.0 * se_is
    assert abs(est_pl - 0.01) <= 3.0 * se_pl
    assert se_is < se_pl


@given(loss_lists, levels)
@settings(max_examples=60)
def test_permutation_invariance(losses, alpha):
    losses = np.asarray(losses)
    a = empirical_var_es(losses, alpha)
    b = empirical_var_es(losses[::-1].copy(), alpha)
    assert a.var == b.var
    assert a.es == pytest.approx(b.es, rel=1e-9, abs=1e-9)


@given(loss_lists, levels, st.floats(min_value=-100, max_value=100))
@settings(max_examples=60)
def test_translation_equivariance(losses, alpha, c):
    base = empirical_var_es(np.asarray(losses), alpha)
    shifted = empirical_var_es(np.asarray(losses) + c, alpha)
    scale = max(1.0, abs(base.var), abs(base.es))
    assert shifted.var == pytest.approx(base.var + c, abs=1e-9 * scale)
    assert shifted.es == pytest.approx(base.es + c, abs=1e-9 * scale)


@given(loss_lists, levels, st.floats(min_value=0.01, max_value=100))
@settings(max_examples=60)
def test_positive_homogeneity(losses, alpha, lam):
    base = empirical_var_es(np.asarray(losses), alpha)
    scaled = empirical_var_es(lam * np.asarray(losses), alpha)
    scale = max(1.0, abs(base.var), abs(base.es)) * lam
    assert scaled.var == pytest.approx(lam * base.var, abs=1e-9 * scale)
    assert scaled.es == pytest.approx(lam * base.es, abs=1e-9 * scale)


@given(loss_lists, levels)
@settings(max_examples=60)
def test_es_dominates_var(losses, alpha):
    est = empirical_var_es(np.asarray(losses), alpha)
    assert est.es >= est.var - 1e-9 * max(1.0, abs(est.var))


def test_total_weight_near_one_under_shift():
    rng = np.random.default_rng(17)
    n = 100_000
    spec = ISSpec(np.array([1.2, -0.7, 0.4]))
    z = rng.standard_normal((n, 3)) + spec.mean_shift
    ratios = np.exp(log_weight(z, spec))
    total = ratios.mean()
    se = ratios.std(ddof=1) / math.sqrt(n)
    assert abs(total - 1.0) <= 3.0 * se


def test_trace_is_prefix_property():
    rng = np.random.default_rng(3)
    losses = rng.normal(size=5000)
    counts = [100, 500, 2500, 5000]
    est = var_es_with_trace(losses, 0.95, counts)
    assert [c for c, _, _ in est.trace] == counts
    for count, var, es in est.trace:
        # a trace point equals the plain estimator run on the first n samples
        point = empirical_var_es(losses[:count], 0.95)
        assert var == point.var and es == point.es
    assert est.var == empirical_var_es(losses, 0.95).var


def test_trace_with_likelihood_ratios():
    rng = np.random.default_rng(4)
    spec = ISSpec(np.array([1.5]))
    z = rng.standard_normal((2000, 1)) + spec.mean_shift
    losses = z[:, 0]
    ratios = np.exp(log_weight(z, spec))
    est = var_es_with_trace(losses, 0.99, [500, 2000], ratios)
    point = weighted_var_es(losses[:500], ratios[:500] / 500, 0.99)
    assert est.trace[0] == (500, point.var, point.es)
