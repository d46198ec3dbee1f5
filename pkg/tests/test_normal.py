import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from riskcap.normal import normal_cdf, normal_pdf, standard_normal_quantile


def test_cdf_matches_scipy_on_grid():
    xs = np.concatenate([np.linspace(-37.0, 37.0, 1501), [-8.0, -4.0, 0.0, 4.0, 8.0]])
    assert np.max(np.abs(normal_cdf(xs) - norm.cdf(xs))) < 1e-12


def test_cdf_tail_relative_accuracy():
    xs = np.array([-30.0, -20.0, -10.0, -6.0, -5.0, -4.0])
    ours = normal_cdf(xs)
    ref = norm.cdf(xs)
    assert np.max(np.abs(ours - ref) / ref) < 1e-10


def test_cdf_scalar_and_shape():
    assert normal_cdf(0.0) == pytest.approx(0.5, abs=1e-15)
    out = normal_cdf(np.zeros((3, 2)))
    assert out.shape == (3, 2)


def test_pdf_matches_closed_form():
    xs = np.linspace(-5, 5, 101)
    assert np.max(np.abs(normal_pdf(xs) - norm.pdf(xs))) < 1e-15


def test_quantile_known_values():
    # oracle: high-precision CDF inversion (scipy), frozen here
    assert standard_normal_quantile(0.995) == pytest.approx(2.5758293035489004, abs=1e-9)
    assert standard_normal_quantile(0.99) == pytest.approx(2.3263478740408408, abs=1e-9)
    assert standard_normal_quantile(0.5) == 0.0


def test_quantile_matches_scipy_on_grid():
    grid = np.concatenate([
        np.linspace(1e-6, 1 - 1e-6, 201),
        [1e-12, 1e-9, 0.005, 0.01, 0.99, 0.995, 1 - 1e-9, 1 - 1e-12],
    ])
    for alpha in grid:
        assert standard_normal_quantile(alpha) == pytest.approx(norm.ppf(alpha), abs=1e-9)


@given(st.floats(min_value=1e-4, max_value=1 - 1e-4))
def test_quantile_symmetry(alpha):
    # below 1e-4 the rounding of 1 - alpha itself costs more than 1e-12
    assert standard_normal_quantile(alpha) == pytest.approx(
        -standard_normal_quantile(1.0 - alpha), abs=1e-12)


@given(st.floats(min_value=1e-6, max_value=1 - 1e-6))
def test_quantile_inverts_cdf(alpha):
    assert normal_cdf(standard_normal_quantile(alpha)) == pytest.approx(alpha, abs=1e-12)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.5, 1.5])
def test_quantile_rejects_boundary(bad):
    with pytest.raises(ValueError):
        standard_normal_quantile(bad)
