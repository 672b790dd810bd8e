import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from propeffect import InterventionSeries, TestConfig
from propeffect.errors import InvalidSeries, UndefinedCorrelation
from propeffect.findiff import DiffScheme
from propeffect.score import cace_binary, detect_flips, expected_gradient_magnitude, pearson, summarize

finite = st.floats(-1e3, 1e3, allow_nan=False)
series_values = st.lists(finite, min_size=2, max_size=40)


def test_constant_scores_zero():
    assert expected_gradient_magnitude(InterventionSeries.unit([0.5] * 10)) == 0.0


def test_one_percent_per_step():
    s = InterventionSeries.unit(0.5 + 0.01 * np.arange(10))
    assert expected_gradient_magnitude(s) == pytest.approx(0.01, rel=1e-12)


def test_binary_series_is_cace():
    assert expected_gradient_magnitude(InterventionSeries.unit([0.2, 0.9])) == pytest.approx(0.7, rel=1e-15)


@pytest.mark.parametrize("f0, f1, expected", [(0.2, 0.9, 0.7), (0.5, 0.5, 0.0), (0.9, 0.2, 0.7)])
def test_cace_binary(f0, f1, expected):
    assert cace_binary(f0, f1) == pytest.approx(expected, abs=1e-15)


def test_single_point_rejected():
    with pytest.raises(InvalidSeries):
        expected_gradient_magnitude(InterventionSeries([0.0], [0.3]))


def test_invalid_series():
    with pytest.raises(InvalidSeries):
        InterventionSeries([0, 1], [0.1])
    with pytest.raises(InvalidSeries):
        InterventionSeries([0, 0], [0.1, 0.2])
    with pytest.raises(InvalidSeries):
        InterventionSeries([0, 1], [0.1, float("nan")])


def test_pearson_examples():
    x = np.linspace(0, 1, 7)
    assert pearson(InterventionSeries(x, x)) == pytest.approx(1.0, abs=1e-12)
    assert pearson(InterventionSeries(x, -x)) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(UndefinedCorrelation):
        pearson(InterventionSeries(x, np.full(7, 0.3)))


@pytest.mark.parametrize(
    "outputs, expected",
    [
        ([0.6, 0.55, 0.45, 0.48], (1, [2])),
        ([0.7, 0.7, 0.7], (0, [])),
        ([0.4, 0.6, 0.4], (2, [1, 2])),
        ([0.6, 0.5, 0.4], (1, [2])),  # touching the threshold keeps the previous side
        ([0.6, 0.5, 0.6], (0, [])),
        ([0.5, 0.5, 0.6, 0.4], (1, [3])),  # leading ties take the first visited side
        ([0.5, 0.5], (0, [])),
    ],
)
def test_detect_flips(outputs, expected):
    assert detect_flips(outputs, 0.5) == expected


def test_detect_flips_empty():
    with pytest.raises(InvalidSeries):
        detect_flips([], 0.5)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_flips_invariant_under_monotone_transform(values):
    # x -> x**3 is strictly increasing and fixes the threshold 0.5 after recentering
    y = np.array(values)
    transformed = 0.5 + (y - 0.5) ** 3
    assert detect_flips(y, 0.5) == detect_flips(transformed, 0.5)


@settings(max_examples=300, deadline=None)
@given(series_values)
def test_nonnegative_and_zero_iff_constant(values):
    s = InterventionSeries.unit(values)
    score = expected_gradient_magnitude(s)
    assert score >= 0
    constant = np.ptp(values) == 0
    assert (score <= 1e-12) == constant or (not constant and np.ptp(values) < 1e-9)


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.integers(-2**20, 2**20), min_size=2, max_size=40),
    st.integers(-2**10, 2**10),
)
def test_shift_invariance_exact(ints, shift):
    # dyadic data: every sum and difference is exactly representable
    y = np.array(ints) / 1024.0
    s = InterventionSeries.unit(y)
    assert expected_gradient_magnitude(s.with_outputs(y + shift / 8.0)) == expected_gradient_magnitude(s)


@settings(max_examples=300, deadline=None)
@given(series_values, st.floats(-100, 100))
def test_absolute_homogeneity(values, c):
    s = InterventionSeries.unit(values)
    base = expected_gradient_magnitude(s)
    scaled = expected_gradient_magnitude(s.with_outputs(c * np.asarray(values)))
    assert scaled == pytest.approx(abs(c) * base, rel=1e-12, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(series_values)
def test_reversal_invariance(values):
    s = InterventionSeries.unit(values)
    assert expected_gradient_magnitude(s.reversed()) == pytest.approx(expected_gradient_magnitude(s), rel=1e-12, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(finite, finite, st.floats(-100, 100))
def test_binary_agreement(f0, f1, start):
    s = InterventionSeries([start, start + 1.0], [f0, f1])
    assume(s.grid[1] - s.grid[0] == 1.0)
    assert expected_gradient_magnitude(s) == cace_binary(f0, f1)


def test_summarize_affine():
    s = InterventionSeries.unit(0.5 + 0.01 * np.arange(10))
    r = summarize(s, TestConfig(K=1000, seed=7), threshold=0.5)
    assert r.score == pytest.approx(0.01, rel=1e-12)
    assert r.flips == 0 and r.flip_positions == []
    assert r.significant and r.p_value < 0.01
    assert r.seed == 7 and r.K == 1000


def test_summarize_constant():
    r = summarize(InterventionSeries.unit([0.3] * 8), TestConfig(K=200, seed=1))
    assert r.score == 0 and r.flips == 0
    assert r.p_value == 1.0 and not r.significant
    assert r.pearson is None and not r.pearson_defined


def test_summarize_binary():
    r = summarize(InterventionSeries.unit([0.2, 0.9]), TestConfig(K=50, seed=1))
    assert r.score == pytest.approx(0.7)
    assert r.pearson == pytest.approx(1.0, abs=1e-12)
    assert r.flips == 1 and r.flip_positions == [1]
    assert r.test_warning is not None and r.p_value == 1.0


def test_summarize_reproducible():
    rng = np.random.default_rng(0)
    s = InterventionSeries.unit(rng.uniform(size=20))
    cfg = TestConfig(K=500, seed=11)
    assert summarize(s, cfg).to_dict() == summarize(s, cfg).to_dict()


def test_report_invariants():
    rng = np.random.default_rng(1)
    for _ in range(20):
        s = InterventionSeries.unit(rng.uniform(size=12))
        r = summarize(s, TestConfig(K=200, seed=2, scheme=DiffScheme(boundary_order=2)))
        assert r.flips == len(r.flip_positions)
        assert (not r.significant) or r.p_value < r.delta
