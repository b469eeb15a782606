"""Trait model construction, binarization, and sampling."""

import numpy as np
import pytest

from strata import (
    DimensionMismatch,
    EmptyTeam,
    NegativeEntry,
    TraitKind,
    binarize_noncumulative,
    build_trait_model,
    sample_trait_matrix,
)

from conftest import EXAMPLE_MU_RAW, EXAMPLE_SIZES, EXAMPLE_VAR


def test_example_team_builds(example_model):
    assert example_model.num_species == 4
    assert example_model.num_traits == 5
    assert example_model.total_agents == 100
    assert not example_model.is_binarized()


def test_degenerate_single_entry_model():
    model = build_trait_model([[0.0]], [[0.0]], [TraitKind.cumulative()], [1])
    assert model.num_species == 1
    assert model.num_traits == 1


def test_negative_mean_rejected():
    with pytest.raises(NegativeEntry):
        build_trait_model([[1.0, -2.0]], [[0.0, 0.0]],
                          [TraitKind.cumulative()] * 2, [5])


def test_nonfinite_variance_rejected():
    with pytest.raises(NegativeEntry):
        build_trait_model([[1.0]], [[np.nan]], [TraitKind.cumulative()], [5])


def test_dimension_mismatches_rejected():
    with pytest.raises(DimensionMismatch):
        build_trait_model([[1.0, 2.0]], [[0.0]], [TraitKind.cumulative()] * 2, [5])
    with pytest.raises(DimensionMismatch):
        build_trait_model([[1.0]], [[0.0]], [TraitKind.cumulative()] * 2, [5])
    with pytest.raises(DimensionMismatch):
        build_trait_model([[1.0]], [[0.0]], [TraitKind.cumulative()], [5, 5])


def test_empty_team_rejected():
    with pytest.raises(EmptyTeam):
        build_trait_model([[1.0]], [[0.0]], [TraitKind.cumulative()], [0])
    with pytest.raises(EmptyTeam):
        build_trait_model(np.zeros((0, 2)), np.zeros((0, 2)),
                          [TraitKind.cumulative()] * 2, [])


def test_trait_kind_invariants():
    assert TraitKind.cumulative().is_cumulative
    kind = TraitKind.non_cumulative(7.0)
    assert not kind.is_cumulative
    assert kind.q_min == 7.0
    with pytest.raises(NegativeEntry):
        TraitKind.non_cumulative(-1.0)


def test_binarize_speed_column(example_model):
    binarized = binarize_noncumulative(example_model)
    # means 8, 2, 5, 10 against a floor of 7: only the fast species pass
    assert binarized.mu[:, 4].tolist() == [1.0, 0.0, 0.0, 1.0]
    assert np.all(binarized.var[:, 4] == 0.0)
    # cumulative columns untouched
    np.testing.assert_array_equal(binarized.mu[:, :4], EXAMPLE_MU_RAW[:, :4])
    np.testing.assert_array_equal(binarized.var[:, :4], EXAMPLE_VAR[:, :4])
    assert binarized.is_binarized()


def test_binarize_boundary_is_inclusive():
    model = build_trait_model(
        [[7.0], [6.999]], [[1.0], [1.0]], [TraitKind.non_cumulative(7.0)], [1, 1]
    )
    binarized = binarize_noncumulative(model)
    assert binarized.mu[:, 0].tolist() == [1.0, 0.0]


def test_binarize_all_equal_threshold_gives_ones():
    model = build_trait_model(
        [[5.0], [5.0], [5.0]], np.zeros((3, 1)), [TraitKind.non_cumulative(5.0)], [1, 1, 1]
    )
    assert binarize_noncumulative(model).mu[:, 0].tolist() == [1.0, 1.0, 1.0]


def test_binarize_cumulative_only_is_identity(example_model):
    cumulative = build_trait_model(
        EXAMPLE_MU_RAW[:, :4], EXAMPLE_VAR[:, :4],
        [TraitKind.cumulative()] * 4, EXAMPLE_SIZES,
    )
    binarized = binarize_noncumulative(cumulative)
    np.testing.assert_array_equal(binarized.mu, cumulative.mu)
    np.testing.assert_array_equal(binarized.var, cumulative.var)


def test_binarize_idempotent(example_model):
    once = binarize_noncumulative(example_model)
    twice = binarize_noncumulative(once)
    np.testing.assert_array_equal(once.mu, twice.mu)
    np.testing.assert_array_equal(once.var, twice.var)


def test_sampling_is_deterministic(example_model):
    a = sample_trait_matrix(example_model, seed=42)
    b = sample_trait_matrix(example_model, seed=42)
    np.testing.assert_array_equal(a, b)
    c = sample_trait_matrix(example_model, seed=43)
    assert not np.array_equal(a, c)


def test_sampling_zero_variance_returns_means():
    model = build_trait_model(
        EXAMPLE_MU_RAW[:, :4], np.zeros((4, 4)),
        [TraitKind.cumulative()] * 4, EXAMPLE_SIZES,
    )
    for seed in (0, 1, 99):
        np.testing.assert_array_equal(sample_trait_matrix(model, seed), model.mu)


def test_samples_are_nonnegative():
    # tiny means with large variance force the clamp to fire
    model = build_trait_model(
        [[0.1, 0.2]], [[4.0, 4.0]], [TraitKind.cumulative()] * 2, [3]
    )
    for seed in range(20):
        assert np.all(sample_trait_matrix(model, seed) >= 0.0)


def test_sampling_keeps_binarized_columns(example_model):
    binarized = binarize_noncumulative(example_model)
    sample = sample_trait_matrix(binarized, seed=11)
    np.testing.assert_array_equal(sample[:, 4], binarized.mu[:, 4])


def test_sampling_moments_match_model():
    """Monte-Carlo check: empirical mean within 3 sigma / sqrt(n), variance within 5%."""
    cumulative = build_trait_model(
        EXAMPLE_MU_RAW[:, :4], EXAMPLE_VAR[:, :4],
        [TraitKind.cumulative()] * 4, EXAMPLE_SIZES,
    )
    n = 100_000
    draws = np.stack([sample_trait_matrix(cumulative, seed) for seed in range(n)])
    emp_mean = draws.mean(axis=0)
    emp_var = draws.var(axis=0)
    sigma = np.sqrt(cumulative.var)
    np.testing.assert_array_less(
        np.abs(emp_mean - cumulative.mu), 3.0 * sigma / np.sqrt(n) + 1e-12
    )
    positive = cumulative.var > 0
    rel = np.abs(emp_var[positive] - cumulative.var[positive]) / cumulative.var[positive]
    assert rel.max() < 0.05
