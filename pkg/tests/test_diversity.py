"""Diversity measures against exhaustive brute-force oracles."""

from itertools import combinations, product

import numpy as np
import pytest

from strata import (
    BoundTooLarge,
    CombinationRelation,
    TraitKind,
    build_trait_model,
    coverspecies,
    eigenspecies,
    nonneg_integer_combination,
)

from conftest import composable_team


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------


def brute_force_combination(rows, target, relation, alpha_max, tol=1e-6):
    """Plain grid enumeration over every coefficient vector."""
    rows = np.atleast_2d(np.asarray(rows, float))
    target = np.asarray(target, float)
    atol = tol * np.maximum(1.0, np.abs(target))
    hits = []
    for alpha in product(range(alpha_max + 1), repeat=rows.shape[0]):
        total = np.asarray(alpha) @ rows
        if relation == "equal":
            ok = np.all(np.abs(total - target) <= atol)
        else:
            ok = np.all(total >= target - atol)
        if ok:
            hits.append(alpha)
    return hits


def brute_force_cardinality(mu, relation, alpha_max):
    """Smallest subset size for which every excluded row is representable."""
    num_species = mu.shape[0]
    for cardinality in range(1, num_species + 1):
        for subset in combinations(range(num_species), cardinality):
            rows = mu[list(subset)]
            if all(
                brute_force_combination(rows, mu[excluded], relation, alpha_max)
                for excluded in range(num_species)
                if excluded not in subset
            ):
                return cardinality
    return num_species


# ---------------------------------------------------------------------------
# combination search
# ---------------------------------------------------------------------------


def test_pair_sums_to_composite_row():
    alpha = nonneg_integer_combination(
        [[50.0, 15.0, 20.0, 140.0, 1.0], [150.0, 10.0, 10.0, 0.0, 0.0]],
        [200.0, 25.0, 30.0, 140.0, 1.0],
        CombinationRelation.EQUAL,
    )
    assert alpha.tolist() == [1, 1]


def test_single_row_target_gets_unit_coefficient():
    rows = [[3.0, 7.0], [2.0, 5.0]]
    alpha = nonneg_integer_combination(rows, [2.0, 5.0], "equal")
    assert alpha.tolist() == [0, 1]


def test_cover_prefers_fewest_agents():
    # both rows can cover, but the strong row needs a single agent
    rows = [[1.0, 1.0], [10.0, 10.0]]
    alpha = nonneg_integer_combination(rows, [8.0, 8.0], "cover")
    assert alpha.tolist() == [0, 1]


def test_none_certifies_absence_within_bound():
    assert nonneg_integer_combination([[2.0, 0.0]], [1.0, 3.0], "equal") is None
    assert nonneg_integer_combination([[2.0, 0.0]], [1.0, 3.0], "cover",
                                      alpha_max=10) is None


def test_budget_exhaustion_raises():
    rng = np.random.default_rng(0)
    rows = rng.uniform(0.1, 1.0, size=(6, 3))
    with pytest.raises(BoundTooLarge):
        nonneg_integer_combination(rows, rows.sum(axis=0) * 7.3, "equal",
                                   alpha_max=30, budget=50)


@pytest.mark.parametrize("relation", ["equal", "cover"])
def test_search_matches_brute_force_on_random_instances(relation):
    rng = np.random.default_rng(42 if relation == "equal" else 43)
    alpha_max = 4
    for trial in range(60):
        rows = np.round(rng.uniform(0.0, 5.0, size=(3, 3)), 1)
        if rng.random() < 0.5:
            # targets built from a known combination are feasible by construction
            true_alpha = rng.integers(0, alpha_max + 1, size=3)
            target = true_alpha @ rows
        else:
            target = np.round(rng.uniform(0.0, 12.0, size=3), 1)
        hits = brute_force_combination(rows, target, relation, alpha_max)
        alpha = nonneg_integer_combination(rows, target, relation, alpha_max=alpha_max)
        if not hits:
            assert alpha is None
        else:
            assert alpha is not None
            assert tuple(alpha) in hits
            # minimal recruitment, then lexicographic
            best = min(hits, key=lambda a: (sum(a), a))
            assert tuple(alpha) == best


# ---------------------------------------------------------------------------
# eigenspecies / coverspecies
# ---------------------------------------------------------------------------


def test_eigenspecies_of_composable_team():
    result = eigenspecies(composable_team())
    assert result.cardinality == 3
    assert result.member_species == (0, 1, 2)
    np.testing.assert_array_equal(
        result.combination_matrix,
        [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0]],
    )
    model = composable_team()
    np.testing.assert_allclose(
        result.combination_matrix @ result.reduced_traits, model.mu, rtol=1e-6
    )


def test_coverspecies_of_composable_team():
    result = coverspecies(composable_team())
    assert result.cardinality == 1
    assert result.member_species == (3,)
    np.testing.assert_array_equal(result.combination_matrix, [[1], [1], [1], [1]])
    model = composable_team()
    covered = result.combination_matrix @ result.reduced_traits
    assert np.all(model.mu <= covered + 1e-6 * np.maximum(1.0, np.abs(model.mu)))


def test_single_species_team_has_cardinality_one():
    model = build_trait_model([[5.0, 2.0]], [[0.0, 0.0]],
                              [TraitKind.cumulative()] * 2, [4])
    assert eigenspecies(model).cardinality == 1
    assert coverspecies(model).cardinality == 1


def test_duplicate_row_reduces_cardinality():
    mu = np.array([[3.0, 1.0], [5.0, 9.0], [3.0, 1.0]])
    model = build_trait_model(mu, np.zeros_like(mu), [TraitKind.cumulative()] * 2,
                              [2, 2, 2])
    result = eigenspecies(model)
    assert result.cardinality == 2
    assert brute_force_cardinality(mu, "equal", alpha_max=5) == 2


def test_dominating_row_covers_alone():
    mu = np.array([[1.0, 2.0], [4.0, 9.0], [2.0, 3.0]])
    model = build_trait_model(mu, np.zeros_like(mu), [TraitKind.cumulative()] * 2,
                              [2, 2, 2])
    result = coverspecies(model)
    assert result.cardinality == 1
    assert result.member_species == (1,)


def test_cover_never_exceeds_exact_cardinality():
    rng = np.random.default_rng(7)
    for trial in range(15):
        mu = np.round(rng.uniform(0.0, 6.0, size=(4, 3)), 1)
        model = build_trait_model(mu, np.zeros_like(mu),
                                  [TraitKind.cumulative()] * 3, [2] * 4)
        eig = eigenspecies(model, alpha_max=4)
        cover = coverspecies(model, alpha_max=4)
        assert 1 <= cover.cardinality <= eig.cardinality <= 4


def test_cardinalities_match_brute_force():
    rng = np.random.default_rng(13)
    alpha_max = 3
    for trial in range(10):
        mu = np.round(rng.uniform(0.0, 5.0, size=(4, 2)), 1)
        model = build_trait_model(mu, np.zeros_like(mu),
                                  [TraitKind.cumulative()] * 2, [2] * 4)
        assert eigenspecies(model, alpha_max=alpha_max).cardinality == \
            brute_force_cardinality(mu, "equal", alpha_max)
        assert coverspecies(model, alpha_max=alpha_max).cardinality == \
            brute_force_cardinality(mu, "cover", alpha_max)


def test_row_permutation_only_relabels_members():
    model = composable_team()
    perm = [2, 0, 3, 1]
    permuted = build_trait_model(model.mu[perm], model.var[perm], model.kinds,
                                 [model.species_sizes[p] for p in perm])
    base = coverspecies(model)
    shuffled = coverspecies(permuted)
    assert shuffled.cardinality == base.cardinality
    relabeled = {perm.index(member) for member in base.member_species}
    assert set(shuffled.member_species) == relabeled


def test_factorization_reproduces_rows():
    rng = np.random.default_rng(21)
    mu = np.round(rng.uniform(0.0, 4.0, size=(4, 3)), 1)
    mu[3] = mu[0] + 2 * mu[1]  # plant a dependency
    model = build_trait_model(mu, np.zeros_like(mu), [TraitKind.cumulative()] * 3,
                              [2] * 4)
    result = eigenspecies(model, alpha_max=5)
    recon = result.combination_matrix @ result.reduced_traits
    np.testing.assert_allclose(recon, mu, atol=1e-6)


def test_oversized_team_is_refused():
    mu = np.ones((13, 2))
    model = build_trait_model(mu, np.zeros_like(mu), [TraitKind.cumulative()] * 2,
                              [1] * 13)
    with pytest.raises(BoundTooLarge):
        eigenspecies(model)
