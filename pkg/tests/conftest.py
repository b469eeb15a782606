"""Shared test fixtures: the worked example team and helper builders."""

from __future__ import annotations

import numpy as np
import pytest

from strata import (
    AbstractState,
    TraitKind,
    build_rate_matrix,
    build_task_graph,
    build_trait_model,
)

# Four species, four cumulative traits plus a non-cumulative speed trait.
EXAMPLE_MU_RAW = np.array([
    [50.0, 15.0, 20.0, 140.0, 8.0],
    [150.0, 10.0, 10.0, 0.0, 2.0],
    [175.0, 0.0, 25.0, 60.0, 5.0],
    [200.0, 35.0, 30.0, 140.0, 10.0],
])
EXAMPLE_VAR = np.array([
    [3.0, 1.0, 1.5, 5.6, 0.0],
    [2.0, 1.5, 0.5, 0.0, 0.0],
    [1.0, 0.0, 2.4, 8.7, 0.0],
    [6.0, 2.3, 3.9, 9.2, 0.0],
])
EXAMPLE_KINDS = tuple(
    [TraitKind.cumulative()] * 4 + [TraitKind.non_cumulative(7.0)]
)
EXAMPLE_SIZES = (25, 25, 25, 25)

# Everyone starts on their own task; task 5 is empty.
EXAMPLE_X0 = np.vstack([np.diag([25.0, 25.0, 25.0, 25.0]), np.zeros(4)])

EXPECTED_MEAN0 = np.array([
    [1250.0, 375.0, 500.0, 3500.0, 25.0],
    [3750.0, 250.0, 250.0, 0.0, 0.0],
    [4375.0, 0.0, 625.0, 1500.0, 0.0],
    [5000.0, 875.0, 750.0, 3500.0, 25.0],
    [0.0, 0.0, 0.0, 0.0, 0.0],
])
EXPECTED_VAR0 = np.array([
    [1875.0, 625.0, 937.5, 3500.0],
    [1250.0, 937.5, 312.5, 0.0],
    [625.0, 0.0, 1500.0, 5437.5],
    [3750.0, 1437.5, 2437.5, 5750.0],
    [0.0, 0.0, 0.0, 0.0],
])


@pytest.fixture
def example_model():
    return build_trait_model(EXAMPLE_MU_RAW, EXAMPLE_VAR, EXAMPLE_KINDS, EXAMPLE_SIZES)


@pytest.fixture
def example_state():
    return AbstractState(counts=EXAMPLE_X0)


def composable_team():
    """A binarized team whose fourth species equals the sum of the first two.

    The interesting structure for the diversity measures: one species is
    redundant under exact matching, and the composite species dominates
    everyone under minimum matching.
    """
    rows = np.array([
        [50.0, 15.0, 20.0, 140.0, 1.0],
        [150.0, 10.0, 10.0, 0.0, 0.0],
        [175.0, 0.0, 25.0, 60.0, 0.0],
    ])
    mu = np.vstack([rows, rows[0] + rows[1]])
    return build_trait_model(
        mu, np.zeros_like(mu), [TraitKind.cumulative()] * 5, [25] * 4
    )


def random_generator_stack(rng, num_tasks, num_species, ceiling=1.0, density=1.0):
    """Random admissible generators on a random strongly connected graph."""
    edges = [(i, j) for i in range(num_tasks) for j in range(num_tasks)
             if i != j and (density >= 1.0 or rng.random() < density)]
    # a cycle keeps the graph strongly connected whatever the density draw did
    edges += [(k, (k + 1) % num_tasks) for k in range(num_tasks)]
    edges = sorted(set(edges))
    graph = build_task_graph(num_tasks, edges, ceiling, num_species=num_species)
    stack = np.array([
        build_rate_matrix(
            graph,
            {edge: rng.uniform(0.05, 0.95) * ceiling for edge in graph.edges},
            species=s,
        )
        for s in range(num_species)
    ])
    return graph, stack


def random_trait_model(rng, num_species, num_traits, var_scale=2.0):
    mu = rng.uniform(0.0, 5.0, size=(num_species, num_traits))
    var = rng.uniform(0.0, var_scale, size=(num_species, num_traits))
    return build_trait_model(
        mu, var, [TraitKind.cumulative()] * num_traits, [10] * num_species
    )
