"""Input validation across the public types."""

import numpy as np
import pytest

from strata import (
    AbstractState,
    DimensionMismatch,
    InvariantViolation,
    NumericalFailure,
    OptimizerConfig,
    RateAboveCeiling,
    RatePlan,
    UnknownEdge,
    build_task_graph,
    matrix_exponential,
)


def test_state_rejects_negative_and_nonfinite():
    with pytest.raises(InvariantViolation):
        AbstractState(counts=[[1.0, -0.5], [0.0, 1.0]])
    with pytest.raises(InvariantViolation):
        AbstractState(counts=[[np.inf, 0.0], [0.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        AbstractState(counts=[1.0, 2.0])


def test_state_clamps_numerical_dust():
    state = AbstractState(counts=[[1.0, -1e-14], [0.0, 1.0]])
    assert state.counts[0, 1] == 0.0


def test_matrix_exponential_rejects_bad_inputs():
    with pytest.raises(NumericalFailure):
        matrix_exponential(np.zeros((2, 2)), -1.0)
    with pytest.raises(NumericalFailure):
        matrix_exponential(np.array([[np.nan, 0.0], [0.0, 0.0]]), 1.0)
    with pytest.raises(DimensionMismatch):
        matrix_exponential(np.zeros((2, 3)), 1.0)


def test_rate_plan_requires_generator_structure():
    with pytest.raises(InvariantViolation):
        RatePlan(rate_matrices=np.array([[[0.0, 1.0], [0.0, 0.0]]]), settle_time=1.0)
    with pytest.raises(InvariantViolation):
        RatePlan(rate_matrices=np.zeros((1, 2, 2)), settle_time=0.0)
    with pytest.raises(InvariantViolation):
        RatePlan(rate_matrices=np.array([[[-1.0, -1.0], [1.0, 1.0]]]), settle_time=1.0)


def test_rate_plan_validation_against_graph():
    # ring 0 -> 1 -> 2 -> 0: the reverse edges do not exist
    graph = build_task_graph(3, [(0, 1), (1, 2), (2, 0)], 0.5, num_species=1)

    def plan_for(rates):
        matrix = np.zeros((3, 3))
        for (i, j), value in rates.items():
            matrix[j, i] += value
            matrix[i, i] -= value
        return RatePlan(rate_matrices=matrix[None, :, :], settle_time=1.0)

    with pytest.raises(UnknownEdge):
        plan_for({(1, 0): 0.3}).validate_against(graph)
    with pytest.raises(RateAboveCeiling):
        plan_for({(0, 1): 0.9}).validate_against(graph)
    plan_for({(0, 1): 0.4, (1, 2): 0.2}).validate_against(graph)


def test_optimizer_config_validation():
    with pytest.raises(InvariantViolation):
        OptimizerConfig(eps1=0.0, eps2=1.0, eps_var=1.0)
    with pytest.raises(InvariantViolation):
        OptimizerConfig(eps1=1.0, eps2=-1.0, eps_var=1.0)
    with pytest.raises(InvariantViolation):
        OptimizerConfig(eps1=1.0, eps2=1.0, eps_var=1.0, meta_iterations=0)
    with pytest.raises(InvariantViolation):
        OptimizerConfig(eps1=1.0, eps2=1.0, eps_var=1.0, nu=0.0)
    config = OptimizerConfig(eps1=1.0, eps2=1.0, eps_var=1.0)
    assert config.nu == 2.0
    assert config.meta_iterations == 20
