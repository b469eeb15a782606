"""Task-graph dynamics for heterogeneous teams.

Agents switch tasks along the edges of a strongly connected graph at
per-species rates.  The population-level mean field evolves linearly under
a generator matrix per species, solved with matrix exponentials; an
agent-level jump-process simulator provides an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvariantViolation,
    NegativeRate,
    NumericalFailure,
    RateAboveCeiling,
    UnknownEdge,
)
from .model import TraitModel


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used across the package, fixed in one place."""

    conservation_rel: float = 1e-9
    stochasticity: float = 1e-10
    generator_colsum: float = 1e-12
    nonneg_slack: float = 1e-12
    semigroup: float = 1e-8
    eig_reconstruction: float = 1e-8
    degenerate_eigengap: float = 1e-8
    combination_rel: float = 1e-6


TOL = Tolerances()


def _strongly_connected(num_tasks: int, edges: Iterable[tuple[int, int]]) -> bool:
    forward: list[list[int]] = [[] for _ in range(num_tasks)]
    backward: list[list[int]] = [[] for _ in range(num_tasks)]
    for i, j in edges:
        forward[i].append(j)
        backward[j].append(i)

    def reaches_all(adj: list[list[int]]) -> bool:
        seen = [False] * num_tasks
        stack = [0]
        seen[0] = True
        while stack:
            node = stack.pop()
            for nxt in adj[node]:
                if not seen[nxt]:
                    seen[nxt] = True
                    stack.append(nxt)
        return all(seen)

    return reaches_all(forward) and reaches_all(backward)


@dataclass(frozen=True)
class TaskGraph:
    """Directed switching topology over tasks.

    ``edges`` holds ordered pairs (i, j), 0-based, meaning agents at task i
    may switch to task j.  ``rate_ceilings`` is an S x E matrix of positive
    per-species maxima aligned with the sorted edge tuple.
    """

    num_tasks: int
    edges: tuple[tuple[int, int], ...]
    rate_ceilings: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "num_tasks", int(self.num_tasks))
        edges = tuple(sorted((int(i), int(j)) for i, j in self.edges))
        object.__setattr__(self, "edges", edges)
        ceilings = np.asarray(self.rate_ceilings, dtype=float).copy()
        ceilings.setflags(write=False)
        object.__setattr__(self, "rate_ceilings", ceilings)

        if self.num_tasks < 1:
            raise InvariantViolation("graph needs at least one task")
        if len(set(edges)) != len(edges):
            raise InvariantViolation("duplicate edges in task graph")
        for i, j in edges:
            if i == j:
                raise InvariantViolation(f"self-loop on task {i}")
            if not (0 <= i < self.num_tasks and 0 <= j < self.num_tasks):
                raise IndexOutOfRange(f"edge ({i}, {j}) outside 0..{self.num_tasks - 1}")
        if ceilings.ndim != 2 or ceilings.shape[1] != len(edges):
            raise DimensionMismatch(
                f"rate_ceilings shape {ceilings.shape} does not match {len(edges)} edges"
            )
        if not np.all(np.isfinite(ceilings)) or np.any(ceilings <= 0.0):
            raise InvariantViolation("every rate ceiling must be positive and finite")
        if self.num_tasks > 1 and not _strongly_connected(self.num_tasks, edges):
            raise InvariantViolation("task graph is not strongly connected")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_species(self) -> int:
        return self.rate_ceilings.shape[0]

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {edge: pos for pos, edge in enumerate(self.edges)}


def build_task_graph(num_tasks: int, edges, rate_ceilings, num_species: int | None = None) -> TaskGraph:
    """Assemble a TaskGraph, broadcasting scalar or per-edge ceilings.

    ``rate_ceilings`` may be a scalar (same ceiling for every species and
    edge), a mapping from edge to scalar or per-species sequence, or an
    S x E array aligned with the sorted edge order.
    """
    edge_tuple = tuple(sorted((int(i), int(j)) for i, j in edges))
    if isinstance(rate_ceilings, Mapping):
        if num_species is None:
            probe = next(iter(rate_ceilings.values()))
            num_species = 1 if np.isscalar(probe) else len(probe)
        ceilings = np.zeros((num_species, len(edge_tuple)))
        index = {edge: pos for pos, edge in enumerate(edge_tuple)}
        for key, value in rate_ceilings.items():
            edge = (int(key[0]), int(key[1]))
            if edge not in index:
                raise UnknownEdge(f"ceiling keyed on unknown edge {edge}")
            ceilings[:, index[edge]] = value
    elif np.isscalar(rate_ceilings):
        if num_species is None:
            raise DimensionMismatch("scalar ceilings need num_species")
        ceilings = np.full((num_species, len(edge_tuple)), float(rate_ceilings))
    else:
        ceilings = np.asarray(rate_ceilings, dtype=float)
    return TaskGraph(num_tasks=num_tasks, edges=edge_tuple, rate_ceilings=ceilings)


@dataclass(frozen=True)
class AbstractState:
    """Agents per task per species: an M x S matrix of nonnegative reals.

    Propagated states are real-valued (the mean field produces fractional
    agents); entries within a tiny negative slack are clamped to zero.
    """

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=float)
        if counts.ndim != 2:
            raise DimensionMismatch(f"counts must be M x S, got ndim={counts.ndim}")
        if not np.all(np.isfinite(counts)):
            raise InvariantViolation("state contains non-finite entries")
        if np.any(counts < -TOL.nonneg_slack):
            worst = float(counts.min())
            raise InvariantViolation(f"state contains negative entries (min {worst:g})")
        counts = np.maximum(counts, 0.0)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def num_tasks(self) -> int:
        return self.counts.shape[0]

    @property
    def num_species(self) -> int:
        return self.counts.shape[1]

    def species_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)


@dataclass(frozen=True)
class RatePlan:
    """Per-species generator matrices plus the settling time they target."""

    rate_matrices: np.ndarray  # S x M x M
    settle_time: float

    def __post_init__(self) -> None:
        mats = np.asarray(self.rate_matrices, dtype=float).copy()
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DimensionMismatch(f"rate_matrices must be S x M x M, got {mats.shape}")
        if not np.all(np.isfinite(mats)):
            raise InvariantViolation("rate matrices contain non-finite entries")
        scale = max(1.0, float(np.abs(mats).max()))
        for s in range(mats.shape[0]):
            off = mats[s].copy()
            np.fill_diagonal(off, 0.0)
            if np.any(off < -TOL.nonneg_slack * scale):
                raise InvariantViolation(f"species {s}: negative off-diagonal rate")
            colsums = mats[s].sum(axis=0)
            if np.any(np.abs(colsums) > 1e-9 * scale):
                raise InvariantViolation(f"species {s}: columns do not sum to zero")
        mats.setflags(write=False)
        object.__setattr__(self, "rate_matrices", mats)
        settle = float(self.settle_time)
        if not np.isfinite(settle) or settle <= 0.0:
            raise InvariantViolation(f"settle_time must be positive, got {settle!r}")
        object.__setattr__(self, "settle_time", settle)

    @property
    def num_species(self) -> int:
        return self.rate_matrices.shape[0]

    @property
    def num_tasks(self) -> int:
        return self.rate_matrices.shape[1]

    def validate_against(self, graph: TaskGraph) -> None:
        """Check the zero pattern and ceilings of every matrix against a graph."""
        if self.num_tasks != graph.num_tasks:
            raise DimensionMismatch(
                f"plan has {self.num_tasks} tasks, graph has {graph.num_tasks}"
            )
        if self.num_species != graph.num_species:
            raise DimensionMismatch(
                f"plan has {self.num_species} species, graph ceilings have {graph.num_species}"
            )
        allowed = np.zeros((graph.num_tasks, graph.num_tasks), dtype=bool)
        for i, j in graph.edges:
            allowed[j, i] = True  # entry (j, i) encodes the rate from i to j
        for s in range(self.num_species):
            mat = self.rate_matrices[s]
            off = mat.copy()
            np.fill_diagonal(off, 0.0)
            if np.any((~allowed) & (off > 0.0)):
                raise UnknownEdge(f"species {s}: nonzero rate on a non-edge")
            for pos, (i, j) in enumerate(graph.edges):
                ceiling = graph.rate_ceilings[s, pos]
                if mat[j, i] > ceiling * (1.0 + 1e-12):
                    raise RateAboveCeiling(
                        f"species {s}: rate {mat[j, i]:g} on edge ({i}, {j}) "
                        f"exceeds ceiling {ceiling:g}"
                    )


@dataclass(frozen=True)
class TraitDistribution:
    """Mean and variance of the aggregated traits per task (both M x U)."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        variance = np.asarray(self.variance, dtype=float)
        if mean.shape != variance.shape or mean.ndim != 2:
            raise DimensionMismatch("mean and variance must share an M x U shape")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(variance))):
            raise InvariantViolation("trait distribution contains non-finite entries")
        if np.any(variance < 0.0):
            raise InvariantViolation("trait variance must be nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)


def build_rate_matrix(graph: TaskGraph, rates: Mapping[tuple[int, int], float], species: int = 0) -> np.ndarray:
    """Build the generator matrix for one species from an edge-to-rate map.

    Entry (j, i) holds the rate from task i to task j; the diagonal is the
    negative sum of each task's outgoing rates, so every column sums to zero.
    """
    matrix = np.zeros((graph.num_tasks, graph.num_tasks))
    index = graph.edge_index()
    for key, rate in rates.items():
        edge = (int(key[0]), int(key[1]))
        if edge not in index:
            raise UnknownEdge(f"no edge {edge} in the task graph")
        value = float(rate)
        if not np.isfinite(value) or value < 0.0:
            raise NegativeRate(f"rate for edge {edge} must be a finite nonnegative real")
        ceiling = graph.rate_ceilings[species, index[edge]]
        if value > ceiling:
            raise RateAboveCeiling(
                f"rate {value:g} on edge {edge} exceeds ceiling {ceiling:g} for species {species}"
            )
        i, j = edge
        matrix[j, i] += value
        matrix[i, i] -= value
    return matrix


def matrix_exponential(rate_matrix: np.ndarray, t: float) -> np.ndarray:
    """Compute e^(K t) by scaling and squaring with Pade approximants.

    For a generator the result is column-stochastic: columns sum to one and
    entries are nonnegative up to roundoff.
    """
    matrix = np.asarray(rate_matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NumericalFailure("rate matrix contains non-finite entries")
    t = float(t)
    if not np.isfinite(t) or t < 0.0:
        raise NumericalFailure(f"time must be finite and nonnegative, got {t!r}")
    result = scipy.linalg.expm(matrix * t)
    if not np.all(np.isfinite(result)):
        raise NumericalFailure("matrix exponential did not converge to finite values")
    return result


def propagate(x0: AbstractState, plan: RatePlan, t: float) -> AbstractState:
    """Evolve the mean-field state to time t under the plan's generators."""
    if plan.num_species != x0.num_species:
        raise DimensionMismatch(
            f"plan has {plan.num_species} species, state has {x0.num_species}"
        )
    if plan.num_tasks != x0.num_tasks:
        raise DimensionMismatch(
            f"plan has {plan.num_tasks} tasks, state has {x0.num_tasks}"
        )
    counts = np.empty_like(x0.counts)
    for s in range(x0.num_species):
        counts[:, s] = matrix_exponential(plan.rate_matrices[s], t) @ x0.counts[:, s]
    before = x0.species_totals()
    after = counts.sum(axis=0)
    drift = np.abs(after - before)
    limit = TOL.conservation_rel * np.maximum(before, 1.0)
    if np.any(drift > limit):
        worst = int(np.argmax(drift - limit))
        raise NumericalFailure(
            f"species {worst}: population drifted by {drift[worst]:g} during propagation"
        )
    counts = np.maximum(counts, 0.0)
    return AbstractState(counts=counts)


def trait_mean(x: AbstractState, model: TraitModel) -> np.ndarray:
    """Expected aggregated traits per task: counts times species means."""
    if x.num_species != model.num_species:
        raise DimensionMismatch(
            f"state has {x.num_species} species, model has {model.num_species}"
        )
    return x.counts @ model.mu


def trait_variance(x: AbstractState, model: TraitModel) -> np.ndarray:
    """Variance of the aggregated traits per task: squared counts times trait variances."""
    if x.num_species != model.num_species:
        raise DimensionMismatch(
            f"state has {x.num_species} species, model has {model.num_species}"
        )
    return (x.counts * x.counts) @ model.var


def trait_distribution(x: AbstractState, model: TraitModel) -> TraitDistribution:
    return TraitDistribution(mean=trait_mean(x, model), variance=trait_variance(x, model))


def trait_covariance(
    x: AbstractState,
    model: TraitModel,
    first: tuple[int, int],
    second: tuple[int, int],
) -> float:
    """Covariance between two entries of the aggregated trait matrix.

    Entries sharing a trait column covary through the species assigned to
    both tasks; entries of different traits are independent.
    """
    i, j = int(first[0]), int(first[1])
    k, l = int(second[0]), int(second[1])
    for task in (i, k):
        if not 0 <= task < x.num_tasks:
            raise IndexOutOfRange(f"task index {task} outside 0..{x.num_tasks - 1}")
    for trait in (j, l):
        if not 0 <= trait < model.num_traits:
            raise IndexOutOfRange(f"trait index {trait} outside 0..{model.num_traits - 1}")
    if x.num_species != model.num_species:
        raise DimensionMismatch(
            f"state has {x.num_species} species, model has {model.num_species}"
        )
    if j != l:
        return 0.0
    return float(np.sum(x.counts[i, :] * x.counts[k, :] * model.var[:, j]))


def simulate_agents(x0: AbstractState, plan: RatePlan, t: float, seed: int) -> AbstractState:
    """Simulate every agent as an independent continuous-time jump process.

    Initial counts must be integers.  Each agent waits an exponential time
    governed by its task's total exit rate, then jumps along an outgoing
    edge with probability proportional to that edge's rate.  Deterministic
    for a fixed seed; populations are conserved exactly.
    """
    counts = x0.counts
    if np.any(counts != np.round(counts)):
        raise InvariantViolation("agent-level simulation needs integer initial counts")
    if plan.num_species != x0.num_species or plan.num_tasks != x0.num_tasks:
        raise DimensionMismatch("plan and state dimensions disagree")
    t = float(t)
    rng = np.random.default_rng(seed)
    num_tasks = x0.num_tasks
    out = np.zeros_like(counts)
    for s in range(x0.num_species):
        matrix = plan.rate_matrices[s]
        exit_rates = -np.diag(matrix)
        targets: list[np.ndarray] = []
        probs: list[np.ndarray] = []
        for task in range(num_tasks):
            column = matrix[:, task].copy()
            column[task] = 0.0
            nonzero = np.nonzero(column > 0.0)[0]
            targets.append(nonzero)
            total = column[nonzero].sum()
            probs.append(column[nonzero] / total if total > 0.0 else np.array([]))
        for task in range(num_tasks):
            for _ in range(int(round(counts[task, s]))):
                current = task
                elapsed = 0.0
                while True:
                    rate = exit_rates[current]
                    if rate <= 0.0:
                        break
                    elapsed += rng.exponential(1.0 / rate)
                    if elapsed > t:
                        break
                    current = int(rng.choice(targets[current], p=probs[current]))
                out[current, s] += 1.0
    return AbstractState(counts=out)
