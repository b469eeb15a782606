"""Diversity measures for continuous trait models.

A team is redundant to the extent that a small subset of species can stand
in for the rest: reproduce every excluded species' trait row exactly, or
dominate it entrywise, using natural-number combinations (the coefficients
count recruited agents).  The minimum such subset size is the team's
diversity under exact matching and minimum matching respectively.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from .dynamics import TOL
from .errors import BoundTooLarge, InvariantViolation
from .model import TraitModel, binarize_noncumulative

_MAX_SPECIES = 12          # subset enumeration is exponential; larger teams are refused
_DEFAULT_BUDGET = 10_000_000
_ALPHA_CAP = 50


class CombinationRelation(Enum):
    EQUAL = "equal"
    COVER = "cover"

    @classmethod
    def parse(cls, value) -> "CombinationRelation":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        for member in cls:
            if member.value == text:
                return member
        raise InvariantViolation(f"unknown relation {value!r}; expected 'equal' or 'cover'")


@dataclass(frozen=True)
class MinspeciesResult:
    """A minimum subset of species that accounts for the whole team.

    ``combination_matrix`` has one row per species and one column per
    member: member rows are unit vectors, excluded rows hold the
    natural-number coefficients that reproduce (or cover) them from
    ``reduced_traits``.
    """

    cardinality: int
    member_species: tuple[int, ...]
    combination_matrix: np.ndarray
    reduced_traits: np.ndarray


class _Budget:
    def __init__(self, limit: int):
        self.limit = int(limit)
        self.used = 0

    def tick(self, amount: int = 1) -> None:
        self.used += amount
        if self.used > self.limit:
            raise BoundTooLarge(
                f"combination search exceeded its budget of {self.limit} candidates"
            )


def _default_alpha_max(rows: np.ndarray, target: np.ndarray) -> int:
    positive = rows[rows > 0.0]
    if positive.size == 0 or target.max(initial=0.0) <= 0.0:
        return 1
    bound = int(np.ceil(target.max() / positive.min()))
    return max(1, min(bound, _ALPHA_CAP))


def nonneg_integer_combination(
    rows,
    target,
    relation: CombinationRelation | str = CombinationRelation.EQUAL,
    alpha_max: int | None = None,
    tol: float = TOL.combination_rel,
    budget: int = _DEFAULT_BUDGET,
    _tracker: "_Budget | None" = None,
) -> np.ndarray | None:
    """Find natural-number coefficients combining ``rows`` into ``target``.

    Under EQUAL the combination must match the target entrywise within a
    relative tolerance; under COVER it must dominate it.  The search is a
    pruned but exhaustive enumeration with each coefficient at most
    ``alpha_max``, so ``None`` certifies that no combination exists within
    that bound.  Among feasible vectors the one recruiting the fewest
    agents (smallest coefficient sum, ties lexicographic) is returned.
    Raises BoundTooLarge when the enumeration budget is exhausted instead
    of silently truncating.
    """
    relation = CombinationRelation.parse(relation)
    matrix = np.atleast_2d(np.asarray(rows, dtype=float))
    target = np.asarray(target, dtype=float).ravel()
    if matrix.shape[1] != target.size:
        raise InvariantViolation(
            f"rows have {matrix.shape[1]} traits, target has {target.size}"
        )
    atol = tol * np.maximum(1.0, np.abs(target))
    if alpha_max is None:
        alpha_max = _default_alpha_max(matrix, target)
    alpha_max = int(alpha_max)
    if alpha_max < 1:
        raise InvariantViolation(f"alpha_max must be at least 1, got {alpha_max}")

    num_rows = matrix.shape[0]
    bounds = np.zeros(num_rows, dtype=int)
    for r in range(num_rows):
        row = matrix[r]
        positive = row > 0.0
        if not positive.any():
            bounds[r] = 0  # an all-zero row contributes nothing
            continue
        if relation is CombinationRelation.EQUAL:
            per_trait = np.floor((target[positive] + atol[positive]) / row[positive])
            bounds[r] = int(min(alpha_max, max(0.0, per_trait.min())))
        else:
            per_trait = np.ceil(target[positive] / row[positive])
            bounds[r] = int(min(alpha_max, max(1.0, per_trait.max())))

    # Largest achievable contribution from each suffix of the row list.
    suffix_cap = np.zeros((num_rows + 1, target.size))
    suffix_bound = np.zeros(num_rows + 1, dtype=int)
    for r in range(num_rows - 1, -1, -1):
        suffix_cap[r] = suffix_cap[r + 1] + bounds[r] * matrix[r]
        suffix_bound[r] = suffix_bound[r + 1] + bounds[r]

    tracker = _tracker if _tracker is not None else _Budget(budget)
    coeffs = np.zeros(num_rows, dtype=int)

    def satisfied(total: np.ndarray) -> bool:
        if relation is CombinationRelation.EQUAL:
            return bool(np.all(np.abs(total - target) <= atol))
        return bool(np.all(total >= target - atol))

    def search(level: int, partial: np.ndarray, remaining: int) -> np.ndarray | None:
        if level == num_rows:
            return coeffs.copy() if remaining == 0 and satisfied(partial) else None
        if remaining > suffix_bound[level]:
            return None
        if np.any(target - partial - suffix_cap[level] > atol):
            return None  # the remaining rows cannot close the gap
        row = matrix[level]
        for value in range(min(bounds[level], remaining) + 1):
            tracker.tick()
            total = partial + value * row
            if relation is CombinationRelation.EQUAL and np.any(total - target > atol):
                break  # larger coefficients only overshoot further
            coeffs[level] = value
            found = search(level + 1, total, remaining - value)
            if found is not None:
                return found
        coeffs[level] = 0
        return None

    # Scan totals from zero upward: the first feasible vector recruits the
    # fewest agents, and within a total the scan is lexicographic.
    for total_sum in range(int(suffix_bound[0]) + 1):
        found = search(0, np.zeros_like(target), total_sum)
        if found is not None:
            return found
    return None


def _subset_combination(
    mu: np.ndarray,
    subset: tuple[int, ...],
    relation: CombinationRelation,
    alpha_max: int | None,
    tol: float,
    tracker: _Budget,
) -> dict[int, np.ndarray] | None:
    coefficients: dict[int, np.ndarray] = {}
    rows = mu[list(subset)]
    for excluded in range(mu.shape[0]):
        if excluded in subset:
            continue
        alpha = nonneg_integer_combination(
            rows, mu[excluded], relation, alpha_max, tol, _tracker=tracker
        )
        if alpha is None:
            return None
        coefficients[excluded] = alpha
    return coefficients


def _minspecies(
    model: TraitModel,
    relation: CombinationRelation,
    alpha_max: int | None,
    tol: float,
    budget: int,
) -> MinspeciesResult:
    model = binarize_noncumulative(model)
    mu = model.mu
    num_species = model.num_species
    if num_species > _MAX_SPECIES:
        raise BoundTooLarge(
            f"subset enumeration over {num_species} species exceeds the practical "
            f"limit of {_MAX_SPECIES}"
        )
    tracker = _Budget(budget)
    for cardinality in range(1, num_species + 1):
        # All feasible subsets of this cardinality compete; prefer the one
        # recruiting the fewest agents, then the lexicographically smallest.
        best: tuple[int, tuple[int, ...], dict[int, np.ndarray]] | None = None
        for subset in combinations(range(num_species), cardinality):
            coefficients = _subset_combination(mu, subset, relation, alpha_max, tol, tracker)
            if coefficients is None:
                continue
            recruited = int(sum(int(alpha.sum()) for alpha in coefficients.values()))
            if best is None or recruited < best[0]:
                best = (recruited, subset, coefficients)
        if best is None:
            continue
        _, subset, coefficients = best
        combination = np.zeros((num_species, cardinality), dtype=int)
        for position, member in enumerate(subset):
            combination[member, position] = 1
        for excluded, alpha in coefficients.items():
            combination[excluded] = alpha
        return MinspeciesResult(
            cardinality=cardinality,
            member_species=subset,
            combination_matrix=combination,
            reduced_traits=mu[list(subset)].copy(),
        )
    raise AssertionError("the full species set always satisfies the relation vacuously")


def eigenspecies(
    model: TraitModel,
    alpha_max: int | None = None,
    tol: float = TOL.combination_rel,
    budget: int = _DEFAULT_BUDGET,
) -> MinspeciesResult:
    """Smallest subset whose natural-number combinations reproduce every other species.

    Subsets are tried in increasing cardinality; among feasible subsets of
    the minimal cardinality the one whose combinations recruit the fewest
    agents wins, with lexicographic order as the final tie-break.
    """
    return _minspecies(model, CombinationRelation.EQUAL, alpha_max, tol, budget)


def coverspecies(
    model: TraitModel,
    alpha_max: int | None = None,
    tol: float = TOL.combination_rel,
    budget: int = _DEFAULT_BUDGET,
) -> MinspeciesResult:
    """Smallest subset whose natural-number combinations dominate every other species."""
    return _minspecies(model, CombinationRelation.COVER, alpha_max, tol, budget)
