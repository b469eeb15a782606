"""Stochastic species-trait model.

A team is partitioned into species; each species carries a Gaussian summary
of its traits (per-entry mean and variance).  Traits either aggregate across
agents (cumulative) or do not, in which case the species mean is binarized
against a minimum acceptable value and the binary entry counts agents that
meet the bar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyTeam, NegativeEntry


@dataclass(frozen=True)
class TraitKind:
    """Classification of one trait column.

    ``q_min is None`` marks a cumulative trait whose values add across the
    agents at a task.  Otherwise the trait is non-cumulative and ``q_min``
    is the minimum acceptable value used to binarize species means.
    """

    q_min: float | None = None

    @classmethod
    def cumulative(cls) -> "TraitKind":
        return cls(None)

    @classmethod
    def non_cumulative(cls, q_min: float) -> "TraitKind":
        q = float(q_min)
        if not np.isfinite(q) or q < 0.0:
            raise NegativeEntry(f"q_min must be a finite nonnegative real, got {q_min!r}")
        return cls(q)

    @property
    def is_cumulative(self) -> bool:
        return self.q_min is None


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TraitModel:
    """Species-trait means and variances plus team composition.

    ``mu`` and ``var`` are S x U matrices (species by trait).  The model is
    immutable after construction and safe to share across threads.
    """

    mu: np.ndarray
    var: np.ndarray
    kinds: tuple[TraitKind, ...]
    species_sizes: tuple[int, ...]
    species_names: tuple[str, ...]
    trait_names: tuple[str, ...]

    def __post_init__(self) -> None:
        mu = _frozen_array(self.mu, "mu")
        var = _frozen_array(self.var, "var")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "var", var)
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "species_sizes", tuple(int(n) for n in self.species_sizes))
        object.__setattr__(self, "species_names", tuple(str(n) for n in self.species_names))
        object.__setattr__(self, "trait_names", tuple(str(n) for n in self.trait_names))

        num_species, num_traits = mu.shape
        if num_species == 0 or num_traits == 0:
            raise EmptyTeam("model needs at least one species and one trait")
        if var.shape != mu.shape:
            raise DimensionMismatch(f"var shape {var.shape} != mu shape {mu.shape}")
        if len(self.kinds) != num_traits:
            raise DimensionMismatch(f"{len(self.kinds)} trait kinds for {num_traits} traits")
        if len(self.species_sizes) != num_species:
            raise DimensionMismatch(
                f"{len(self.species_sizes)} species sizes for {num_species} species"
            )
        if len(self.species_names) != num_species:
            raise DimensionMismatch("species_names length does not match mu rows")
        if len(self.trait_names) != num_traits:
            raise DimensionMismatch("trait_names length does not match mu columns")
        if any(n <= 0 for n in self.species_sizes):
            raise EmptyTeam(f"every species needs a positive agent count, got {self.species_sizes}")
        for name, arr in (("mu", mu), ("var", var)):
            if not np.all(np.isfinite(arr)):
                raise NegativeEntry(f"{name} contains non-finite entries")
            if np.any(arr < 0.0):
                raise NegativeEntry(f"{name} contains negative entries")

    @property
    def num_species(self) -> int:
        return self.mu.shape[0]

    @property
    def num_traits(self) -> int:
        return self.mu.shape[1]

    @property
    def total_agents(self) -> int:
        return sum(self.species_sizes)

    def is_binarized(self) -> bool:
        """True when every non-cumulative column already holds 0/1 entries."""
        for j, kind in enumerate(self.kinds):
            if kind.is_cumulative:
                continue
            col = self.mu[:, j]
            if not np.all((col == 0.0) | (col == 1.0)):
                return False
            if np.any(self.var[:, j] != 0.0):
                return False
        return True


def build_trait_model(
    mu,
    var,
    kinds,
    species_sizes,
    species_names=None,
    trait_names=None,
) -> TraitModel:
    """Validate and assemble a TraitModel.

    Non-cumulative columns are left as given; call
    :func:`binarize_noncumulative` before aggregation.
    """
    mu_arr = np.asarray(mu, dtype=float)
    if mu_arr.ndim != 2:
        raise DimensionMismatch(f"mu must be 2-D, got ndim={mu_arr.ndim}")
    num_species, num_traits = mu_arr.shape
    if species_names is None:
        species_names = tuple(f"species_{s + 1}" for s in range(num_species))
    if trait_names is None:
        trait_names = tuple(f"trait_{u + 1}" for u in range(num_traits))
    return TraitModel(
        mu=mu_arr,
        var=np.asarray(var, dtype=float),
        kinds=tuple(kinds),
        species_sizes=tuple(species_sizes),
        species_names=tuple(species_names),
        trait_names=tuple(trait_names),
    )


def binarize_noncumulative(model: TraitModel) -> TraitModel:
    """Binarize non-cumulative trait columns against their minimum values.

    Entries become 1 where the species mean meets or exceeds q_min and 0
    otherwise; their variance is set to 0 because the binary value is a
    deterministic predicate on the mean.  Cumulative columns pass through
    untouched.  A column that already holds 0/1 indicators with zero
    variance is treated as binarized and left alone, which makes the
    operation idempotent even when q_min exceeds 1.
    """
    mu = np.array(model.mu, dtype=float)
    var = np.array(model.var, dtype=float)
    for j, kind in enumerate(model.kinds):
        if kind.is_cumulative:
            continue
        col = mu[:, j]
        if np.all((col == 0.0) | (col == 1.0)) and not np.any(var[:, j]):
            continue
        mu[:, j] = np.where(col >= kind.q_min, 1.0, 0.0)
        var[:, j] = 0.0
    return TraitModel(
        mu=mu,
        var=var,
        kinds=model.kinds,
        species_sizes=model.species_sizes,
        species_names=model.species_names,
        trait_names=model.trait_names,
    )


def sample_trait_matrix(model: TraitModel, seed: int) -> np.ndarray:
    """Draw one realization of the species-trait matrix.

    Cumulative entries are independent normal draws around the model means,
    clamped at zero because traits are nonnegative.  Non-cumulative columns
    are returned as stored.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    draw = rng.normal(loc=model.mu, scale=np.sqrt(model.var))
    draw = np.maximum(draw, 0.0)
    for j, kind in enumerate(model.kinds):
        if not kind.is_cumulative:
            draw[:, j] = model.mu[:, j]
    return draw
