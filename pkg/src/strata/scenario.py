"""Scenario files: one JSON document tying together a team, a task graph,
an initial assignment, a target trait distribution, and solver settings.

Matrices are row-major arrays of arrays; infinities and NaN are rejected.
``schema_version`` guards against stale files.  Saving goes through a
temporary file and an atomic rename so no partial document is ever left
behind.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .dynamics import AbstractState, RatePlan, TaskGraph
from .errors import InvariantViolation, ParseError, SchemaVersionMismatch, StrataError
from .model import TraitKind, TraitModel
from .optimizer import GoalFunction, OptimizerConfig, SolveReport

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Scenario:
    """Everything one solve needs, with cross-dimension validation."""

    model: TraitModel
    graph: TaskGraph
    initial_state: AbstractState
    target: np.ndarray
    goal: GoalFunction
    config: OptimizerConfig

    def __post_init__(self) -> None:
        target = np.asarray(self.target, dtype=float)
        if target.ndim != 2:
            raise InvariantViolation("target must be an M x U matrix")
        target = target.copy()
        target.setflags(write=False)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "goal", GoalFunction.parse(self.goal))

        model, graph, state = self.model, self.graph, self.initial_state
        if graph.num_species != model.num_species:
            raise InvariantViolation(
                f"graph ceilings cover {graph.num_species} species, "
                f"model has {model.num_species}"
            )
        if state.num_species != model.num_species:
            raise InvariantViolation(
                f"initial state has {state.num_species} species, "
                f"model has {model.num_species}"
            )
        if state.num_tasks != graph.num_tasks:
            raise InvariantViolation(
                f"initial state has {state.num_tasks} tasks, graph has {graph.num_tasks}"
            )
        if target.shape != (graph.num_tasks, model.num_traits):
            raise InvariantViolation(
                f"target shape {target.shape} != "
                f"({graph.num_tasks}, {model.num_traits})"
            )
        if not np.all(np.isfinite(target)) or np.any(target < 0.0):
            raise InvariantViolation("target entries must be finite and nonnegative")
        sums = state.species_totals()
        for s, size in enumerate(model.species_sizes):
            if abs(sums[s] - size) > 1e-9 * max(size, 1):
                raise InvariantViolation(
                    f"species {model.species_names[s]!r} has {sums[s]:g} agents "
                    f"in the initial state but size {size}"
                )


# ---------------------------------------------------------------------------
# dict <-> object conversion
# ---------------------------------------------------------------------------


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ParseError(f"missing field {context}.{key}")
    return mapping[key]


def _matrix(values, context: str) -> list[list[float]]:
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{context} is not a numeric matrix: {exc}") from exc
    if arr.ndim != 2:
        raise ParseError(f"{context} must be a matrix (list of equal-length rows)")
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{context} contains non-finite values")
    return arr.tolist()


def _kind_to_dict(kind: TraitKind) -> dict:
    if kind.is_cumulative:
        return {"kind": "cumulative"}
    return {"kind": "non_cumulative", "q_min": kind.q_min}


def _kind_from_dict(data: dict, context: str) -> TraitKind:
    label = _require(data, "kind", context)
    if label == "cumulative":
        return TraitKind.cumulative()
    if label == "non_cumulative":
        return TraitKind.non_cumulative(_require(data, "q_min", context))
    raise ParseError(f"{context}.kind must be 'cumulative' or 'non_cumulative', got {label!r}")


def model_to_dict(model: TraitModel) -> dict:
    return {
        "species_names": list(model.species_names),
        "trait_names": list(model.trait_names),
        "mu": model.mu.tolist(),
        "var": model.var.tolist(),
        "kinds": [_kind_to_dict(kind) for kind in model.kinds],
        "species_sizes": list(model.species_sizes),
    }


def model_from_dict(data: dict, context: str = "model") -> TraitModel:
    kinds = [
        _kind_from_dict(entry, f"{context}.kinds[{idx}]")
        for idx, entry in enumerate(_require(data, "kinds", context))
    ]
    try:
        return TraitModel(
            mu=np.asarray(_matrix(_require(data, "mu", context), f"{context}.mu")),
            var=np.asarray(_matrix(_require(data, "var", context), f"{context}.var")),
            kinds=tuple(kinds),
            species_sizes=tuple(_require(data, "species_sizes", context)),
            species_names=tuple(_require(data, "species_names", context)),
            trait_names=tuple(_require(data, "trait_names", context)),
        )
    except StrataError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{context}: {exc}") from exc


def graph_to_dict(graph: TaskGraph) -> dict:
    return {
        "num_tasks": graph.num_tasks,
        "edges": [list(edge) for edge in graph.edges],
        "rate_ceilings": graph.rate_ceilings.tolist(),
    }


def graph_from_dict(data: dict, context: str = "graph") -> TaskGraph:
    edges = _require(data, "edges", context)
    try:
        edge_tuple = tuple((int(i), int(j)) for i, j in edges)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{context}.edges must be pairs of task indices: {exc}") from exc
    return TaskGraph(
        num_tasks=int(_require(data, "num_tasks", context)),
        edges=edge_tuple,
        rate_ceilings=np.asarray(
            _matrix(_require(data, "rate_ceilings", context), f"{context}.rate_ceilings")
        ),
    )


def config_to_dict(config: OptimizerConfig) -> dict:
    return {
        "eps1": config.eps1,
        "eps2": config.eps2,
        "eps_var": config.eps_var,
        "nu": config.nu,
        "meta_iterations": config.meta_iterations,
        "step_scale": config.step_scale,
        "local_max_iters": config.local_max_iters,
        "seed": config.seed,
    }


def config_from_dict(data: dict, context: str = "config") -> OptimizerConfig:
    kwargs = {}
    for key in ("eps1", "eps2", "eps_var"):
        kwargs[key] = float(_require(data, key, context))
    for key in ("nu", "step_scale"):
        if key in data:
            kwargs[key] = float(data[key])
    for key in ("meta_iterations", "local_max_iters", "seed"):
        if key in data:
            kwargs[key] = int(data[key])
    return OptimizerConfig(**kwargs)


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "model": model_to_dict(scenario.model),
        "graph": graph_to_dict(scenario.graph),
        "initial_state": {"counts": scenario.initial_state.counts.tolist()},
        "target": scenario.target.tolist(),
        "goal": scenario.goal.value,
        "config": config_to_dict(scenario.config),
    }


def scenario_from_dict(data: dict) -> Scenario:
    version = _require(data, "schema_version", "scenario")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"scenario schema_version {version!r} is not supported "
            f"(this package reads version {SCHEMA_VERSION})"
        )
    state_data = _require(data, "initial_state", "scenario")
    return Scenario(
        model=model_from_dict(_require(data, "model", "scenario")),
        graph=graph_from_dict(_require(data, "graph", "scenario")),
        initial_state=AbstractState(
            counts=np.asarray(
                _matrix(_require(state_data, "counts", "initial_state"), "initial_state.counts")
            )
        ),
        target=np.asarray(_matrix(_require(data, "target", "scenario"), "scenario.target")),
        goal=GoalFunction.parse(_require(data, "goal", "scenario")),
        config=config_from_dict(_require(data, "config", "scenario")),
    )


# ---------------------------------------------------------------------------
# plan (solve output) <-> dict
# ---------------------------------------------------------------------------


def plan_to_dict(plan: RatePlan) -> dict:
    return {
        "settle_time": plan.settle_time,
        "rate_matrices": [mat.tolist() for mat in plan.rate_matrices],
    }


def plan_from_dict(data: dict, context: str = "plan") -> RatePlan:
    return RatePlan(
        rate_matrices=np.asarray(
            [_matrix(mat, f"{context}.rate_matrices[{idx}]")
             for idx, mat in enumerate(_require(data, "rate_matrices", context))],
            dtype=float,
        ),
        settle_time=float(_require(data, "settle_time", context)),
    )


def report_to_dict(report: SolveReport, scenario: Scenario | None = None) -> dict:
    """Serialize a solve outcome; wall time is deliberately omitted so that
    reruns with the same seed produce byte-identical files."""
    data = {
        "schema_version": SCHEMA_VERSION,
        "plan": plan_to_dict(report.plan),
        "converged": report.converged,
        "residuals": dict(sorted(report.residuals.items())),
        "restarts_used": report.restarts_used,
        "meta_history": report.meta_history,
    }
    if scenario is not None:
        data["scenario"] = scenario_to_dict(scenario)
    return data


def plan_file_from_dict(data: dict) -> tuple[RatePlan, Scenario | None]:
    version = _require(data, "schema_version", "plan file")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"plan schema_version {version!r} is not supported "
            f"(this package reads version {SCHEMA_VERSION})"
        )
    plan = plan_from_dict(_require(data, "plan", "plan file"))
    embedded = data.get("scenario")
    scenario = scenario_from_dict(embedded) if embedded is not None else None
    return plan, scenario


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def _reject_constant(token: str):
    raise ParseError(f"non-finite JSON constant {token!r} is not allowed")


def load_json_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def write_json_document(data: dict, path) -> None:
    """Serialize and atomically replace the destination file."""
    path = Path(path)
    text = json.dumps(data, indent=2, allow_nan=False) + "\n"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def load_scenario(path) -> Scenario:
    return scenario_from_dict(load_json_document(path))


def save_scenario(scenario: Scenario, path) -> None:
    write_json_document(scenario_to_dict(scenario), path)


def fixture_path(name: str) -> Path:
    """Path of a bundled example scenario (e.g. 'running_example.json')."""
    return Path(resources.files("strata").joinpath("fixtures", name))
