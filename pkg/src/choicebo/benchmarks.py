"""Multi-objective test problems, hypervolume metrics, and dataset tooling.

Everything here speaks the maximization convention: the classical
minimization forms of the test functions are negated at evaluation time,
and hypervolume measures the region a front dominates from above a
reference point. Reference points and true-front hypervolumes are
precomputed constants regenerated by scripts/compute_front_constants.py.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import qmc

from choicebo.domain import (
    ChoiceObservation,
    ConfigError,
    DimensionMismatchError,
    EmptyInputError,
    OracleError,
    make_option_table,
    non_dominated_mask,
    simulate_choice,
)
from choicebo.kernels import InputScaler

__all__ = [
    "BenchmarkProblem",
    "ChoiceDataset",
    "FoldDataset",
    "ParseError",
    "SchemaError",
    "SplitSpec",
    "accuracy",
    "evaluate_benchmark",
    "generate_choice_dataset",
    "get_problem",
    "hypervolume",
    "ingest_multioutput_csv",
    "list_benchmarks",
    "load_dataset",
    "log_hv_difference",
    "save_dataset",
    "true_front",
]

HV_FLOOR = 1e-12


class SchemaError(ValueError):
    """CSV structure does not match expectations (columns, header, sizes)."""


class ParseError(ValueError):
    """A CSV cell could not be read as a number."""


def _load_data_json(filename: str) -> dict:
    path = resources.files("choicebo").joinpath("data").joinpath(filename)
    with path.open("r", encoding="utf-8") as fh:
        return json.load(fh)


# --- raw objectives, minimization convention, batch (m, n_x) -> (m, n_o)


def _branin_currin(x: np.ndarray) -> np.ndarray:
    # Branin on its usual rectangle reached by rescaling the unit square;
    # Currin's exponential factor extends continuously to x2 = 0
    x1 = 15.0 * x[:, 0] - 5.0
    x2 = 15.0 * x[:, 1]
    branin = (
        (x2 - 5.1 * x1**2 / (4.0 * math.pi**2) + 5.0 * x1 / math.pi - 6.0) ** 2
        + 10.0 * (1.0 - 1.0 / (8.0 * math.pi)) * np.cos(x1)
        + 10.0
    )
    u, v = x[:, 0], x[:, 1]
    factor = np.ones_like(v)
    pos = v > 0
    factor[pos] = 1.0 - np.exp(-1.0 / (2.0 * v[pos]))
    currin = (
        factor
        * (2300.0 * u**3 + 1900.0 * u**2 + 2092.0 * u + 60.0)
        / (100.0 * u**3 + 500.0 * u**2 + 4.0 * u + 20.0)
    )
    return np.column_stack([branin, currin])


def _zdt1(x: np.ndarray) -> np.ndarray:
    f1 = x[:, 0]
    g = 1.0 + 9.0 * x[:, 1:].mean(axis=1)
    return np.column_stack([f1, g * (1.0 - np.sqrt(f1 / g))])


def _zdt2(x: np.ndarray) -> np.ndarray:
    f1 = x[:, 0]
    g = 1.0 + 9.0 * x[:, 1:].mean(axis=1)
    return np.column_stack([f1, g * (1.0 - (f1 / g) ** 2)])


def _dtlz1(x: np.ndarray) -> np.ndarray:
    tail = x[:, 1:] - 0.5
    g = 100.0 * (tail.shape[1] + np.sum(tail**2 - np.cos(20.0 * math.pi * tail), axis=1))
    f1 = 0.5 * x[:, 0] * (1.0 + g)
    f2 = 0.5 * (1.0 - x[:, 0]) * (1.0 + g)
    return np.column_stack([f1, f2])


def _kursawe(x: np.ndarray) -> np.ndarray:
    f1 = np.sum(
        -10.0 * np.exp(-0.2 * np.sqrt(x[:, :-1] ** 2 + x[:, 1:] ** 2)), axis=1
    )
    f2 = np.sum(np.abs(x) ** 0.8 + 5.0 * np.sin(x**3), axis=1)
    return np.column_stack([f1, f2])


def _polynomial_from_terms(terms: list) -> Callable[[np.ndarray], np.ndarray]:
    coeffs = np.array([t[0] for t in terms])
    expo = np.array([t[1] for t in terms], dtype=float)  # (n_terms, n_x)

    def poly(x: np.ndarray) -> np.ndarray:
        return np.prod(x[:, None, :] ** expo[None, :, :], axis=2) @ coeffs

    return poly


def _vehicle_safety_objectives() -> Callable[[np.ndarray], np.ndarray]:
    spec = _load_data_json("vehicle_safety.json")
    polys = [_polynomial_from_terms(obj["terms"]) for obj in spec["objectives"]]

    def raw(x: np.ndarray) -> np.ndarray:
        return np.column_stack([p(x) for p in polys])

    return raw


def _unit_bounds(n_x: int) -> np.ndarray:
    return np.tile([0.0, 1.0], (n_x, 1))


@dataclass(frozen=True)
class _ProblemDef:
    n_x: int
    n_o: int
    bounds: np.ndarray
    raw: Callable[[np.ndarray], np.ndarray]
    front: "Callable[[np.ndarray], np.ndarray] | None"  # t in (0,1) -> min-space rows


_DEFS: dict[str, _ProblemDef] = {
    "branin-currin": _ProblemDef(2, 2, _unit_bounds(2), _branin_currin, None),
    "zdt1": _ProblemDef(
        4, 2, _unit_bounds(4), _zdt1, lambda t: np.column_stack([t, 1.0 - np.sqrt(t)])
    ),
    "zdt2": _ProblemDef(
        3, 2, _unit_bounds(3), _zdt2, lambda t: np.column_stack([t, 1.0 - t**2])
    ),
    "dtlz1": _ProblemDef(
        3, 2, _unit_bounds(3), _dtlz1, lambda t: np.column_stack([0.5 * t, 0.5 * (1.0 - t)])
    ),
    "kursawe": _ProblemDef(3, 2, np.tile([-5.0, 5.0], (3, 1)), _kursawe, None),
    "vehicle-safety": _ProblemDef(
        5, 3, np.tile([1.0, 3.0], (5, 1)), _vehicle_safety_objectives(), None
    ),
}


@dataclass(frozen=True)
class BenchmarkProblem:
    """A ground-truth test problem under the maximization convention."""

    name: str
    n_x: int
    n_o: int
    bounds: np.ndarray  # (n_x, 2)
    raw_objectives: Callable[[np.ndarray], np.ndarray]  # minimization form
    ref_point: np.ndarray  # (n_o,), dominated by every true-front point
    true_front_hv: float

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Negated objectives for a point or a batch; input must be in bounds."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        batch = np.atleast_2d(arr)
        if batch.shape[1] != self.n_x:
            raise DimensionMismatchError(
                f"{self.name} expects {self.n_x} input coordinates, got {batch.shape[1]}"
            )
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if np.any(batch < lo - 1e-9) or np.any(batch > hi + 1e-9):
            raise ValueError(f"input outside the bounds of {self.name}")
        values = -np.asarray(self.raw_objectives(batch), dtype=float)
        return values[0] if single else values


def true_front(name: str, n_samples: int, seed: int = 0) -> np.ndarray:
    """Non-dominated front rows in maximization space.

    Problems with a closed-form front are parameterized directly; the rest
    are scanned with a scrambled low-discrepancy sweep of the input box.
    """
    definition = _definition(name)
    if definition.front is not None:
        t = (np.arange(n_samples) + 0.5) / n_samples
        values = -definition.front(t)
    else:
        sampler = qmc.Sobol(definition.n_x, scramble=True, seed=seed)
        unit = sampler.random_base2(max(1, math.ceil(math.log2(n_samples))))
        lo, hi = definition.bounds[:, 0], definition.bounds[:, 1]
        values = -definition.raw(lo + unit * (hi - lo))
    return values[non_dominated_mask(values)]


def _definition(name: str) -> _ProblemDef:
    if name not in _DEFS:
        raise ConfigError(f"unknown benchmark {name!r}; valid: {', '.join(sorted(_DEFS))}")
    return _DEFS[name]


_FRONT_CONSTANTS: "dict | None" = None


def _front_constants() -> dict:
    global _FRONT_CONSTANTS
    if _FRONT_CONSTANTS is None:
        _FRONT_CONSTANTS = _load_data_json("front_constants.json")
    return _FRONT_CONSTANTS


def list_benchmarks() -> list[str]:
    return sorted(_DEFS)


def get_problem(name: str) -> BenchmarkProblem:
    definition = _definition(name)
    constants = _front_constants().get(name)
    if constants is None:
        raise ConfigError(
            f"no stored front constants for {name!r}; run scripts/compute_front_constants.py"
        )
    return BenchmarkProblem(
        name=name,
        n_x=definition.n_x,
        n_o=definition.n_o,
        bounds=definition.bounds,
        raw_objectives=definition.raw,
        ref_point=np.asarray(constants["ref_point"], dtype=float),
        true_front_hv=float(constants["true_front_hv"]),
    )


def evaluate_benchmark(name: str, x: np.ndarray) -> np.ndarray:
    return get_problem(name).evaluate(x)


# --- hypervolume


def _hv_2d(points: np.ndarray, ref: np.ndarray) -> float:
    order = np.lexsort((-points[:, 1], -points[:, 0]))
    p = points[order]
    prev = np.concatenate(([ref[1]], np.maximum.accumulate(p[:, 1])[:-1]))
    keep = p[:, 1] > prev
    return float(np.sum((p[keep, 0] - ref[0]) * (p[keep, 1] - prev[keep])))


def _hv_3d(points: np.ndarray, ref: np.ndarray) -> float:
    levels = np.unique(points[:, 2])[::-1]
    total = 0.0
    for i, z in enumerate(levels):
        lower = levels[i + 1] if i + 1 < levels.shape[0] else ref[2]
        slab = points[points[:, 2] >= z][:, :2]
        total += _hv_2d(slab, ref[:2]) * (z - lower)
    return total


def hypervolume(front: np.ndarray, ref_point: np.ndarray) -> float:
    """Exact dominated hypervolume above ``ref_point``.

    Points that fail to dominate the reference in some coordinate are
    clipped out; dominated input points are harmless.
    """
    pts = np.atleast_2d(np.asarray(front, dtype=float))
    ref = np.asarray(ref_point, dtype=float).reshape(-1)
    if pts.shape[1] != ref.shape[0]:
        raise DimensionMismatchError("reference point must match objective count")
    if ref.shape[0] not in (2, 3):
        raise DimensionMismatchError("hypervolume supports exactly 2 or 3 objectives")
    if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(ref)):
        raise ValueError("front and reference must be finite")
    pts = pts[np.all(pts >= ref, axis=1)]
    if pts.shape[0] == 0:
        return 0.0
    return _hv_2d(pts, ref) if ref.shape[0] == 2 else _hv_3d(pts, ref)


def log_hv_difference(observed: np.ndarray, problem: BenchmarkProblem) -> float:
    """log10 gap between the true front hypervolume and the observed one."""
    coords = np.atleast_2d(np.asarray(observed, dtype=float))
    if coords.shape[0] == 0:
        raise EmptyInputError("need at least one observed option")
    values = problem.evaluate(coords)
    front = values[non_dominated_mask(values)]
    observed_hv = hypervolume(front, problem.ref_point)
    return float(np.log10(max(problem.true_front_hv - observed_hv, HV_FLOOR)))


# --- dataset generation


@dataclass(frozen=True)
class ChoiceDataset:
    """Generated options plus the choices simulated over them."""

    options: np.ndarray  # (n_options, n_x) raw coordinates
    observations: tuple[ChoiceObservation, ...]
    seed: int
    generator: str

    @property
    def n_x(self) -> int:
        return self.options.shape[1]

    def to_payload(self) -> dict:
        return {
            "n_x": int(self.n_x),
            "options": self.options.tolist(),
            "choices": [
                {"set": list(o.set_indices), "chosen": list(o.chosen_indices)}
                for o in self.observations
            ],
            "seed": int(self.seed),
            "generator": self.generator,
        }

    @staticmethod
    def from_payload(payload: Mapping) -> "ChoiceDataset":
        options = np.asarray(payload["options"], dtype=float)
        if options.ndim != 2 or options.shape[1] != payload["n_x"]:
            raise SchemaError("options table does not match declared n_x")
        observations = tuple(
            ChoiceObservation(tuple(c["set"]), tuple(c["chosen"]))
            for c in payload["choices"]
        )
        return ChoiceDataset(options, observations, int(payload["seed"]), payload["generator"])


def save_dataset(dataset: ChoiceDataset, path: "str | Path") -> None:
    Path(path).write_text(
        json.dumps(dataset.to_payload(), indent=2, sort_keys=True), encoding="utf-8"
    )


def load_dataset(path: "str | Path") -> ChoiceDataset:
    return ChoiceDataset.from_payload(json.loads(Path(path).read_text(encoding="utf-8")))


def generate_choice_dataset(
    objectives: "BenchmarkProblem | Callable[[np.ndarray], np.ndarray]",
    n_options: int,
    n_queries: int,
    set_size: int,
    noise_sd: float,
    seed: int,
    bounds: "np.ndarray | None" = None,
) -> ChoiceDataset:
    """Uniform random options plus simulated choices over random subsets."""
    if isinstance(objectives, BenchmarkProblem):
        g, box, generator = objectives.evaluate, objectives.bounds, objectives.name
    else:
        if bounds is None:
            raise ConfigError("bounds are required for a bare objective function")
        g = objectives
        box = np.atleast_2d(np.asarray(bounds, dtype=float))
        generator = getattr(objectives, "__name__", "custom")
    if not 1 <= set_size <= n_options:
        raise ValueError("set_size must lie in [1, n_options]")
    if n_queries < 0 or noise_sd < 0:
        raise ValueError("n_queries and noise_sd must be nonnegative")
    rng = np.random.default_rng(seed)
    coords = rng.uniform(box[:, 0], box[:, 1], size=(n_options, box.shape[0]))
    table = make_option_table(coords)
    observations = tuple(
        simulate_choice(
            [table[i] for i in rng.choice(n_options, size=set_size, replace=False)],
            g,
            noise_sd=noise_sd,
            seed=rng,
        )
        for _ in range(n_queries)
    )
    return ChoiceDataset(coords, observations, int(seed), generator)


# --- CSV ingestion


@dataclass(frozen=True)
class SplitSpec:
    """Cross-validation and choice-generation protocol for a CSV dataset."""

    n_folds: int = 5
    train_sizes: tuple[int, ...] = (100, 300)
    test_queries: int = 200
    set_size: int = 3
    noise_sd: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class FoldDataset:
    """One cross-validation fold with simulated train and test choices."""

    fold: int
    train_options: np.ndarray  # (n_train, n_x), min-max scaled on train stats
    train_targets: np.ndarray  # (n_train, n_o)
    test_options: np.ndarray
    test_targets: np.ndarray
    train_choices: Mapping[int, tuple[ChoiceObservation, ...]]  # keyed by N
    test_choices: tuple[ChoiceObservation, ...]


def _table_objectives(coords: np.ndarray, values: np.ndarray) -> Callable:
    """Ground-truth lookup for options drawn from a fixed table."""

    def g(batch: np.ndarray) -> np.ndarray:
        rows = []
        for point in np.atleast_2d(batch):
            hits = np.flatnonzero(np.all(coords == point, axis=1))
            if hits.shape[0] == 0:
                raise OracleError("option coordinates not found in the table")
            rows.append(values[hits[0]])
        return np.stack(rows)

    return g


def _simulate_over_table(
    coords: np.ndarray,
    values: np.ndarray,
    n_queries: int,
    set_size: int,
    noise_sd: float,
    rng: np.random.Generator,
) -> tuple[ChoiceObservation, ...]:
    table = make_option_table(coords)
    g = _table_objectives(coords, values)
    return tuple(
        simulate_choice(
            [table[i] for i in rng.choice(coords.shape[0], size=set_size, replace=False)],
            g,
            noise_sd=noise_sd,
            seed=rng,
        )
        for _ in range(n_queries)
    )


def ingest_multioutput_csv(
    path: "str | Path",
    target_columns: Sequence[str],
    spec: "SplitSpec | None" = None,
) -> list[FoldDataset]:
    """Cross-validation folds from a numeric CSV with named target columns.

    Feature columns become option coordinates (min-max scaled on each
    fold's training rows); target columns are the ground truth used to
    simulate train and test choices, under the maximization convention.
    """
    spec = spec or SplitSpec()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty CSV: no header row") from None
        rows = list(reader)
    if not rows:
        raise SchemaError("CSV has a header but no data rows")
    missing = [c for c in target_columns if c not in header]
    if missing:
        raise SchemaError(f"target columns not in header: {', '.join(missing)}")
    if len(target_columns) == len(header):
        raise SchemaError("no feature columns left after removing targets")

    target_idx = [header.index(c) for c in target_columns]
    feature_idx = [i for i in range(len(header)) if i not in target_idx]
    data = np.empty((len(rows), len(header)))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaError(f"row {r + 2} has {len(row)} cells, header has {len(header)}")
        for c, cell in enumerate(row):
            try:
                data[r, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"row {r + 2}, column {header[c]!r}: not numeric: {cell!r}"
                ) from None
    features = data[:, feature_idx]
    targets = data[:, target_idx]

    n = data.shape[0]
    if spec.n_folds < 2 or spec.n_folds > n:
        raise SchemaError(f"cannot split {n} rows into {spec.n_folds} folds")
    rng = np.random.default_rng(spec.seed)
    assignment = np.array_split(rng.permutation(n), spec.n_folds)

    folds = []
    for k, test_rows in enumerate(assignment):
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_rows] = False
        train_raw, test_raw = features[train_mask], features[test_rows]
        if min(train_raw.shape[0], test_raw.shape[0]) < spec.set_size:
            raise SchemaError("a fold has fewer rows than the choice set size")
        scaler = InputScaler.from_data(train_raw)
        train_options = scaler.transform(train_raw)
        test_options = scaler.transform(test_raw)
        train_targets = targets[train_mask]
        test_targets = targets[test_rows]
        train_choices = {
            size: _simulate_over_table(
                train_options, train_targets, size, spec.set_size, spec.noise_sd, rng
            )
            for size in spec.train_sizes
        }
        test_choices = _simulate_over_table(
            test_options, test_targets, spec.test_queries, spec.set_size, spec.noise_sd, rng
        )
        folds.append(
            FoldDataset(
                fold=k,
                train_options=train_options,
                train_targets=train_targets,
                test_options=test_options,
                test_targets=test_targets,
                train_choices=train_choices,
                test_choices=test_choices,
            )
        )
    return folds


def accuracy(
    predicted: Sequence[ChoiceObservation], truth: Sequence[ChoiceObservation]
) -> float:
    """Fraction of aligned observations whose chosen sets match exactly."""
    if len(predicted) != len(truth):
        raise ValueError("prediction and truth lists differ in length")
    if not truth:
        raise EmptyInputError("need at least one observation pair")
    hits = 0
    for k, (p, t) in enumerate(zip(predicted, truth)):
        if set(p.set_indices) != set(t.set_indices):
            raise ValueError(f"offered sets differ at index {k}")
        hits += set(p.chosen_indices) == set(t.chosen_indices)
    return hits / len(truth)
