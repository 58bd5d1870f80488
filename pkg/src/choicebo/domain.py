"""Domain types for options and choices, plus exact Pareto utilities.

Everything here is pure and deterministic given its inputs; the only
randomness enters through the explicit seed of :func:`simulate_choice`.
The maximization convention is universal: larger objective values are
better, and minimization problems must be negated before they get here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class DimensionMismatchError(ValueError):
    """Vectors or matrices with incompatible shapes were combined."""


class EmptyInputError(ValueError):
    """An operation that needs at least one row received none."""


class OracleError(RuntimeError):
    """A ground-truth objective function returned non-finite values."""


class NumericError(RuntimeError):
    """A numerical routine failed beyond its recovery strategy."""


class ConfigError(ValueError):
    """A run configuration is malformed or internally inconsistent."""


@dataclass(frozen=True)
class OptionPoint:
    """A candidate option: a point in design space plus its table id."""

    coords: np.ndarray  # shape (n_x,), finite
    id: int  # index into the session's option table

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1:
            raise DimensionMismatchError("coords must be a 1-D vector")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coords must be finite")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "id", int(self.id))


@dataclass(frozen=True)
class ChoiceObservation:
    """One observed choice: the offered set and the subset picked from it."""

    set_indices: tuple[int, ...]  # option ids offered (A), order preserved
    chosen_indices: tuple[int, ...]  # ids picked (C), nonempty subset of A

    def __post_init__(self) -> None:
        set_ids = tuple(int(i) for i in self.set_indices)
        chosen = tuple(int(i) for i in self.chosen_indices)
        if len(set(set_ids)) != len(set_ids):
            raise ValueError("duplicate ids in offered set")
        if len(set(chosen)) != len(chosen):
            raise ValueError("duplicate ids in chosen subset")
        if not chosen:
            raise ValueError("chosen subset must be nonempty")
        if not set(chosen) <= set(set_ids):
            raise ValueError("chosen subset must be contained in the offered set")
        object.__setattr__(self, "set_indices", set_ids)
        object.__setattr__(self, "chosen_indices", chosen)

    @property
    def rejected_indices(self) -> tuple[int, ...]:
        """Ids offered but not chosen, in offer order."""
        chosen = set(self.chosen_indices)
        return tuple(i for i in self.set_indices if i not in chosen)


@dataclass(frozen=True)
class ObjectiveMatrix:
    """Objective evaluations for m options, one row per option (maximize)."""

    values: np.ndarray  # shape (m, n_o), finite

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatchError("values must be an m x n_o matrix")
        if values.shape[1] < 1:
            raise DimensionMismatchError("need at least one objective column")
        if not np.all(np.isfinite(values)):
            raise ValueError("objective values must be finite")
        object.__setattr__(self, "values", values)


def _as_matrix(values: "ObjectiveMatrix | np.ndarray") -> np.ndarray:
    if isinstance(values, ObjectiveMatrix):
        return values.values
    out = np.asarray(values, dtype=float)
    if out.ndim != 2:
        raise DimensionMismatchError("expected an m x n_o matrix")
    return out


def dominates(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> bool:
    """True iff ``a`` Pareto dominates ``b``: no worse anywhere, better somewhere.

    Equal vectors do not dominate each other; at least one strict
    inequality is required.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("objective vectors must be finite")
    return bool(np.all(a >= b) and np.any(a > b))


def _non_dominated_mask_2d(values: np.ndarray) -> np.ndarray:
    # Sort by the first column descending, second descending to break ties.
    # A row is dominated iff some row with strictly larger first column has
    # second column >= its own, or an equal-first-column row beats it in the
    # second column. The running scan below covers both cases exactly,
    # keeping duplicates (equal rows never dominate each other).
    m = values.shape[0]
    order = np.lexsort((-values[:, 1], -values[:, 0]))
    v = values[order]
    mask_sorted = np.ones(m, dtype=bool)
    best_second = -np.inf  # max second column over rows with strictly larger first column
    i = 0
    while i < m:
        # group of equal first-column values
        j = i
        while j < m and v[j, 0] == v[i, 0]:
            j += 1
        group = v[i:j]
        # dominated by an earlier group: second column <= running max, and the
        # earlier row is strictly better in the first column
        dominated = group[:, 1] <= best_second
        # dominated within the group: same first column, strictly larger second
        dominated |= group[:, 1] < group[0, 1]
        mask_sorted[i:j] = ~dominated
        best_second = max(best_second, group[0, 1])
        i = j
    mask = np.empty(m, dtype=bool)
    mask[order] = mask_sorted
    return mask


def non_dominated_mask(values: "ObjectiveMatrix | np.ndarray") -> np.ndarray:
    """Boolean mask of Pareto non-dominated rows (maximization)."""
    v = _as_matrix(values)
    m, n_o = v.shape
    if m == 0:
        raise EmptyInputError("need at least one objective row")
    if n_o == 2:
        return _non_dominated_mask_2d(v)
    # General case: scan rows in decreasing order of column 0 and keep an
    # archive of survivors; only earlier rows in this order can dominate.
    order = np.lexsort(tuple(-v[:, c] for c in range(n_o - 1, -1, -1)))
    v_sorted = v[order]
    keep: list[int] = []
    archive = np.empty((0, n_o))
    mask_sorted = np.zeros(m, dtype=bool)
    for idx in range(m):
        row = v_sorted[idx]
        if archive.shape[0]:
            geq = archive >= row
            dominated = np.any(np.all(geq, axis=1) & np.any(archive > row, axis=1))
        else:
            dominated = False
        if not dominated:
            mask_sorted[idx] = True
            keep.append(idx)
            archive = v_sorted[keep]
    mask = np.empty(m, dtype=bool)
    mask[order] = mask_sorted
    return mask


def non_dominated_set(values: "ObjectiveMatrix | np.ndarray") -> set[int]:
    """Row indices not Pareto dominated by any other row."""
    return set(np.flatnonzero(non_dominated_mask(values)).tolist())


def simulate_choice(
    options: Sequence[OptionPoint],
    g: Callable[[np.ndarray], np.ndarray],
    noise_sd: float = 0.0,
    seed: "int | np.random.Generator | None" = None,
) -> ChoiceObservation:
    """Choice oracle: evaluate ``g``, perturb with iid Gaussian noise, keep
    the non-dominated options.

    ``g`` maps a (m, n_x) batch of coordinates to an (m, n_o) objective
    matrix under the maximization convention.
    """
    if len(options) < 1:
        raise EmptyInputError("need at least one option")
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    coords = np.stack([opt.coords for opt in options])
    values = np.asarray(g(coords), dtype=float)
    if values.ndim != 2 or values.shape[0] != len(options):
        raise OracleError("objective function returned a malformed batch")
    if not np.all(np.isfinite(values)):
        raise OracleError("objective function returned non-finite values")
    if noise_sd > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        values = values + rng.normal(0.0, noise_sd, size=values.shape)
    ids = tuple(opt.id for opt in options)
    chosen_rows = sorted(non_dominated_set(values))
    return ChoiceObservation(ids, tuple(ids[r] for r in chosen_rows))


def check_consistency(obs: ChoiceObservation, latents: np.ndarray) -> bool:
    """Whether latent rows are exactly coherent with one observed choice.

    Two noise-free conditions: every rejected option is weakly dominated
    (componentwise >=) by some chosen option, and no chosen option strictly
    dominates another chosen option. Exact ties between chosen options are
    mutually non-dominating and therefore consistent.
    """
    values = getattr(latents, "values", latents)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise DimensionMismatchError("latents must be an m x n_e matrix")
    max_id = max(obs.set_indices)
    if max_id >= values.shape[0]:
        raise IndexError(f"latent rows cover ids up to {values.shape[0] - 1}, need {max_id}")
    chosen = values[list(obs.chosen_indices)]
    for j in obs.rejected_indices:
        if not np.any(np.all(chosen >= values[j], axis=1)):
            return False
    n_c = chosen.shape[0]
    for p in range(n_c):
        for i in range(n_c):
            if p != i and dominates(chosen[p], chosen[i]):
                return False
    return True


def toy_objectives(coords: np.ndarray) -> np.ndarray:
    """Two-objective periodic test function on scalar inputs."""
    x = np.asarray(coords, dtype=float).reshape(-1)
    return np.column_stack([np.cos(2 * x), -np.sin(2 * x)])


def toy_objective_1d(coords: np.ndarray) -> np.ndarray:
    """Single-objective variant of :func:`toy_objectives`."""
    x = np.asarray(coords, dtype=float).reshape(-1)
    return np.cos(2 * x)[:, None]


def make_option_table(coords: np.ndarray) -> list[OptionPoint]:
    """Wrap an (m, n_x) coordinate matrix as sequentially numbered options."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    return [OptionPoint(row, i) for i, row in enumerate(coords)]
