"""Tests for benchmark objectives, hypervolume, and dataset tooling."""

import json
import math

import numpy as np
import pytest

from choicebo.benchmarks import (
    ChoiceDataset,
    ParseError,
    SchemaError,
    SplitSpec,
    accuracy,
    evaluate_benchmark,
    generate_choice_dataset,
    get_problem,
    hypervolume,
    ingest_multioutput_csv,
    list_benchmarks,
    load_dataset,
    log_hv_difference,
    save_dataset,
    true_front,
)
from choicebo.domain import (
    ChoiceObservation,
    ConfigError,
    DimensionMismatchError,
    EmptyInputError,
    check_consistency,
    non_dominated_mask,
    toy_objectives,
)
from oracles import hypervolume_mc

EXPECTED_SHAPES = {
    "branin-currin": (2, 2, 0.0, 1.0),
    "zdt1": (4, 2, 0.0, 1.0),
    "zdt2": (3, 2, 0.0, 1.0),
    "dtlz1": (3, 2, 0.0, 1.0),
    "kursawe": (3, 2, -5.0, 5.0),
    "vehicle-safety": (5, 3, 1.0, 3.0),
}


# --- problem definitions


def test_registry_lists_all_problems():
    assert list_benchmarks() == sorted(EXPECTED_SHAPES)


def test_problem_shapes_and_bounds():
    for name, (n_x, n_o, lo, hi) in EXPECTED_SHAPES.items():
        problem = get_problem(name)
        assert problem.n_x == n_x
        assert problem.n_o == n_o
        assert problem.bounds.shape == (n_x, 2)
        assert np.all(problem.bounds[:, 0] == lo)
        assert np.all(problem.bounds[:, 1] == hi)
        assert problem.ref_point.shape == (n_o,)
        assert problem.true_front_hv > 0


def test_zdt1_pinned_values():
    np.testing.assert_allclose(evaluate_benchmark("zdt1", np.zeros(4)), [0.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(
        evaluate_benchmark("zdt1", [1.0, 0.0, 0.0, 0.0]), [-1.0, 0.0], atol=1e-12
    )


def test_zdt2_pinned_values():
    np.testing.assert_allclose(evaluate_benchmark("zdt2", np.zeros(3)), [0.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(
        evaluate_benchmark("zdt2", [1.0, 0.0, 0.0]), [-1.0, 0.0], atol=1e-12
    )


def test_kursawe_origin():
    np.testing.assert_allclose(evaluate_benchmark("kursawe", np.zeros(3)), [20.0, 0.0], atol=1e-12)


def test_dtlz1_front_plane():
    # with the trailing coordinates at 1/2 the objectives sum to 1/2
    for t in (0.0, 0.25, 0.7, 1.0):
        value = evaluate_benchmark("dtlz1", [t, 0.5, 0.5])
        np.testing.assert_allclose(value.sum(), -0.5, atol=1e-12)


def test_branin_currin_known_minimum():
    x = np.array([(math.pi + 5.0) / 15.0, 2.275 / 15.0])
    value = evaluate_benchmark("branin-currin", x)
    assert abs(-value[0] - 0.397887) < 1e-4
    # Currin's exponential factor extends continuously to the x2 = 0 edge
    edge = evaluate_benchmark("branin-currin", [0.3, 0.0])
    assert np.all(np.isfinite(edge))


def test_vehicle_safety_pinned_values():
    value = evaluate_benchmark("vehicle-safety", np.ones(5))
    np.testing.assert_allclose(value[0], -1661.7078225, atol=1e-9)
    np.testing.assert_allclose(value[2], -0.074, atol=1e-9)
    assert np.all(np.isfinite(evaluate_benchmark("vehicle-safety", np.full(5, 2.0))))


def test_out_of_bounds_rejected():
    with pytest.raises(ValueError):
        evaluate_benchmark("zdt1", [1.5, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        evaluate_benchmark("kursawe", [-6.0, 0.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        evaluate_benchmark("zdt1", [0.5, 0.5])


def test_unknown_problem():
    with pytest.raises(ConfigError):
        get_problem("rosenbrock")


def test_single_versus_batch_shape():
    problem = get_problem("zdt2")
    single = problem.evaluate([0.3, 0.4, 0.5])
    batch = problem.evaluate([[0.3, 0.4, 0.5], [0.1, 0.2, 0.3]])
    assert single.shape == (2,)
    assert batch.shape == (2, 2)
    np.testing.assert_allclose(batch[0], single, atol=1e-15)


# --- hypervolume


def test_hv_two_rectangles():
    assert hypervolume([[1.0, 2.0], [2.0, 1.0]], [0.0, 0.0]) == pytest.approx(3.0, abs=1e-12)


def test_hv_single_point():
    assert hypervolume([[1.0, 1.0]], [0.0, 0.0]) == pytest.approx(1.0, abs=1e-12)


def test_hv_clips_points_below_reference():
    base = [[1.0, 2.0], [2.0, 1.0]]
    with_stragglers = base + [[-1.0, 5.0], [0.5, -3.0]]
    assert hypervolume(with_stragglers, [0.0, 0.0]) == pytest.approx(3.0, abs=1e-12)
    assert hypervolume([[-1.0, -1.0]], [0.0, 0.0]) == 0.0


def test_hv_dominated_points_are_harmless():
    rng = np.random.default_rng(0)
    for n_o in (2, 3):
        points = rng.uniform(0.2, 1.0, size=(25, n_o))
        front = points[non_dominated_mask(points)]
        ref = np.zeros(n_o)
        assert hypervolume(points, ref) == pytest.approx(hypervolume(front, ref), abs=1e-12)


def test_hv_translation_consistent():
    rng = np.random.default_rng(1)
    for n_o in (2, 3):
        points = rng.uniform(0.0, 1.0, size=(15, n_o))
        ref = -0.5 * np.ones(n_o)
        shift = rng.normal(size=n_o) * 10.0
        np.testing.assert_allclose(
            hypervolume(points + shift, ref + shift), hypervolume(points, ref), rtol=1e-9
        )


def test_hv_3d_union_value():
    pts = [[1.0, 1.0, 1.0], [2.0, 0.5, 0.5]]
    assert hypervolume(pts, [0.0, 0.0, 0.0]) == pytest.approx(1.25, abs=1e-12)


def test_hv_matches_monte_carlo():
    rng = np.random.default_rng(5)
    for n_o in (2, 3):
        for rep in range(3):
            points = rng.uniform(0.1, 1.0, size=(30, n_o))
            ref = np.zeros(n_o)
            exact = hypervolume(points, ref)
            estimate, se = hypervolume_mc(
                points[non_dominated_mask(points)], ref, n_draws=200_000, seed=100 + rep
            )
            assert abs(exact - estimate) <= max(4.0 * se, 1e-2 * exact)


def test_hv_monotone_under_insertions():
    rng = np.random.default_rng(9)
    for n_o in (2, 3):
        points = rng.uniform(0.0, 1.0, size=(200, n_o))
        ref = np.zeros(n_o)
        values = [hypervolume(points[: k + 1], ref) for k in range(points.shape[0])]
        diffs = np.diff(values)
        assert np.all(diffs >= -1e-12)


def test_hv_dimension_errors():
    with pytest.raises(DimensionMismatchError):
        hypervolume(np.ones((3, 4)), np.zeros(4))
    with pytest.raises(DimensionMismatchError):
        hypervolume(np.ones((3, 1)), np.zeros(1))
    with pytest.raises(DimensionMismatchError):
        hypervolume(np.ones((3, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        hypervolume([[np.inf, 1.0]], [0.0, 0.0])


# --- log hypervolume difference


def test_log_hv_dense_front_sample_hits_floor():
    problem = get_problem("zdt1")
    t = (np.arange(100_000) + 0.5) / 100_000
    observed = np.column_stack([t, np.zeros_like(t), np.zeros_like(t), np.zeros_like(t)])
    assert log_hv_difference(observed, problem) <= -11.0


def test_log_hv_single_worst_corner():
    problem = get_problem("zdt1")
    value = log_hv_difference(np.ones((1, 4)), problem)
    assert value == pytest.approx(np.log10(problem.true_front_hv), abs=1e-9)


def test_log_hv_monotone_as_observations_grow():
    problem = get_problem("zdt2")
    rng = np.random.default_rng(3)
    observed = rng.uniform(0.0, 1.0, size=(40, 3))
    values = [log_hv_difference(observed[: k + 1], problem) for k in range(40)]
    assert np.all(np.diff(values) <= 1e-12)
    with pytest.raises(EmptyInputError):
        log_hv_difference(np.zeros((0, 3)), problem)


# --- stored front constants


def test_true_front_rows_are_mutually_nondominated():
    for name in ("zdt1", "kursawe"):
        front = true_front(name, 2000, seed=1)
        assert np.all(non_dominated_mask(front))


def test_stored_constants_match_regeneration():
    # closed-form fronts: a coarser regeneration should land very close
    for name in ("zdt1", "zdt2", "dtlz1"):
        problem = get_problem(name)
        front = true_front(name, 20_000)
        regenerated = hypervolume(front, problem.ref_point)
        assert regenerated == pytest.approx(problem.true_front_hv, rel=5e-3)


# --- dataset generation


def test_generate_set_size_one_chooses_everything():
    ds = generate_choice_dataset(get_problem("zdt2"), 20, 15, 1, 0.0, seed=0)
    assert all(o.chosen_indices == o.set_indices for o in ds.observations)


def test_generate_deterministic_payload():
    problem = get_problem("branin-currin")
    a = generate_choice_dataset(problem, 30, 10, 3, 0.1, seed=7)
    b = generate_choice_dataset(problem, 30, 10, 3, 0.1, seed=7)
    dump = lambda d: json.dumps(d.to_payload(), sort_keys=True)
    assert dump(a) == dump(b)
    c = generate_choice_dataset(problem, 30, 10, 3, 0.1, seed=8)
    assert dump(a) != dump(c)


def test_generate_noise_free_choices_are_consistent():
    problem = get_problem("zdt2")
    ds = generate_choice_dataset(problem, 25, 20, 3, 0.0, seed=2)
    values = problem.evaluate(ds.options)
    assert all(check_consistency(o, values) for o in ds.observations)


def test_generate_respects_bounds_and_shape():
    problem = get_problem("vehicle-safety")
    ds = generate_choice_dataset(problem, 40, 5, 4, 0.0, seed=1)
    assert ds.options.shape == (40, 5)
    assert np.all(ds.options >= 1.0) and np.all(ds.options <= 3.0)
    assert ds.generator == "vehicle-safety"
    assert all(len(o.set_indices) == 4 for o in ds.observations)


def test_generate_from_bare_function():
    bounds = np.array([[-4.5, 4.5]])
    ds = generate_choice_dataset(toy_objectives, 200, 50, 3, 0.1, seed=0, bounds=bounds)
    assert ds.options.shape == (200, 1)
    assert len(ds.observations) == 50
    assert ds.generator == "toy_objectives"
    with pytest.raises(ConfigError):
        generate_choice_dataset(toy_objectives, 10, 5, 3, 0.0, seed=0)


def test_generate_validates_arguments():
    problem = get_problem("zdt1")
    with pytest.raises(ValueError):
        generate_choice_dataset(problem, 10, 5, 0, 0.0, seed=0)
    with pytest.raises(ValueError):
        generate_choice_dataset(problem, 10, 5, 11, 0.0, seed=0)
    with pytest.raises(ValueError):
        generate_choice_dataset(problem, 10, 5, 3, -0.1, seed=0)


def test_dataset_file_roundtrip(tmp_path):
    ds = generate_choice_dataset(get_problem("zdt1"), 15, 8, 3, 0.05, seed=4)
    path = tmp_path / "dataset.json"
    save_dataset(ds, path)
    loaded = load_dataset(path)
    np.testing.assert_array_equal(loaded.options, ds.options)
    assert loaded.observations == ds.observations
    assert loaded.seed == ds.seed and loaded.generator == ds.generator
    payload = json.loads(path.read_text())
    assert set(payload) == {"n_x", "options", "choices", "seed", "generator"}
    bad = dict(payload, n_x=3)
    with pytest.raises(SchemaError):
        ChoiceDataset.from_payload(bad)


# --- CSV ingestion


def _write_csv(path, n_rows=40, n_features=6, n_targets=2, seed=0):
    rng = np.random.default_rng(seed)
    header = [f"f{i}" for i in range(n_features)] + [f"y{i}" for i in range(n_targets)]
    lines = [",".join(header)]
    data = rng.normal(size=(n_rows, n_features + n_targets))
    for row in data:
        lines.append(",".join(f"{v:.6f}" for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return header


SMALL_SPLIT = SplitSpec(n_folds=5, train_sizes=(6, 10), test_queries=8, set_size=3, seed=1)


def test_ingest_fold_partition(tmp_path):
    path = tmp_path / "data.csv"
    _write_csv(path)
    folds = ingest_multioutput_csv(path, ["y0", "y1"], SMALL_SPLIT)
    assert len(folds) == 5
    sizes = [f.test_options.shape[0] for f in folds]
    assert sum(sizes) == 40
    for f in folds:
        assert f.train_options.shape[0] + f.test_options.shape[0] == 40
        assert f.train_options.shape[1] == 6
        assert f.train_targets.shape[1] == 2
    # every row lands in exactly one test fold: totals already match, and
    # each fold's train/test targets partition the full multiset of rows
    all_targets = np.sort(np.concatenate([f.test_targets for f in folds], axis=0), axis=0)
    assert all_targets.shape == (40, 2)


def test_ingest_scaling_and_choices(tmp_path):
    path = tmp_path / "data.csv"
    _write_csv(path)
    folds = ingest_multioutput_csv(path, ["y0", "y1"], SMALL_SPLIT)
    for f in folds:
        np.testing.assert_allclose(f.train_options.min(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(f.train_options.max(axis=0), 1.0, atol=1e-12)
        assert sorted(f.train_choices) == [6, 10]
        assert len(f.train_choices[6]) == 6 and len(f.train_choices[10]) == 10
        assert len(f.test_choices) == 8
        for obs in f.train_choices[10]:
            assert len(obs.set_indices) == 3
            assert check_consistency(obs, f.train_targets)
        for obs in f.test_choices:
            assert check_consistency(obs, f.test_targets)


def test_ingest_deterministic(tmp_path):
    path = tmp_path / "data.csv"
    _write_csv(path)
    a = ingest_multioutput_csv(path, ["y0", "y1"], SMALL_SPLIT)
    b = ingest_multioutput_csv(path, ["y0", "y1"], SMALL_SPLIT)
    for fa, fb in zip(a, b):
        np.testing.assert_array_equal(fa.train_options, fb.train_options)
        assert fa.test_choices == fb.test_choices


def test_ingest_error_cases(tmp_path):
    header_only = tmp_path / "header.csv"
    header_only.write_text("a,b,y\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        ingest_multioutput_csv(header_only, ["y"], SMALL_SPLIT)

    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(SchemaError):
        ingest_multioutput_csv(empty, ["y"], SMALL_SPLIT)

    path = tmp_path / "data.csv"
    _write_csv(path)
    with pytest.raises(SchemaError):
        ingest_multioutput_csv(path, ["y0", "nope"], SMALL_SPLIT)

    bad_cell = tmp_path / "bad.csv"
    bad_cell.write_text("a,b,y\n1.0,oops,3.0\n", encoding="utf-8")
    with pytest.raises(ParseError, match=r"row 2.*'b'.*oops"):
        ingest_multioutput_csv(bad_cell, ["y"], SplitSpec(n_folds=2))

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("a,b,y\n1.0,2.0\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        ingest_multioutput_csv(ragged, ["y"], SMALL_SPLIT)

    with pytest.raises(SchemaError):
        ingest_multioutput_csv(path, ["y0", "y1"], SplitSpec(n_folds=60))


# --- accuracy


def _obs(a, c):
    return ChoiceObservation(tuple(a), tuple(c))


def test_accuracy_values():
    truth = [_obs((0, 1, 2), (0,)), _obs((3, 4, 5), (3, 4))]
    assert accuracy(truth, truth) == 1.0
    wrong = [_obs((0, 1, 2), (1,)), _obs((3, 4, 5), (5,))]
    assert accuracy(wrong, truth) == 0.0
    half = [_obs((0, 1, 2), (0,)), _obs((3, 4, 5), (5,))]
    assert accuracy(half, truth) == 0.5
    # chosen-set comparison ignores ordering
    permuted = [_obs((2, 1, 0), (0,)), _obs((5, 4, 3), (4, 3))]
    assert accuracy(permuted, truth) == 1.0


def test_accuracy_validates():
    truth = [_obs((0, 1), (0,))]
    with pytest.raises(ValueError):
        accuracy([], truth)
    with pytest.raises(EmptyInputError):
        accuracy([], [])
    with pytest.raises(ValueError):
        accuracy([_obs((0, 2), (0,))], truth)
