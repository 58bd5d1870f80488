import json
import time

import numpy as np
import pytest

from choicebo import harness
from choicebo.domain import ConfigError
from choicebo.harness import (
    BoRunConfig,
    FitEvalConfig,
    GenerateDataConfig,
    SelectDimConfig,
    config_from_payload,
    load_config_file,
    resolve_generator,
    run_bo,
    run_fit_eval,
    run_generate_data,
    run_select_dim,
)

FAST_FIT = {
    "vi_steps": 120,
    "vi_mc_samples": 2,
    "ess_burnin": 60,
    "ess_samples": 120,
    "ess_thin": 1,
}
SMALL_ACQ = {"n_sobol": 64, "refine_steps": 4}


def read_manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


def read_rows(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


@pytest.fixture(scope="module")
def toy_data(tmp_path_factory):
    """Small toy train/test dataset files shared across the module."""
    root = tmp_path_factory.mktemp("toydata")
    run_generate_data(
        GenerateDataConfig(n_options=40, n_queries=8, test_queries=12), root / "a", seed=1
    )
    run_generate_data(
        GenerateDataConfig(n_options=40, n_queries=16, test_queries=12), root / "b", seed=1
    )
    return {
        "train8": str(root / "a" / "dataset.json"),
        "train16": str(root / "b" / "dataset.json"),
        "test": str(root / "a" / "test_dataset.json"),
        "root": root,
    }


@pytest.fixture(scope="module")
def fit_eval_run(toy_data, tmp_path_factory):
    out = tmp_path_factory.mktemp("fiteval") / "run"
    summary = run_fit_eval(
        FitEvalConfig(
            train_files=(toy_data["train8"], toy_data["train16"]),
            test_file=toy_data["test"],
            n_e=2,
            reps=2,
            fit=FAST_FIT,
        ),
        out,
        seed=0,
    )
    return out, summary


@pytest.fixture(scope="module")
def bo_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("borun") / "run"
    summary = run_bo(
        BoRunConfig(problem="branin-currin", budget=2, reps=2, fit=FAST_FIT, acq=SMALL_ACQ),
        out,
        seed=0,
    )
    return out, summary


# --- generate-data


def test_generate_data_writes_expected_records(tmp_path):
    out = tmp_path / "run"
    summary = run_generate_data(GenerateDataConfig(), out, seed=0)
    payload = json.loads((out / "dataset.json").read_text())
    assert len(payload["choices"]) == 50
    assert len(payload["options"]) == 200
    assert all(len(c["set"]) == 3 for c in payload["choices"])
    assert summary["files"] == ["dataset.json"]
    assert (out / "figures" / "objectives.png").read_bytes()[:4] == b"\x89PNG"
    manifest = read_manifest(out)
    assert manifest["command"] == "generate-data"
    assert manifest["wall_time_s"] > 0
    assert set(manifest["files"]) == {"config.json", "dataset.json", "figures/objectives.png"}


def test_generate_data_variant_shape(tmp_path):
    cfg = GenerateDataConfig(n_queries=150, set_size=5)
    run_generate_data(cfg, tmp_path / "run", seed=3)
    payload = json.loads((tmp_path / "run" / "dataset.json").read_text())
    assert len(payload["choices"]) == 150
    assert all(len(c["set"]) == 5 for c in payload["choices"])


def test_generate_data_same_seed_same_hash(tmp_path):
    cfg = GenerateDataConfig(n_options=40, n_queries=8)
    run_generate_data(cfg, tmp_path / "a", seed=5)
    run_generate_data(cfg, tmp_path / "b", seed=5)
    run_generate_data(cfg, tmp_path / "c", seed=6)
    hashes = read_manifest(tmp_path / "a")["files"]
    assert hashes == read_manifest(tmp_path / "b")["files"]
    assert read_manifest(tmp_path / "c")["files"]["dataset.json"] != hashes["dataset.json"]


def test_out_dir_refused_unless_forced(tmp_path):
    cfg = GenerateDataConfig(n_options=40, n_queries=8)
    out = tmp_path / "run"
    run_generate_data(cfg, out, seed=5)
    first = read_manifest(out)["files"]
    with pytest.raises(FileExistsError, match="--force"):
        run_generate_data(cfg, out, seed=5)
    (out / "stray.txt").write_text("keep me")
    run_generate_data(cfg, out, seed=5, force=True)
    assert (out / "stray.txt").read_text() == "keep me"
    again = read_manifest(out)["files"]
    assert {k: v for k, v in again.items() if k != "stray.txt"} == first


def test_rerun_from_emitted_config(tmp_path):
    cfg = GenerateDataConfig(n_options=40, n_queries=8, test_queries=6)
    run_generate_data(cfg, tmp_path / "a", seed=9)
    params, seed, paper_scale = load_config_file(tmp_path / "a" / "config.json", "generate-data")
    rebuilt = config_from_payload("generate-data", params)
    run_generate_data(rebuilt, tmp_path / "b", seed=seed, paper_scale=paper_scale)
    assert read_manifest(tmp_path / "a")["files"] == read_manifest(tmp_path / "b")["files"]


# --- fit-eval


def test_fit_eval_report_columns(fit_eval_run):
    out, summary = fit_eval_run
    header, rows = read_rows(out / "accuracy.csv")
    assert header == ["rep", "seed", "Choice-GP8", "Choice-GP16", "Oracle-GP"]
    assert summary["columns"] == ["Choice-GP8", "Choice-GP16", "Oracle-GP"]
    assert len(rows) == 2
    for row in rows:
        for cell in row[2:]:
            assert 0.0 <= float(cell) <= 1.0
    for col, name in zip(range(2, 5), summary["columns"]):
        assert summary["means"][name] == pytest.approx(
            np.mean([float(r[col]) for r in rows])
        )
    assert (out / "figures" / "accuracy.png").exists()


def test_fit_eval_deterministic(fit_eval_run, toy_data, tmp_path):
    out, _ = fit_eval_run
    rerun = tmp_path / "rerun"
    run_fit_eval(
        FitEvalConfig(
            train_files=(toy_data["train8"], toy_data["train16"]),
            test_file=toy_data["test"],
            n_e=2,
            reps=2,
            fit=FAST_FIT,
        ),
        rerun,
        seed=0,
    )
    assert (rerun / "accuracy.csv").read_text() == (out / "accuracy.csv").read_text()


def test_fit_eval_worker_pool_matches_inline(toy_data, tmp_path):
    kwargs = dict(
        train_files=(toy_data["train8"],), test_file=toy_data["test"],
        n_e=1, reps=2, fit=FAST_FIT,
    )
    run_fit_eval(FitEvalConfig(workers=1, **kwargs), tmp_path / "inline", seed=3)
    run_fit_eval(FitEvalConfig(workers=2, **kwargs), tmp_path / "pool", seed=3)
    assert (tmp_path / "inline" / "accuracy.csv").read_text() == (
        tmp_path / "pool" / "accuracy.csv"
    ).read_text()


def test_fit_eval_missing_file_is_io_error(toy_data, tmp_path):
    cfg = FitEvalConfig(
        train_files=(str(tmp_path / "nope.json"),), test_file=toy_data["test"], reps=1
    )
    with pytest.raises(OSError):
        run_fit_eval(cfg, tmp_path / "run", seed=0)


def test_fit_eval_rejects_mixed_generators(toy_data, tmp_path):
    run_generate_data(
        GenerateDataConfig(generator="zdt2", n_options=30, n_queries=8),
        tmp_path / "zdt",
        seed=0,
    )
    cfg = FitEvalConfig(
        train_files=(str(tmp_path / "zdt" / "dataset.json"),),
        test_file=toy_data["test"],
        reps=1,
        fit=FAST_FIT,
    )
    with pytest.raises(ConfigError, match="generator"):
        run_fit_eval(cfg, tmp_path / "run", seed=0)


def test_fit_eval_rejects_duplicate_budgets(toy_data, tmp_path):
    cfg = FitEvalConfig(
        train_files=(toy_data["train8"], toy_data["train8"]),
        test_file=toy_data["test"],
        reps=1,
    )
    with pytest.raises(ConfigError, match="number of choices"):
        run_fit_eval(cfg, tmp_path / "run", seed=0)


# --- bo-run


def test_bo_run_shapes(bo_run):
    out, summary = bo_run
    header, choice_rows = read_rows(out / "choice_gp.csv")
    _, sobol_rows = read_rows(out / "sobol.csv")
    assert header == ["rep", "seed", "iteration", "log_hv_diff", "n_pareto",
                      "acquisition_max", "wall_time_s"]
    assert len(choice_rows) == 2 * 3
    assert len(sobol_rows) == 2 * 3
    for rows in (choice_rows, sobol_rows):
        for rep in ("0", "1"):
            iters = [float(r[2]) for r in rows if r[0] == rep]
            assert iters == [0.0, 1.0, 2.0]
    # baseline is surrogate-free: no pareto counts, no acquisition values
    assert all(r[4] == "" and r[5] == "" for r in sobol_rows)
    assert set(summary["final_median"]) == {"choice_gp", "sobol"}
    assert (out / "figures" / "log_hv_diff.png").exists()


def test_bo_run_shares_initial_design(bo_run):
    out, _ = bo_run
    _, choice_rows = read_rows(out / "choice_gp.csv")
    _, sobol_rows = read_rows(out / "sobol.csv")
    for rep in ("0", "1"):
        start_choice = [float(r[3]) for r in choice_rows if r[0] == rep and r[2] == "0"]
        start_sobol = [float(r[3]) for r in sobol_rows if r[0] == rep and r[2] == "0"]
        assert start_choice == pytest.approx(start_sobol)


def test_bo_run_reproducible(bo_run, tmp_path):
    out, _ = bo_run
    rerun = tmp_path / "rerun"
    run_bo(
        BoRunConfig(problem="branin-currin", budget=2, reps=2, fit=FAST_FIT, acq=SMALL_ACQ),
        rerun,
        seed=0,
    )
    # everything but the wall-time column is bit-reproducible
    for name in ("choice_gp.csv", "sobol.csv"):
        _, first = read_rows(out / name)
        _, second = read_rows(rerun / name)
        assert [r[:6] for r in first] == [r[:6] for r in second]


def test_sobol_baseline_is_fast():
    started = time.perf_counter()
    rows = harness._sobol_rep((0, 123, "branin-currin", 20, 80))
    elapsed = time.perf_counter() - started
    assert len(rows) == 81
    assert elapsed < 60.0
    gaps = [row[3] for row in rows]
    assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))


def test_bo_run_rejects_unknown_problem(tmp_path):
    with pytest.raises(ConfigError):
        run_bo(BoRunConfig(problem="nope", budget=1, reps=1), tmp_path / "run", seed=0)


# --- select-dim


@pytest.fixture(scope="module")
def select_dim_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("selectdim") / "run"
    cfg = SelectDimConfig(
        generator="toy-1d", n_options=30, n_queries=10, test_queries=15,
        ne_max=3, reps=2, fit=FAST_FIT,
    )
    summary = run_select_dim(cfg, out, seed=0)
    return out, summary, cfg


def test_select_dim_table_schema(select_dim_run):
    out, summary, cfg = select_dim_run
    header, rows = read_rows(out / "dimension_table.csv")
    assert header == ["rep", "seed", "n_e", "loo_total", "flagged", "test_accuracy", "selected"]
    for rep in ("0", "1"):
        rep_rows = [r for r in rows if r[0] == rep]
        dims = [int(r[2]) for r in rep_rows]
        assert dims == list(range(1, len(dims) + 1))
        assert sum(int(r[6]) for r in rep_rows) == 1
        for r in rep_rows:
            assert np.isfinite(float(r[3]))
            assert 0.0 <= float(r[5]) <= 1.0
    assert summary["selections"] and all(1 <= s <= cfg.ne_max for s in summary["selections"])
    assert summary["modal_dimension"] in summary["selections"]
    assert (out / "figures" / "loo_totals.png").exists()


def test_select_dim_reproducible(select_dim_run, tmp_path):
    out, _, cfg = select_dim_run
    run_select_dim(cfg, tmp_path / "rerun", seed=0)
    assert (tmp_path / "rerun" / "dimension_table.csv").read_text() == (
        out / "dimension_table.csv"
    ).read_text()


# --- config plumbing


def test_config_from_payload_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown generate-data parameters"):
        config_from_payload("generate-data", {"n_options": 10, "bogus": 1})
    with pytest.raises(ConfigError, match="unknown command"):
        config_from_payload("frobnicate", {})


@pytest.mark.parametrize(
    "command,payload",
    [
        ("generate-data", {"n_options": 1}),
        ("generate-data", {"set_size": 999}),
        ("generate-data", {"noise_sd": -0.1}),
        ("fit-eval", {"train_files": [], "test_file": "x"}),
        ("fit-eval", {"train_files": ["x"], "test_file": ""}),
        ("fit-eval", {"train_files": ["x"], "test_file": "y", "workers": 0}),
        ("bo-run", {"budget": -1}),
        ("bo-run", {"n_init": 1}),
        ("select-dim", {"ne_max": 0}),
        ("select-dim", {"reps": 0}),
    ],
)
def test_config_validation(command, payload):
    with pytest.raises(ConfigError):
        config_from_payload(command, payload)


def test_scale_resolution():
    desk = BoRunConfig().resolve(False)
    paper = BoRunConfig().resolve(True)
    assert (desk.budget, desk.reps, desk.fit["ess_samples"]) == (40, 5, 1000)
    assert (paper.budget, paper.reps, paper.fit["ess_samples"]) == (80, 15, 2000)
    pinned = BoRunConfig(budget=3, reps=2, fit={"ess_samples": 50}).resolve(True)
    assert (pinned.budget, pinned.reps, pinned.fit["ess_samples"]) == (3, 2, 50)
    assert FitEvalConfig(train_files=("x",), test_file="y").resolve(False).reps == 5
    assert FitEvalConfig(train_files=("x",), test_file="y").resolve(True).reps == 10
    assert SelectDimConfig().resolve(False).reps == 5
    assert SelectDimConfig().resolve(True).reps == 10


def test_fit_overrides_validated():
    with pytest.raises(ConfigError, match="derived per repetition"):
        harness._build_fit_config({"seed": 3}, seed=0)
    with pytest.raises(ConfigError, match="bad fit parameters"):
        harness._build_fit_config({"bogus": 3}, seed=0)
    with pytest.raises(ConfigError, match="bad acquisition parameters"):
        harness._build_acq_config({"bogus": 3})
    cfg = harness._build_fit_config({"likelihood": {"quad_nodes": 16}}, seed=4)
    assert cfg.likelihood.quad_nodes == 16 and cfg.seed == 4


def test_load_config_file_forms(tmp_path):
    wrapped = tmp_path / "wrapped.json"
    wrapped.write_text(json.dumps({
        "command": "bo-run", "seed": 7, "paper_scale": True,
        "parameters": {"problem": "zdt1"},
    }))
    params, seed, paper_scale = load_config_file(wrapped, "bo-run")
    assert params == {"problem": "zdt1"} and seed == 7 and paper_scale is True
    with pytest.raises(ConfigError, match="not 'fit-eval'"):
        load_config_file(wrapped, "fit-eval")

    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps({"problem": "zdt1", "seed": 3}))
    params, seed, paper_scale = load_config_file(bare, "bo-run")
    assert params == {"problem": "zdt1"} and seed == 3 and paper_scale is None

    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config_file(bad, "bo-run")
    lst = tmp_path / "list.json"
    lst.write_text("[1]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config_file(lst, "bo-run")


def test_resolve_generator_names():
    toy = resolve_generator("toy")
    assert resolve_generator("toy_objectives").name == "toy"
    assert toy.bounds.tolist() == [[-4.5, 4.5]]
    assert toy.objectives(np.array([[0.0]])).shape == (1, 2)
    one = resolve_generator("toy-1d")
    assert one.objectives(np.array([[0.0]])).shape == (1, 1)
    bench = resolve_generator("branin-currin")
    assert bench.problem is not None and bench.bounds.shape == (2, 2)
    with pytest.raises(ConfigError, match="known generators"):
        resolve_generator("mystery")
