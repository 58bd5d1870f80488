"""Experiment orchestration behind the command line.

Dataset generation, accuracy tables against the regression oracle,
optimisation runs with a Sobol baseline, and latent-dimension tables.
Every command writes into a fresh results directory: result files, a
``figures/`` folder, a resolved ``config.json`` that reproduces the run
byte-for-byte, and a ``manifest.json`` with code version, seed, wall
time, and content hashes. Result directories are append-only; an
existing non-empty directory is refused unless ``force`` is set.
"""

from __future__ import annotations

import csv
import json
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from hashlib import sha256
from importlib import metadata
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .baselines import fit_oracle_gp
from .benchmarks import (
    BenchmarkProblem,
    ChoiceDataset,
    accuracy,
    generate_choice_dataset,
    get_problem,
    list_benchmarks,
    load_dataset,
    log_hv_difference,
    save_dataset,
)
from .bo import _INIT_STREAM, _sobol_candidates, _substream, bo_step, create_session
from .domain import (
    ChoiceObservation,
    ConfigError,
    toy_objective_1d,
    toy_objectives,
)
from .inference import FitConfig, fit_choice_model, predict_choice
from .kernels import InputScaler
from .likelihood import LikelihoodConfig
from .model_selection import select_latent_dimension

__all__ = [
    "BoRunConfig",
    "FitEvalConfig",
    "GenerateDataConfig",
    "GeneratorSpec",
    "SelectDimConfig",
    "config_from_payload",
    "load_config_file",
    "prepare_out_dir",
    "resolve_generator",
    "run_bo",
    "run_fit_eval",
    "run_generate_data",
    "run_select_dim",
]

# seed streams for repetition-level substreams, disjoint from the session tags
_EVAL_STREAM = 31
_SOBOL_STREAM = 37
_DATA_STREAM = 41
_TEST_STREAM = 43
_REP_STREAM = 47

# desk-scale defaults keep a laptop run under coffee-break length; the
# paper-scale column restores the published budgets
_SCALES = {
    False: {"bo_budget": 40, "bo_reps": 5, "eval_reps": 5, "select_reps": 5, "ess_samples": 1000},
    True: {"bo_budget": 80, "bo_reps": 15, "eval_reps": 10, "select_reps": 10, "ess_samples": 2000},
}

_TOY_BOUNDS = ((-4.5, 4.5),)
_TOY_NAMES = {
    "toy": "toy",
    "toy_objectives": "toy",
    "toy-1d": "toy-1d",
    "toy_objective_1d": "toy-1d",
}


# --- objective registry


@dataclass(frozen=True)
class GeneratorSpec:
    """A named ground-truth objective with its input box."""

    name: str
    objectives: Callable[[np.ndarray], np.ndarray]
    bounds: np.ndarray
    problem: "BenchmarkProblem | None" = None

    def scaler(self) -> InputScaler:
        return InputScaler.from_bounds(self.bounds)


def resolve_generator(name: str) -> GeneratorSpec:
    """Look up a toy or benchmark objective by name (aliases accepted)."""
    key = _TOY_NAMES.get(name)
    if key == "toy":
        return GeneratorSpec("toy", toy_objectives, np.asarray(_TOY_BOUNDS, dtype=float))
    if key == "toy-1d":
        return GeneratorSpec("toy-1d", toy_objective_1d, np.asarray(_TOY_BOUNDS, dtype=float))
    if name in list_benchmarks():
        problem = get_problem(name)
        return GeneratorSpec(problem.name, problem.evaluate, problem.bounds, problem)
    known = ", ".join(["toy", "toy-1d", *list_benchmarks()])
    raise ConfigError(f"unknown generator {name!r}; known generators: {known}")


# --- command configs


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass(frozen=True)
class GenerateDataConfig:
    """Parameters for simulated choice datasets (plus an optional test split)."""

    generator: str = "toy"
    n_options: int = 200
    n_queries: int = 50
    set_size: int = 3
    noise_sd: float = 0.0
    test_queries: int = 0
    test_set_size: int = 2

    def __post_init__(self) -> None:
        _require(self.n_options >= 2, "n_options must be >= 2")
        _require(self.n_queries >= 1, "n_queries must be >= 1")
        _require(1 <= self.set_size <= self.n_options, "set_size must lie in [1, n_options]")
        _require(self.noise_sd >= 0, "noise_sd must be >= 0")
        _require(self.test_queries >= 0, "test_queries must be >= 0")
        _require(
            1 <= self.test_set_size <= self.n_options,
            "test_set_size must lie in [1, n_options]",
        )

    def resolve(self, paper_scale: bool) -> "GenerateDataConfig":
        return self


@dataclass(frozen=True)
class FitEvalConfig:
    """Accuracy comparison of choice-trained models against the oracle."""

    train_files: tuple = ()
    test_file: str = ""
    n_e: int = 2
    reps: "int | None" = None
    workers: int = 1
    fit: "Mapping | None" = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "train_files", tuple(str(p) for p in self.train_files))
        _require(len(self.train_files) >= 1, "need at least one training dataset file")
        _require(bool(self.test_file), "test_file is required")
        _require(self.n_e >= 1, "n_e must be >= 1")
        _require(self.reps is None or self.reps >= 1, "reps must be >= 1")
        _require(self.workers >= 1, "workers must be >= 1")

    def resolve(self, paper_scale: bool) -> "FitEvalConfig":
        scale = _SCALES[bool(paper_scale)]
        reps = self.reps if self.reps is not None else scale["eval_reps"]
        fit = _resolved_fit(self.fit, scale["ess_samples"])
        return FitEvalConfig(self.train_files, self.test_file, self.n_e, reps, self.workers, fit)


@dataclass(frozen=True)
class BoRunConfig:
    """Closed-loop optimisation runs plus the surrogate-free Sobol baseline."""

    problem: str = "branin-currin"
    n_e: int = 2
    budget: "int | None" = None
    reps: "int | None" = None
    n_init: int = 20
    n_init_queries: int = 7
    choice_noise_sd: float = 0.0
    workers: int = 1
    fit: "Mapping | None" = None
    acq: "Mapping | None" = None

    def __post_init__(self) -> None:
        _require(self.n_e >= 1, "n_e must be >= 1")
        _require(self.budget is None or self.budget >= 0, "budget must be >= 0")
        _require(self.reps is None or self.reps >= 1, "reps must be >= 1")
        _require(self.n_init >= 2, "n_init must be >= 2")
        _require(self.n_init_queries >= 1, "n_init_queries must be >= 1")
        _require(self.choice_noise_sd >= 0, "choice_noise_sd must be >= 0")
        _require(self.workers >= 1, "workers must be >= 1")

    def resolve(self, paper_scale: bool) -> "BoRunConfig":
        scale = _SCALES[bool(paper_scale)]
        budget = self.budget if self.budget is not None else scale["bo_budget"]
        reps = self.reps if self.reps is not None else scale["bo_reps"]
        fit = _resolved_fit(self.fit, scale["ess_samples"])
        return BoRunConfig(
            self.problem,
            self.n_e,
            budget,
            reps,
            self.n_init,
            self.n_init_queries,
            self.choice_noise_sd,
            self.workers,
            fit,
            dict(self.acq) if self.acq is not None else None,
        )


@dataclass(frozen=True)
class SelectDimConfig:
    """Latent-dimension search repeated over freshly simulated datasets."""

    generator: str = "toy-1d"
    n_options: int = 200
    n_queries: int = 50
    set_size: int = 3
    noise_sd: float = 0.0
    test_queries: int = 200
    test_set_size: int = 2
    ne_max: int = 4
    reps: "int | None" = None
    workers: int = 1
    fit: "Mapping | None" = None

    def __post_init__(self) -> None:
        _require(self.n_options >= 2, "n_options must be >= 2")
        _require(self.n_queries >= 1, "n_queries must be >= 1")
        _require(1 <= self.set_size <= self.n_options, "set_size must lie in [1, n_options]")
        _require(self.noise_sd >= 0, "noise_sd must be >= 0")
        _require(self.test_queries >= 1, "test_queries must be >= 1")
        _require(
            1 <= self.test_set_size <= self.n_options,
            "test_set_size must lie in [1, n_options]",
        )
        _require(self.ne_max >= 1, "ne_max must be >= 1")
        _require(self.reps is None or self.reps >= 1, "reps must be >= 1")
        _require(self.workers >= 1, "workers must be >= 1")

    def resolve(self, paper_scale: bool) -> "SelectDimConfig":
        scale = _SCALES[bool(paper_scale)]
        reps = self.reps if self.reps is not None else scale["select_reps"]
        fit = _resolved_fit(self.fit, scale["ess_samples"])
        return SelectDimConfig(
            self.generator,
            self.n_options,
            self.n_queries,
            self.set_size,
            self.noise_sd,
            self.test_queries,
            self.test_set_size,
            self.ne_max,
            reps,
            self.workers,
            fit,
        )


_COMMAND_CONFIGS = {
    "generate-data": GenerateDataConfig,
    "fit-eval": FitEvalConfig,
    "bo-run": BoRunConfig,
    "select-dim": SelectDimConfig,
}


def config_from_payload(command: str, payload: Mapping):
    """Build the command's config record, rejecting unknown keys."""
    try:
        cls = _COMMAND_CONFIGS[command]
    except KeyError:
        raise ConfigError(f"unknown command {command!r}") from None
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise ConfigError(f"unknown {command} parameters: {', '.join(unknown)}")
    try:
        return cls(**payload)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config_file(path: "str | Path", command: str):
    """Read a config JSON; returns (parameters, seed or None, paper_scale or None).

    Accepts both a bare parameter record and the resolved ``config.json``
    a previous run emitted.
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError("config file must hold a JSON object")
    if "parameters" in payload:
        stated = payload.get("command")
        if stated is not None and stated != command:
            raise ConfigError(f"config file is for {stated!r}, not {command!r}")
        params = payload["parameters"]
        if not isinstance(params, dict):
            raise ConfigError("'parameters' must be a JSON object")
        return params, payload.get("seed"), payload.get("paper_scale")
    params = dict(payload)
    return params, params.pop("seed", None), params.pop("paper_scale", None)


def _resolved_fit(fit: "Mapping | None", ess_samples: int) -> dict:
    out = dict(fit or {})
    out.setdefault("ess_samples", ess_samples)
    return out


def _build_fit_config(payload: "Mapping | None", seed: int) -> FitConfig:
    kwargs = dict(payload or {})
    if "seed" in kwargs:
        raise ConfigError("fit.seed is derived per repetition; do not set it")
    likelihood = kwargs.pop("likelihood", None)
    if likelihood is not None:
        try:
            kwargs["likelihood"] = LikelihoodConfig(**likelihood)
        except TypeError as exc:
            raise ConfigError(f"bad likelihood parameters: {exc}") from None
    try:
        return FitConfig(seed=seed, **kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad fit parameters: {exc}") from None


def _build_acq_config(payload: "Mapping | None"):
    from .bo import AcquisitionConfig

    try:
        return AcquisitionConfig(**dict(payload or {}))
    except TypeError as exc:
        raise ConfigError(f"bad acquisition parameters: {exc}") from None


# --- run directory plumbing


def prepare_out_dir(out_dir: "str | Path", force: bool = False) -> Path:
    """Create the results directory, refusing non-empty ones unless forced."""
    out = Path(out_dir)
    if out.exists():
        if not out.is_dir():
            raise FileExistsError(f"{out} exists and is not a directory")
        if any(out.iterdir()) and not force:
            raise FileExistsError(
                f"output directory {out} is not empty; pass --force to write into it"
            )
    (out / "figures").mkdir(parents=True, exist_ok=True)
    return out


def _code_version() -> str:
    try:
        return metadata.version("choicebo")
    except metadata.PackageNotFoundError:
        return "unversioned"


def _sha256_file(path: Path) -> str:
    digest = sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _config_payload(command: str, seed: int, paper_scale: bool, config) -> dict:
    return {
        "command": command,
        "seed": int(seed),
        "paper_scale": bool(paper_scale),
        "parameters": asdict(config),
    }


def _write_json(path: Path, payload: Mapping) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, fieldnames: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def _finish_run(
    out_dir: Path,
    command: str,
    seed: int,
    paper_scale: bool,
    config,
    started_at: str,
    t0: float,
) -> dict:
    """Write config.json and manifest.json; manifest hashes everything else."""
    _write_json(out_dir / "config.json", _config_payload(command, seed, paper_scale, config))
    hashes = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            hashes[path.relative_to(out_dir).as_posix()] = _sha256_file(path)
    manifest = {
        "command": command,
        "code_version": _code_version(),
        "seed": int(seed),
        "paper_scale": bool(paper_scale),
        "started_at": started_at,
        "wall_time_s": time.perf_counter() - t0,
        "files": hashes,
    }
    _write_json(out_dir / "manifest.json", manifest)
    return manifest


def _timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _map_reps(worker: Callable, tasks: Sequence, workers: int) -> list:
    """Run repetition tasks in a process pool (inline when pool size is 1)."""
    if workers <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(worker, tasks))


# --- generate-data


def run_generate_data(
    config: GenerateDataConfig,
    out_dir: "str | Path",
    seed: int,
    force: bool = False,
    paper_scale: bool = False,
) -> dict:
    """Write dataset.json (and test_dataset.json) for a simulated generator."""
    started_at, t0 = _timestamp(), time.perf_counter()
    cfg = config.resolve(paper_scale)
    out = prepare_out_dir(out_dir, force)
    spec = resolve_generator(cfg.generator)
    source = spec.problem if spec.problem is not None else spec.objectives
    train = generate_choice_dataset(
        source,
        cfg.n_options,
        cfg.n_queries,
        cfg.set_size,
        cfg.noise_sd,
        seed=int(seed),
        bounds=spec.bounds,
    )
    save_dataset(train, out / "dataset.json")
    written = ["dataset.json"]
    if cfg.test_queries > 0:
        test = generate_choice_dataset(
            source,
            cfg.n_options,
            cfg.test_queries,
            cfg.test_set_size,
            cfg.noise_sd,
            seed=_substream(seed, _TEST_STREAM, 0),
            bounds=spec.bounds,
        )
        save_dataset(test, out / "test_dataset.json")
        written.append("test_dataset.json")

    from .plots import render_objective_cloud

    values = spec.objectives(train.options)
    render_objective_cloud(train.options, values, out / "figures" / "objectives.png")
    summary = {
        "generator": spec.name,
        "n_options": cfg.n_options,
        "n_queries": cfg.n_queries,
        "files": written,
    }
    _finish_run(out, "generate-data", seed, paper_scale, cfg, started_at, t0)
    return summary


# --- fit-eval


def _dataset_generator_name(datasets: Sequence[ChoiceDataset]) -> str:
    names = {_TOY_NAMES.get(ds.generator, ds.generator) for ds in datasets}
    if len(names) != 1:
        raise ConfigError(f"datasets disagree on their generator: {sorted(names)}")
    return names.pop()


def _prediction_accuracy(predict: Callable, test: ChoiceDataset, scaler: InputScaler) -> float:
    """Exact-set accuracy of a subset predictor over the test choices."""
    predicted = []
    for obs in test.observations:
        local = predict(scaler.transform(test.options[list(obs.set_indices)]))
        chosen = tuple(obs.set_indices[i] for i in local.chosen_indices)
        predicted.append(ChoiceObservation(obs.set_indices, chosen))
    return accuracy(predicted, test.observations)


def _fit_eval_rep(task: tuple) -> dict:
    rep, rep_seed, train_files, test_file, n_e, fit_payload = task
    datasets = [load_dataset(p) for p in train_files]
    test = load_dataset(test_file)
    spec = resolve_generator(_dataset_generator_name([*datasets, test]))
    scaler = spec.scaler()
    row = {"rep": rep, "seed": rep_seed}
    for ds in datasets:
        post = fit_choice_model(
            ds.observations,
            scaler.transform(ds.options),
            n_e,
            _build_fit_config(fit_payload, rep_seed),
        )
        label = f"Choice-GP{len(ds.observations)}"
        row[label] = _prediction_accuracy(lambda pts: predict_choice(post, pts), test, scaler)
    # the oracle regresses on the true objectives at the richest option table
    largest = max(datasets, key=lambda ds: len(ds.observations))
    oracle = fit_oracle_gp(
        scaler.transform(largest.options), spec.objectives(largest.options), seed=rep_seed
    )
    row["Oracle-GP"] = _prediction_accuracy(oracle.predict_choice, test, scaler)
    return row


def run_fit_eval(
    config: FitEvalConfig,
    out_dir: "str | Path",
    seed: int,
    force: bool = False,
    paper_scale: bool = False,
) -> dict:
    """Accuracy table: one Choice-GP column per training file, plus Oracle-GP."""
    started_at, t0 = _timestamp(), time.perf_counter()
    cfg = config.resolve(paper_scale)
    datasets = [load_dataset(p) for p in cfg.train_files]
    test = load_dataset(cfg.test_file)
    labels = [f"Choice-GP{len(ds.observations)}" for ds in datasets]
    if len(set(labels)) != len(labels):
        raise ConfigError("training datasets must differ in their number of choices")
    _dataset_generator_name([*datasets, test])
    out = prepare_out_dir(out_dir, force)

    tasks = [
        (rep, _substream(seed, _EVAL_STREAM, rep), cfg.train_files, cfg.test_file, cfg.n_e, cfg.fit)
        for rep in range(cfg.reps)
    ]
    rows = _map_reps(_fit_eval_rep, tasks, cfg.workers)
    columns = [*labels, "Oracle-GP"]
    fieldnames = ["rep", "seed", *columns]
    _write_csv(out / "accuracy.csv", fieldnames, [[row[k] for k in fieldnames] for row in rows])
    summary = {
        "columns": columns,
        "reps": cfg.reps,
        "means": {c: float(np.mean([row[c] for row in rows])) for c in columns},
    }
    _write_json(out / "summary.json", summary)

    from .plots import render_accuracy

    render_accuracy({c: [row[c] for row in rows] for c in columns}, out / "figures" / "accuracy.png")
    _finish_run(out, "fit-eval", seed, paper_scale, cfg, started_at, t0)
    return summary


# --- bo-run


def _bo_choice_rep(task: tuple) -> list:
    rep, rep_seed, cfg_payload = task
    cfg = BoRunConfig(**cfg_payload)
    session = create_session(
        problem=cfg.problem,
        n_e=cfg.n_e,
        budget=cfg.budget,
        seed=rep_seed,
        n_init=cfg.n_init,
        n_init_queries=cfg.n_init_queries,
        choice_noise_sd=cfg.choice_noise_sd,
        fit_config=_build_fit_config(cfg.fit, rep_seed),
        acq_config=_build_acq_config(cfg.acq),
    )
    while session.state != "done":
        session = bo_step(session)
    # count-valued columns go out as integers, like the baseline's rows
    return [
        [
            rep,
            rep_seed,
            int(row["iteration"]),
            row["log_hv_diff"],
            int(row["n_pareto"]),
            row["acquisition_max"],
            row["wall_time_s"],
        ]
        for row in session.metrics
    ]


def _sobol_rep(task: tuple) -> list:
    rep, rep_seed, problem_name, n_init, budget = task
    problem = get_problem(problem_name)
    # same init stream as the session, so both methods start from one design
    rng = np.random.default_rng(np.random.SeedSequence((rep_seed, _INIT_STREAM)))
    options = rng.uniform(problem.bounds[:, 0], problem.bounds[:, 1], (n_init, problem.n_x))
    rows = []
    tick = time.perf_counter()
    rows.append([rep, rep_seed, 0, log_hv_difference(options, problem), None, None,
                 time.perf_counter() - tick])
    if budget > 0:
        candidates = _sobol_candidates(
            budget, problem.bounds, _substream(rep_seed, _SOBOL_STREAM, 0)
        )
        for k in range(budget):
            tick = time.perf_counter()
            options = np.vstack([options, candidates[k : k + 1]])
            rows.append([rep, rep_seed, k + 1, log_hv_difference(options, problem), None, None,
                         time.perf_counter() - tick])
    return rows


def run_bo(
    config: BoRunConfig,
    out_dir: "str | Path",
    seed: int,
    force: bool = False,
    paper_scale: bool = False,
) -> dict:
    """Per-iteration hypervolume-gap curves for the model and the baseline."""
    started_at, t0 = _timestamp(), time.perf_counter()
    cfg = config.resolve(paper_scale)
    get_problem(cfg.problem)
    out = prepare_out_dir(out_dir, force)

    rep_seeds = [_substream(seed, _REP_STREAM, rep) for rep in range(cfg.reps)]
    choice_tasks = [(rep, rep_seeds[rep], asdict(cfg)) for rep in range(cfg.reps)]
    sobol_tasks = [
        (rep, rep_seeds[rep], cfg.problem, cfg.n_init, cfg.budget) for rep in range(cfg.reps)
    ]
    choice_rows = [row for rows in _map_reps(_bo_choice_rep, choice_tasks, cfg.workers) for row in rows]
    sobol_rows = [row for rows in _map_reps(_sobol_rep, sobol_tasks, cfg.workers) for row in rows]

    fieldnames = ["rep", "seed", "iteration", "log_hv_diff", "n_pareto",
                  "acquisition_max", "wall_time_s"]
    _write_csv(out / "choice_gp.csv", fieldnames, choice_rows)
    _write_csv(out / "sobol.csv", fieldnames, sobol_rows)

    curves = {
        "choice_gp": _gap_curves(choice_rows, cfg.reps),
        "sobol": _gap_curves(sobol_rows, cfg.reps),
    }
    summary = {
        "problem": cfg.problem,
        "budget": cfg.budget,
        "reps": cfg.reps,
        "final_median": {
            name: float(np.median([c[-1] for c in reps])) for name, reps in curves.items()
        },
    }
    _write_json(out / "summary.json", summary)

    from .plots import render_bo_curves

    render_bo_curves(curves, out / "figures" / "log_hv_diff.png")
    _finish_run(out, "bo-run", seed, paper_scale, cfg, started_at, t0)
    return summary


def _gap_curves(rows: Sequence[Sequence], reps: int) -> list:
    by_rep: dict[int, list] = {rep: [] for rep in range(reps)}
    for row in rows:
        by_rep[int(row[0])].append((int(row[2]), float(row[3])))
    return [[gap for _, gap in sorted(pairs)] for _, pairs in sorted(by_rep.items())]


# --- select-dim


def _select_dim_rep(task: tuple) -> list:
    rep, data_seed, test_seed, fit_seed, cfg_payload = task
    cfg = SelectDimConfig(**cfg_payload)
    spec = resolve_generator(cfg.generator)
    source = spec.problem if spec.problem is not None else spec.objectives
    train = generate_choice_dataset(
        source, cfg.n_options, cfg.n_queries, cfg.set_size, cfg.noise_sd,
        seed=data_seed, bounds=spec.bounds,
    )
    test = generate_choice_dataset(
        source, cfg.n_options, cfg.test_queries, cfg.test_set_size, cfg.noise_sd,
        seed=test_seed, bounds=spec.bounds,
    )
    scaler = spec.scaler()
    points = scaler.transform(train.options)
    fit_cfg = _build_fit_config(cfg.fit, fit_seed)
    result = select_latent_dimension(train.observations, points, cfg.ne_max, fit_cfg)
    rows = []
    for n_e, report in enumerate(result.reports, start=1):
        # a same-seed refit reproduces the searched fit bit for bit
        post = fit_choice_model(train.observations, points, n_e, fit_cfg)
        acc = _prediction_accuracy(lambda pts: predict_choice(post, pts), test, scaler)
        rows.append(
            [rep, fit_seed, n_e, report.total, len(report.flagged), acc,
             int(n_e == result.chosen)]
        )
    return rows


def run_select_dim(
    config: SelectDimConfig,
    out_dir: "str | Path",
    seed: int,
    force: bool = False,
    paper_scale: bool = False,
) -> dict:
    """Dimension table: PSIS-LOO and test accuracy per candidate latent size."""
    started_at, t0 = _timestamp(), time.perf_counter()
    cfg = config.resolve(paper_scale)
    resolve_generator(cfg.generator)
    out = prepare_out_dir(out_dir, force)

    tasks = [
        (
            rep,
            _substream(seed, _DATA_STREAM, rep),
            _substream(seed, _TEST_STREAM, rep + 1),
            _substream(seed, _EVAL_STREAM, rep),
            asdict(cfg),
        )
        for rep in range(cfg.reps)
    ]
    rows = [row for rows in _map_reps(_select_dim_rep, tasks, cfg.workers) for row in rows]
    fieldnames = ["rep", "seed", "n_e", "loo_total", "flagged", "test_accuracy", "selected"]
    _write_csv(out / "dimension_table.csv", fieldnames, rows)

    selections = [int(row[2]) for row in rows if row[6]]
    counts = Counter(selections)
    modal = min(n for n, c in counts.items() if c == max(counts.values()))
    summary = {
        "generator": cfg.generator,
        "reps": cfg.reps,
        "ne_max": cfg.ne_max,
        "selections": selections,
        "selection_counts": {str(k): v for k, v in sorted(counts.items())},
        "modal_dimension": modal,
    }
    _write_json(out / "summary.json", summary)

    from .plots import render_dimension_table

    per_rep = {}
    for row in rows:
        per_rep.setdefault(int(row[0]), []).append((int(row[2]), float(row[3]), bool(row[6])))
    render_dimension_table(per_rep, out / "figures" / "loo_totals.png")
    _finish_run(out, "select-dim", seed, paper_scale, cfg, started_at, t0)
    return summary
