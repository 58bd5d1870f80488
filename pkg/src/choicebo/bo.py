"""Choice-driven Bayesian optimisation loop.

One iteration: estimate the Pareto set of the observed options from the
posterior sample bank, maximize a credible-bound acquisition on the
probability that a fresh candidate would be the sole choice against that
set, assemble a five-option query around the proposal, collect the agent's
choice, refit, log metrics. Sessions are immutable snapshots; every step
returns a new one.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from choicebo.benchmarks import get_problem, log_hv_difference
from choicebo.domain import (
    ChoiceObservation,
    ConfigError,
    DimensionMismatchError,
    make_option_table,
    non_dominated_mask,
    simulate_choice,
)
from choicebo.inference import (
    FitConfig,
    SurrogatePosterior,
    _prediction_rng,
    fit_choice_model,
    posterior_from_payload,
    posterior_to_payload,
    predict_latents,
    sample_posterior,
)
from choicebo.kernels import InputScaler
from choicebo.likelihood import LikelihoodConfig

__all__ = [
    "AcquisitionConfig",
    "AcquisitionResult",
    "BoSession",
    "ParetoEstimate",
    "QueryPlan",
    "SessionStateError",
    "acquisition_value",
    "apply_choice",
    "bo_step",
    "build_query",
    "create_session",
    "estimate_pareto_set",
    "optimize_acquisition",
    "propose",
    "refit",
    "session_from_payload",
    "session_to_payload",
    "submit_choice",
]

METRIC_FIELDS = ("iteration", "log_hv_diff", "n_pareto", "acquisition_max", "wall_time_s")

SESSION_STATES = ("initializing", "awaiting-choice", "fitting", "ready", "done")

# independent substream tags under the session seed
_INIT_STREAM = 11
_CHOICE_STREAM = 13
_FIT_STREAM = 17
_ACQ_STREAM = 19
_QUERY_STREAM = 23

_SQRT2 = math.sqrt(2.0)


class SessionStateError(RuntimeError):
    """Operation not valid in the session's current state."""


def _substream(seed: int, tag: int, counter: int = 0) -> int:
    return int(np.random.SeedSequence((int(seed), tag, counter)).generate_state(1)[0])


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class ParetoEstimate:
    """Per-option posterior non-domination probabilities and the members
    clearing the threshold."""

    ids: tuple[int, ...]
    probs: np.ndarray
    indices: tuple[int, ...]
    threshold: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        if len(self.ids) != self.probs.shape[0] or self.probs.ndim != 1:
            raise ValueError("one probability per option id")
        if self.probs.size and (self.probs.min() < 0 or self.probs.max() > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if not self.indices:
            raise ValueError("estimate must keep at least one member")
        filtered = tuple(i for i, p in zip(self.ids, self.probs) if p >= self.threshold)
        if filtered:
            if self.indices != filtered:
                raise ValueError("members must be exactly the ids at or above threshold")
        elif len(self.indices) != 1 or self.prob_of(self.indices[0]) != self.probs.max():
            raise ValueError("empty estimate must fall back to the single best id")
        self.probs.setflags(write=False)

    @property
    def is_fallback(self) -> bool:
        return bool(np.all(self.probs < self.threshold))

    def prob_of(self, option_id: int) -> float:
        return float(self.probs[self.ids.index(option_id)])

    def to_payload(self) -> dict:
        return {
            "ids": list(self.ids),
            "probs": self.probs.tolist(),
            "indices": list(self.indices),
            "threshold": self.threshold,
        }

    @staticmethod
    def from_payload(payload: Mapping) -> "ParetoEstimate":
        return ParetoEstimate(
            tuple(int(i) for i in payload["ids"]),
            np.asarray(payload["probs"], dtype=float),
            tuple(int(i) for i in payload["indices"]),
            float(payload["threshold"]),
        )


@dataclass(frozen=True)
class AcquisitionConfig:
    gamma: float = 0.95
    n_sobol: int = 1024
    refine_steps: int = 30
    pareto_threshold: float = 0.5
    query_size: int = 5

    def __post_init__(self) -> None:
        if not 0.5 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0.5, 1)")
        if self.n_sobol < 1:
            raise ConfigError("n_sobol must be >= 1")
        if self.refine_steps < 0:
            raise ConfigError("refine_steps must be >= 0")
        if not 0 < self.pareto_threshold < 1:
            raise ConfigError("pareto_threshold must lie in (0, 1)")
        if self.query_size != 5:
            raise ConfigError("query_size is fixed at 5")


def estimate_pareto_set(
    post: SurrogatePosterior,
    ids: "Sequence[int] | None" = None,
    threshold: float = 0.5,
) -> ParetoEstimate:
    """Fraction of posterior samples in which each option is non-dominated."""
    ids = tuple(range(post.n_points)) if ids is None else tuple(int(i) for i in ids)
    if not ids:
        raise ValueError("need at least one option id")
    if len(set(ids)) != len(ids):
        raise ValueError("option ids must be distinct")
    if min(ids) < 0 or max(ids) >= post.n_points:
        raise ValueError("option id outside the posterior's training table")
    rows = np.asarray(ids)
    counts = np.zeros(len(ids))
    for s in range(post.n_samples):
        counts[non_dominated_mask(post.values[s][rows])] += 1.0
    probs = counts / post.n_samples
    members = tuple(i for i, p in zip(ids, probs) if p >= threshold)
    if not members:
        members = (ids[int(np.argmax(probs))],)
    return ParetoEstimate(ids, probs, members, threshold)


def _sole_choice_probabilities(draws: np.ndarray, noise_sd: float) -> np.ndarray:
    """(S, 1+P, n_e) joint draws with the candidate first -> per-draw
    probability that the candidate alone is chosen from the set.

    With a singleton choice the rejection integrals collapse to a product
    of normal cdfs over the pairwise differences, so no quadrature is
    needed.
    """
    diffs = draws[:, :1, :] - draws[:, 1:, :]
    z = ndtr(diffs / (_SQRT2 * noise_sd))
    return z.reshape(draws.shape[0], -1).prod(axis=1)


def _nearest_rank_quantile(values: np.ndarray, gamma: float) -> float:
    order = np.sort(np.asarray(values, dtype=float))
    return float(order[int(math.ceil(gamma * order.shape[0])) - 1])


def _candidate_row(x: np.ndarray, post: SurrogatePosterior) -> np.ndarray:
    row = np.atleast_2d(np.asarray(x, dtype=float))
    if row.shape != (1, post.train_points.shape[1]):
        raise DimensionMismatchError("candidate must be a single point of the right width")
    return row


def acquisition_value(
    x: np.ndarray,
    post: SurrogatePosterior,
    pareto: ParetoEstimate,
    config: "AcquisitionConfig | None" = None,
    seed=None,
) -> float:
    """Credible bound on the probability that ``x`` is the sole choice
    against the current Pareto members: the gamma-quantile (nearest rank)
    of the per-draw sole-choice probability."""
    cfg = config or AcquisitionConfig()
    row = _candidate_row(x, post)
    stacked = np.vstack([row, post.train_points[list(pareto.indices)]])
    draws = predict_latents(post, stacked, _prediction_rng(post, seed))
    per_draw = _sole_choice_probabilities(draws, post.params.noise_sd)
    return _nearest_rank_quantile(per_draw, cfg.gamma)


@dataclass(frozen=True)
class AcquisitionResult:
    x_new: np.ndarray  # (n_x,) model coordinates
    value: float
    fallback: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_new", np.asarray(self.x_new, dtype=float))
        self.x_new.setflags(write=False)


def _sobol_candidates(n: int, bounds: np.ndarray, seed: int) -> np.ndarray:
    engine = qmc.Sobol(d=bounds.shape[0], scramble=True, seed=seed)
    exponent = int(math.log2(n))
    if 2**exponent == n:
        unit = engine.random_base2(exponent)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            unit = engine.random(n)
    return bounds[:, 0] + unit * (bounds[:, 1] - bounds[:, 0])


def optimize_acquisition(
    post: SurrogatePosterior,
    pareto: ParetoEstimate,
    bounds: np.ndarray,
    config: "AcquisitionConfig | None" = None,
    seed: int = 0,
) -> AcquisitionResult:
    """Scrambled low-discrepancy scan followed by a compass pattern search.

    Every evaluation reuses one fixed draw seed, so the surface is a
    deterministic function of the candidate and the search is exact
    hill-climbing on it.
    """
    cfg = config or AcquisitionConfig()
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    if bounds.ndim != 2 or bounds.shape[1] != 2 or bounds.shape[0] != post.train_points.shape[1]:
        raise DimensionMismatchError("bounds must be an (n_x, 2) box")
    if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 1] <= bounds[:, 0]):
        raise ConfigError("bounds must be finite with positive span")
    scramble_seed, draw_seed = (
        int(v) for v in np.random.SeedSequence((int(seed), _ACQ_STREAM)).generate_state(2)
    )
    candidates = _sobol_candidates(cfg.n_sobol, bounds, scramble_seed)
    values = np.array(
        [acquisition_value(c, post, pareto, cfg, seed=draw_seed) for c in candidates]
    )
    best = int(np.argmax(values))
    x, fx = candidates[best].copy(), float(values[best])
    if fx <= 0.0:
        # flat surface: nothing to climb, go where the posterior is widest
        spread = post.predictive(candidates).marginal_variance().sum(axis=1)
        return AcquisitionResult(candidates[int(np.argmax(spread))].copy(), 0.0, True)
    step = 0.25 * (bounds[:, 1] - bounds[:, 0])
    for _ in range(cfg.refine_steps):
        improved = False
        for i in range(bounds.shape[0]):
            for sign in (-1.0, 1.0):
                probe = x.copy()
                probe[i] = min(max(probe[i] + sign * step[i], bounds[i, 0]), bounds[i, 1])
                if probe[i] == x[i]:
                    continue
                fp = acquisition_value(probe, post, pareto, cfg, seed=draw_seed)
                if fp > fx:
                    x, fx, improved = probe, fp, True
        if not improved:
            step *= 0.5
    return AcquisitionResult(x, fx, False)


@dataclass(frozen=True)
class QueryPlan:
    ids: tuple[int, ...]  # proposal id first, partners in rank order
    new_id: int
    short: bool


def build_query(
    x_new: np.ndarray,
    post: SurrogatePosterior,
    pareto: ParetoEstimate,
    query_size: int = 5,
    seed=None,
) -> QueryPlan:
    """Partner the proposal with the Pareto members it most probably
    dominates; the fresh point takes the next free option id."""
    if query_size < 2:
        raise ConfigError("query_size must be >= 2")
    row = _candidate_row(x_new, post)
    new_id = post.n_points
    draws = predict_latents(post, row, _prediction_rng(post, seed))[:, 0, :]
    members = list(pareto.indices)
    bank = post.values[:, members, :]
    dominance = ndtr((draws[:, None, :] - bank) / (_SQRT2 * post.params.noise_sd))
    dominance = dominance.prod(axis=2).mean(axis=0)
    ranked = sorted(zip(members, dominance), key=lambda pair: (-pair[1], pair[0]))
    picked = [option_id for option_id, _ in ranked[: query_size - 1]]
    if len(picked) < query_size - 1:
        rest = sorted(
            (i for i in pareto.ids if i not in pareto.indices),
            key=lambda i: (-pareto.prob_of(i), i),
        )
        picked.extend(rest[: query_size - 1 - len(picked)])
    return QueryPlan((new_id, *picked), new_id, len(picked) < query_size - 1)


@dataclass(frozen=True)
class BoSession:
    """Immutable snapshot of one optimisation run."""

    id: str
    bounds: np.ndarray  # (n_x, 2) raw domain box
    options: np.ndarray  # (m, n_x) raw coordinates, row index = option id
    observations: tuple[ChoiceObservation, ...]
    n_e: int
    budget: int
    state: str
    pending_query: "tuple[int, ...] | None"
    query_seq: int  # issued queries so far; doubles as the idempotency token
    init_remaining: tuple[tuple[int, ...], ...]
    iteration: int  # completed loop iterations (0 = initialization only)
    hyper_age: int  # sample-only refits since the last hyperparameter fit
    refit_every: int
    choice_noise_sd: float
    seed: int
    problem: "str | None"
    posterior: "SurrogatePosterior | None"
    pareto: "ParetoEstimate | None"
    pending_value: float  # acquisition value of the pending proposal
    last_fit_seconds: float
    metrics: tuple[Mapping[str, float], ...]
    flags: tuple[str, ...]
    fit_config: FitConfig
    acq_config: AcquisitionConfig
    created_at: str
    updated_at: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "bounds", np.asarray(self.bounds, dtype=float))
        object.__setattr__(self, "options", np.asarray(self.options, dtype=float))
        if self.state not in SESSION_STATES:
            raise ValueError(f"unknown state {self.state!r}")
        if (self.pending_query is not None) != (self.state == "awaiting-choice"):
            raise ValueError("pending query present exactly when awaiting a choice")
        self.bounds.setflags(write=False)
        self.options.setflags(write=False)

    @property
    def n_x(self) -> int:
        return self.bounds.shape[0]

    @property
    def n_options(self) -> int:
        return self.options.shape[0]

    @property
    def in_init(self) -> bool:
        return bool(self.init_remaining)

    def scaler(self) -> InputScaler:
        return InputScaler.from_bounds(self.bounds)

    def model_points(self) -> np.ndarray:
        return self.scaler().transform(self.options)


def _validate_bounds(bounds: np.ndarray) -> np.ndarray:
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    if bounds.ndim != 2 or bounds.shape[1] != 2 or bounds.shape[0] < 1:
        raise ConfigError("bounds must be a nonempty (n_x, 2) box")
    if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 1] <= bounds[:, 0]):
        raise ConfigError("bounds must be finite with positive span")
    return bounds


def create_session(
    bounds: "np.ndarray | None" = None,
    problem: "str | None" = None,
    n_e: int = 2,
    budget: int = 40,
    seed: int = 0,
    session_id: "str | None" = None,
    n_init: int = 20,
    n_init_queries: int = 7,
    choice_noise_sd: float = 0.0,
    fit_config: "FitConfig | None" = None,
    acq_config: "AcquisitionConfig | None" = None,
) -> BoSession:
    """Sample the initial option table and queue the initialization queries."""
    if problem is not None:
        bounds = get_problem(problem).bounds
    elif bounds is None:
        raise ConfigError("need either a benchmark name or explicit bounds")
    bounds = _validate_bounds(bounds)
    if budget < 0:
        raise ConfigError("budget must be >= 0")
    if n_init < 2 or n_init_queries < 1:
        raise ConfigError("need at least two initial options and one query")
    if choice_noise_sd < 0:
        raise ConfigError("choice_noise_sd must be >= 0")
    acq_cfg = acq_config or AcquisitionConfig()
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), _INIT_STREAM)))
    options = rng.uniform(bounds[:, 0], bounds[:, 1], size=(n_init, bounds.shape[0]))
    size = min(acq_cfg.query_size, n_init)
    queries = tuple(
        tuple(int(i) for i in rng.choice(n_init, size=size, replace=False))
        for _ in range(n_init_queries)
    )
    now = _utcnow()
    return BoSession(
        id=session_id or f"session-{seed}",
        bounds=bounds,
        options=options,
        observations=(),
        n_e=int(n_e),
        budget=int(budget),
        state="awaiting-choice",
        pending_query=queries[0],
        query_seq=1,
        init_remaining=queries,
        iteration=0,
        hyper_age=0,
        refit_every=5,
        choice_noise_sd=float(choice_noise_sd),
        seed=int(seed),
        problem=problem,
        posterior=None,
        pareto=None,
        pending_value=float("nan"),
        last_fit_seconds=0.0,
        metrics=(),
        flags=(),
        fit_config=fit_config or FitConfig(),
        acq_config=acq_cfg,
        created_at=now,
        updated_at=now,
    )


def _coerce_answer(session: BoSession, chosen) -> ChoiceObservation:
    pending = session.pending_query
    if isinstance(chosen, ChoiceObservation):
        if chosen.set_indices != pending:
            raise ValueError("answer does not match the pending query")
        return chosen
    ids = tuple(int(i) for i in chosen)
    if not ids:
        raise ValueError("chosen set must be nonempty")
    if len(set(ids)) != len(ids) or not set(ids) <= set(pending):
        raise ValueError("chosen ids must be a distinct subset of the pending query")
    return ChoiceObservation(pending, ids)


def apply_choice(session: BoSession, chosen) -> BoSession:
    """Record an answer to the pending query.

    During initialization the next canned query is issued immediately;
    afterwards the session moves to fitting and waits for refit()."""
    if session.state != "awaiting-choice":
        raise SessionStateError(f"no pending query in state {session.state!r}")
    obs = _coerce_answer(session, chosen)
    observations = session.observations + (obs,)
    remaining = session.init_remaining[1:] if session.in_init else ()
    if remaining:
        return replace(
            session,
            observations=observations,
            init_remaining=remaining,
            pending_query=remaining[0],
            query_seq=session.query_seq + 1,
            updated_at=_utcnow(),
        )
    iteration = session.iteration if session.in_init else session.iteration + 1
    return replace(
        session,
        observations=observations,
        init_remaining=(),
        pending_query=None,
        state="fitting",
        iteration=iteration,
        updated_at=_utcnow(),
    )


def refit(session: BoSession) -> BoSession:
    """Refresh the posterior on all observations.

    Hyperparameters are refit on the first fit and every refit_every
    iterations; in between only the latent sample bank is refreshed."""
    if session.state != "fitting":
        raise SessionStateError(f"refit expects a fitting session, got {session.state!r}")
    started = time.perf_counter()
    points = session.model_points()
    fit_seed = _substream(session.seed, _FIT_STREAM, len(session.observations))
    cfg = replace(session.fit_config, seed=fit_seed)
    full = session.posterior is None or session.hyper_age + 1 >= session.refit_every
    if full:
        post = fit_choice_model(session.observations, points, session.n_e, cfg)
    else:
        post = sample_posterior(session.observations, points, session.posterior.params, cfg)
    pareto = estimate_pareto_set(post, threshold=session.acq_config.pareto_threshold)
    return replace(
        session,
        posterior=post,
        pareto=pareto,
        hyper_age=0 if full else session.hyper_age + 1,
        state="ready",
        last_fit_seconds=time.perf_counter() - started,
        updated_at=_utcnow(),
    )


def _objective_for(session: BoSession, objective) -> "Callable | None":
    if objective is not None:
        return objective
    if session.problem is not None:
        return get_problem(session.problem).evaluate
    return None


def _metrics_row(session: BoSession, wall_time: float) -> Mapping[str, float]:
    # free-form objectives carry no reference front, so no gap metric
    hv_gap = float("nan")
    if session.problem is not None:
        hv_gap = log_hv_difference(session.options, get_problem(session.problem))
    return {
        "iteration": float(session.iteration),
        "log_hv_diff": hv_gap,
        "n_pareto": float(len(session.pareto.indices)),
        "acquisition_max": session.pending_value,
        "wall_time_s": wall_time,
    }


def propose(session: BoSession) -> BoSession:
    """Roll the completed iteration into the metrics table, then either
    issue the next acquisition-built query or finish the run."""
    if session.state != "ready":
        raise SessionStateError(f"propose expects a ready session, got {session.state!r}")
    started = time.perf_counter()
    if session.iteration >= session.budget:
        row = _metrics_row(session, session.last_fit_seconds)
        return replace(
            session,
            state="done",
            metrics=session.metrics + (row,),
            pending_value=float("nan"),
            updated_at=_utcnow(),
        )
    unit_box = np.repeat(np.array([[0.0, 1.0]]), session.n_x, axis=0)
    acq_seed = _substream(session.seed, _ACQ_STREAM, session.iteration)
    result = optimize_acquisition(
        session.posterior, session.pareto, unit_box, session.acq_config, seed=acq_seed
    )
    plan = build_query(
        result.x_new,
        session.posterior,
        session.pareto,
        session.acq_config.query_size,
        seed=_substream(session.seed, _QUERY_STREAM, session.iteration),
    )
    flags = session.flags
    if result.fallback:
        flags += (f"iteration {session.iteration}: flat acquisition, exploring variance",)
    if plan.short:
        flags += (f"iteration {session.iteration}: fewer than {len(plan.ids)} partners",)
    row = _metrics_row(session, session.last_fit_seconds + (time.perf_counter() - started))
    x_raw = session.scaler().inverse(result.x_new[None, :])
    return replace(
        session,
        options=np.vstack([session.options, x_raw]),
        state="awaiting-choice",
        pending_query=plan.ids,
        query_seq=session.query_seq + 1,
        pending_value=result.value,
        metrics=session.metrics + (row,),
        flags=flags,
        updated_at=_utcnow(),
    )


def submit_choice(session: BoSession, chosen) -> BoSession:
    """Answer the pending query and run whatever follow-up work is due."""
    session = apply_choice(session, chosen)
    if session.state == "fitting":
        session = propose(refit(session))
    return session


def _simulated_answer(session: BoSession, objective) -> ChoiceObservation:
    table = make_option_table(session.options)
    rng = np.random.default_rng(
        np.random.SeedSequence((session.seed, _CHOICE_STREAM, session.query_seq))
    )
    return simulate_choice(
        [table[i] for i in session.pending_query],
        objective,
        noise_sd=session.choice_noise_sd,
        seed=rng,
    )


def bo_step(session: BoSession, objective=None, answer=None) -> BoSession:
    """Advance the session by one event.

    With a pending query, consume the given answer, or simulate one when
    the true objectives are available; a live session with no answer is
    returned unchanged, still awaiting its choice."""
    if session.state == "done":
        return session
    if session.state == "fitting":
        return propose(refit(session))
    if session.state == "ready":
        return propose(session)
    if session.state != "awaiting-choice":
        raise SessionStateError(f"cannot step a session in state {session.state!r}")
    resolved = _objective_for(session, objective)
    if answer is None:
        if resolved is None:
            return session
        answer = _simulated_answer(session, resolved)
    return submit_choice(session, answer)


def _float_or_none(value: float) -> "float | None":
    return None if value != value else float(value)


def _fit_config_from_payload(payload: Mapping) -> FitConfig:
    data = dict(payload)
    data["likelihood"] = LikelihoodConfig(**data["likelihood"])
    return FitConfig(**data)


def session_to_payload(session: BoSession) -> dict:
    """JSON-ready snapshot; NaN metrics are stored as nulls."""
    return {
        "id": session.id,
        "bounds": session.bounds.tolist(),
        "options": session.options.tolist(),
        "observations": [
            {"set": list(o.set_indices), "chosen": list(o.chosen_indices)}
            for o in session.observations
        ],
        "n_e": session.n_e,
        "budget": session.budget,
        "state": session.state,
        "pending_query": list(session.pending_query) if session.pending_query else None,
        "query_seq": session.query_seq,
        "init_remaining": [list(q) for q in session.init_remaining],
        "iteration": session.iteration,
        "hyper_age": session.hyper_age,
        "refit_every": session.refit_every,
        "choice_noise_sd": session.choice_noise_sd,
        "seed": session.seed,
        "problem": session.problem,
        "posterior": posterior_to_payload(session.posterior) if session.posterior else None,
        "pareto": session.pareto.to_payload() if session.pareto else None,
        "pending_value": _float_or_none(session.pending_value),
        "last_fit_seconds": session.last_fit_seconds,
        "metrics": [
            {key: _float_or_none(row[key]) for key in METRIC_FIELDS} for row in session.metrics
        ],
        "flags": list(session.flags),
        "fit_config": asdict(session.fit_config),
        "acq_config": asdict(session.acq_config),
        "created_at": session.created_at,
        "updated_at": session.updated_at,
    }


def session_from_payload(payload: Mapping) -> BoSession:
    def _nan(value) -> float:
        return float("nan") if value is None else float(value)

    return BoSession(
        id=payload["id"],
        bounds=np.asarray(payload["bounds"], dtype=float),
        options=np.asarray(payload["options"], dtype=float),
        observations=tuple(
            ChoiceObservation(tuple(o["set"]), tuple(o["chosen"]))
            for o in payload["observations"]
        ),
        n_e=int(payload["n_e"]),
        budget=int(payload["budget"]),
        state=payload["state"],
        pending_query=(
            tuple(int(i) for i in payload["pending_query"])
            if payload["pending_query"] is not None
            else None
        ),
        query_seq=int(payload["query_seq"]),
        init_remaining=tuple(tuple(int(i) for i in q) for q in payload["init_remaining"]),
        iteration=int(payload["iteration"]),
        hyper_age=int(payload["hyper_age"]),
        refit_every=int(payload["refit_every"]),
        choice_noise_sd=float(payload["choice_noise_sd"]),
        seed=int(payload["seed"]),
        problem=payload["problem"],
        posterior=(
            posterior_from_payload(payload["posterior"]) if payload["posterior"] else None
        ),
        pareto=ParetoEstimate.from_payload(payload["pareto"]) if payload["pareto"] else None,
        pending_value=_nan(payload["pending_value"]),
        last_fit_seconds=float(payload["last_fit_seconds"]),
        metrics=tuple(
            {key: _nan(row[key]) for key in METRIC_FIELDS} for row in payload["metrics"]
        ),
        flags=tuple(payload["flags"]),
        fit_config=_fit_config_from_payload(payload["fit_config"]),
        acq_config=AcquisitionConfig(**payload["acq_config"]),
        created_at=payload["created_at"],
        updated_at=payload["updated_at"],
    )
