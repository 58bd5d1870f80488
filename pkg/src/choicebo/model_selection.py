"""Leave-one-out predictive fit via Pareto-smoothed importance sampling.

The latent dimension is chosen by fitting models of increasing dimension
and stopping at the first one whose PSIS-LOO total drops below its
predecessor. Importance weights are inverse per-observation likelihoods
over the stored posterior samples; their right tail is stabilized by
replacing the top order statistics with expected order statistics of a
fitted generalized Pareto distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from choicebo.domain import ChoiceObservation, NumericError
from choicebo.inference import FitConfig, SurrogatePosterior, fit_choice_model
from choicebo.likelihood import LikelihoodEngine

__all__ = [
    "KHAT_THRESHOLD",
    "LooReport",
    "DimensionSelectionError",
    "SelectionResult",
    "importance_weights",
    "fit_gpd_tail",
    "pareto_smooth",
    "psis_loo",
    "select_latent_dimension",
]

KHAT_THRESHOLD = 0.7
_MIN_WEIGHTS = 25
_MIN_TAIL = 5


@dataclass(frozen=True)
class LooReport:
    """Per-observation leave-one-out log predictive densities plus diagnostics."""

    per_obs_lpd: np.ndarray
    total: float
    khat: np.ndarray
    flagged: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.per_obs_lpd.shape != self.khat.shape:
            raise ValueError("per-observation arrays must align")
        if not math.isclose(self.total, float(self.per_obs_lpd.sum()), abs_tol=1e-9):
            raise ValueError("total must equal the sum of per-observation terms")
        self.per_obs_lpd.setflags(write=False)
        self.khat.setflags(write=False)

    @property
    def n_obs(self) -> int:
        return self.per_obs_lpd.shape[0]

    def to_payload(self) -> dict:
        return {
            "per_obs_lpd": self.per_obs_lpd.tolist(),
            "total": float(self.total),
            "khat": [float(k) for k in self.khat],
            "flagged": list(self.flagged),
        }


def _observation_engine(post: SurrogatePosterior, observations) -> LikelihoodEngine:
    cfg = replace(post.config.likelihood, noise_sd=post.params.noise_sd)
    return LikelihoodEngine(observations, post.n_points, cfg)


def importance_weights(post: SurrogatePosterior, obs: ChoiceObservation) -> np.ndarray:
    """Inverse per-sample likelihood of one training observation.

    The likelihood clamp bounds every factor away from zero, so the weights
    are always finite.
    """
    engine = _observation_engine(post, [obs])
    loglik = engine.log_likelihood(post.values)
    return np.exp(-loglik)


def fit_gpd_tail(exceedances: np.ndarray) -> tuple[float, float]:
    """Generalized Pareto (shape, scale) for positive sorted exceedances.

    Profile likelihood in the transformed rate b = shape/scale, averaged
    over a data-driven grid with its normalized likelihood weights; the
    shape is then shrunk toward 1/2 by a weakly informative prior.
    """
    x = np.asarray(exceedances, dtype=float)
    n = x.shape[0]
    if n <= 4:
        raise ValueError("need more than 4 exceedances")
    grid = 30 + int(math.sqrt(n))
    i = np.arange(1, grid + 1, dtype=float)
    bs = (1.0 - np.sqrt(grid / (i - 0.5))) / (3.0 * x[n // 4]) + 1.0 / x[-1]
    ks = np.mean(np.log1p(-bs[:, None] * x[None, :]), axis=1)
    profile = n * (np.log(-bs / ks) - ks - 1.0)
    # dominated grid points overflow to zero weight, which is what we want
    with np.errstate(over="ignore"):
        weights = 1.0 / np.sum(np.exp(profile[None, :] - profile[:, None]), axis=1)
    weights /= weights.sum()
    b = float(weights @ bs)
    k = float(np.mean(np.log1p(-b * x)))
    sigma = -k / b
    # weakly informative prior on the shape
    a = 10.0
    k = k * n / (n + a) + a * 0.5 / (n + a)
    return k, sigma


def _gpd_quantiles(p: np.ndarray, k: float, sigma: float) -> np.ndarray:
    if abs(k) < 1e-15:
        return -sigma * np.log1p(-p)
    return sigma * np.expm1(-k * np.log1p(-p)) / k


def pareto_smooth(weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Replace the largest weights with smoothed GPD order statistics.

    The tail is the M = min(ceil(0.2 S), ceil(3 sqrt(S))) weights strictly
    above the (M+1)-th largest; they are refitted as expected order
    statistics of the fitted tail distribution and truncated at the raw
    maximum. A tail too degenerate to fit (fewer than five distinct
    exceedances, e.g. all weights equal) returns the input unchanged with
    khat = -inf.
    """
    w = np.asarray(weights, dtype=float)
    s = w.shape[0]
    if w.ndim != 1 or s < _MIN_WEIGHTS:
        raise ValueError(f"need a flat array of at least {_MIN_WEIGHTS} weights")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be positive and finite")

    m = min(math.ceil(0.2 * s), math.ceil(3.0 * math.sqrt(s)))
    order = np.argsort(w)
    cutoff = w[order[-(m + 1)]]
    tail = order[w[order] > cutoff]
    if tail.shape[0] < _MIN_TAIL:
        return w.copy(), float("-inf")

    # scale by the raw maximum so the fit sees numbers of order one
    scale = w[tail[-1]]
    exceed = w[tail] / scale - cutoff / scale
    k, sigma = fit_gpd_tail(exceed)
    ranks = (np.arange(1, tail.shape[0] + 1) - 0.5) / tail.shape[0]
    smoothed_tail = (_gpd_quantiles(ranks, k, sigma) + cutoff / scale) * scale
    out = w.copy()
    out[tail] = np.minimum(smoothed_tail, w[tail[-1]])
    return out, k


def psis_loo(
    post: SurrogatePosterior,
    observations: "Sequence[ChoiceObservation] | None" = None,
) -> LooReport:
    """PSIS estimate of the leave-one-out log predictive density.

    For each observation, p(z_k | z_-k) is approximated by the smoothed
    importance-weighted average of its likelihood over the sample bank.
    """
    obs = list(post.observations if observations is None else observations)
    if not obs:
        return LooReport(np.zeros(0), 0.0, np.zeros(0), ())
    engine = _observation_engine(post, obs)
    loglik = engine.log_likelihood(post.values, per_obs=True)  # (S, N)
    n = len(obs)
    lpd = np.empty(n)
    khat = np.empty(n)
    for k in range(n):
        smoothed, khat[k] = pareto_smooth(np.exp(-loglik[:, k]))
        log_w = np.log(smoothed)
        lpd[k] = logsumexp(log_w + loglik[:, k]) - logsumexp(log_w)
    flagged = tuple(int(i) for i in np.flatnonzero(khat > KHAT_THRESHOLD))
    return LooReport(lpd, float(lpd.sum()), khat, flagged)


@dataclass(frozen=True)
class SelectionResult:
    """Chosen latent dimension plus the per-dimension reports."""

    chosen: int
    reports: tuple[LooReport, ...]

    @property
    def totals(self) -> tuple[float, ...]:
        return tuple(r.total for r in self.reports)


class DimensionSelectionError(NumericError):
    """A candidate fit failed; completed reports ride along."""

    def __init__(self, dimension: int, reports: tuple[LooReport, ...], cause: Exception):
        super().__init__(f"fit for latent dimension {dimension} failed: {cause}")
        self.dimension = dimension
        self.reports = reports


def select_latent_dimension(
    observations: Sequence[ChoiceObservation],
    train_points: np.ndarray,
    ne_max: int = 4,
    config: "FitConfig | None" = None,
) -> SelectionResult:
    """Forward search over latent dimensions scored by PSIS-LOO.

    Fits dimension 1, 2, ... in order and stops at the first dimension whose
    total drops below its predecessor's, returning the predecessor;
    returns ne_max if the totals never decrease.
    """
    if ne_max < 1:
        raise ValueError("ne_max must be >= 1")
    reports: list[LooReport] = []
    for n_e in range(1, ne_max + 1):
        try:
            post = fit_choice_model(observations, train_points, n_e, config)
            report = psis_loo(post)
        except Exception as exc:  # noqa: BLE001 - re-raised with partial results
            raise DimensionSelectionError(n_e, tuple(reports), exc) from exc
        reports.append(report)
        if n_e >= 2 and report.total < reports[-2].total:
            return SelectionResult(n_e - 1, tuple(reports))
    return SelectionResult(ne_max, tuple(reports))
