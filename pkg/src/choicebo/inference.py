"""Posterior computation for the choice surrogate.

Two-stage scheme. A mean-field Gaussian variational approximation over the
whitened latents and the log kernel hyperparameters is optimized by
stochastic gradient ascent on a reparameterized ELBO estimate; the
hyperparameters are then fixed at the variational means mapped back from
log-space, and the latent matrix is sampled at those fixed values with
elliptical slice sampling. The model is non-centered throughout: the latent
prior is standard normal on u with f_d = L_d u_d, so every hyperparameter
enters only through the Cholesky factors and the noise scale.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from choicebo.domain import (
    ChoiceObservation,
    ConfigError,
    EmptyInputError,
    NumericError,
    non_dominated_mask,
)
from choicebo.kernels import (
    JITTER_ESCALATIONS,
    SQRT3,
    KernelParams,
    PredictiveOperator,
    gram_cholesky,
)
from choicebo.likelihood import LikelihoodConfig, LikelihoodEngine

__all__ = [
    "FitConfig",
    "FitResult",
    "SurrogatePosterior",
    "fit_hyperparameters",
    "sample_posterior",
    "fit_choice_model",
    "predict_latents",
    "choice_probability",
    "predict_choice",
    "posterior_to_payload",
    "posterior_from_payload",
    "save_posterior",
    "load_posterior",
]

# Independent deterministic substreams of the configured seed.
_VI_STREAM = 11
_ESS_STREAM = 13
_PREDICT_STREAM = 17

_MAX_SHRINKS = 200
_MAX_REINITS = 10

_SCHEMA = "choice-gp-posterior"
_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the variational fit and the slice-sampling stage."""

    vi_steps: int = 3000
    vi_mc_samples: int = 8
    vi_step_size: float = 0.05
    ess_burnin: int = 500
    ess_samples: int = 1000
    ess_thin: int = 2
    # log-normal hyperpriors, stated as medians on [0,1]-scaled inputs
    lengthscale_median: float = 0.3
    lengthscale_log_sd: float = 1.0
    signal_variance_median: float = 1.0
    signal_variance_log_sd: float = 1.0
    noise_sd_median: float = 0.1
    noise_sd_log_sd: float = 1.0
    isotropic: bool = False
    likelihood: LikelihoodConfig = field(default_factory=LikelihoodConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("vi_steps", "vi_mc_samples", "ess_samples", "ess_thin"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.ess_burnin < 0:
            raise ConfigError("ess_burnin must be >= 0")
        if self.vi_step_size <= 0:
            raise ConfigError("vi_step_size must be positive")
        for name in (
            "lengthscale_median",
            "lengthscale_log_sd",
            "signal_variance_median",
            "signal_variance_log_sd",
            "noise_sd_median",
            "noise_sd_log_sd",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


class _Layout:
    """Index map of the flat variational parameter vector.

    Order: whitened latents u (row-major (m, n_e)), log lengthscales
    ((n_e, n_x) or (n_e, 1) when isotropic), log signal variances (n_e,),
    log noise sd (scalar).
    """

    def __init__(self, m: int, n_e: int, n_x: int, isotropic: bool) -> None:
        self.m = m
        self.n_e = n_e
        self.n_x = n_x
        self.isotropic = isotropic
        self.ls_cols = 1 if isotropic else n_x
        n_u = m * n_e
        n_ls = n_e * self.ls_cols
        self.sl_u = slice(0, n_u)
        self.sl_ls = slice(n_u, n_u + n_ls)
        self.sl_sv = slice(n_u + n_ls, n_u + n_ls + n_e)
        self.i_sig = n_u + n_ls + n_e
        self.size = self.i_sig + 1

    def unpack(self, psi: np.ndarray):
        u = psi[self.sl_u].reshape(self.m, self.n_e)
        log_ls = psi[self.sl_ls].reshape(self.n_e, self.ls_cols)
        log_sv = psi[self.sl_sv]
        return u, log_ls, log_sv, psi[self.i_sig]


def _prior_location(layout: _Layout, cfg: FitConfig) -> np.ndarray:
    mu0 = np.zeros(layout.size)
    mu0[layout.sl_ls] = math.log(cfg.lengthscale_median)
    mu0[layout.sl_sv] = math.log(cfg.signal_variance_median)
    mu0[layout.i_sig] = math.log(cfg.noise_sd_median)
    return mu0


def _prior_scale(layout: _Layout, cfg: FitConfig) -> np.ndarray:
    sd0 = np.ones(layout.size)
    sd0[layout.sl_ls] = cfg.lengthscale_log_sd
    sd0[layout.sl_sv] = cfg.signal_variance_log_sd
    sd0[layout.i_sig] = cfg.noise_sd_log_sd
    return sd0


def _params_at(mu: np.ndarray, layout: _Layout) -> KernelParams:
    _, log_ls, log_sv, log_sig = layout.unpack(mu)
    return KernelParams(
        lengthscales=np.exp(log_ls),
        signal_variances=np.exp(log_sv),
        noise_sd=float(np.exp(log_sig)),
    )


class _FitContext:
    """Immutable pieces shared by every ELBO evaluation of one fit."""

    def __init__(
        self,
        engine: LikelihoodEngine,
        points: np.ndarray,
        layout: _Layout,
        cfg: FitConfig,
    ) -> None:
        self.engine = engine
        self.layout = layout
        # per-input-dimension squared distances, shape (n_x, m, m)
        diffs = points[:, None, :] - points[None, :, :]
        self.d2 = np.ascontiguousarray(np.transpose(diffs**2, (2, 0, 1)))
        self.d2_total = self.d2.sum(axis=0)
        self.mu0 = _prior_location(layout, cfg)
        self.sd0 = _prior_scale(layout, cfg)


def _chol_with_escalation(k: np.ndarray, base_jitter: float) -> np.ndarray:
    eye = np.eye(k.shape[0])
    eps = base_jitter
    for attempt in range(JITTER_ESCALATIONS):
        try:
            return cholesky(k + eps * eye, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            if attempt == JITTER_ESCALATIONS - 1:
                raise NumericError(
                    f"Gram matrix stayed non-positive-definite up to jitter {eps:g}"
                ) from None
            eps *= 10.0
    raise NumericError("unreachable")  # pragma: no cover


def _elbo_and_grad(
    mu: np.ndarray, rho: np.ndarray, eps: np.ndarray, ctx: _FitContext
) -> tuple[float, np.ndarray, np.ndarray]:
    """Reparameterized ELBO estimate and its exact gradient in (mu, rho).

    The data term is the choice log-likelihood at psi = mu + exp(rho) * eps;
    the Gaussian prior over u and the log-normal hyperpriors enter through
    an analytic KL term, so the estimator's only randomness is eps.
    """
    lay = ctx.layout
    b, m, n_e = eps.shape[0], lay.m, lay.n_e
    s = np.exp(rho)
    psi = mu[None, :] + s[None, :] * eps  # (B, size)

    f = np.empty((b, m, n_e))
    sig = np.empty(b)
    chols = np.empty((b, n_e, m, m))
    decays = np.empty((b, n_e, m, m))  # exp(-sqrt(3) r) per sample and dim
    ls_all = np.empty((b, n_e, lay.ls_cols))
    sv_all = np.empty((b, n_e))
    for i in range(b):
        u, log_ls, log_sv, log_sig = lay.unpack(psi[i])
        # wide guards against overflow when an optimizer step overshoots
        ls = np.exp(np.clip(log_ls, -12.0, 12.0))
        sv = np.exp(np.clip(log_sv, -12.0, 12.0))
        sig[i] = math.exp(min(max(float(log_sig), -12.0), 6.0))
        ls_all[i] = ls
        sv_all[i] = sv
        for d in range(n_e):
            if lay.isotropic:
                r2 = ctx.d2_total / ls[d, 0] ** 2
            else:
                r2 = np.tensordot(1.0 / ls[d] ** 2, ctx.d2, axes=(0, 0))
            r = np.sqrt(np.maximum(r2, 0.0))
            decay = np.exp(-SQRT3 * r)
            k = sv[d] * (1.0 + SQRT3 * r) * decay
            chol = _chol_with_escalation(k, 1e-8 * sv[d])
            chols[i, d] = chol
            decays[i, d] = decay
            f[i, :, d] = chol @ u[:, d]

    ll, g_f, g_logsig = ctx.engine.log_likelihood_grad(f, sig)

    g_psi = np.zeros((b, lay.size))
    diag = np.arange(m)
    for i in range(b):
        u = psi[i][lay.sl_u].reshape(m, n_e)
        # contiguous row slices, so these reshapes write through to g_psi
        gu = g_psi[i][lay.sl_u].reshape(m, n_e)
        g_ls = g_psi[i][lay.sl_ls].reshape(n_e, lay.ls_cols)
        for d in range(n_e):
            chol = chols[i, d]
            gf = g_f[i, :, d]
            a = chol.T @ gf
            gu[:, d] = a
            # f_d scales with sqrt of the signal variance, so the gradient in
            # its log is available without touching the factorization
            g_psi[i, lay.sl_sv][d] = 0.5 * float(f[i, :, d] @ gf)
            # reverse-mode Cholesky identity: with Lbar = gf u^T (rank one),
            # Kbar = L^-T Phi(L^T Lbar) L^-1, Phi = strict lower + half diag
            mmat = np.tril(np.outer(a, u[:, d]))
            mmat[diag, diag] *= 0.5
            half = solve_triangular(chol, mmat, trans="T", lower=True, check_finite=False)
            kbar = solve_triangular(
                chol, half.T, trans="T", lower=True, check_finite=False
            ).T
            w = kbar * (3.0 * sv_all[i, d] * decays[i, d])
            if lay.isotropic:
                g_ls[d, 0] = float(np.sum(w * ctx.d2_total)) / ls_all[i, d, 0] ** 2
            else:
                g_ls[d] = np.tensordot(w, ctx.d2, axes=([0, 1], [1, 2])) / ls_all[i, d] ** 2
        g_psi[i, lay.i_sig] = g_logsig[i]

    dev = mu - ctx.mu0
    var0 = ctx.sd0**2
    kl = float(np.sum(np.log(ctx.sd0) - rho + 0.5 * (s**2 + dev**2) / var0 - 0.5))
    elbo = float(np.mean(ll)) - kl
    g_mu = g_psi.mean(axis=0) - dev / var0
    g_rho = (g_psi * eps).mean(axis=0) * s - (s**2 / var0 - 1.0)
    return elbo, g_mu, g_rho


@dataclass(frozen=True)
class FitResult:
    """Point hyperparameters plus the variational state that produced them."""

    params: KernelParams
    elbo_trace: np.ndarray
    mean: np.ndarray
    log_sd: np.ndarray
    layout: _Layout

    def draw_whitened(self, rng: np.random.Generator) -> np.ndarray:
        """One draw of the whitened latents from the fitted variational factor."""
        lay = self.layout
        sl = lay.sl_u
        draw = self.mean[sl] + np.exp(self.log_sd[sl]) * rng.standard_normal(
            lay.m * lay.n_e
        )
        return draw.reshape(lay.m, lay.n_e)


def fit_hyperparameters(
    observations: Sequence[ChoiceObservation],
    train_points: np.ndarray,
    n_e: int,
    config: "FitConfig | None" = None,
) -> FitResult:
    """Variational point estimates of the kernel hyperparameters and sigma.

    Maximizes a reparameterized ELBO over a mean-field Gaussian family on
    (u, log lengthscales, log signal variances, log sigma) with Adam; the
    returned hyperparameters are exp of the fitted variational means. With
    no observations the hyperpriors are returned at their medians.
    """
    cfg = config or FitConfig()
    points = np.atleast_2d(np.asarray(train_points, dtype=float))
    m, n_x = points.shape
    if m < 1:
        raise EmptyInputError("need at least one training point")
    if n_e < 1:
        raise ConfigError("n_e must be >= 1")
    layout = _Layout(m, n_e, n_x, cfg.isotropic)
    mu0 = _prior_location(layout, cfg)
    sd0 = _prior_scale(layout, cfg)

    obs = list(observations)
    if not obs:
        return FitResult(
            params=_params_at(mu0, layout),
            elbo_trace=np.zeros(1),
            mean=mu0,
            log_sd=np.log(sd0),
            layout=layout,
        )

    engine = LikelihoodEngine(obs, m, cfg.likelihood)
    ctx = _FitContext(engine, points, layout, cfg)
    mu = mu0.copy()
    rho = np.full(layout.size, math.log(0.1))
    rho[layout.sl_u] = math.log(0.5)

    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, _VI_STREAM)))
    trace = np.empty(cfg.vi_steps)
    adam_m = np.zeros(2 * layout.size)
    adam_v = np.zeros(2 * layout.size)
    b1, b2, tiny = 0.9, 0.999, 1e-8
    last_finite = -np.inf
    for t in range(cfg.vi_steps):
        eps = rng.standard_normal((cfg.vi_mc_samples, layout.size))
        elbo, g_mu, g_rho = _elbo_and_grad(mu, rho, eps, ctx)
        grad = np.concatenate([g_mu, g_rho])
        if not (np.isfinite(elbo) and np.all(np.isfinite(grad))):
            raise NumericError(
                f"ELBO diverged at step {t}; last finite value {last_finite:.6g}"
            )
        trace[t] = elbo
        last_finite = elbo
        adam_m = b1 * adam_m + (1.0 - b1) * grad
        adam_v = b2 * adam_v + (1.0 - b2) * grad**2
        mhat = adam_m / (1.0 - b1 ** (t + 1))
        vhat = adam_v / (1.0 - b2 ** (t + 1))
        lr = cfg.vi_step_size * (1.0 - 0.9 * t / max(cfg.vi_steps - 1, 1))
        step = lr * mhat / (np.sqrt(vhat) + tiny)
        mu = mu + step[: layout.size]
        rho = rho + step[layout.size :]

    return FitResult(
        params=_params_at(mu, layout),
        elbo_trace=trace,
        mean=mu,
        log_sd=rho,
        layout=layout,
    )


@dataclass(frozen=True)
class SurrogatePosterior:
    """Fixed hyperparameters plus a bank of latent posterior samples.

    Immutable after construction; every stored sample satisfies
    values = L @ whitened column by column under the stored factors.
    """

    params: KernelParams
    train_points: np.ndarray  # (m, n_x), model coordinates
    factors: np.ndarray  # (n_e, m, m) lower Cholesky factors
    jitters: np.ndarray  # (n_e,) jitter actually used per dimension
    whitened: np.ndarray  # (S, m, n_e)
    values: np.ndarray  # (S, m, n_e)
    observations: tuple[ChoiceObservation, ...]
    elbo_trace: np.ndarray
    diagnostics: Mapping[str, float]
    config: FitConfig
    seed: int

    def __post_init__(self) -> None:
        s, m, n_e = self.whitened.shape
        if s < 1:
            raise EmptyInputError("need at least one posterior sample")
        if self.values.shape != (s, m, n_e) or self.factors.shape != (n_e, m, m):
            raise ValueError("sample bank and factors have inconsistent shapes")
        if self.train_points.shape[0] != m:
            raise ValueError("training table does not match the sample bank")
        check = min(s, 32)
        rebuilt = np.einsum("dij,sjd->sid", self.factors, self.whitened[:check])
        if not np.allclose(rebuilt, self.values[:check], atol=1e-8):
            raise ValueError("stored samples inconsistent with their whitened form")
        for arr in (
            self.train_points,
            self.factors,
            self.jitters,
            self.whitened,
            self.values,
            self.elbo_trace,
        ):
            arr.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return self.whitened.shape[0]

    @property
    def n_points(self) -> int:
        return self.whitened.shape[1]

    @property
    def n_latent(self) -> int:
        return self.whitened.shape[2]

    def predictive(self, test_points: np.ndarray, jitter: float = 1e-8) -> PredictiveOperator:
        return PredictiveOperator(
            self.train_points, test_points, self.params, self.factors, jitter
        )


def _finite_start(
    loglik,
    first_draw: np.ndarray,
    prior_draw,
    max_tries: int = _MAX_REINITS,
) -> tuple[np.ndarray, float, int]:
    """Starting state with finite log-likelihood, redrawing from the prior.

    Returns (state, loglik, number of reinitializations); errors out after
    ``max_tries`` prior redraws.
    """
    state = first_draw
    value = float(loglik(state))
    reinits = 0
    while not np.isfinite(value):
        if reinits >= max_tries:
            raise NumericError(
                f"log-likelihood stayed non-finite after {max_tries} prior reinitializations"
            )
        state = prior_draw()
        value = float(loglik(state))
        reinits += 1
    return state, value, reinits


def sample_posterior(
    observations: Sequence[ChoiceObservation],
    train_points: np.ndarray,
    params: KernelParams,
    config: "FitConfig | None" = None,
    init: "FitResult | None" = None,
) -> SurrogatePosterior:
    """Elliptical slice sampling of the latent matrix at fixed hyperparameters.

    The chain lives on the whitened latents, whose prior is standard normal;
    each update proposes on an ellipse through the current state and a prior
    draw, shrinking the angle bracket until the log-likelihood clears a
    uniform slice level. Burn-in is discarded and the kept samples thinned.
    """
    cfg = config or FitConfig()
    points = np.atleast_2d(np.asarray(train_points, dtype=float))
    m = points.shape[0]
    n_e = params.n_e
    obs = tuple(observations)
    engine = LikelihoodEngine(obs, m, cfg.likelihood)
    factors, jitters = gram_cholesky(points, params)
    sigma = params.noise_sd

    def loglik(u: np.ndarray) -> float:
        f = np.einsum("dij,jd->id", factors, u)
        return float(engine.log_likelihood(f, sigma=sigma))

    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, _ESS_STREAM)))
    first = init.draw_whitened(rng) if init is not None else rng.standard_normal((m, n_e))
    state, value, reinits = _finite_start(
        loglik, first, lambda: rng.standard_normal((m, n_e))
    )

    total = cfg.ess_burnin + cfg.ess_samples * cfg.ess_thin
    bank = np.empty((cfg.ess_samples, m, n_e))
    kept = 0
    evals = 1 + reinits
    shrinks = 0
    for it in range(total):
        nu = rng.standard_normal((m, n_e))
        level = value + math.log(max(rng.uniform(), 1e-300))
        theta = rng.uniform(0.0, 2.0 * math.pi)
        lo, hi = theta - 2.0 * math.pi, theta
        while True:
            prop = state * math.cos(theta) + nu * math.sin(theta)
            prop_value = loglik(prop)
            evals += 1
            if prop_value > level:
                break
            shrinks += 1
            if hi - lo < 1e-12:
                raise NumericError("slice bracket collapsed without acceptance")
            if theta < 0.0:
                lo = theta
            else:
                hi = theta
            theta = rng.uniform(lo, hi)
        state, value = prop, prop_value
        k = it - cfg.ess_burnin
        if k >= 0 and k % cfg.ess_thin == 0 and kept < cfg.ess_samples:
            bank[kept] = state
            kept += 1

    values = np.einsum("dij,sjd->sid", factors, bank)
    diagnostics = {
        "ess_iterations": float(total),
        "ess_likelihood_evals": float(evals),
        "ess_mean_shrinks": shrinks / max(total, 1),
        "ess_reinits": float(reinits),
    }
    return SurrogatePosterior(
        params=params,
        train_points=points,
        factors=factors,
        jitters=jitters,
        whitened=bank,
        values=values,
        observations=obs,
        elbo_trace=np.zeros(1),
        diagnostics=diagnostics,
        config=cfg,
        seed=cfg.seed,
    )


def fit_choice_model(
    observations: Sequence[ChoiceObservation],
    train_points: np.ndarray,
    n_e: int,
    config: "FitConfig | None" = None,
) -> SurrogatePosterior:
    """Full fit: variational hyperparameters, then the sampled latent bank."""
    cfg = config or FitConfig()
    fit = fit_hyperparameters(observations, train_points, n_e, cfg)
    post = sample_posterior(observations, train_points, fit.params, cfg, init=fit)
    diagnostics = dict(post.diagnostics)
    diagnostics["elbo_final"] = float(fit.elbo_trace[-1])
    return replace(post, elbo_trace=fit.elbo_trace.copy(), diagnostics=diagnostics)


def predict_latents(
    post: SurrogatePosterior,
    test_points: np.ndarray,
    seed: "int | np.random.Generator",
) -> np.ndarray:
    """(S, n_test, n_e) joint conditional draws, one per stored sample."""
    op = post.predictive(test_points)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return op.draw_batch(post.whitened, rng)


def _prediction_rng(post: SurrogatePosterior, seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.default_rng(np.random.SeedSequence((post.seed, _PREDICT_STREAM)))
    return np.random.default_rng(seed)


def choice_probability(
    post: SurrogatePosterior,
    options: np.ndarray,
    chosen: Sequence[int],
    seed=None,
) -> tuple[float, np.ndarray]:
    """Posterior probability that exactly ``chosen`` is picked from ``options``.

    Evaluates the choice likelihood on one predictive draw per stored sample
    and returns the Monte Carlo mean along with the per-sample vector.
    """
    options = np.atleast_2d(np.asarray(options, dtype=float))
    obs = ChoiceObservation(tuple(range(options.shape[0])), tuple(chosen))
    draws = predict_latents(post, options, _prediction_rng(post, seed))
    like_cfg = replace(post.config.likelihood, noise_sd=post.params.noise_sd)
    engine = LikelihoodEngine([obs], options.shape[0], like_cfg)
    per_sample = np.exp(engine.log_likelihood(draws))
    return float(per_sample.mean()), per_sample


def modal_nondominated(draws: np.ndarray) -> tuple[int, ...]:
    """Most frequent non-dominated row subset over a (S, t, n_e) draw bank.

    Ties are broken toward the smaller subset, then lexicographically.
    """
    counts: dict[tuple[int, ...], int] = {}
    for s in range(draws.shape[0]):
        key = tuple(int(i) for i in np.flatnonzero(non_dominated_mask(draws[s])))
        counts[key] = counts.get(key, 0) + 1
    return min(counts.items(), key=lambda kv: (-kv[1], len(kv[0]), kv[0]))[0]


def predict_choice(
    post: SurrogatePosterior, options: np.ndarray, seed=None
) -> ChoiceObservation:
    """Modal non-dominated subset of ``options`` across predictive draws."""
    options = np.atleast_2d(np.asarray(options, dtype=float))
    draws = predict_latents(post, options, _prediction_rng(post, seed))
    return ChoiceObservation(tuple(range(options.shape[0])), modal_nondominated(draws))


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {
        "shape": list(arr.shape),
        "dtype": "<f8",
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }


def _decode_array(blob: Mapping) -> np.ndarray:
    if blob.get("dtype") != "<f8":
        raise ConfigError(f"unsupported array dtype {blob.get('dtype')!r}")
    raw = base64.b64decode(blob["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(blob["shape"]).copy()


def posterior_to_payload(post: SurrogatePosterior) -> dict:
    """Self-describing JSON payload for a fitted posterior."""
    cfg = post.config
    return {
        "format": _SCHEMA,
        "schema_version": _SCHEMA_VERSION,
        "seed": int(post.seed),
        "train_points": post.train_points.tolist(),
        "observations": [
            {"set": list(o.set_indices), "chosen": list(o.chosen_indices)}
            for o in post.observations
        ],
        "params": {
            "lengthscales": post.params.lengthscales.tolist(),
            "signal_variances": post.params.signal_variances.tolist(),
            "noise_sd": float(post.params.noise_sd),
        },
        "jitters": post.jitters.tolist(),
        "whitened": _encode_array(post.whitened),
        "elbo_trace": post.elbo_trace.tolist(),
        "diagnostics": {k: float(v) for k, v in post.diagnostics.items()},
        "config": {
            "vi_steps": cfg.vi_steps,
            "vi_mc_samples": cfg.vi_mc_samples,
            "vi_step_size": cfg.vi_step_size,
            "ess_burnin": cfg.ess_burnin,
            "ess_samples": cfg.ess_samples,
            "ess_thin": cfg.ess_thin,
            "lengthscale_median": cfg.lengthscale_median,
            "lengthscale_log_sd": cfg.lengthscale_log_sd,
            "signal_variance_median": cfg.signal_variance_median,
            "signal_variance_log_sd": cfg.signal_variance_log_sd,
            "noise_sd_median": cfg.noise_sd_median,
            "noise_sd_log_sd": cfg.noise_sd_log_sd,
            "isotropic": cfg.isotropic,
            "seed": cfg.seed,
            "likelihood": {
                "noise_sd": cfg.likelihood.noise_sd,
                "quad_nodes": cfg.likelihood.quad_nodes,
                "log_floor": cfg.likelihood.log_floor,
                "max_chosen": cfg.likelihood.max_chosen,
            },
        },
    }


def posterior_from_payload(payload: Mapping) -> SurrogatePosterior:
    """Rebuild a posterior from :func:`posterior_to_payload` output.

    Cholesky factors are recomputed from the stored hyperparameters; the
    jitters they needed must match the stored ones, which guards against a
    payload edited out from under its sample bank.
    """
    if payload.get("format") != _SCHEMA:
        raise ConfigError(f"not a posterior payload: format {payload.get('format')!r}")
    if payload.get("schema_version") != _SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {payload.get('schema_version')!r}")
    cfg_raw = dict(payload["config"])
    like = LikelihoodConfig(**cfg_raw.pop("likelihood"))
    cfg = FitConfig(likelihood=like, **cfg_raw)
    params = KernelParams(
        lengthscales=np.asarray(payload["params"]["lengthscales"], dtype=float),
        signal_variances=np.asarray(payload["params"]["signal_variances"], dtype=float),
        noise_sd=float(payload["params"]["noise_sd"]),
    )
    points = np.asarray(payload["train_points"], dtype=float)
    whitened = _decode_array(payload["whitened"])
    factors, jitters = gram_cholesky(points, params)
    stored = np.asarray(payload["jitters"], dtype=float)
    if not np.allclose(jitters, stored, rtol=1e-6):
        raise NumericError("recomputed factor jitters disagree with the stored payload")
    observations = tuple(
        ChoiceObservation(tuple(o["set"]), tuple(o["chosen"]))
        for o in payload["observations"]
    )
    values = np.einsum("dij,sjd->sid", factors, whitened)
    return SurrogatePosterior(
        params=params,
        train_points=points,
        factors=factors,
        jitters=jitters,
        whitened=whitened,
        values=values,
        observations=observations,
        elbo_trace=np.asarray(payload["elbo_trace"], dtype=float),
        diagnostics=dict(payload["diagnostics"]),
        config=cfg,
        seed=int(payload["seed"]),
    )


def save_posterior(post: SurrogatePosterior, path: "str | Path") -> None:
    Path(path).write_text(json.dumps(posterior_to_payload(post)))


def load_posterior(path: "str | Path") -> SurrogatePosterior:
    return posterior_from_payload(json.loads(Path(path).read_text()))
