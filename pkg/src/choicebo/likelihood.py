"""Probabilistic model of observed choices under noisy latent utilities.

The likelihood of one observation (A, C) factorizes into independent
probabilities, each carrying its own Gaussian perturbation of the latent
values:

* one factor per rejected option j: the probability that at least one
  chosen option beats j in every latent dimension after perturbation,
* one factor per ordered pair (p, i) of chosen options: the probability
  that p does not beat i everywhere after perturbation.

The pairwise factor has the closed form 1 - prod_d Phi(delta_d / (sqrt2
sigma)). The rejection factor is an integral over the rejected option's
noise of a product over chosen options; expanding that product by
inclusion-exclusion makes every signed term factorize across latent
dimensions into univariate integrals, each handled by Gauss-Hermite
quadrature. Probabilities are floored before the log so gradients and
log-likelihoods stay finite for arbitrarily separated latents.

The batched engine at the bottom evaluates the whole dataset for a stack
of latent matrices at once and returns analytic gradients with respect to
the latent values and log sigma; both are validated against finite
differences and Monte Carlo in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import ndtr

from choicebo.domain import ChoiceObservation

SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

#: soft memory budget (bytes) for one chunk of rejection-event workspaces
_CHUNK_BYTES = 48 * 2**20


class CombinatorialCapError(ValueError):
    """A rejection factor over too many chosen options was requested."""


@dataclass(frozen=True)
class LikelihoodConfig:
    noise_sd: float = 0.1  # sigma > 0
    quad_nodes: int = 32  # Gauss-Hermite node count, >= 8
    log_floor: float = 1e-12  # probability floor in (0, 1e-6]
    max_chosen: int = 12  # inclusion-exclusion cap: 2^12 terms

    def __post_init__(self) -> None:
        if not (np.isfinite(self.noise_sd) and self.noise_sd > 0):
            raise ValueError("noise_sd must be positive")
        if self.quad_nodes < 8:
            raise ValueError("quad_nodes must be at least 8")
        if not (0 < self.log_floor <= 1e-6):
            raise ValueError("log_floor must lie in (0, 1e-6]")
        if self.max_chosen < 1:
            raise ValueError("max_chosen must be at least 1")


def _phi_pdf(x: np.ndarray) -> np.ndarray:
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _loo_prod(arr: np.ndarray, axis: int) -> np.ndarray:
    """Leave-one-out products along an axis, by left/right cumulants."""
    arr = np.moveaxis(arr, axis, -1)
    n = arr.shape[-1]
    if n == 1:
        out = np.ones_like(arr)
    else:
        left = np.ones_like(arr)
        right = np.ones_like(arr)
        left[..., 1:] = np.cumprod(arr[..., :-1], axis=-1)
        right[..., :-1] = np.cumprod(arr[..., :0:-1], axis=-1)[..., ::-1]
        out = left * right
    return np.moveaxis(out, -1, axis)


def pairwise_dominance_prob(fp: np.ndarray, fj: np.ndarray, sigma: float) -> float:
    """Probability that option p beats option j in every latent dimension."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    fp = np.atleast_1d(np.asarray(fp, dtype=float))
    fj = np.atleast_1d(np.asarray(fj, dtype=float))
    return float(np.prod(ndtr((fp - fj) / (SQRT2 * sigma))))


def rejection_term(
    f_chosen: np.ndarray,
    f_j: np.ndarray,
    sigma: float,
    quad_nodes: int = 32,
    max_chosen: int = 12,
) -> float:
    """Probability that every chosen option fails to beat rejected option j.

    The likelihood factor for j is one minus this value.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    f_chosen = np.atleast_2d(np.asarray(f_chosen, dtype=float))
    f_j = np.atleast_1d(np.asarray(f_j, dtype=float))
    c = f_chosen.shape[0]
    if c > max_chosen:
        raise CombinatorialCapError(
            f"rejection factor over {c} chosen options needs 2^{c} expansion terms "
            f"(cap {max_chosen})"
        )
    t, w = hermgauss(quad_nodes)
    u = w / np.sqrt(np.pi)
    # (c, n_e, Q) CDF values at every quadrature node
    delta = f_chosen - f_j
    phi = ndtr(delta[:, :, None] / sigma - SQRT2 * t)
    n_subsets = 1 << c
    subset_prod = np.empty((n_subsets,) + phi.shape[1:])
    subset_prod[0] = 1.0
    for s in range(1, n_subsets):
        low = s & -s
        subset_prod[s] = subset_prod[s ^ low] * phi[low.bit_length() - 1]
    g = subset_prod @ u  # (n_subsets, n_e) univariate integrals
    signs = np.array([(-1.0) ** bin(s).count("1") for s in range(n_subsets)])
    r = float(signs @ np.prod(g, axis=-1))
    return min(max(r, 0.0), 1.0)


class PreparedDataset:
    """Index structure that lets the engine evaluate a dataset in bulk.

    Observations decompose into ordered chosen pairs (flat arrays) and
    rejection events grouped by chosen-set size, so each group expands with
    one fixed subset lattice.
    """

    def __init__(
        self, observations: Sequence[ChoiceObservation], n_options: int, max_chosen: int = 12
    ) -> None:
        self.n_obs = len(observations)
        self.n_options = n_options
        pair_p: list[int] = []
        pair_i: list[int] = []
        pair_obs: list[int] = []
        groups: dict[int, list[tuple[tuple[int, ...], int, int]]] = {}
        for k, obs in enumerate(observations):
            ids = set(obs.set_indices)
            if ids and max(ids) >= n_options:
                raise IndexError(
                    f"observation {k} references option {max(ids)} outside the table"
                )
            chosen = obs.chosen_indices
            if len(chosen) > max_chosen:
                raise CombinatorialCapError(
                    f"observation {k} has {len(chosen)} chosen options (cap {max_chosen})"
                )
            for p in chosen:
                for i in chosen:
                    if p != i:
                        pair_p.append(p)
                        pair_i.append(i)
                        pair_obs.append(k)
            for j in obs.rejected_indices:
                groups.setdefault(len(chosen), []).append((chosen, j, k))
        self.pair_p = np.asarray(pair_p, dtype=np.intp)
        self.pair_i = np.asarray(pair_i, dtype=np.intp)
        self.pair_obs = np.asarray(pair_obs, dtype=np.intp)
        self.groups: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        for c, events in groups.items():
            self.groups[c] = (
                np.asarray([e[0] for e in events], dtype=np.intp),  # (n_g, c)
                np.asarray([e[1] for e in events], dtype=np.intp),  # (n_g,)
                np.asarray([e[2] for e in events], dtype=np.intp),  # (n_g,)
            )


class LikelihoodEngine:
    """Batched log-likelihood and gradients for a fixed dataset."""

    def __init__(
        self,
        observations: Sequence[ChoiceObservation],
        n_options: int,
        config: "LikelihoodConfig | None" = None,
    ) -> None:
        self.config = config or LikelihoodConfig()
        self.prep = PreparedDataset(observations, n_options, self.config.max_chosen)
        t, w = hermgauss(self.config.quad_nodes)
        self._nodes = t
        self._weights = w / np.sqrt(np.pi)
        self._subset_cache: dict[int, tuple[np.ndarray, list[list[int]]]] = {}

    def _subsets(self, c: int) -> tuple[np.ndarray, list[list[int]]]:
        if c not in self._subset_cache:
            n_subsets = 1 << c
            signs = np.array([(-1.0) ** bin(s).count("1") for s in range(n_subsets)])
            members = [[i for i in range(c) if s >> i & 1] for s in range(n_subsets)]
            self._subset_cache[c] = (signs, members)
        return self._subset_cache[c]

    def _normalize(self, latents: np.ndarray, sigma) -> tuple[np.ndarray, np.ndarray, bool]:
        f = np.asarray(getattr(latents, "values", latents), dtype=float)
        squeeze = f.ndim == 2
        if squeeze:
            f = f[None]
        if f.shape[1] != self.prep.n_options:
            raise IndexError(
                f"latent bank has {f.shape[1]} rows, dataset indexes {self.prep.n_options}"
            )
        sig = np.asarray(
            self.config.noise_sd if sigma is None else sigma, dtype=float
        ).reshape(-1)
        if sig.shape[0] == 1:
            sig = np.broadcast_to(sig, (f.shape[0],))
        if np.any(sig <= 0):
            raise ValueError("sigma must be positive")
        return f, sig, squeeze

    def log_likelihood(
        self, latents: np.ndarray, sigma=None, per_obs: bool = False
    ) -> np.ndarray:
        """(B, m, n_e) latents -> (B,) totals or (B, N) per-observation."""
        f, sig, squeeze = self._normalize(latents, sigma)
        out = self._evaluate(f, sig, want_grad=False, per_obs=per_obs)[0]
        return out[0] if squeeze else out

    def log_likelihood_grad(
        self, latents: np.ndarray, sigma=None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Totals plus gradients w.r.t. latent values and log sigma."""
        f, sig, squeeze = self._normalize(latents, sigma)
        ll, grad_f, grad_logsig = self._evaluate(f, sig, want_grad=True, per_obs=False)
        if squeeze:
            return ll[0], grad_f[0], grad_logsig[0]
        return ll, grad_f, grad_logsig

    def _evaluate(self, f: np.ndarray, sig: np.ndarray, want_grad: bool, per_obs: bool):
        b, m, n_e = f.shape
        floor = self.config.log_floor
        prep = self.prep
        ll_obs = np.zeros((b, prep.n_obs)) if per_obs else None
        ll_total = np.zeros(b)
        grad_f = np.zeros_like(f) if want_grad else None
        grad_logsig = np.zeros(b) if want_grad else None
        b_rows = np.arange(b)[:, None]

        if prep.pair_p.size:
            d_pair = f[:, prep.pair_p, :] - f[:, prep.pair_i, :]  # (B, P, n_e)
            z = d_pair / (SQRT2 * sig[:, None, None])
            cdf = ndtr(z)
            q = np.prod(cdf, axis=-1)  # (B, P)
            factor = 1.0 - q
            clamped = factor < floor
            ll_pair = np.log(np.clip(factor, floor, 1.0))
            ll_total += ll_pair.sum(axis=1)
            if per_obs:
                np.add.at(ll_obs, (b_rows, prep.pair_obs[None, :]), ll_pair)
            if want_grad:
                # d log(1-q) / d z_d = -pdf(z_d) prod_{d'!=d} cdf(z_d') / (1-q)
                scale = np.where(clamped, 0.0, -1.0 / np.clip(factor, floor, None))
                g_z = scale[..., None] * _phi_pdf(z) * _loo_prod(cdf, axis=-1)
                g_d = g_z / (SQRT2 * sig[:, None, None])
                np.add.at(grad_f, (b_rows, prep.pair_p[None, :]), g_d)
                np.subtract.at(grad_f, (b_rows, prep.pair_i[None, :]), g_d)
                grad_logsig -= np.sum(d_pair * g_d, axis=(1, 2))

        for c, (ch_idx, rj_idx, obs_idx) in prep.groups.items():
            signs, members = self._subsets(c)
            n_subsets = 1 << c
            n_g = rj_idx.shape[0]
            per_event = 8 * b * n_e * self.config.quad_nodes * (n_subsets + c + 4)
            chunk = max(1, min(n_g, _CHUNK_BYTES // max(per_event, 1)))
            for start in range(0, n_g, chunk):
                sl = slice(start, min(start + chunk, n_g))
                self._rejection_chunk(
                    f,
                    sig,
                    ch_idx[sl],
                    rj_idx[sl],
                    obs_idx[sl],
                    signs,
                    members,
                    ll_total,
                    ll_obs,
                    grad_f,
                    grad_logsig,
                    b_rows,
                )

        outputs = (ll_obs if per_obs else ll_total, grad_f, grad_logsig)
        return outputs

    def _rejection_chunk(
        self,
        f,
        sig,
        ch_idx,
        rj_idx,
        obs_idx,
        signs,
        members,
        ll_total,
        ll_obs,
        grad_f,
        grad_logsig,
        b_rows,
    ) -> None:
        floor = self.config.log_floor
        want_grad = grad_f is not None
        c = ch_idx.shape[1]
        n_subsets = 1 << c
        # (B, n_g, c, n_e) latent gaps between each chosen row and the rejected row
        delta = f[:, ch_idx, :] - f[:, rj_idx, :][:, :, None, :]
        arg = delta[..., None] / sig[:, None, None, None, None] - SQRT2 * self._nodes
        cdf = ndtr(arg)  # (B, n_g, c, n_e, Q)
        pdf = _phi_pdf(arg) if want_grad else None
        shape_tail = (cdf.shape[0], cdf.shape[1], cdf.shape[3], cdf.shape[4])
        subset_prod = np.empty((n_subsets,) + shape_tail)
        subset_prod[0] = 1.0
        for s in range(1, n_subsets):
            low = s & -s
            subset_prod[s] = subset_prod[s ^ low] * cdf[:, :, low.bit_length() - 1]
        g_univ = subset_prod @ self._weights  # (n_subsets, B, n_g, n_e)
        prod_g = np.prod(g_univ, axis=-1)  # (n_subsets, B, n_g)
        r = np.tensordot(signs, prod_g, axes=1)  # (B, n_g)
        factor = 1.0 - np.clip(r, 0.0, 1.0)
        ll_event = np.log(np.clip(factor, floor, 1.0))
        ll_total += ll_event.sum(axis=1)
        if ll_obs is not None:
            np.add.at(ll_obs, (b_rows, obs_idx[None, :]), ll_event)
        if not want_grad:
            return
        loo_g = _loo_prod(g_univ, axis=-1)  # (n_subsets, B, n_g, n_e)
        dr_ddelta = np.zeros_like(delta)
        for s in range(1, n_subsets):
            for i in members[s]:
                t_term = (pdf[:, :, i] * subset_prod[s ^ (1 << i)]) @ self._weights
                dr_ddelta[:, :, i, :] += signs[s] * loo_g[s] * t_term
        dr_ddelta /= sig[:, None, None, None]
        live = (factor > floor) & (r >= 0.0) & (r <= 1.0)
        scale = np.where(live, -1.0 / np.clip(factor, floor, None), 0.0)
        dll_ddelta = scale[:, :, None, None] * dr_ddelta
        np.add.at(grad_f, (b_rows[:, :, None], ch_idx[None, :, :]), dll_ddelta)
        np.subtract.at(grad_f, (b_rows, rj_idx[None, :]), dll_ddelta.sum(axis=2))
        grad_logsig -= np.sum(delta * dll_ddelta, axis=(1, 2, 3))


def choice_log_likelihood(
    obs: ChoiceObservation, latents: np.ndarray, config: "LikelihoodConfig | None" = None
) -> float:
    """Log-probability of one observed choice given latent rows."""
    config = config or LikelihoodConfig()
    values = np.asarray(getattr(latents, "values", latents), dtype=float)
    engine = LikelihoodEngine([obs], values.shape[0], config)
    return float(engine.log_likelihood(values))


def dataset_log_likelihood(
    observations: Sequence[ChoiceObservation],
    latents: np.ndarray,
    config: "LikelihoodConfig | None" = None,
) -> float:
    """Sum of per-observation log-likelihoods; empty datasets give zero."""
    if not observations:
        return 0.0
    config = config or LikelihoodConfig()
    values = np.asarray(getattr(latents, "values", latents), dtype=float)
    engine = LikelihoodEngine(observations, values.shape[0], config)
    return float(engine.log_likelihood(values))


def single_winner_log_likelihood(
    obs: ChoiceObservation, latents: np.ndarray, config: "LikelihoodConfig | None" = None
) -> float:
    """One-dimensional single-winner form of the likelihood.

    For a scalar latent the chosen set is a single best option i, and the
    likelihood is the product over rejected options j of the probability
    that i noisily beats j, each integral evaluated here by its own
    Gauss-Hermite rule. This is an independent route to the same value as
    the general path and exists for cross-checking.
    """
    config = config or LikelihoodConfig()
    values = np.asarray(getattr(latents, "values", latents), dtype=float)
    if values.shape[1] != 1:
        raise ValueError("single-winner form requires a one-dimensional latent")
    if len(obs.chosen_indices) != 1:
        raise ValueError("single-winner form requires exactly one chosen option")
    i = obs.chosen_indices[0]
    t, w = hermgauss(config.quad_nodes)
    u = w / np.sqrt(np.pi)
    total = 0.0
    for j in obs.rejected_indices:
        gap = float(values[i, 0] - values[j, 0])
        prob = float(ndtr(gap / config.noise_sd - SQRT2 * t) @ u)
        total += float(np.log(np.clip(prob, config.log_floor, 1.0)))
    return total


def mc_likelihood_oracle(
    obs: ChoiceObservation,
    latents: np.ndarray,
    sigma: float,
    n_draws: int,
    seed: int,
    chunk: int = 200_000,
) -> tuple[float, float]:
    """Monte Carlo estimate of one choice probability, with standard error.

    Simulates the defining factor events directly: each rejection factor
    and each ordered chosen pair carries its own independent noise draw, so
    one Monte Carlo draw of the product multiplies freshly perturbed
    indicator variables. Written for tests; quadratic in the set size.
    """
    if n_draws < 10_000:
        raise ValueError("oracle needs at least 1e4 draws to be meaningful")
    values = np.asarray(getattr(latents, "values", latents), dtype=float)
    n_e = values.shape[1]
    rng = np.random.default_rng(seed)
    chosen = list(obs.chosen_indices)
    rejected = list(obs.rejected_indices)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_draws:
        nb = min(chunk, n_draws - done)
        prod = np.ones(nb)
        for j in rejected:
            vj = rng.normal(0.0, sigma, size=(nb, n_e))
            some_winner = np.zeros(nb, dtype=bool)
            for i in chosen:
                vi = rng.normal(0.0, sigma, size=(nb, n_e))
                some_winner |= np.all(values[i] + vi >= values[j] + vj, axis=1)
            prod *= some_winner
        for p in chosen:
            for i in chosen:
                if p == i:
                    continue
                vp = rng.normal(0.0, sigma, size=(nb, n_e))
                vi = rng.normal(0.0, sigma, size=(nb, n_e))
                prod *= ~np.all(values[p] + vp >= values[i] + vi, axis=1)
        total += float(prod.sum())
        total_sq += float((prod * prod).sum())
        done += nb
    mean = total / n_draws
    var = max(total_sq / n_draws - mean * mean, 0.0)
    return mean, float(np.sqrt(var / n_draws))
