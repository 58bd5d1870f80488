"""Reference model with direct access to the true objectives.

Plain independent GP regression per output with a Gaussian likelihood:
exact conjugate posterior, hyperparameters picked by marginal-likelihood
grid search over an isotropic lengthscale and a signal variance on
standardized targets. Serves as the ceiling comparator for the
choice-trained surrogate in simulated experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from choicebo.domain import ChoiceObservation, DimensionMismatchError, EmptyInputError
from choicebo.inference import modal_nondominated
from choicebo.kernels import matern32_gram

__all__ = ["OracleGp", "OracleGpConfig", "fit_oracle_gp"]

_DRAW_STREAM = 29


@dataclass(frozen=True)
class OracleGpConfig:
    lengthscale_grid: tuple = tuple(np.geomspace(0.05, 2.0, 10).tolist())
    variance_grid: tuple = (0.25, 1.0, 4.0)
    noise_variance: float = 1e-6  # on standardized targets
    n_draws: int = 256
    jitter: float = 1e-8

    def __post_init__(self) -> None:
        if not self.lengthscale_grid or not self.variance_grid:
            raise ValueError("grids must be non-empty")
        if min(self.lengthscale_grid) <= 0 or min(self.variance_grid) <= 0:
            raise ValueError("grids must be strictly positive")
        if self.noise_variance <= 0 or self.jitter <= 0:
            raise ValueError("noise variance and jitter must be positive")
        if self.n_draws < 1:
            raise ValueError("n_draws must be at least 1")


def _marginal_loglik(chol: np.ndarray, y: np.ndarray) -> float:
    alpha = cho_solve((chol, True), y)
    return float(
        -0.5 * y @ alpha - np.log(np.diag(chol)).sum() - 0.5 * y.shape[0] * math.log(2 * math.pi)
    )


@dataclass(frozen=True)
class OracleGp:
    """Exact GP regression posterior over each true objective."""

    train_points: np.ndarray  # (m, n_x)
    loc: np.ndarray  # (n_o,) target means
    scale: np.ndarray  # (n_o,) target standard deviations
    lengthscales: np.ndarray  # (n_o,) isotropic, standardized space
    variances: np.ndarray  # (n_o,)
    factors: np.ndarray  # (n_o, m, m) cholesky of K + noise I
    alphas: np.ndarray  # (n_o, m)
    marginal_logliks: np.ndarray  # (n_o,) at the selected grid point
    config: OracleGpConfig
    seed: int

    @property
    def n_outputs(self) -> int:
        return self.loc.shape[0]

    def predict_mean(self, test_points: np.ndarray) -> np.ndarray:
        test = np.atleast_2d(np.asarray(test_points, dtype=float))
        self._check_width(test)
        out = np.empty((test.shape[0], self.n_outputs))
        for d in range(self.n_outputs):
            cross = matern32_gram(
                self.train_points, self.lengthscales[d], self.variances[d], y=test
            )
            out[:, d] = self.loc[d] + self.scale[d] * (cross.T @ self.alphas[d])
        return out

    def draw(self, test_points: np.ndarray, n_draws: "int | None" = None, seed=None) -> np.ndarray:
        """Joint predictive draws, shape (n_draws, t, n_o)."""
        test = np.atleast_2d(np.asarray(test_points, dtype=float))
        self._check_width(test)
        if test.shape[0] == 0:
            raise EmptyInputError("need at least one test point")
        s = self.config.n_draws if n_draws is None else int(n_draws)
        rng = np.random.default_rng(
            np.random.SeedSequence((self.seed, _DRAW_STREAM)) if seed is None else seed
        )
        out = np.empty((s, test.shape[0], self.n_outputs))
        for d in range(self.n_outputs):
            cross = matern32_gram(
                self.train_points, self.lengthscales[d], self.variances[d], y=test
            )
            prior = matern32_gram(test, self.lengthscales[d], self.variances[d])
            w = solve_triangular(self.factors[d], cross, lower=True)
            cov = prior - w.T @ w
            cov[np.diag_indices_from(cov)] += self.config.jitter
            chol = np.linalg.cholesky(0.5 * (cov + cov.T))
            mean = cross.T @ self.alphas[d]
            noise = rng.standard_normal((s, test.shape[0]))
            out[:, :, d] = self.loc[d] + self.scale[d] * (mean + noise @ chol.T)
        return out

    def predict_choice(self, options: np.ndarray, seed=None) -> ChoiceObservation:
        """Modal non-dominated subset across predictive draws."""
        options = np.atleast_2d(np.asarray(options, dtype=float))
        draws = self.draw(options, seed=seed)
        return ChoiceObservation(tuple(range(options.shape[0])), modal_nondominated(draws))

    def _check_width(self, test: np.ndarray) -> None:
        if test.shape[1] != self.train_points.shape[1]:
            raise DimensionMismatchError(
                f"expected {self.train_points.shape[1]} input coordinates, got {test.shape[1]}"
            )


def fit_oracle_gp(
    train_points: np.ndarray,
    values: np.ndarray,
    config: "OracleGpConfig | None" = None,
    seed: int = 0,
) -> OracleGp:
    """Grid-search marginal likelihood per output, keep the exact posterior."""
    cfg = config or OracleGpConfig()
    x = np.atleast_2d(np.asarray(train_points, dtype=float))
    y = np.atleast_2d(np.asarray(values, dtype=float))
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatchError("one target row per training point")
    if x.shape[0] < 2:
        raise EmptyInputError("need at least two training points")

    m, n_o = y.shape
    loc = y.mean(axis=0)
    scale = y.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    y_std = (y - loc) / scale

    lengthscales = np.empty(n_o)
    variances = np.empty(n_o)
    factors = np.empty((n_o, m, m))
    alphas = np.empty((n_o, m))
    best_mll = np.full(n_o, -np.inf)
    for d in range(n_o):
        for ls in cfg.lengthscale_grid:
            for var in cfg.variance_grid:
                gram = matern32_gram(x, ls, var)
                gram[np.diag_indices_from(gram)] += cfg.noise_variance
                try:
                    chol = np.linalg.cholesky(gram)
                except np.linalg.LinAlgError:
                    continue
                mll = _marginal_loglik(chol, y_std[:, d])
                if mll > best_mll[d]:
                    best_mll[d] = mll
                    lengthscales[d] = ls
                    variances[d] = var
                    factors[d] = chol
                    alphas[d] = cho_solve((chol, True), y_std[:, d])
        if not np.isfinite(best_mll[d]):
            raise np.linalg.LinAlgError("no grid point produced a valid factorization")
    return OracleGp(
        train_points=x,
        loc=loc,
        scale=scale,
        lengthscales=lengthscales,
        variances=variances,
        factors=factors,
        alphas=alphas,
        marginal_logliks=best_mll,
        config=cfg,
        seed=int(seed),
    )
