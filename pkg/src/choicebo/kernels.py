"""Independent zero-mean GP priors per latent dimension.

Matern-3/2 kernels with per-dimension ARD lengthscales, Cholesky algebra
with jitter escalation, whitening between latent values and standard-normal
coordinates, and joint predictive conditionals at test points.

All inputs are expected on the unit cube: coordinates get min-max scaled at
ingestion and every lengthscale prior downstream assumes that scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from choicebo.domain import DimensionMismatchError, EmptyInputError, NumericError

SQRT3 = np.sqrt(3.0)

#: multiplicative jitter escalation: base, then x10 per retry, capped at 1e-3
JITTER_ESCALATIONS = 6


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters for the stack of independent GPs.

    ``lengthscales`` has one row per latent dimension; a single column means
    isotropic (broadcast over input coordinates). ``noise_sd`` is the choice
    noise scale sigma, shared across latent dimensions.
    """

    lengthscales: np.ndarray  # (n_e, n_x) or (n_e, 1), strictly positive
    signal_variances: np.ndarray  # (n_e,), strictly positive
    noise_sd: float  # sigma > 0

    def __post_init__(self) -> None:
        ls = np.atleast_2d(np.asarray(self.lengthscales, dtype=float))
        sv = np.atleast_1d(np.asarray(self.signal_variances, dtype=float))
        if ls.shape[0] != sv.shape[0]:
            raise DimensionMismatchError("one lengthscale row per latent dimension")
        if not (np.all(np.isfinite(ls)) and np.all(ls > 0)):
            raise ValueError("lengthscales must be positive and finite")
        if not (np.all(np.isfinite(sv)) and np.all(sv > 0)):
            raise ValueError("signal variances must be positive and finite")
        if not (np.isfinite(self.noise_sd) and self.noise_sd > 0):
            raise ValueError("noise_sd must be positive and finite")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variances", sv)
        object.__setattr__(self, "noise_sd", float(self.noise_sd))

    @property
    def n_e(self) -> int:
        return self.signal_variances.shape[0]


@dataclass(frozen=True)
class LatentMatrix:
    """One realization of the latent functions at the training points.

    ``values[:, d]`` equals ``L_d @ whitened[:, d]`` for the Cholesky factor
    of the d-th Gram matrix; both representations are kept because the
    sampler works on the whitened side while the likelihood needs values.
    """

    values: np.ndarray  # (m, n_e)
    whitened: np.ndarray  # (m, n_e)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        whitened = np.asarray(self.whitened, dtype=float)
        if values.shape != whitened.shape or values.ndim != 2:
            raise DimensionMismatchError("values and whitened must share an (m, n_e) shape")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(whitened))):
            raise ValueError("latent entries must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "whitened", whitened)

    def validate_against(self, factors: np.ndarray, rtol: float = 1e-10) -> None:
        rebuilt = np.stack(
            [factors[d] @ self.whitened[:, d] for d in range(self.values.shape[1])], axis=1
        )
        scale = max(float(np.max(np.abs(self.values))), 1.0)
        if np.max(np.abs(rebuilt - self.values)) > rtol * scale:
            raise ValueError("whitened representation does not reproduce values")


@dataclass(frozen=True)
class InputScaler:
    """Min-max map from raw coordinates onto the unit cube."""

    lo: np.ndarray  # (n_x,)
    hi: np.ndarray  # (n_x,)

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatchError("bounds must be two vectors of equal length")
        if not np.all(hi >= lo):
            raise ValueError("upper bounds must not be below lower bounds")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_bounds(cls, bounds: np.ndarray) -> "InputScaler":
        bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
        return cls(bounds[:, 0], bounds[:, 1])

    @classmethod
    def from_data(cls, coords: np.ndarray) -> "InputScaler":
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        return cls(coords.min(axis=0), coords.max(axis=0))

    def transform(self, coords: np.ndarray) -> np.ndarray:
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        return (coords - self.lo) / span

    def inverse(self, unit: np.ndarray) -> np.ndarray:
        unit = np.atleast_2d(np.asarray(unit, dtype=float))
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        return unit * span + self.lo


def _scaled_sqdists(x: np.ndarray, y: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    # (m, t) squared distances after dividing each coordinate by its lengthscale
    xs = x / lengthscales
    ys = y / lengthscales
    return np.maximum(
        (xs**2).sum(axis=1)[:, None] + (ys**2).sum(axis=1)[None, :] - 2.0 * xs @ ys.T, 0.0
    )


def kernel_matern32(
    x: np.ndarray, y: np.ndarray, lengthscales: np.ndarray, signal_variance: float
) -> float:
    """Matern-3/2 covariance between two points for one latent dimension."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DimensionMismatchError("points must share a dimension")
    ls = np.broadcast_to(np.atleast_1d(np.asarray(lengthscales, dtype=float)), x.shape)
    if np.any(ls <= 0) or signal_variance <= 0:
        raise ValueError("kernel hyperparameters must be positive")
    r = np.sqrt(np.sum(((x - y) / ls) ** 2))
    return float(signal_variance * (1.0 + SQRT3 * r) * np.exp(-SQRT3 * r))


def matern32_gram(
    x: np.ndarray,
    lengthscales: np.ndarray,
    signal_variance: float,
    y: "np.ndarray | None" = None,
) -> np.ndarray:
    """Gram (or cross-covariance) matrix for one latent dimension."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    other = x if y is None else np.atleast_2d(np.asarray(y, dtype=float))
    ls = np.broadcast_to(np.atleast_1d(np.asarray(lengthscales, dtype=float)), (x.shape[1],))
    r = np.sqrt(_scaled_sqdists(x, other, ls))
    out = signal_variance * (1.0 + SQRT3 * r) * np.exp(-SQRT3 * r)
    if y is None:
        # exact symmetry matters for the Cholesky downstream
        out = 0.5 * (out + out.T)
    return out


def gram_cholesky(
    points: np.ndarray, params: KernelParams, jitter: "float | None" = None
) -> tuple[np.ndarray, np.ndarray]:
    """Lower Cholesky factors of every per-dimension Gram matrix.

    Returns ``(factors, jitters)`` with factors of shape (n_e, m, m); the
    jitter actually used per dimension is reported because it escalates by
    x10 on factorization failure before giving up.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = points.shape[0]
    if m < 1:
        raise EmptyInputError("need at least one training point")
    factors = np.empty((params.n_e, m, m))
    jitters = np.empty(params.n_e)
    for d in range(params.n_e):
        sv = float(params.signal_variances[d])
        K = matern32_gram(points, params.lengthscales[d], sv)
        base = 1e-8 * sv if jitter is None else float(jitter)
        cap = 1e-3 * max(sv, 1.0)
        current = base
        for attempt in range(JITTER_ESCALATIONS):
            try:
                factors[d] = cholesky(K + current * np.eye(m), lower=True, check_finite=False)
                break
            except np.linalg.LinAlgError:
                if attempt == JITTER_ESCALATIONS - 1:
                    raise NumericError(
                        f"Gram matrix for latent dimension {d} stayed non-positive-definite "
                        f"up to jitter {current:g}"
                    ) from None
                current = min(current * 10.0, cap)
        jitters[d] = current
    return factors, jitters


def whiten(values: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """Map latent values to standard-normal coordinates, column by column."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    for d in range(values.shape[1]):
        out[:, d] = solve_triangular(factors[d], values[:, d], lower=True, check_finite=False)
    return out


def unwhiten(whitened: np.ndarray, factors: np.ndarray) -> np.ndarray:
    whitened = np.asarray(whitened, dtype=float)
    out = np.empty_like(whitened)
    for d in range(whitened.shape[1]):
        out[:, d] = factors[d] @ whitened[:, d]
    return out


def latent_matrix_from_whitened(whitened: np.ndarray, factors: np.ndarray) -> LatentMatrix:
    return LatentMatrix(unwhiten(whitened, factors), np.asarray(whitened, dtype=float))


class PredictiveOperator:
    """Shared algebra for conditioning every stored sample on test points.

    For one latent dimension with train Gram K = L Lt and cross-covariance
    K*, the conditional mean of a sample f = L u is K*t K^-1 f = Wt u with
    W = L^-1 K*, and the conditional covariance K** - Wt W is sample
    independent, so its Cholesky is computed once.
    """

    def __init__(
        self,
        train_points: np.ndarray,
        test_points: np.ndarray,
        params: KernelParams,
        factors: np.ndarray,
        jitter: float = 1e-8,
    ) -> None:
        train_points = np.atleast_2d(np.asarray(train_points, dtype=float))
        test_points = np.atleast_2d(np.asarray(test_points, dtype=float))
        if test_points.shape[0] < 1:
            raise EmptyInputError("need at least one test point")
        if test_points.shape[1] != train_points.shape[1]:
            raise DimensionMismatchError("train and test points must share n_x")
        n_e = params.n_e
        t = test_points.shape[0]
        self.n_test = t
        self.n_e = n_e
        self._w = np.empty((n_e, train_points.shape[0], t))
        self._chol = np.empty((n_e, t, t))
        for d in range(n_e):
            sv = float(params.signal_variances[d])
            k_cross = matern32_gram(train_points, params.lengthscales[d], sv, test_points)
            k_test = matern32_gram(test_points, params.lengthscales[d], sv)
            w = solve_triangular(factors[d], k_cross, lower=True, check_finite=False)
            cov = k_test - w.T @ w
            cov = 0.5 * (cov + cov.T)
            eps = jitter * sv
            for attempt in range(JITTER_ESCALATIONS):
                try:
                    self._chol[d] = cholesky(
                        cov + eps * np.eye(t), lower=True, check_finite=False
                    )
                    break
                except np.linalg.LinAlgError:
                    eps *= 10.0
                    if attempt == JITTER_ESCALATIONS - 1:
                        raise NumericError("conditional covariance not positive definite")
            self._w[d] = w

    def conditional_mean(self, whitened: np.ndarray) -> np.ndarray:
        """(m, n_e) whitened sample -> (n_test, n_e) conditional means."""
        return np.stack(
            [self._w[d].T @ whitened[:, d] for d in range(self.n_e)], axis=1
        )

    def draw(self, whitened: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One joint conditional draw for one stored sample."""
        noise = rng.standard_normal((self.n_test, self.n_e))
        mean = self.conditional_mean(whitened)
        return mean + np.stack(
            [self._chol[d] @ noise[:, d] for d in range(self.n_e)], axis=1
        )

    def draw_batch(self, whitened_bank: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """(S, m, n_e) whitened bank -> (S, n_test, n_e) joint draws."""
        s = whitened_bank.shape[0]
        noise = rng.standard_normal((s, self.n_test, self.n_e))
        out = np.empty((s, self.n_test, self.n_e))
        for d in range(self.n_e):
            mean = whitened_bank[:, :, d] @ self._w[d]  # (S, t)
            out[:, :, d] = mean + noise[:, :, d] @ self._chol[d].T
        return out

    def marginal_variance(self) -> np.ndarray:
        """(n_test, n_e) conditional variances."""
        return np.stack(
            [np.sum(self._chol[d] ** 2, axis=1) for d in range(self.n_e)], axis=1
        )


def predictive_conditional(
    train_points: np.ndarray,
    train_latents: LatentMatrix,
    test_points: np.ndarray,
    params: KernelParams,
    seed: "int | np.random.Generator",
    jitter: float = 1e-8,
) -> np.ndarray:
    """One joint draw of the latent functions at test points.

    Conditions on a single whitened training realization; deterministic
    given the seed.
    """
    factors, _ = gram_cholesky(train_points, params, jitter)
    op = PredictiveOperator(train_points, test_points, params, factors, jitter)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return op.draw(train_latents.whitened, rng)
