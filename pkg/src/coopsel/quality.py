"""Coding gain and link-quality estimators.

The coding gain in dB is ``c = varsigma(K) - L`` with
``varsigma(K) = UPSILON * theta(K) - 10 log10(1 + theta(K))`` and
``UPSILON = 10 log10(e)``. Given only ``L``, the bivariate prior makes
``K | L`` Gaussian, and dropping the log term turns ``c | L`` into a
shifted log-normal with closed-form mode (MAP) and mean (MMSE).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .channel import BivariateModel, FadingParams, mean_vector, theta

__all__ = [
    "UPSILON",
    "QualitySource",
    "LinkQuality",
    "ConditionalKGivenL",
    "KEstimatorNoise",
    "DegenerateDistributionError",
    "coding_gain",
    "coding_gain_db",
    "varsigma",
    "q_function",
    "conditional_k_given_l",
    "posterior_pdf_c",
    "posterior_sf_c",
    "map_estimate",
    "mmse_estimate",
    "direct_estimate",
    "pl_only_estimate",
    "map_db",
    "mmse_db",
    "direct_db",
]

UPSILON = 10.0 * math.log10(math.e)
_SQRT2PI = math.sqrt(2.0 * math.pi)


class QualitySource(str, enum.Enum):
    EXACT = "exact"
    DIRECT_K = "direct_K"
    MAP = "MAP"
    MMSE = "MMSE"
    PL_ONLY = "PL_only"


class DegenerateDistributionError(ValueError):
    """The posterior has zero spread and no density."""


@dataclass(frozen=True)
class LinkQuality:
    c: float
    source: QualitySource


@dataclass(frozen=True)
class ConditionalKGivenL:
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class KEstimatorNoise:
    """RMSE of the linear-scale K estimate, given in dB.

    The additive noise on ``theta(K)`` has standard deviation
    ``theta(sigma_dK)``; ``sigma_dK = -inf`` is a noiseless estimator.
    """

    sigma_dK: float

    @property
    def linear_std(self) -> float:
        return 0.0 if self.sigma_dK == -math.inf else float(theta(self.sigma_dK))

    @classmethod
    def noiseless(cls) -> "KEstimatorNoise":
        return cls(-math.inf)


def varsigma(K):
    """K-dependent part of the coding gain in dB; ``-inf`` K gives 0."""
    tk = theta(K)
    return UPSILON * tk - 10.0 * np.log10(1.0 + tk)


def coding_gain_db(params: FadingParams | None = None, *, K=None, L=None):
    """Coding gain in dB; accepts a :class:`FadingParams` or arrays ``K``, ``L``."""
    if params is not None:
        return float(varsigma(params.k_db) - params.L)
    return varsigma(K) - np.asarray(L, dtype=float)


def coding_gain(params: FadingParams) -> float:
    """Linear coding gain ``e^theta(K) / (theta(L) (1 + theta(K)))``.

    Overflows to ``inf`` for very large K; use :func:`coding_gain_db` there.
    """
    tk = params.theta_k
    with np.errstate(over="ignore"):
        return float(np.exp(tk) / (theta(params.L) * (1.0 + tk)))


def q_function(x):
    """Gaussian tail probability ``Q(x) = P(Z > x)``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def conditional_k_given_l(model: BivariateModel, D, L_obs):
    """Gaussian law of ``K`` given an observed path loss at distance ``D``.

    Scalars give a :class:`ConditionalKGivenL`; arrays give ``(mu, sigma)``.
    """
    muK, muL = mean_vector(model, D)
    if model.sigmaL > 0:
        mu = muK + (model.sigmaK / model.sigmaL) * model.phi * (np.asarray(L_obs, dtype=float) - muL)
    else:
        mu = muK + 0.0 * np.asarray(L_obs, dtype=float)
    sigma = math.sqrt(max(0.0, 1.0 - model.phi**2)) * model.sigmaK
    if np.ndim(mu) == 0:
        return ConditionalKGivenL(float(mu), sigma)
    return mu, np.full(np.shape(mu), sigma)


def posterior_pdf_c(cond: ConditionalKGivenL, L_obs: float, c):
    """Shifted log-normal density of ``c | L`` at ``c`` (dB)."""
    if cond.sigma <= 0:
        raise DegenerateDistributionError("zero posterior spread; the law is a point mass")
    c = np.asarray(c, dtype=float)
    y = (c + L_obs) / UPSILON
    out = np.zeros_like(y)
    pos = y > 0
    k = 10.0 * np.log10(y[pos])
    s = cond.sigma
    out[pos] = np.exp(-0.5 * ((k - cond.mu) / s) ** 2) / (y[pos] * _SQRT2PI * s)
    return out if out.ndim else float(out)


def posterior_sf_c(mu, sigma, L_obs, threshold):
    """``P(c > threshold | L)`` under the shifted log-normal posterior.

    Vectorized; ``sigma = 0`` collapses to the indicator of the point mass.
    """
    mu, sigma, L_obs, threshold = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (mu, sigma, L_obs, threshold))
    )
    y = (threshold + L_obs) / UPSILON
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(y > 0, 10.0 * np.log10(np.where(y > 0, y, 1.0)), -np.inf)
        z = (k - mu) / sigma
        point = (mu > k).astype(float)
        out = np.where(sigma > 0, q_function(z), point)
    out = np.where(y > 0, out, 1.0)
    return out if out.ndim else float(out)


def map_db(mu, sigma, L_obs):
    """Vectorized MAP coding-gain estimate in dB."""
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    return UPSILON * theta(mu - sigma**2 / UPSILON) - np.asarray(L_obs, dtype=float)


def mmse_db(mu, sigma, L_obs):
    """Vectorized MMSE coding-gain estimate in dB (``max(K, 0)`` surrogate)."""
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -mu / sigma
        gauss = np.where(sigma > 0, sigma / _SQRT2PI * np.exp(-0.5 * t * t), 0.0)
        tail = np.where(sigma > 0, q_function(t), (mu > 0).astype(float))
    return UPSILON * theta(mu + sigma**2 / (2.0 * UPSILON)) - mu * tail - gauss - np.asarray(L_obs, dtype=float)


def map_estimate(cond: ConditionalKGivenL, L_obs: float) -> LinkQuality:
    """Mode of the shifted log-normal posterior; ``sigma = 0`` is the zero-variance limit."""
    return LinkQuality(float(map_db(cond.mu, cond.sigma, L_obs)), QualitySource.MAP)


def mmse_estimate(cond: ConditionalKGivenL, L_obs: float) -> LinkQuality:
    return LinkQuality(float(mmse_db(cond.mu, cond.sigma, L_obs)), QualitySource.MMSE)


def pl_only_estimate(L_obs: float) -> LinkQuality:
    return LinkQuality(-float(L_obs), QualitySource.PL_ONLY)


def noisy_theta_k(theta_k, std: float, rng: np.random.Generator):
    """Add zero-mean Gaussian noise to linear K-factors, truncated to stay positive.

    Truncation is by rejection: non-positive draws are redrawn.
    """
    theta_k = np.asarray(theta_k, dtype=float)
    if std == 0:
        return theta_k.copy()
    out = theta_k + std * rng.standard_normal(theta_k.shape)
    bad = out <= 0
    while np.any(bad):
        out[bad] = theta_k[bad] + std * rng.standard_normal(int(bad.sum()))
        bad = out <= 0
    return out


def direct_db(K, L, noise: KEstimatorNoise, rng: np.random.Generator):
    """Vectorized direct estimate: noisy K plugged into the exact coding gain."""
    noisy = noisy_theta_k(theta(K), noise.linear_std, rng)
    with np.errstate(divide="ignore"):
        K_hat = 10.0 * np.log10(noisy)
    return coding_gain_db(K=K_hat, L=L)


def direct_estimate(params: FadingParams, noise: KEstimatorNoise, rng: np.random.Generator) -> LinkQuality:
    return LinkQuality(float(direct_db(params.k_db, params.L, noise, rng)), QualitySource.DIRECT_K)
