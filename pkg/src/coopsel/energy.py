"""Outage, transmit power and per-frame energy for direct and AF transmission.

All formulas are the high-SNR closed forms. Coding gains are linear here;
the ``*_db`` helpers do the same algebra on dB values so that extremely
large coding gains (high K-factors) do not overflow.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BetaPolicy",
    "RadioConfig",
    "CoopLinkBudget",
    "HighOutageWarning",
    "gamma_th_direct",
    "gamma_th_coop",
    "outage_direct",
    "outage_coop",
    "effective_snr",
    "coop_coding_gain",
    "coop_coding_gain_db",
    "lambda_ratio",
    "optimal_beta",
    "kappa",
    "transmit_power_direct",
    "transmit_power_coop",
    "energy_direct",
    "energy_coop",
    "direct_energy_db",
    "pair_energy_db",
    "rician_gains",
    "outage_direct_mc",
    "outage_coop_mc",
]

HIGH_OUTAGE = 1e-2
_LN2 = math.log(2.0)


class HighOutageWarning(UserWarning):
    """The asymptotic outage formula is evaluated where it is not tight."""


class BetaPolicy(str, enum.Enum):
    FIXED_HALF = "fixed_half"
    APPROX_EQ10 = "approx_eq10"
    EXACT_ROOT = "exact_root"


@dataclass(frozen=True)
class RadioConfig:
    """Radio and frame parameters.

    ``sigma2`` and ``T_S`` default to 1: lifetime gains are ratios, so the
    absolute scales cancel.
    """

    R: float = 1.0
    Gamma: float = 1.0
    p: float = 1e-3
    sigma2: float = 1.0
    T_S: float = 1.0
    T_F: float = 1.0
    E_RX: float = 0.0
    E_P: float = 0.0
    upsilon_AF: float = 0.1
    beta_policy: BetaPolicy = BetaPolicy.FIXED_HALF

    def __post_init__(self):
        object.__setattr__(self, "beta_policy", BetaPolicy(self.beta_policy))
        if self.R <= 0:
            raise ValueError("R must be positive")
        if not 0 < self.Gamma <= 1:
            raise ValueError("Gamma must be in (0, 1]")
        if not 0 < self.p < 1:
            raise ValueError("p must be in (0, 1)")
        if self.sigma2 <= 0 or self.T_S <= 0 or self.T_F <= 0:
            raise ValueError("sigma2, T_S and T_F must be positive")
        if self.upsilon_AF <= 0:
            raise ValueError("upsilon_AF must be positive")
        if self.E_RX < 0 or self.E_P < 0:
            raise ValueError("energy overheads must be non-negative")

    @classmethod
    def from_frame(cls, T_F: float, n_nodes: int, **kw) -> "RadioConfig":
        """Config whose subframe is one of ``n_nodes + 1`` TDMA slots."""
        return cls(T_S=T_F / (n_nodes + 1), T_F=T_F, **kw)


@dataclass(frozen=True)
class CoopLinkBudget:
    c_i0: float
    c_ij: float
    c_j0: float
    beta: float = 0.5
    rho: float = 1.0
    diversity_order: int = 2

    def __post_init__(self):
        if min(self.c_i0, self.c_ij, self.c_j0) <= 0:
            raise ValueError("coding gains must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must be in (0, 1)")
        if self.diversity_order != 2:
            raise ValueError("AF over Rician fading has diversity order 2")


def gamma_th_direct(cfg: RadioConfig) -> float:
    return (2.0**cfg.R - 1.0) / cfg.Gamma


def gamma_th_coop(beta, cfg: RadioConfig):
    return np.expm1(cfg.R * _LN2 / np.asarray(beta, dtype=float)) / cfg.Gamma


def _flag(prob) -> None:
    if np.any(np.asarray(prob) > HIGH_OUTAGE):
        warnings.warn(
            "predicted outage above 1e-2; the high-SNR approximation is loose here",
            HighOutageWarning,
            stacklevel=3,
        )


def outage_direct(c, rho, cfg: RadioConfig):
    """High-SNR outage of a direct link: ``gamma_th sigma^2 / (c rho)``."""
    prob = gamma_th_direct(cfg) * cfg.sigma2 / (np.asarray(c, dtype=float) * np.asarray(rho, dtype=float))
    _flag(prob)
    return prob if np.ndim(prob) else float(prob)


def effective_snr(g_i0, g_ij, g_j0):
    """Post-combining SNR of variable-gain AF relaying plus the direct path."""
    g_i0, g_ij, g_j0 = (np.asarray(g, dtype=float) for g in (g_i0, g_ij, g_j0))
    with np.errstate(divide="ignore", invalid="ignore"):
        # (1/a + 1/b + 1/(ab))^-1 == ab / (a + b + 1)
        relay = np.where((g_ij > 0) & (g_j0 > 0), g_ij * g_j0 / (g_ij + g_j0 + 1.0), 0.0)
        relay = np.where(np.isinf(g_ij), g_j0, relay)
        relay = np.where(np.isinf(g_j0), g_ij, relay)
    out = g_i0 + relay
    return out if out.ndim else float(out)


def coop_coding_gain(c_i0, c_ij, c_j0):
    """Effective coding gain of node ``i`` relayed by ``j``: ``[(1/c_i0)(1/c_ij + 1/c_j0)]^(-1/2)``."""
    c_i0, c_ij, c_j0 = (np.asarray(c, dtype=float) for c in (c_i0, c_ij, c_j0))
    out = ((1.0 / c_i0) * (1.0 / c_ij + 1.0 / c_j0)) ** -0.5
    return out if out.ndim else float(out)


def _db_sum_inv(a_db, b_db):
    """dB of ``1/a + 1/b`` given ``a``, ``b`` in dB."""
    return 10.0 / math.log(10.0) * np.logaddexp(-a_db * math.log(10.0) / 10.0, -b_db * math.log(10.0) / 10.0)


def coop_coding_gain_db(c_i0_db, c_ij_db, c_j0_db):
    """:func:`coop_coding_gain` in the dB domain."""
    return 0.5 * (np.asarray(c_i0_db, dtype=float) - _db_sum_inv(c_ij_db, c_j0_db))


def outage_coop(budget: CoopLinkBudget, cfg: RadioConfig) -> float:
    """High-SNR outage of node ``i`` relayed by ``j`` at slot fraction ``beta``."""
    c = coop_coding_gain(budget.c_i0, budget.c_ij, budget.c_j0)
    prob = 0.5 * (gamma_th_coop(budget.beta, cfg) * cfg.sigma2 / (c * budget.rho)) ** budget.diversity_order
    _flag(prob)
    return float(prob)


def lambda_ratio(c_i0, c_ij, c_j0):
    """``sqrt((1 + c_i0/c_ij) / (1 + c_j0/c_ij))``; equals ``c_(i,j),0 / c_(j,i),0``."""
    c_i0, c_ij, c_j0 = (np.asarray(c, dtype=float) for c in (c_i0, c_ij, c_j0))
    out = np.sqrt((1.0 + c_i0 / c_ij) / (1.0 + c_j0 / c_ij))
    return out if out.ndim else float(out)


def _log_expm1(x):
    # log(e^x - 1), stable for large x
    x = np.asarray(x, dtype=float)
    return np.where(x > 30.0, x + np.log1p(-np.exp(-np.minimum(x, 700.0))), np.log(np.expm1(np.minimum(x, 30.0))))


def slot_balance(beta, lam: float, R: float):
    """``2^(R/beta) - 1 - lam (2^(R/(1-beta)) - 1)``; decreasing in beta."""
    beta = np.asarray(beta, dtype=float)
    with np.errstate(over="ignore"):
        return np.expm1(R * _LN2 / beta) - lam * np.expm1(R * _LN2 / (1.0 - beta))


def _exact_beta(lam: float, R: float) -> float:
    if lam == 1.0:
        return 0.5
    # sign of the balance equation, evaluated in logs so extreme lam stays finite
    log_lam = math.log(lam)

    def g(b):
        return float(_log_expm1(R * _LN2 / b) - log_lam - _log_expm1(R * _LN2 / (1.0 - b)))

    lo, hi = 1e-12, 1.0 - 1e-12
    if g(hi) > 0:
        return hi
    if g(lo) < 0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def optimal_beta(c_i0, c_ij, c_j0, cfg: RadioConfig, policy: BetaPolicy | str | None = None) -> float:
    """Slot fraction for node ``i``'s own data.

    ``fixed_half`` returns 1/2; ``approx_eq10`` is the small-``log2(lam)``
    expansion, clamped to (0.05, 0.95) with a fallback to the exact root;
    ``exact_root`` bisects the power-balance equation.
    """
    policy = BetaPolicy(policy or cfg.beta_policy)
    if policy is BetaPolicy.FIXED_HALF:
        return 0.5
    lam = lambda_ratio(c_i0, c_ij, c_j0)
    if policy is BetaPolicy.APPROX_EQ10:
        beta = 0.5 - math.log2(lam) / (8.0 * cfg.R)
        if 0.05 < beta < 0.95:
            return beta
        warnings.warn(
            f"approximate slot split {beta:.3f} outside (0.05, 0.95); using the exact root",
            RuntimeWarning,
            stacklevel=2,
        )
    return _exact_beta(lam, cfg.R)


def kappa(beta, c_ij0, c_ji0, cfg: RadioConfig):
    """Rate-normalized inverse gain that the common power must cover."""
    beta = np.asarray(beta, dtype=float)
    with np.errstate(over="ignore"):
        a = np.expm1(cfg.R * _LN2 / beta) / (cfg.Gamma * c_ij0)
        b = np.expm1(cfg.R * _LN2 / (1.0 - beta)) / (cfg.Gamma * c_ji0)
    out = np.maximum(a, b)
    return out if out.ndim else float(out)


def transmit_power_direct(c_i0, cfg: RadioConfig):
    """Power meeting the outage target on a direct link."""
    out = gamma_th_direct(cfg) * cfg.sigma2 / (np.asarray(c_i0, dtype=float) * cfg.p)
    return out if np.ndim(out) else float(out)


def transmit_power_coop(c_i0: float, c_ij: float, c_j0: float, cfg: RadioConfig, policy=None) -> tuple[float, float]:
    """Common power ``rho`` and slot fraction ``beta`` for the pair ``(i, j)``.

    Both nodes transmit at ``kappa(beta) sigma^2 / sqrt(2 p)``, which meets
    both outage constraints.
    """
    beta = optimal_beta(c_i0, c_ij, c_j0, cfg, policy)
    c_ij0 = coop_coding_gain(c_i0, c_ij, c_j0)
    c_ji0 = coop_coding_gain(c_j0, c_ij, c_i0)
    rho = kappa(beta, c_ij0, c_ji0, cfg) * cfg.sigma2 / math.sqrt(2.0 * cfg.p)
    return float(rho), beta


def energy_direct(rho, cfg: RadioConfig):
    return rho * cfg.T_S + cfg.E_RX * cfg.T_S / cfg.T_F + cfg.E_P


def energy_coop(rho, beta, cfg: RadioConfig):
    return rho * cfg.T_S + cfg.E_RX * (2.0 - beta) * cfg.T_S / cfg.T_F + (1.0 + cfg.upsilon_AF) * cfg.E_P


# --- dB-domain helpers used by the pairing graph -------------------------------------


def direct_energy_db(c_i0_db, cfg: RadioConfig):
    """``10 log10`` of the direct-transmission energy, from the uplink gain in dB.

    With non-zero overheads this leaves the pure-power regime and is
    evaluated through the linear formula.
    """
    c = np.asarray(c_i0_db, dtype=float)
    rho_db = 10.0 * math.log10(gamma_th_direct(cfg) * cfg.sigma2 / cfg.p) - c
    if cfg.E_RX == 0 and cfg.E_P == 0:
        return rho_db + 10.0 * math.log10(cfg.T_S)
    return 10.0 * np.log10(energy_direct(10.0 ** (rho_db / 10.0), cfg))


def _beta_array(c_i0_db, c_ij_db, c_j0_db, cfg: RadioConfig):
    policy = cfg.beta_policy
    shape = np.broadcast(c_i0_db, c_ij_db, c_j0_db).shape
    if policy is BetaPolicy.FIXED_HALF:
        return np.full(shape, 0.5)
    # lam from dB differences: 1 + c_i0/c_ij = 1 + 10^((c_i0 - c_ij)/10)
    ln10 = math.log(10.0) / 10.0
    log_lam = 0.5 * (
        np.logaddexp(0.0, (np.asarray(c_i0_db) - c_ij_db) * ln10)
        - np.logaddexp(0.0, (np.asarray(c_j0_db) - c_ij_db) * ln10)
    )
    lam = np.exp(np.broadcast_to(log_lam, shape))
    out = np.empty(shape)
    for idx, la in np.ndenumerate(lam):
        if policy is BetaPolicy.APPROX_EQ10:
            b = 0.5 - math.log2(la) / (8.0 * cfg.R)
            out[idx] = b if 0.05 < b < 0.95 else _exact_beta(la, cfg.R)
        else:
            out[idx] = _exact_beta(la, cfg.R)
    return out


def pair_energy_db(c_i0_db, c_ij_db, c_j0_db, cfg: RadioConfig):
    """Max per-node energy (dB) of the AF pair ``(i, j)`` and the slot fraction used.

    Vectorized over pairs; the common power follows the power-balancing
    rule, so both nodes radiate the same energy and only the receive
    overhead differs between them.
    """
    c_i0_db, c_ij_db, c_j0_db = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (c_i0_db, c_ij_db, c_j0_db))
    )
    beta = _beta_array(c_i0_db, c_ij_db, c_j0_db, cfg)
    cij0 = coop_coding_gain_db(c_i0_db, c_ij_db, c_j0_db)
    cji0 = coop_coding_gain_db(c_j0_db, c_ij_db, c_i0_db)
    a = _log_expm1(cfg.R * _LN2 / beta) / math.log(10.0) * 10.0 - cij0
    b = _log_expm1(cfg.R * _LN2 / (1.0 - beta)) / math.log(10.0) * 10.0 - cji0
    kappa_db = np.maximum(a, b) - 10.0 * math.log10(cfg.Gamma)
    rho_db = kappa_db + 10.0 * math.log10(cfg.sigma2 / math.sqrt(2.0 * cfg.p))
    if cfg.E_RX == 0 and cfg.E_P == 0:
        return rho_db + 10.0 * math.log10(cfg.T_S), beta
    rho = 10.0 ** (rho_db / 10.0)
    e = np.maximum(energy_coop(rho, beta, cfg), energy_coop(rho, 1.0 - beta, cfg))
    return 10.0 * np.log10(e), beta


# --- Monte Carlo fading oracles -------------------------------------------------------


def rician_gains(K_db: float, L_db: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``|h|^2`` draws for a Rician link with K-factor and path loss in dB."""
    tk = 0.0 if K_db == -math.inf else 10.0 ** (K_db / 10.0)
    omega = 10.0 ** (-L_db / 10.0)
    mean_amp = math.sqrt(omega * tk / (1.0 + tk))
    scatter = math.sqrt(omega / (1.0 + tk) / 2.0)
    re = mean_amp + scatter * rng.standard_normal(n)
    im = scatter * rng.standard_normal(n)
    return re * re + im * im


def outage_direct_mc(K_db, L_db, rho, cfg: RadioConfig, n_draws: int, rng: np.random.Generator, chunk: int = 2_000_000) -> float:
    """Empirical ``P(gamma < gamma_th)`` over ``n_draws`` block-fading realizations."""
    if rho <= 0:
        return 1.0
    thr = gamma_th_direct(cfg) * cfg.sigma2 / rho
    hits = 0
    left = n_draws
    while left > 0:
        m = min(chunk, left)
        hits += int(np.count_nonzero(rician_gains(K_db, L_db, m, rng) < thr))
        left -= m
    return hits / n_draws


def outage_coop_mc(
    links: tuple[tuple[float, float], tuple[float, float], tuple[float, float]],
    rho: float,
    beta: float,
    cfg: RadioConfig,
    n_draws: int,
    rng: np.random.Generator,
    chunk: int = 1_000_000,
) -> float:
    """Empirical AF outage of node ``i`` relayed by ``j``.

    ``links`` holds ``(K, L)`` in dB for the ``i->0``, ``i->j`` and ``j->0``
    links; both nodes transmit at ``rho`` and the relay uses variable gain,
    which yields the exact combined SNR of :func:`effective_snr`.
    """
    (k_i0, l_i0), (k_ij, l_ij), (k_j0, l_j0) = links
    snr = rho / cfg.sigma2
    thr = float(gamma_th_coop(beta, cfg))
    hits = 0
    left = n_draws
    while left > 0:
        m = min(chunk, left)
        g = effective_snr(
            snr * rician_gains(k_i0, l_i0, m, rng),
            snr * rician_gains(k_ij, l_ij, m, rng),
            snr * rician_gains(k_j0, l_j0, m, rng),
        )
        hits += int(np.count_nonzero(g < thr))
        left -= m
    return hits / n_draws
