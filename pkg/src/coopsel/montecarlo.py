"""Topology-level lifetime experiments.

Every topology draws its positions, fading and estimator noise from its own
stream, seeded by ``(base_seed, N, topology_index)``, so results do not
depend on how topologies are scheduled across workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import pairing as pr
from .channel import (
    I2I_MODEL,
    BivariateModel,
    DistanceUnit,
    I2OComposition,
    OutdoorMode,
    Scenario,
    default_i2o,
    fit_bivariate_model,
    generate_topology,
    mean_vector,
    sample_i2o_links,
    sample_links,
)
from .energy import RadioConfig
from .quality import (
    KEstimatorNoise,
    coding_gain_db,
    conditional_k_given_l,
    direct_db,
    map_db,
    mmse_db,
    varsigma,
)

__all__ = [
    "ESTIMATORS",
    "ExperimentSpec",
    "LifetimeResult",
    "TopologyRecord",
    "run_topology",
    "run_experiment",
    "estimation_error_pdf",
    "ks_distance",
    "parse_algorithm",
]

log = logging.getLogger(__name__)

ESTIMATORS = ("exact", "direct", "map", "mmse", "pl")
BASE_ALGORITHMS = ("none", "optimal", "random", "wlf-pl", "wlf-cg")


def parse_algorithm(name: str, default_estimator: str) -> tuple[str, str | None]:
    """Split ``"wlf-cg:map"`` into ``("wlf-cg", "map")``.

    Only WLF-CG consumes estimated qualities; the other algorithms report
    ``None`` as estimator (WLF-PL always uses ``-L``).
    """
    base, _, est = name.partition(":")
    if base not in BASE_ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}")
    if base != "wlf-cg":
        if est:
            raise ValueError(f"algorithm {base!r} takes no estimator")
        return base, None
    est = est or default_estimator
    if est not in ESTIMATORS:
        raise ValueError(f"unknown estimator {est!r}")
    return base, est


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one lifetime experiment."""

    n_nodes: tuple[int, ...] = (3,)
    n_topologies: int = 10_000
    algorithms: tuple[str, ...] = ("none", "wlf-pl", "wlf-cg")
    reference: str = "none"
    estimator: str = "exact"
    tau: float = 30.0
    n_model_nodes: int = 0
    phi_override: float | None = None
    k_noise_db: float | None = None
    base_seed: int = 0
    radio: RadioConfig = field(default_factory=RadioConfig)
    i2i: BivariateModel = I2I_MODEL
    i2o: I2OComposition = field(default_factory=default_i2o)
    indoor_rect: tuple[float, float] = (25.0, 25.0)
    ap_offset: float = 50.0
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "n_nodes", tuple(int(n) for n in np.atleast_1d(self.n_nodes)))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.n_topologies < 1:
            raise ValueError("n_topologies must be >= 1")
        if any(n < 1 for n in self.n_nodes):
            raise ValueError("node counts must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        for a in self.algorithms + (self.reference,):
            base, est = parse_algorithm(a, self.estimator)
            if est == "direct" and self.k_noise_db is None:
                raise ValueError("the direct estimator needs k_noise_db")
        if self.reference not in self.algorithms:
            raise ValueError("the reference algorithm must be one of the algorithms")
        if self.n_model_nodes and self.n_model_nodes < 3:
            raise ValueError("model refit needs at least 3 calibration nodes")

    def channel_models(self) -> tuple[BivariateModel, I2OComposition]:
        """Generating models after the optional correlation override.

        The override applies to the I2I model and the indoor stage of I2O;
        the outdoor stage keeps its own correlation.
        """
        if self.phi_override is None:
            return self.i2i, self.i2o
        phi = self.phi_override
        return self.i2i.with_phi(phi), replace(self.i2o, indoor=self.i2o.indoor.with_phi(phi))


@dataclass(frozen=True)
class TopologyRecord:
    n_nodes: int
    index: int
    emax_db: dict


def _streams(spec: ExperimentSpec, n_nodes: int, index: int, salt: int = 0):
    ss = np.random.SeedSequence([spec.base_seed, n_nodes, index, salt])
    return [np.random.default_rng(s) for s in ss.spawn(5)]


def _draw_network(spec, i2i, i2o, n_nodes, rng_topo, rng_fade, shared_outdoor):
    topo = generate_topology(n_nodes, spec.indoor_rect, spec.ap_offset, rng_topo)
    d_ij = topo.internode_distances()
    d_wall = topo.wall_distances()
    d_out = topo.outdoor_distance_km
    k_ij, l_ij = sample_links(i2i, d_ij, rng_fade)
    k_i0, l_i0 = sample_i2o_links(i2o, d_wall, d_out, rng_fade, shared_outdoor)
    return topo, d_ij, d_wall, (k_ij, l_ij), (k_i0, l_i0)


def _calibrate(spec, i2i, i2o, shared_outdoor, rng_topo, rng_fade):
    """Refit both priors from a prior session of ``n_model_nodes`` nodes."""
    n1 = spec.n_model_nodes
    _, d_ij, d_wall, (k_ij, l_ij), (k_i0, l_i0) = _draw_network(spec, i2i, i2o, n1, rng_topo, rng_fade, shared_outdoor)
    m_i2i = fit_bivariate_model(None, Scenario.I2I, D=d_ij, K=k_ij, L=l_ij)
    m_i2o = fit_bivariate_model(
        None, Scenario.I2O_INDOOR, D=d_wall, K=k_i0, L=l_i0, distance_unit=DistanceUnit.METERS, linear_in_D=True
    )
    return m_i2i, m_i2o


def _estimate(est, K, L, D, prior, noise, rng):
    if est == "exact":
        return coding_gain_db(K=K, L=L)
    if est == "pl":
        return -np.asarray(L, dtype=float)
    if est == "direct":
        return direct_db(K, L, noise, rng)
    mu, sigma = conditional_k_given_l(prior, np.atleast_1d(D), np.atleast_1d(L))
    return map_db(mu, sigma, L) if est == "map" else mmse_db(mu, sigma, L)


def run_topology(spec: ExperimentSpec, n_nodes: int, index: int) -> TopologyRecord:
    """``E^max`` (dB of joules) of every algorithm on one random topology.

    Pairings are chosen from estimated qualities but always costed with
    the exact coding gains.
    """
    rng_topo, rng_fade, rng_noise, rng_pair, rng_cal = _streams(spec, n_nodes, index)
    i2i, i2o = spec.channel_models()
    d_out = spec.ap_offset / 1000.0
    shared = i2o.draw_outdoor(d_out, rng_fade) if i2o.outdoor_mode is OutdoorMode.PER_TOPOLOGY else None
    topo, d_ij, d_wall, (k_ij, l_ij), (k_i0, l_i0) = _draw_network(spec, i2i, i2o, n_nodes, rng_topo, rng_fade, shared)

    exact = pr.QualityMatrix.from_condensed(coding_gain_db(K=k_i0, L=l_i0), coding_gain_db(K=k_ij, L=l_ij))
    graph = pr.build_weight_graph(exact, spec.radio)

    if spec.n_model_nodes:
        prior_i2i, prior_i2o = _calibrate(spec, i2i, i2o, shared, rng_cal, rng_cal)
    else:
        prior_i2i, prior_i2o = i2i, i2o.effective_model(d_out, shared)
    noise = KEstimatorNoise(spec.k_noise_db) if spec.k_noise_db is not None else None

    cache: dict[str, pr.QualityMatrix] = {"exact": exact}
    emax: dict[str, float] = {}
    for name in spec.algorithms:
        base, est = parse_algorithm(name, spec.estimator)
        if base == "none":
            ps = pr.no_cooperation(n_nodes)
        elif base == "optimal":
            ps = pr.optimal_pairing(graph)
        elif base == "random":
            ps = pr.random_pairing(n_nodes, rng_pair)
        elif base == "wlf-pl":
            q = pr.QualityMatrix.from_condensed(-l_i0, -l_ij, "pl")
            ps = pr.wlf_pairing(q, -math.inf)
        else:
            if est not in cache:
                up = _estimate(est, k_i0, l_i0, d_wall, prior_i2o, noise, rng_noise)
                inter = _estimate(est, k_ij, l_ij, d_ij, prior_i2i, noise, rng_noise) if n_nodes > 1 else []
                cache[est] = pr.QualityMatrix.from_condensed(up, inter, est)
            ps = pr.wlf_pairing(cache[est], spec.tau)
        emax[name] = pr.e_max_db(ps, graph)
    return TopologyRecord(n_nodes, index, emax)


@dataclass
class LifetimeResult:
    """Aggregated lifetimes for one node count."""

    n_nodes: int
    algorithms: tuple[str, ...]
    mean_emax: np.ndarray
    stderr: np.ndarray
    gain: np.ndarray
    gain_stderr: np.ndarray
    reference: str
    n_topologies: int
    samples: np.ndarray = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {a: float(g) for a, g in zip(self.algorithms, self.gain)}

    def gain_of(self, algorithm: str) -> float:
        return float(self.gain[self.algorithms.index(algorithm)])

    def gain_se_of(self, algorithm: str) -> float:
        return float(self.gain_stderr[self.algorithms.index(algorithm)])

    def mean_of(self, algorithm: str) -> float:
        return float(self.mean_emax[self.algorithms.index(algorithm)])


def _ratio_stats(ref: np.ndarray, alg: np.ndarray) -> tuple[float, float]:
    """Ratio of means and its delta-method standard error (paired samples)."""
    n = len(ref)
    mr, ma = ref.mean(), alg.mean()
    g = mr / ma
    if n < 2:
        return float(g), float("nan")
    c = np.cov(np.vstack([ref, alg]))
    var = g * g * (c[0, 0] / mr**2 + c[1, 1] / ma**2 - 2.0 * c[0, 1] / (mr * ma)) / n
    return float(g), float(math.sqrt(max(var, 0.0)))


def aggregate(spec: ExperimentSpec, n_nodes: int, records: Sequence[TopologyRecord]) -> LifetimeResult:
    records = sorted(records, key=lambda r: r.index)
    algs = spec.algorithms
    db = np.array([[r.emax_db[a] for a in algs] for r in records])
    e = 10.0 ** (db / 10.0)
    n = len(records)
    mean = e.mean(axis=0)
    se = e.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(len(algs), np.nan)
    ref = e[:, algs.index(spec.reference)]
    stats = [_ratio_stats(ref, e[:, k]) for k in range(len(algs))]
    return LifetimeResult(
        n_nodes,
        algs,
        mean,
        se,
        np.array([s[0] for s in stats]),
        np.array([s[1] for s in stats]),
        spec.reference,
        n,
        samples=e,
    )


def _run_chunk(args):
    spec, n_nodes, indices = args
    return [run_topology(spec, n_nodes, i) for i in indices]


def run_experiment(spec: ExperimentSpec, workers: int = 1, progress: bool = False) -> list[LifetimeResult]:
    """Run all topologies for every node count and aggregate in index order."""
    results = []
    for n in spec.n_nodes:
        idx = list(range(spec.n_topologies))
        if workers <= 1:
            records = [run_topology(spec, n, i) for i in idx]
        else:
            size = max(1, len(idx) // (workers * 8))
            chunks = [(spec, n, idx[k : k + size]) for k in range(0, len(idx), size)]
            with ProcessPoolExecutor(max_workers=workers) as ex:
                records = [r for chunk in ex.map(_run_chunk, chunks) for r in chunk]
        res = aggregate(spec, n, records)
        if progress:
            log.info("N=%d %s", n, {a: round(g, 3) for a, g in res.as_dict().items()})
        results.append(res)
    return results


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    from scipy.stats import ks_2samp

    return float(ks_2samp(np.asarray(a), np.asarray(b)).statistic)


def estimation_error_pdf(
    spec: ExperimentSpec,
    k_values: Sequence[float],
    bins: int | np.ndarray = 60,
    error_range: tuple[float, float] = (0.0, 30.0),
) -> dict:
    """Empirical pdf of the MAP uplink error ``|c_hat - c|`` at fixed true K.

    For each requested ``K`` (dB) every uplink of every topology is drawn
    with its composite K-factor pinned to that value and the path loss from
    its conditional law; the estimator uses the perfect or refit prior as
    configured by ``spec.n_model_nodes``. The path-loss-only error
    ``varsigma(K) = c + L`` is reported alongside.
    """
    i2i, i2o = spec.channel_models()
    d_out = spec.ap_offset / 1000.0
    n = spec.n_nodes[0]
    out = {}
    for k in k_values:
        errs = []
        for index in range(spec.n_topologies):
            rng_topo, rng_fade, _, _, rng_cal = _streams(spec, n, index, salt=1)
            shared = i2o.draw_outdoor(d_out, rng_fade) if i2o.outdoor_mode is OutdoorMode.PER_TOPOLOGY else None
            topo = generate_topology(n, spec.indoor_rect, spec.ap_offset, rng_topo)
            d_wall = topo.wall_distances()
            truth = i2o.effective_model(d_out, shared)
            muK, muL = mean_vector(truth, d_wall)
            if truth.sigmaK > 0:
                cond_mu = muL + truth.phi * truth.sigmaL / truth.sigmaK * (k - muK)
            else:
                cond_mu = muL
            cond_sd = truth.sigmaL * math.sqrt(max(0.0, 1.0 - truth.phi**2))
            L = cond_mu + cond_sd * rng_fade.standard_normal(n)
            c = varsigma(k) - L
            if spec.n_model_nodes:
                _, prior = _calibrate(spec, i2i, i2o, shared, rng_cal, rng_cal)
            else:
                prior = truth
            mu, sigma = conditional_k_given_l(prior, d_wall, L)
            errs.append(np.abs(map_db(mu, sigma, L) - c))
        errs = np.concatenate(errs)
        hist, edges = np.histogram(errs, bins=bins, range=error_range, density=True)
        out[float(k)] = {
            "errors": errs,
            "pdf": hist,
            "edges": edges,
            "pl_error": float(varsigma(k)),
        }
    return out
