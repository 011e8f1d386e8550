"""Bivariate (K-factor, path loss) channel model for I2I and I2O links.

Each link is described by a Rician K-factor ``K`` and a path loss ``L``, both
in dB, jointly Gaussian around distance-dependent means with a fixed
covariance. Indoor-to-outdoor links are composed of an indoor stage (node to
wall), a constant wall penetration loss and an outdoor stage (wall to AP).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Scenario",
    "DistanceUnit",
    "OutdoorMode",
    "FadingParams",
    "BivariateModel",
    "I2OComposition",
    "Topology",
    "SingularRegressionError",
    "I2I_MODEL",
    "I2O_OUTDOOR_MODEL",
    "I2O_INDOOR_MODEL",
    "WALL_LOSS_DB",
    "default_i2o",
    "theta",
    "theta_inv",
    "mean_vector",
    "sample_link",
    "sample_links",
    "sample_i2o_link",
    "sample_i2o_links",
    "fit_bivariate_model",
    "generate_topology",
]


def theta(x):
    """dB to linear: ``10 ** (x / 10)``."""
    return np.power(10.0, np.asarray(x, dtype=float) / 10.0)


def theta_inv(x):
    """Linear to dB: ``10 * log10(x)``."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


class Scenario(str, enum.Enum):
    I2I = "I2I"
    I2O_OUTDOOR = "I2O_outdoor"
    I2O_INDOOR = "I2O_indoor"


class DistanceUnit(str, enum.Enum):
    METERS = "m"
    KILOMETERS = "km"

    @property
    def meters(self) -> float:
        return 1.0 if self is DistanceUnit.METERS else 1000.0


class OutdoorMode(str, enum.Enum):
    PER_LINK = "per_link"
    PER_TOPOLOGY = "per_topology"
    DETERMINISTIC_MEAN = "deterministic_mean"


class SingularRegressionError(ValueError):
    """Raised when the distance regressor has no spread."""


@dataclass(frozen=True)
class FadingParams:
    """Large-scale state of one link.

    ``K=None`` is the Rayleigh limit (K -> -inf dB); it maps to a zero
    linear K-factor instead of being carried around as ``-inf``.
    """

    K: float | None
    L: float

    def __post_init__(self):
        if not math.isfinite(self.L):
            raise ValueError(f"path loss must be finite, got {self.L}")
        if self.K is not None and not math.isfinite(self.K):
            raise ValueError("K must be finite; use FadingParams.rayleigh(L) for the Rayleigh limit")

    @classmethod
    def rayleigh(cls, L: float) -> "FadingParams":
        return cls(None, L)

    @property
    def is_rayleigh(self) -> bool:
        return self.K is None

    @property
    def theta_k(self) -> float:
        return 0.0 if self.K is None else float(theta(self.K))

    @property
    def k_db(self) -> float:
        """K in dB with the Rayleigh limit as ``-inf`` (for vectorized math)."""
        return -math.inf if self.K is None else self.K


@dataclass(frozen=True)
class BivariateModel:
    """Distance-dependent means and covariance of ``(K, L)``.

    Means are ``muK = muK_intercept - 10 * alphaK * x`` and
    ``muL = muL_intercept + 10 * alphaL * x`` where ``x = log10(D)``, or
    ``x = D`` when ``linear_in_D`` is set.
    """

    scenario: Scenario
    muK_intercept: float
    alphaK: float
    muL_intercept: float
    alphaL: float
    sigmaK: float
    sigmaL: float
    phi: float
    distance_unit: DistanceUnit = DistanceUnit.METERS
    linear_in_D: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "distance_unit", DistanceUnit(self.distance_unit))
        # zero sigmas are allowed: degenerate models show up in fits on exact lines
        if self.sigmaK < 0 or self.sigmaL < 0:
            raise ValueError("sigmaK and sigmaL must be non-negative")
        if not -1.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must lie in [-1, 1], got {self.phi}")
        eig = np.linalg.eigvalsh(self.covariance)
        assert eig.min() >= -1e-9 * max(1.0, eig.max()), "covariance not PSD"

    @property
    def covariance(self) -> np.ndarray:
        sk, sl, phi = self.sigmaK, self.sigmaL, self.phi
        return np.array([[sk * sk, phi * sk * sl], [phi * sk * sl, sl * sl]])

    def with_phi(self, phi: float) -> "BivariateModel":
        return replace(self, phi=phi)

    def regressor(self, D):
        D = np.asarray(D, dtype=float)
        return D if self.linear_in_D else np.log10(D)


I2I_MODEL = BivariateModel(
    Scenario.I2I, 16.90, 0.53, 40.4, 1.75, 5.8, 6.0, -0.66, DistanceUnit.METERS
)
I2O_OUTDOOR_MODEL = BivariateModel(
    Scenario.I2O_OUTDOOR, 7.85, 0.45, 135.78, 3.89, 7.5, 7.9, -0.25, DistanceUnit.KILOMETERS
)
# muK = -0.3 D and muL = 0.5 D, written in the common slope parametrization
I2O_INDOOR_MODEL = BivariateModel(
    Scenario.I2O_INDOOR, 0.0, 0.03, 0.0, 0.05, 5.7, 7.0, -0.74, DistanceUnit.METERS, linear_in_D=True
)
WALL_LOSS_DB = 14.0


def mean_vector(model: BivariateModel, D, unit: DistanceUnit | str | None = None):
    """Regression means ``(muK, muL)`` at distance ``D``.

    ``D`` is read in ``model.distance_unit`` unless ``unit`` says otherwise.
    Works elementwise on arrays.
    """
    D = np.asarray(D, dtype=float)
    if unit is not None:
        D = D * DistanceUnit(unit).meters / model.distance_unit.meters
    if model.linear_in_D:
        if np.any(D < 0):
            raise ValueError("distance must be non-negative")
    elif np.any(D <= 0):
        raise ValueError("distance must be positive")
    x = model.regressor(D)
    muK = model.muK_intercept - 10.0 * model.alphaK * x
    muL = model.muL_intercept + 10.0 * model.alphaL * x
    if muK.ndim == 0:
        return float(muK), float(muL)
    return muK, muL


def _correlated_normals(model: BivariateModel, shape: tuple, rng: np.random.Generator):
    z = rng.standard_normal((2,) + tuple(shape))
    dK = model.sigmaK * z[0]
    dL = model.sigmaL * (model.phi * z[0] + math.sqrt(max(0.0, 1.0 - model.phi**2)) * z[1])
    return dK, dL


def sample_links(model: BivariateModel, D, rng: np.random.Generator):
    """Vectorized draw of ``(K, L)`` arrays, one independent link per entry of ``D``."""
    muK, muL = mean_vector(model, D)
    shape = np.shape(muK)
    dK, dL = _correlated_normals(model, shape, rng)
    return muK + dK, muL + dL


def sample_link(model: BivariateModel, D: float, rng: np.random.Generator) -> FadingParams:
    K, L = sample_links(model, D, rng)
    return FadingParams(float(K), float(L))


@dataclass(frozen=True)
class I2OComposition:
    """Indoor stage + wall + outdoor stage.

    Composite path loss adds all three terms; the K-factor only adds the
    indoor and outdoor stages.
    """

    indoor: BivariateModel = I2O_INDOOR_MODEL
    outdoor: BivariateModel = I2O_OUTDOOR_MODEL
    wall_loss: float = WALL_LOSS_DB
    outdoor_mode: OutdoorMode = OutdoorMode.PER_TOPOLOGY

    def __post_init__(self):
        object.__setattr__(self, "outdoor_mode", OutdoorMode(self.outdoor_mode))
        if self.wall_loss < 0:
            raise ValueError("wall_loss must be non-negative")

    def draw_outdoor(self, D_outdoor: float, rng: np.random.Generator) -> FadingParams:
        """One outdoor-stage draw, to be shared by all links of a topology."""
        return sample_link(self.outdoor, D_outdoor, rng)

    def effective_model(self, D_outdoor: float, shared_outdoor: FadingParams | None = None) -> BivariateModel:
        """Composite law of ``(K_i0, L_i0)`` as a function of the indoor distance.

        This is the prior a perfectly informed estimator uses: the outdoor
        stage enters as a known offset (``per_topology`` with its draw, or
        ``deterministic_mean``) or as extra independent variance
        (``per_link``).
        """
        mode = self.outdoor_mode
        ind = self.indoor
        if mode is OutdoorMode.PER_TOPOLOGY:
            if shared_outdoor is None:
                raise ValueError("per_topology mode needs the shared outdoor draw")
            k_out, l_out = shared_outdoor.k_db, shared_outdoor.L
        else:
            k_out, l_out = mean_vector(self.outdoor, D_outdoor)
        sk, sl, phi = ind.sigmaK, ind.sigmaL, ind.phi
        if mode is OutdoorMode.PER_LINK:
            out = self.outdoor
            cov_kl = phi * sk * sl + out.phi * out.sigmaK * out.sigmaL
            sk = math.hypot(sk, out.sigmaK)
            sl = math.hypot(sl, out.sigmaL)
            phi = cov_kl / (sk * sl) if sk > 0 and sl > 0 else 0.0
        return replace(
            ind,
            muK_intercept=ind.muK_intercept + k_out,
            muL_intercept=ind.muL_intercept + self.wall_loss + l_out,
            sigmaK=sk,
            sigmaL=sl,
            phi=phi,
        )


def _outdoor_terms(comp: I2OComposition, D_outdoor, shape, rng, shared_outdoor):
    mode = comp.outdoor_mode
    if mode is OutdoorMode.PER_TOPOLOGY:
        if shared_outdoor is None:
            raise ValueError("per_topology mode needs a shared outdoor draw (see I2OComposition.draw_outdoor)")
        return shared_outdoor.k_db, shared_outdoor.L
    if mode is OutdoorMode.DETERMINISTIC_MEAN:
        return mean_vector(comp.outdoor, D_outdoor)
    return sample_links(comp.outdoor, np.broadcast_to(D_outdoor, shape), rng)


def sample_i2o_links(
    comp: I2OComposition,
    D_indoor,
    D_outdoor,
    rng: np.random.Generator,
    shared_outdoor: FadingParams | None = None,
):
    """Vectorized composite ``(K, L)`` draws for indoor distances ``D_indoor`` (m)
    and outdoor distance ``D_outdoor`` (km)."""
    Kin, Lin = sample_links(comp.indoor, D_indoor, rng)
    Kout, Lout = _outdoor_terms(comp, D_outdoor, np.shape(Kin), rng, shared_outdoor)
    return Kin + Kout, Lin + comp.wall_loss + Lout


def sample_i2o_link(
    comp: I2OComposition,
    D_indoor: float,
    D_outdoor: float,
    rng: np.random.Generator,
    shared_outdoor: FadingParams | None = None,
) -> FadingParams:
    if D_indoor <= 0 or D_outdoor <= 0:
        raise ValueError("distances must be positive")
    K, L = sample_i2o_links(comp, D_indoor, D_outdoor, rng, shared_outdoor)
    return FadingParams(float(K), float(L))


def fit_bivariate_model(
    samples: Iterable[tuple[float, FadingParams]] | None = None,
    scenario: Scenario | str = Scenario.I2I,
    *,
    D=None,
    K=None,
    L=None,
    distance_unit: DistanceUnit | str | None = None,
    linear_in_D: bool | None = None,
    fit_intercept: bool = True,
) -> BivariateModel:
    """Least-squares calibration of a :class:`BivariateModel`.

    Either pass ``samples`` as ``(D, FadingParams)`` pairs or the three
    arrays ``D``, ``K``, ``L``. Slopes and intercepts come from ordinary
    least squares of ``K`` and ``L`` on ``log10(D)`` (or ``D`` for the
    I2O indoor stage); the covariance is the plain (ddof=0) covariance of
    the two residual sets.
    """
    scenario = Scenario(scenario)
    if samples is not None:
        samples = list(samples)
        D = np.array([s[0] for s in samples], dtype=float)
        K = np.array([s[1].K for s in samples], dtype=float)
        L = np.array([s[1].L for s in samples], dtype=float)
    D, K, L = (np.asarray(a, dtype=float).ravel() for a in (D, K, L))
    if not (len(D) == len(K) == len(L)):
        raise ValueError("D, K and L must have equal length")
    if len(D) < 3:
        raise ValueError(f"insufficient samples: need at least 3, got {len(D)}")
    if not np.all(np.isfinite(K)):
        raise ValueError("K samples must be finite")
    if linear_in_D is None:
        linear_in_D = scenario is Scenario.I2O_INDOOR
    if distance_unit is None:
        distance_unit = DistanceUnit.KILOMETERS if scenario is Scenario.I2O_OUTDOOR else DistanceUnit.METERS
    if np.ptp(D) == 0:
        raise SingularRegressionError("all distances are equal; slopes are not identifiable")
    if not linear_in_D and np.any(D <= 0):
        raise ValueError("distances must be positive for a log-distance fit")

    x = D if linear_in_D else np.log10(D)
    A = np.column_stack([np.ones_like(x), x]) if fit_intercept else x[:, None]
    coefK, *_ = np.linalg.lstsq(A, K, rcond=None)
    coefL, *_ = np.linalg.lstsq(A, L, rcond=None)
    rK = K - A @ coefK
    rL = L - A @ coefL
    if fit_intercept:
        bK, sK = coefK
        bL, sL = coefL
    else:
        bK, sK, bL, sL = 0.0, coefK[0], 0.0, coefL[0]
    sigmaK = float(np.sqrt(np.mean(rK**2)))
    sigmaL = float(np.sqrt(np.mean(rL**2)))
    # residuals of an exact line are rounding noise; correlation is then meaningless
    tiny = 1e-9 * (1.0 + np.abs(K).max() + np.abs(L).max())
    if sigmaK > tiny and sigmaL > tiny:
        phi = float(np.clip(np.mean(rK * rL) / (sigmaK * sigmaL), -1.0, 1.0))
    else:
        phi = 0.0
    return BivariateModel(
        scenario,
        muK_intercept=float(bK),
        alphaK=float(-sK / 10.0),
        muL_intercept=float(bL),
        alphaL=float(sL / 10.0),
        sigmaK=sigmaK,
        sigmaL=sigmaL,
        phi=phi,
        distance_unit=DistanceUnit(distance_unit),
        linear_in_D=linear_in_D,
    )


@dataclass(frozen=True)
class Topology:
    """Node and AP placement for one network realization.

    The room spans ``[0, width] x [0, height]``; the wall facing the AP is
    the segment ``y = 0`` and the AP sits ``ap_offset`` meters below its
    midpoint. All I2O links leave the building through one wall point, so
    they share the outdoor distance ``ap_offset``.
    """

    node_positions: np.ndarray
    ap_position: tuple[float, float]
    indoor_rect: tuple[float, float] = (25.0, 25.0)
    wall_segment: tuple[tuple[float, float], tuple[float, float]] = field(default=((0.0, 0.0), (25.0, 0.0)))

    def __post_init__(self):
        pos = np.array(self.node_positions, dtype=float).reshape(-1, 2)
        pos.setflags(write=False)
        object.__setattr__(self, "node_positions", pos)
        w, h = self.indoor_rect
        inside = (pos[:, 0] >= 0) & (pos[:, 0] <= w) & (pos[:, 1] >= 0) & (pos[:, 1] <= h)
        if not inside.all():
            raise ValueError("all nodes must lie inside the indoor rectangle")
        ax, ay = self.ap_position
        if 0 <= ax <= w and 0 <= ay <= h:
            raise ValueError("the AP must lie outside the indoor rectangle")

    @property
    def n_nodes(self) -> int:
        return len(self.node_positions)

    def internode_distances(self) -> np.ndarray:
        """Condensed ``i < j`` distance vector (row-major upper triangle), meters."""
        iu, ju = np.triu_indices(self.n_nodes, k=1)
        diff = self.node_positions[iu] - self.node_positions[ju]
        return np.hypot(diff[:, 0], diff[:, 1])

    def wall_distances(self) -> np.ndarray:
        """Perpendicular node-to-wall distances ``D_{i,wall}`` in meters."""
        (x0, y0), (x1, y1) = self.wall_segment
        p = self.node_positions
        dx, dy = x1 - x0, y1 - y0
        return np.abs(dy * (p[:, 0] - x0) - dx * (p[:, 1] - y0)) / math.hypot(dx, dy)

    @property
    def outdoor_distance_km(self) -> float:
        """``D_{wall,0}``: distance from the wall exit point to the AP, km."""
        (x0, y0), (x1, y1) = self.wall_segment
        ax, ay = self.ap_position
        dx, dy = x1 - x0, y1 - y0
        return abs(dy * (ax - x0) - dx * (ay - y0)) / math.hypot(dx, dy) / 1000.0


def generate_topology(
    n_nodes: int,
    indoor_rect: Sequence[float] = (25.0, 25.0),
    ap_offset: float = 50.0,
    rng: np.random.Generator | None = None,
) -> Topology:
    """Drop ``n_nodes`` uniformly in the room and place the AP outdoors."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if ap_offset <= 0:
        raise ValueError("ap_offset must be positive")
    if rng is None:
        raise ValueError("an explicit random generator is required")
    w, h = map(float, indoor_rect)
    pos = rng.uniform((0.0, 0.0), (w, h), size=(n_nodes, 2))
    # keep D_{i,wall} > 0 strictly; uniform draws hit 0.0 with probability ~2^-53
    pos[:, 1] = np.maximum(pos[:, 1], np.finfo(float).tiny)
    return Topology(pos, (w / 2.0, -float(ap_offset)), (w, h), ((0.0, 0.0), (w, 0.0)))


def default_i2o(outdoor_mode: OutdoorMode | str = OutdoorMode.PER_TOPOLOGY) -> I2OComposition:
    return I2OComposition(I2O_INDOOR_MODEL, I2O_OUTDOOR_MODEL, WALL_LOSS_DB, OutdoorMode(outdoor_mode))
