"""scikit-learn style wrappers around the channel, quality and pairing code.

These make the library composable with pipelines and parameter searches:

* :class:`BivariateModelEstimator` fits ``(K, L)`` against distance.
* :class:`LinkQualityTransformer` maps ``(D, K, L)`` rows to coding gains in dB.
* :class:`PartnerSelector` turns an ``N x (N + 1)`` quality table into partners.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from . import pairing as pr
from .channel import BivariateModel, Scenario, fit_bivariate_model, mean_vector, sample_links
from .energy import RadioConfig
from .quality import (
    KEstimatorNoise,
    coding_gain_db,
    conditional_k_given_l,
    direct_db,
    map_db,
    mmse_db,
)

__all__ = ["BivariateModelEstimator", "LinkQualityTransformer", "PartnerSelector"]


def _distance_column(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    return X.reshape(-1) if X.ndim == 1 else X[:, 0]


class BivariateModelEstimator(RegressorMixin, BaseEstimator):
    """Regress ``(K, L)`` on distance.

    ``X`` holds distances (first column is used), ``y`` the ``(K, L)`` pairs.
    After ``fit`` the calibrated model is in ``model_``.
    """

    def __init__(self, scenario="I2I", distance_unit=None, linear_in_D=None, fit_intercept=True):
        self.scenario = scenario
        self.distance_unit = distance_unit
        self.linear_in_D = linear_in_D
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        D = _distance_column(X)
        y = check_array(y, dtype=float)
        if y.shape != (len(D), 2):
            raise ValueError(f"y must have shape (n_samples, 2), got {y.shape}")
        self.model_ = fit_bivariate_model(
            None,
            Scenario(self.scenario),
            D=D,
            K=y[:, 0],
            L=y[:, 1],
            distance_unit=self.distance_unit,
            linear_in_D=self.linear_in_D,
            fit_intercept=self.fit_intercept,
        )
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        muK, muL = mean_vector(self.model_, _distance_column(X))
        return np.column_stack([muK, muL])

    def sample(self, X, random_state=None) -> np.ndarray:
        """Draw one ``(K, L)`` realisation per distance."""
        check_is_fitted(self, "model_")
        rng = np.random.default_rng(check_random_state(random_state).randint(2**31))
        K, L = sample_links(self.model_, _distance_column(X), rng)
        return np.column_stack([K, L])

    @classmethod
    def from_model(cls, model: BivariateModel) -> "BivariateModelEstimator":
        est = cls(model.scenario.value, model.distance_unit.value, model.linear_in_D)
        est.model_ = model
        est.n_features_in_ = 1
        return est


class LinkQualityTransformer(TransformerMixin, BaseEstimator):
    """Rows ``(D, K, L)`` to link quality ``c`` in dB.

    ``method`` is one of ``exact``, ``map``, ``mmse``, ``pl`` or ``direct``.
    The Bayesian methods read only ``D`` and ``L``; their prior is ``prior``
    when given, otherwise the model fitted on the training rows.
    """

    def __init__(self, method="exact", prior=None, scenario="I2I", k_noise_db=None, random_state=None):
        self.method = method
        self.prior = prior
        self.scenario = scenario
        self.k_noise_db = k_noise_db
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] != 3:
            raise ValueError("expected columns (D, K, L)")
        if self.method not in ("exact", "map", "mmse", "pl", "direct"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "direct" and self.k_noise_db is None:
            raise ValueError("method='direct' needs k_noise_db")
        if self.prior is not None:
            self.prior_ = self.prior
        elif self.method in ("map", "mmse"):
            self.prior_ = fit_bivariate_model(None, Scenario(self.scenario), D=X[:, 0], K=X[:, 1], L=X[:, 2])
        else:
            self.prior_ = None
        self.n_features_in_ = 3
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan" if self.method in ("pl", "map", "mmse") else True)
        D, K, L = X[:, 0], X[:, 1], X[:, 2]
        if self.method == "exact":
            c = coding_gain_db(K=K, L=L)
        elif self.method == "pl":
            c = -L
        elif self.method == "direct":
            rng = np.random.default_rng(check_random_state(self.random_state).randint(2**31))
            c = direct_db(K, L, KEstimatorNoise(self.k_noise_db), rng)
        else:
            mu, sigma = conditional_k_given_l(self.prior_, D, L)
            c = map_db(mu, sigma, L) if self.method == "map" else mmse_db(mu, sigma, L)
        return np.asarray(c, dtype=float).reshape(-1, 1)


class PartnerSelector(BaseEstimator):
    """Choose cooperation partners from an ``N x (N + 1)`` quality table.

    Column 0 holds the uplink qualities ``c_i0``, columns ``1..N`` the
    symmetric internode qualities (diagonal ignored), all in dB.
    ``predict`` returns each node's partner, ``-1`` for single nodes.
    The ``optimal`` algorithm prices pairs with ``radio``.
    """

    def __init__(self, algorithm="wlf", tau=30.0, radio=None, random_state=None):
        self.algorithm = algorithm
        self.tau = tau
        self.radio = radio
        self.random_state = random_state

    def _qualities(self, X) -> pr.QualityMatrix:
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan")
        n = X.shape[0]
        if X.shape[1] != n + 1:
            raise ValueError(f"expected shape (N, N + 1), got {X.shape}")
        inter = X[:, 1:].copy()
        np.fill_diagonal(inter, 0.0)
        return pr.QualityMatrix(X[:, 0], inter)

    def fit(self, X, y=None):
        q = self._qualities(X)
        n = q.n_nodes
        graph = pr.build_weight_graph(q, self.radio or RadioConfig())
        if self.algorithm == "wlf":
            ps = pr.wlf_pairing(q, self.tau)
        elif self.algorithm == "optimal":
            ps = pr.optimal_pairing(graph)
        elif self.algorithm == "random":
            rng = np.random.default_rng(check_random_state(self.random_state).randint(2**31))
            ps = pr.random_pairing(n, rng)
        elif self.algorithm == "none":
            ps = pr.no_cooperation(n)
        else:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        self.pairing_ = ps
        self.graph_ = graph
        self.e_max_ = pr.e_max(ps, self.graph_)
        self.n_features_in_ = n + 1
        return self

    def predict(self, X=None) -> np.ndarray:
        """Partners of the fitted instance; pass ``X`` to refit first."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "pairing_")
        partner = np.full(self.pairing_.n_nodes, -1)
        for i, j in self.pairing_.pairs:
            partner[i], partner[j] = j, i
        return partner

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).predict()

    @property
    def e_max_db_(self) -> float:
        check_is_fitted(self, "pairing_")
        return 10.0 * math.log10(self.e_max_)
