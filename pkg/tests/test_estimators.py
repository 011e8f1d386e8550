import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from coopsel import pairing as pr
from coopsel.channel import I2I_MODEL, mean_vector, sample_links
from coopsel.energy import RadioConfig
from coopsel.estimators import BivariateModelEstimator, LinkQualityTransformer, PartnerSelector
from coopsel.quality import coding_gain_db, conditional_k_given_l, map_db, mmse_db


@pytest.fixture(scope="module")
def samples():
    rng = np.random.default_rng(11)
    D = np.exp(rng.uniform(0, math.log(100), 20_000))
    K, L = sample_links(I2I_MODEL, D, rng)
    return D, K, L


class TestBivariateModelEstimator:
    def test_params_and_clone(self):
        est = BivariateModelEstimator(scenario="I2I", fit_intercept=True)
        assert est.get_params()["scenario"] == "I2I"
        assert clone(est).get_params() == est.get_params()

    def test_fit_predict(self, samples):
        D, K, L = samples
        est = BivariateModelEstimator().fit(D.reshape(-1, 1), np.column_stack([K, L]))
        m = est.model_
        assert m.alphaK == pytest.approx(I2I_MODEL.alphaK, rel=0.05)
        assert m.phi == pytest.approx(I2I_MODEL.phi, abs=0.03)
        pred = est.predict([[10.0]])
        assert pred.shape == (1, 2)
        assert np.allclose(pred[0], mean_vector(I2I_MODEL, 10.0), atol=0.3)

    def test_from_model_sample(self):
        est = BivariateModelEstimator.from_model(I2I_MODEL)
        draws = est.sample(np.full((50_000, 1), 5.0), random_state=0)
        assert draws.shape == (50_000, 2)
        assert np.allclose(draws.mean(axis=0), mean_vector(I2I_MODEL, 5.0), atol=0.1)

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            BivariateModelEstimator().predict([[1.0]])


class TestLinkQualityTransformer:
    def test_exact_and_pl(self):
        X = np.array([[5.0, 3.0, 60.0], [20.0, -2.0, 80.0]])
        exact = LinkQualityTransformer("exact").fit_transform(X)
        assert exact.shape == (2, 1)
        assert np.allclose(exact[:, 0], coding_gain_db(K=X[:, 1], L=X[:, 2]))
        assert np.allclose(LinkQualityTransformer("pl").fit_transform(X)[:, 0], -X[:, 2])

    @pytest.mark.parametrize("method,fn", [("map", map_db), ("mmse", mmse_db)])
    def test_bayesian_with_prior(self, method, fn):
        X = np.array([[5.0, np.nan, 60.0], [20.0, np.nan, 80.0]])
        t = LinkQualityTransformer(method, prior=I2I_MODEL).fit(np.zeros((1, 3)))
        mu, s = conditional_k_given_l(I2I_MODEL, X[:, 0], X[:, 2])
        assert np.allclose(t.transform(X)[:, 0], fn(mu, s, X[:, 2]))

    def test_prior_fitted_from_rows(self, samples):
        D, K, L = samples
        t = LinkQualityTransformer("map").fit(np.column_stack([D, K, L]))
        assert t.prior_.alphaK == pytest.approx(I2I_MODEL.alphaK, rel=0.05)

    def test_direct_seeded(self):
        X = np.array([[5.0, 3.0, 60.0]] * 100)
        a = LinkQualityTransformer("direct", k_noise_db=0.0, random_state=3).fit_transform(X)
        b = LinkQualityTransformer("direct", k_noise_db=0.0, random_state=3).fit_transform(X)
        assert np.array_equal(a, b) and a.std() > 0

    @pytest.mark.parametrize("kw", [{"method": "bogus"}, {"method": "direct"}])
    def test_bad_params(self, kw):
        with pytest.raises(ValueError):
            LinkQualityTransformer(**kw).fit(np.zeros((2, 3)))

    def test_wrong_width(self):
        with pytest.raises(ValueError):
            LinkQualityTransformer().fit(np.zeros((2, 2)))

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            LinkQualityTransformer().transform(np.zeros((1, 3)))


def _table(n, seed):
    rng = np.random.default_rng(seed)
    inter = rng.normal(-60, 8, (n, n))
    inter = np.triu(inter, 1) + np.triu(inter, 1).T
    return np.column_stack([rng.normal(-100, 8, n), inter])


class TestPartnerSelector:
    def test_clone(self):
        sel = PartnerSelector(algorithm="optimal", tau=20.0)
        assert clone(sel).get_params() == sel.get_params()

    @pytest.mark.parametrize("algorithm", ["wlf", "optimal", "random", "none"])
    def test_partner_array(self, algorithm):
        X = _table(7, 1)
        partner = PartnerSelector(algorithm, random_state=0).fit_predict(X)
        assert partner.shape == (7,)
        for i, j in enumerate(partner):
            assert j == -1 or partner[j] == i

    def test_matches_library(self):
        X = _table(6, 2)
        sel = PartnerSelector("optimal").fit(X)
        q = pr.QualityMatrix(X[:, 0], np.where(np.eye(6, dtype=bool), 0.0, X[:, 1:]))
        g = pr.build_weight_graph(q, RadioConfig())
        assert sel.e_max_db_ == pytest.approx(pr.e_max_db(pr.optimal_pairing(g), g))
        assert sel.e_max_db_ <= PartnerSelector("wlf").fit(X).e_max_db_ + 1e-9

    def test_none_all_single(self):
        assert (PartnerSelector("none").fit_predict(_table(4, 3)) == -1).all()

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            PartnerSelector().fit(np.zeros((3, 3)))

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            PartnerSelector("greedy").fit(_table(3, 0))

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            PartnerSelector().predict()
