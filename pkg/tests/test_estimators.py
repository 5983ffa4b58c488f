import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from reasontopo.complex import distance_matrix
from reasontopo.errors import ParameterError
from reasontopo.estimators import ChainEncoder, RipsPersistence, TopologyFeatures, make_topology_pipeline

from conftest import embedded, linear_chain


def test_params_and_clone():
    enc = ChainEncoder(scheme="cot", d_pe=4, scale=0.5)
    assert enc.get_params() == {"scheme": "cot", "d_pe": 4, "scale": 0.5, "normalize": False}
    twin = clone(enc)
    assert twin.get_params() == enc.get_params() and twin is not enc
    enc.set_params(scale=2.0)
    assert enc.scale == 2.0


def test_pipeline_feature_matrix():
    chains = [embedded(linear_chain(n), seed=n) for n in (4, 6, 9)]
    pipe = make_topology_pipeline()
    X = pipe.fit_transform(chains)
    names = list(pipe[-1].get_feature_names_out())
    assert X.shape == (3, len(names))
    assert X[:, names.index("h0.count")].tolist() == [4.0, 6.0, 9.0]
    assert X[:, names.index("h0.stable")].tolist() == [1.0, 1.0, 1.0]


def test_fit_accepts_generators():
    enc = ChainEncoder().fit(embedded(linear_chain(3), seed=s) for s in range(2))
    assert enc.n_samples_seen_ == 2


def test_unfitted_transform():
    with pytest.raises(NotFittedError):
        RipsPersistence().transform([np.zeros((2, 2))])


def test_precomputed_distances(unit_square):
    dm = distance_matrix(unit_square).values
    (diag,) = RipsPersistence(metric="precomputed").fit_transform([dm])
    assert len(diag.pairs(1)) == 1


def test_input_validation(unit_square):
    with pytest.raises(ParameterError, match="list of point clouds"):
        RipsPersistence().fit(unit_square)
    with pytest.raises(ParameterError, match="no samples"):
        ChainEncoder().fit([])
    with pytest.raises(ParameterError, match="expected EmbeddedChain"):
        ChainEncoder().fit([unit_square])
    with pytest.raises(ParameterError):
        RipsPersistence(metric="chebyshev").fit([unit_square])


def test_undefined_entropy_is_nan(unit_square):
    diags = RipsPersistence().fit_transform([unit_square[:2]])
    feats = TopologyFeatures().fit(diags)
    row = feats.transform(diags)[0]
    assert np.isnan(row[list(feats.get_feature_names_out()).index("h1.entropy")])
