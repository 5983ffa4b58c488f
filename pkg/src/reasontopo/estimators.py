"""scikit-learn style wrappers so the pipeline composes with ``Pipeline``.

Each stage maps a *list* of samples to a list (or matrix) of outputs:
embedded chains -> point clouds -> persistence diagrams -> feature rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.pipeline import make_pipeline
from sklearn.utils.validation import check_is_fitted

from .complex import DistanceMatrix, build_rips, distance_matrix
from .embedding import EmbeddedChain
from .encoding import PointCloud, encode_chain
from .errors import ParameterError
from .metrics import build_report
from .persistence import PersistenceDiagram, compute_persistence

REPORT_FIELDS = ("count", "infinite", "betti_at_eps_max", "total_lifetime", "avg_lifetime",
                 "max_lifetime", "lifetime_variance", "entropy")


def check_samples(X, kind, name):
    """Validate that ``X`` is a non-empty sequence of ``kind`` samples."""
    if isinstance(X, np.ndarray) and X.ndim == 2 and kind is PointCloud:
        raise ParameterError(f"{name} expects a list of point clouds, not a single 2-D array")
    try:
        samples = list(X)
    except TypeError:
        raise ParameterError(f"{name} expects a sequence of samples") from None
    if not samples:
        raise ParameterError(f"{name} received no samples")
    for i, s in enumerate(samples):
        if kind is PointCloud and not isinstance(s, PointCloud):
            s = np.asarray(s, dtype=np.float64)
            if s.ndim != 2:
                raise ParameterError(f"sample {i} is not an (n, d) array")
        elif kind is not PointCloud and not isinstance(s, kind):
            raise ParameterError(f"sample {i} is {type(s).__name__}, expected {kind.__name__}")
    return samples


class ChainEncoder(TransformerMixin, BaseEstimator):
    """Embedded chains to structure-aware point clouds (stateless)."""

    def __init__(self, scheme="auto", d_pe=None, scale=1.0, normalize=False):
        self.scheme = scheme
        self.d_pe = d_pe
        self.scale = scale
        self.normalize = normalize

    def fit(self, X, y=None):
        self.n_samples_seen_ = len(check_samples(X, EmbeddedChain, type(self).__name__))
        return self

    def transform(self, X):
        check_is_fitted(self, "n_samples_seen_")
        return [encode_chain(ec, self.scheme, self.d_pe, self.scale, self.normalize).points
                for ec in check_samples(X, EmbeddedChain, type(self).__name__)]


class RipsPersistence(TransformerMixin, BaseEstimator):
    """Point clouds (or precomputed distance matrices) to persistence diagrams.

    ``homology_dimensions`` is the highest homology dimension reported; the
    Rips complex is built one dimension higher so those bars can die.
    """

    def __init__(self, metric="euclidean", eps_max=None, homology_dimensions=1):
        self.metric = metric
        self.eps_max = eps_max
        self.homology_dimensions = homology_dimensions

    def fit(self, X, y=None):
        if self.metric not in ("euclidean", "cosine", "precomputed"):
            raise ParameterError(f"unsupported metric {self.metric!r}")
        if not 0 <= self.homology_dimensions <= 2:
            raise ParameterError("homology_dimensions must be 0, 1 or 2")
        check_samples(X, PointCloud, type(self).__name__)
        self.fitted_ = True
        return self

    def _diagram(self, sample):
        if self.metric == "precomputed":
            dm = sample if isinstance(sample, DistanceMatrix) else DistanceMatrix(sample)
        else:
            dm = distance_matrix(sample, self.metric)
        return compute_persistence(build_rips(dm, self.eps_max, self.homology_dimensions + 1))

    def transform(self, X):
        check_is_fitted(self, "fitted_")
        return [self._diagram(s) for s in check_samples(X, PointCloud, type(self).__name__)]


class TopologyFeatures(TransformerMixin, BaseEstimator):
    """Diagrams to a numeric feature matrix of report statistics.

    Undefined entropies become ``nan`` so downstream imputers can see them.
    """

    def __init__(self, min_persistence=0.0, infinite_policy="exclude"):
        self.min_persistence = min_persistence
        self.infinite_policy = infinite_policy

    def fit(self, X, y=None):
        diagrams = check_samples(X, PersistenceDiagram, type(self).__name__)
        self.max_dim_ = max(d.max_dim for d in diagrams)
        names = [f"h{k}.{f}" for k in range(self.max_dim_ + 1) for f in REPORT_FIELDS]
        self.feature_names_out_ = np.array(names + ["h0.stable"], dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "feature_names_out_")
        rows = []
        for diag in check_samples(X, PersistenceDiagram, type(self).__name__):
            flat = build_report(diag, min_persistence=self.min_persistence,
                                infinite_policy=self.infinite_policy,
                                dims=range(min(diag.max_dim, self.max_dim_) + 1)).flat()
            rows.append([np.nan if flat.get(n) is None else float(flat[n]) for n in self.feature_names_out_])
        return np.asarray(rows, dtype=np.float64)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return self.feature_names_out_.copy()


def make_topology_pipeline(scheme="auto", d_pe=None, metric="euclidean", eps_max=None,
                           homology_dimensions=1, **feature_kw):
    """Encoder, Rips persistence and feature extraction in one ``Pipeline``."""
    return make_pipeline(ChainEncoder(scheme=scheme, d_pe=d_pe),
                         RipsPersistence(metric=metric, eps_max=eps_max,
                                         homology_dimensions=homology_dimensions),
                         TopologyFeatures(**feature_kw))
