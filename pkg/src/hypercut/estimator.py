"""Scikit-learn style front door for the per-sample graph clusterer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import hgnn
from .pipeline import PatchGraph, TttConfig, harden, reduce_features, ttt_fit


class HyperbolicGraphClustering(ClusterMixin, BaseEstimator):
    """Cluster rows of a feature matrix by test-time training a hyperbolic GCN.

    Every call to :meth:`fit` trains a fresh model on the affinity graph
    of the given samples (transductive, one model per dataset), which is
    the intended per-image usage.  The estimator follows the sklearn
    protocol, so it composes with pipelines and model-selection helpers.

    Parameters
    ----------
    n_clusters : number of clusters k.
    embed_dim : working feature dimension; wider inputs are compressed
        to this size with a deterministic truncated SVD.
    hidden_dim : width of the readout's hidden layer.
    epochs : full-batch training steps.
    lr_euclid : adaptive-moment step size for the fully connected head.
    lr_stiefel : Riemannian SGD rate for the orthonormal rotation block.
    feature_scale : cap on lifted feature norms before the exponential map.
    weighted_denominator : use the textbook midpoint denominator instead
        of the plain Lorentz-factor sum.
    random_state : seed for parameter initialization.

    Attributes
    ----------
    labels_ : hard cluster of each fitted row.
    assignment_ : row-stochastic soft assignment matrix.
    loss_curve_ : training loss per epoch (pre-update).
    params_ : fitted model parameters.
    projection_ : feature-compression basis (d x embed_dim or identity).
    """

    def __init__(self, n_clusters: int = 2, embed_dim: int = 16,
                 hidden_dim: int = 32, epochs: int = 10,
                 lr_euclid: float = 0.01, lr_stiefel: float = 0.1,
                 feature_scale: float = 3.0,
                 weighted_denominator: bool = False,
                 random_state: int = 0):
        self.n_clusters = n_clusters
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.lr_euclid = lr_euclid
        self.lr_stiefel = lr_stiefel
        self.feature_scale = feature_scale
        self.weighted_denominator = weighted_denominator
        self.random_state = random_state

    def _config(self) -> TttConfig:
        return TttConfig(
            dim=self.embed_dim, hidden=self.hidden_dim, k=self.n_clusters,
            epochs=self.epochs, lr_euclid=self.lr_euclid,
            lr_stiefel=self.lr_stiefel, feature_scale=self.feature_scale,
            seed=self.random_state,
            weighted_denominator=self.weighted_denominator)

    def fit(self, X, y=None):
        """Train on the affinity graph of ``X`` (n_samples x n_features)."""
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        cfg = self._config()
        reduced, self.projection_ = reduce_features(X, self.embed_dim)
        graph = PatchGraph.from_features(reduced)
        result = ttt_fit(graph, cfg)
        self.n_features_in_ = X.shape[1]
        self.params_ = result.params
        self.assignment_ = result.assignment
        self.loss_curve_ = list(result.losses)
        self.labels_ = harden(result.assignment)
        return self

    def transform(self, X) -> np.ndarray:
        """Soft assignments of new rows under the fitted model (own-graph forward)."""
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        graph = PatchGraph.from_features(X @ self.projection_)
        out = hgnn.forward(
            self.params_, graph, feature_scale=self.feature_scale,
            weighted_denominator=self.weighted_denominator)
        return out.assignment

    def predict(self, X) -> np.ndarray:
        """Hard clusters of new rows under the fitted model."""
        return harden(self.transform(X))

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X).assignment_

    def _more_tags(self):
        return {"non_deterministic": False, "preserves_dtype": []}
