"""scikit-learn style wrapper around the training and scoring functions."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .evaluate import MetricsReport, evaluate, rank_items
from .explain import ExplanationPath, extract_paths
from .graph import UnifiedGraph
from .ingest import Dataset
from .model import ModelConfig, ModelParams, forward, score_batch, sigmoid
from .train import LossCurve, train
from .validation import check_dataset_graph, check_pairs


class KGAttentionRecommender(BaseEstimator):
    """Knowledge-graph recommender with structure-aware neighbor attention.

    ``fit`` takes the indexed :class:`Dataset` and the unified graph built
    from it. Prediction methods take ``(user, item)`` index pairs.

    Example::

        rec = KGAttentionRecommender(epochs=100).fit(dataset, graph)
        rec.predict_proba([[0, 3], [0, 7]])
        rec.recommend(0, k=10)
    """

    def __init__(
        self,
        embed_dim=16,
        num_hops=2,
        leaky_slope=0.2,
        learning_rate=0.001,
        epochs=200,
        neg_ratio=1,
        neighbor_cap=64,
        test_fraction=0.2,
        seed=42,
        optimizer="adam",
        batch_size=256,
        aggregator="attention",
    ):
        self.embed_dim = embed_dim
        self.num_hops = num_hops
        self.leaky_slope = leaky_slope
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.neg_ratio = neg_ratio
        self.neighbor_cap = neighbor_cap
        self.test_fraction = test_fraction
        self.seed = seed
        self.optimizer = optimizer
        self.batch_size = batch_size
        self.aggregator = aggregator

    @classmethod
    def from_config(cls, config: ModelConfig) -> "KGAttentionRecommender":
        return cls(**config.to_dict())

    def to_config(self) -> ModelConfig:
        return ModelConfig(**self.get_params())

    def fit(self, dataset: Dataset, graph: UnifiedGraph):
        check_dataset_graph(dataset, graph)
        config = self.to_config()
        self.params_, self.loss_curve_ = train(dataset, graph, config)
        self._set_state(graph, dataset)
        return self

    def load(self, params: ModelParams, graph: UnifiedGraph, dataset: Dataset | None = None):
        """Attach already-trained parameters (e.g. from a checkpoint)."""
        config = self.to_config()
        if (params.embed_dim, params.num_hops) != (config.embed_dim, config.num_hops):
            raise ValueError("parameter shapes disagree with estimator settings")
        if params.num_nodes != graph.num_nodes:
            raise ValueError("parameter table does not match graph size")
        self.params_ = params
        self.loss_curve_ = LossCurve()
        self._set_state(graph, dataset)
        return self

    def _set_state(self, graph: UnifiedGraph, dataset: Dataset | None):
        config = self.to_config()
        self.graph_ = graph
        self.view_ = graph.capped(config.neighbor_cap, config.seed)
        self.state_ = forward(self.view_, self.params_, config)
        self.train_items_ = dataset.train_items_by_user() if dataset is not None else None

    def decision_function(self, X) -> np.ndarray:
        """Raw inner-product scores for ``(user, item)`` pairs."""
        check_is_fitted(self, "state_")
        pairs = check_pairs(X, self.graph_.num_users, self.graph_.num_items)
        return score_batch(self.state_.final, pairs[:, 0], pairs[:, 1] + self.graph_.item_offset)

    def predict_proba(self, X) -> np.ndarray:
        """Interaction probabilities, shape ``(n, 2)`` as in scikit-learn classifiers."""
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= threshold).astype(np.int64)

    def recommend(self, user: int, k: int = 10, exclude_train: bool = True) -> np.ndarray:
        check_is_fitted(self, "state_")
        cand = np.arange(self.graph_.num_items)
        if exclude_train and self.train_items_ is not None:
            seen = self.train_items_[user]
            cand = cand[~np.isin(cand, list(seen))]
        return rank_items(self.state_.final, self.graph_, user, cand)[:k]

    def evaluate(self, dataset: Dataset, k: int = 10) -> MetricsReport:
        check_is_fitted(self, "state_")
        return evaluate(self.state_.final, self.graph_, dataset, k)

    def score(self, dataset: Dataset, k: int = 10) -> float:
        """NDCG@k on the dataset's test split."""
        return self.evaluate(dataset, k).ndcg_at_k

    def explain(self, user: int, item: int, max_paths: int = 5, beam_width: int = 32) -> list[ExplanationPath]:
        check_is_fitted(self, "state_")
        return extract_paths(self.view_, self.state_, user, item, max_paths, beam_width)
