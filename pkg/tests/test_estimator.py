import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from kgrec.estimator import KGAttentionRecommender
from kgrec.model import ModelConfig, init_params
from kgrec.validation import check_pairs


@pytest.fixture(scope="module")
def fitted(small_planted):
    graph = small_planted.graph()
    est = KGAttentionRecommender(epochs=5, seed=2, batch_size=64).fit(small_planted.dataset, graph)
    return est, small_planted


def test_params_round_trip():
    est = KGAttentionRecommender(embed_dim=8, learning_rate=0.004)
    params = est.get_params()
    assert params["embed_dim"] == 8 and params["learning_rate"] == 0.004
    assert set(params) == set(ModelConfig().to_dict())
    other = clone(est).set_params(num_hops=3)
    assert other.num_hops == 3 and est.num_hops == 2
    assert KGAttentionRecommender.from_config(est.to_config()).get_params() == params


def test_not_fitted():
    with pytest.raises(NotFittedError):
        KGAttentionRecommender().predict_proba([[0, 0]])


def test_predictions(fitted):
    est, prep = fitted
    X = np.array([[0, 0], [1, 2], [3, 4]])
    proba = est.predict_proba(X)
    assert proba.shape == (3, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    np.testing.assert_array_equal(est.predict(X), (proba[:, 1] >= 0.5).astype(int))
    scores = est.decision_function(X)
    final = est.state_.final
    off = est.graph_.item_offset
    np.testing.assert_allclose(scores, [final[u] @ final[off + i] for u, i in X], atol=1e-12)
    assert len(est.loss_curve_) == 5


def test_recommend_excludes_train(fitted):
    est, prep = fitted
    train = prep.dataset.train_items_by_user()
    for u in range(5):
        recs = est.recommend(u, k=10).tolist()
        assert len(recs) == 10 and not set(recs) & train[u]


def test_score_is_ndcg(fitted):
    est, prep = fitted
    rep = est.evaluate(prep.dataset)
    assert est.score(prep.dataset) == rep.ndcg_at_k


def test_load_rejects_wrong_shapes(fitted):
    est, prep = fitted
    graph = est.graph_
    bad = init_params(ModelConfig(embed_dim=4), graph.num_nodes, 0)
    with pytest.raises(ValueError):
        KGAttentionRecommender().load(bad, graph)
    small = init_params(ModelConfig(), graph.num_nodes - 1, 0)
    with pytest.raises(ValueError):
        KGAttentionRecommender().load(small, graph)


def test_fit_rejects_mismatched_graph(fitted, small_planted):
    est, prep = fitted
    from kgrec.ingest import Dataset

    with pytest.raises(ValueError):
        KGAttentionRecommender(epochs=1).fit(Dataset([(0, 0)], [], 1, 1), est.graph_)


@pytest.mark.parametrize(
    "X",
    [[[0, 1, 2]], [[-1, 0]], [[0, 99]], [[0.5, 1]], np.zeros((2, 2, 2))],
)
def test_check_pairs_errors(X):
    with pytest.raises(ValueError):
        check_pairs(X, 3, 5)


def test_check_pairs_accepts_single_pair_and_floats():
    np.testing.assert_array_equal(check_pairs([1, 2], 3, 5), [[1, 2]])
    assert check_pairs([[1.0, 2.0]], 3, 5).dtype == np.int64
