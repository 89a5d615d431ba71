"""Structure-aware attention forward pass.

Layer ``l`` maps the previous node representations ``H`` to

    Z = H W_l^T
    e_ij = LeakyReLU(a_l[:d] . Z_i + a_l[d:] . Z_j)
    alpha_ij = softmax over j in N(i) of e_ij
    H'_i = phi(sum_j alpha_ij Z_j)

with ``phi`` = LeakyReLU on hidden layers and identity on the last one.
Everything is vectorised over the CSR edge arrays of the graph.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import NonFiniteError
from .graph import UnifiedGraph

AGGREGATORS = ("attention", "uniform")
OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 16
    num_hops: int = 2
    leaky_slope: float = 0.2
    learning_rate: float = 0.001
    epochs: int = 200
    neg_ratio: int = 1
    neighbor_cap: int = 64
    test_fraction: float = 0.2
    seed: int = 42
    optimizer: str = "adam"
    batch_size: int = 256
    aggregator: str = "attention"

    def __post_init__(self):
        for name in ("embed_dim", "num_hops", "neg_ratio", "neighbor_cap", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ValueError("leaky_slope must lie in (0, 1)")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    @classmethod
    def field_types(cls) -> dict[str, type]:
        return {f.name: type(f.default) for f in fields(cls)}


@dataclass
class ModelParams:
    node_embeddings: np.ndarray
    weights: list[np.ndarray]
    attention: list[np.ndarray]

    @property
    def num_nodes(self) -> int:
        return self.node_embeddings.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.node_embeddings.shape[1]

    @property
    def num_hops(self) -> int:
        return len(self.weights)

    def blocks(self) -> list[tuple[str, np.ndarray]]:
        """Named parameter arrays in checkpoint order."""
        out = [("node_embeddings", self.node_embeddings)]
        out += [(f"W_{l + 1}", w) for l, w in enumerate(self.weights)]
        out += [(f"a_{l + 1}", a) for l, a in enumerate(self.attention)]
        return out

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            self.node_embeddings.astype(dtype),
            [w.astype(dtype) for w in self.weights],
            [a.astype(dtype) for a in self.attention],
        )

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.node_embeddings.copy(),
            [w.copy() for w in self.weights],
            [a.copy() for a in self.attention],
        )

    def zeros_like(self) -> "ModelParams":
        return ModelParams(
            np.zeros_like(self.node_embeddings),
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(a) for a in self.attention],
        )


@dataclass
class LayerCache:
    z: np.ndarray
    raw: np.ndarray
    alpha: np.ndarray
    pre: np.ndarray


@dataclass
class LayerState:
    """Node representations after each layer; ``layers[0]`` is the embedding table."""

    layers: list[np.ndarray]
    caches: list[LayerCache]

    @property
    def final(self) -> np.ndarray:
        return self.layers[-1]


@dataclass(frozen=True)
class Prediction:
    score: float
    probability: float


def leaky_relu(x, slope):
    return np.where(x >= 0, x, slope * x)


def sigmoid(x):
    x = np.asarray(x)
    x = x.astype(np.result_type(x.dtype, np.float64), copy=False)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def init_params(config: ModelConfig, num_nodes: int, seed: int) -> ModelParams:
    if num_nodes < 1:
        raise ValueError("num_nodes must be >= 1")
    d = config.embed_dim
    rng = np.random.default_rng(seed)
    emb_bound = 1.0 / math.sqrt(d)
    w_bound = math.sqrt(6.0 / (2 * d))
    emb = rng.uniform(-emb_bound, emb_bound, size=(num_nodes, d))
    weights, attn = [], []
    for _ in range(config.num_hops):
        weights.append(rng.uniform(-w_bound, w_bound, size=(d, d)))
        attn.append(rng.uniform(-emb_bound, emb_bound, size=2 * d))
    return ModelParams(emb, weights, attn)


def _check_finite(arr: np.ndarray, what: str = "activation"):
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise NonFiniteError(f"non-finite {what} at node {int(bad[0])}")


def segment_softmax(scores: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Softmax within each CSR row. Every row must be non-empty."""
    starts = offsets[:-1]
    counts = np.diff(offsets)
    row_max = np.maximum.reduceat(scores, starts)
    ex = np.exp(scores - np.repeat(row_max, counts))
    return ex / np.repeat(np.add.reduceat(ex, starts), counts)


def attention_scores(
    h_prev: np.ndarray,
    weight: np.ndarray,
    attn: np.ndarray,
    center: int,
    neighbor_ids: Sequence[int],
    slope: float = 0.2,
) -> np.ndarray:
    """Attention weights of ``center`` over ``neighbor_ids`` for one layer."""
    if len(neighbor_ids) == 0:
        raise ValueError("neighbor list is empty")
    nb = np.asarray(neighbor_ids, dtype=np.int64)
    for node in (center, *nb.tolist()):
        if not np.all(np.isfinite(h_prev[node])):
            raise NonFiniteError(f"non-finite activation at node {node}")
    d = weight.shape[0]
    zi = weight @ h_prev[center]
    zj = h_prev[nb] @ weight.T
    e = leaky_relu(attn[:d] @ zi + zj @ attn[d:], slope)
    e = e - e.max()
    ex = np.exp(e)
    return ex / ex.sum()


def edge_attention(graph: UnifiedGraph, z: np.ndarray, attn: np.ndarray, slope: float):
    """Raw scores and normalised weights for every stored edge."""
    d = z.shape[1]
    s_center = z @ attn[:d]
    s_nbr = z @ attn[d:]
    raw = s_center[graph.centers] + s_nbr[graph.neighbors]
    alpha = segment_softmax(leaky_relu(raw, slope), graph.offsets)
    return raw, alpha


def _propagation_matrix(graph: UnifiedGraph, alpha: np.ndarray) -> sp.csr_matrix:
    n = graph.num_nodes
    return sp.csr_matrix((alpha, graph.neighbors, graph.offsets), shape=(n, n))


def aggregate_layer(
    graph: UnifiedGraph,
    h_prev: np.ndarray,
    weight: np.ndarray,
    attn: np.ndarray,
    config: ModelConfig,
    last: bool,
) -> tuple[np.ndarray, LayerCache]:
    _check_finite(h_prev)
    z = h_prev @ weight.T
    if config.aggregator == "uniform":
        raw = np.zeros(graph.num_edges, dtype=z.dtype)
        deg = graph.degrees().astype(z.dtype)
        alpha = 1.0 / np.repeat(deg, graph.degrees())
    else:
        raw, alpha = edge_attention(graph, z, attn, config.leaky_slope)
    pre = _propagation_matrix(graph, alpha) @ z
    out = pre if last else leaky_relu(pre, config.leaky_slope)
    _check_finite(out)
    return out, LayerCache(z=z, raw=raw, alpha=alpha, pre=pre)


def forward(graph: UnifiedGraph, params: ModelParams, config: ModelConfig) -> LayerState:
    if params.num_nodes != graph.num_nodes:
        raise ValueError(
            f"embedding table has {params.num_nodes} rows, graph has {graph.num_nodes} nodes"
        )
    layers = [params.node_embeddings]
    caches = []
    L = params.num_hops
    for l in range(L):
        h, cache = aggregate_layer(
            graph, layers[-1], params.weights[l], params.attention[l], config, last=l == L - 1
        )
        layers.append(h)
        caches.append(cache)
    return LayerState(layers, caches)


def score_pair(state: LayerState | np.ndarray, graph: UnifiedGraph, user_node: int, item_node: int) -> Prediction:
    """Inner-product score between a user node and an item node."""
    if graph.role(user_node) != "user":
        raise ValueError(f"node {user_node} is a {graph.role(user_node)}, not a user")
    if graph.role(item_node) != "item":
        raise ValueError(f"node {item_node} is a {graph.role(item_node)}, not an item")
    final = state.final if isinstance(state, LayerState) else state
    s = float(final[user_node] @ final[item_node])
    return Prediction(score=s, probability=float(sigmoid(np.array([s]))[0]))


def score_batch(final: np.ndarray, user_nodes: np.ndarray, item_nodes: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", final[user_nodes], final[item_nodes])
