"""BCE objective, negative sampling, manual reverse-mode gradients and the epoch loop."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DataError, NonFiniteError
from .graph import UnifiedGraph
from .ingest import Dataset
from .model import (
    LayerState,
    ModelConfig,
    ModelParams,
    _propagation_matrix,
    forward,
    init_params,
    score_batch,
    sigmoid,
)

logger = logging.getLogger(__name__)

EPS = 1e-7
VALIDATION_FRACTION = 0.1
_VAL_STREAM = 7919


@dataclass
class TrainingBatch:
    users: np.ndarray
    items: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.items = np.asarray(self.items, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.users.size == 0:
            raise ValueError("empty batch")
        if not (self.users.shape == self.items.shape == self.labels.shape):
            raise ValueError("batch arrays differ in length")

    def __len__(self):
        return int(self.users.size)


@dataclass
class LossCurve:
    train_loss: list[float] = field(default_factory=list)
    validation_loss: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    def append(self, train: float, val: float):
        self.train_loss.append(train)
        self.validation_loss.append(val)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for e, (t, v) in enumerate(zip(self.train_loss, self.validation_loss), start=1):
            w.writerow([e, repr(t), repr(v)])
        return buf.getvalue()


def bce_loss(predictions, labels) -> float:
    """Mean binary cross-entropy with probabilities clamped to [1e-7, 1-1e-7]."""
    return float(_bce(predictions, labels))


def _bce(predictions, labels):
    p = np.asarray(predictions)
    p = p.astype(np.result_type(p.dtype, np.float64), copy=False)
    y = np.asarray(labels, dtype=p.dtype)
    if p.size == 0:
        raise ValueError("empty batch")
    if p.shape != y.shape:
        raise ValueError("predictions and labels differ in length")
    p = np.clip(p, EPS, 1.0 - EPS)
    return np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


class NegativeSampler:
    """Uniform draws of non-positive items, reproducible per (seed, user, step)."""

    def __init__(self, dataset: Dataset):
        self.num_items = dataset.num_items
        self._positives = dataset.train_items_by_user()
        self._complements: dict[int, np.ndarray] = {}

    def positives(self, user: int) -> set[int]:
        return self._positives[user]

    def sample(self, user: int, count: int, seed: int, step: int) -> np.ndarray:
        pos = self._positives[user]
        free = self.num_items - len(pos)
        if free <= 0:
            raise DataError(f"user {user} is positive with every item; no negatives exist")
        if count > free:
            raise DataError(f"user {user} has only {free} negative items, {count} requested")
        rng = np.random.default_rng([seed, user, step])
        if len(pos) * 2 > self.num_items:
            comp = self._complements.get(user)
            if comp is None:
                comp = np.setdiff1d(np.arange(self.num_items), np.fromiter(pos, np.int64))
                self._complements[user] = comp
            return rng.choice(comp, size=count, replace=False)
        out: list[int] = []
        while len(out) < count:
            for j in rng.integers(0, self.num_items, size=2 * count).tolist():
                if j not in pos and j not in out:
                    out.append(j)
                    if len(out) == count:
                        break
        return np.asarray(out, dtype=np.int64)


def sample_negatives(dataset: Dataset, user: int, count: int, seed: int, step: int) -> np.ndarray:
    return NegativeSampler(dataset).sample(user, count, seed, step)


def batch_predictions(final: np.ndarray, graph: UnifiedGraph, batch: TrainingBatch) -> np.ndarray:
    scores = score_batch(final, batch.users, batch.items + graph.item_offset)
    return sigmoid(scores)


def backward(
    graph: UnifiedGraph,
    params: ModelParams,
    state: LayerState,
    batch: TrainingBatch,
    config: ModelConfig,
) -> ModelParams:
    """Exact gradient of the mean clamped BCE of ``batch`` w.r.t. every parameter.

    ``graph`` must be the same adjacency ``state`` was computed on.
    """
    final = state.final
    u_nodes = batch.users
    i_nodes = batch.items + graph.item_offset
    p = sigmoid(score_batch(final, u_nodes, i_nodes))
    # d(clip)/dp is zero outside the clamp range
    inside = (p > EPS) & (p < 1.0 - EPS)
    dscore = np.where(inside, p - batch.labels, 0.0) / len(batch)

    dh = np.zeros_like(final)
    np.add.at(dh, u_nodes, dscore[:, None] * final[i_nodes])
    np.add.at(dh, i_nodes, dscore[:, None] * final[u_nodes])

    grads = params.zeros_like()
    slope = config.leaky_slope
    n = graph.num_nodes
    L = params.num_hops
    for l in reversed(range(L)):
        cache = state.caches[l]
        h_prev = state.layers[l]
        W, a = params.weights[l], params.attention[l]
        d = W.shape[0]
        if l == L - 1:
            dpre = dh
        else:
            dpre = dh * np.where(cache.pre >= 0, 1.0, slope)
        A = _propagation_matrix(graph, cache.alpha)
        dz = A.T @ dpre
        if config.aggregator == "attention":
            centers, nbrs = graph.centers, graph.neighbors
            dalpha = np.einsum("ij,ij->i", dpre[centers], cache.z[nbrs])
            weighted = cache.alpha * dalpha
            row_sum = np.add.reduceat(weighted, graph.offsets[:-1])
            de = weighted - cache.alpha * np.repeat(row_sum, graph.degrees())
            draw = de * np.where(cache.raw >= 0, 1.0, slope)
            ds_center = np.bincount(centers, weights=draw, minlength=n)
            ds_nbr = np.bincount(nbrs, weights=draw, minlength=n)
            grads.attention[l] = np.concatenate([cache.z.T @ ds_center, cache.z.T @ ds_nbr])
            dz = dz + np.outer(ds_center, a[:d]) + np.outer(ds_nbr, a[d:])
        grads.weights[l] = dz.T @ h_prev
        dh = dz @ W
    grads.node_embeddings = dh

    for name, g in grads.blocks():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient in {name}")
    return grads


class SGD:
    def __init__(self, lr: float):
        self.lr = lr
        self.step_count = 0

    def step(self, params: ModelParams, grads: ModelParams):
        self.step_count += 1
        updates = [(p, self.lr * g) for (_, p), (_, g) in zip(params.blocks(), grads.blocks())]
        _apply(updates, params)


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: ModelParams, grads: ModelParams):
        gs = [g for _, g in grads.blocks()]
        if self.m is None:
            self.m = [np.zeros_like(g) for g in gs]
            self.v = [np.zeros_like(g) for g in gs]
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        updates = []
        for k, ((_, p), g) in enumerate(zip(params.blocks(), gs)):
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1**t)
            v_hat = self.v[k] / (1 - b2**t)
            updates.append((p, self.lr * m_hat / (np.sqrt(v_hat) + self.eps)))
        _apply(updates, params)


def _apply(updates, params: ModelParams):
    names = [n for n, _ in params.blocks()]
    for name, (_, delta) in zip(names, updates):
        if not np.all(np.isfinite(delta)):
            raise NonFiniteError(f"non-finite update for {name}")
    for p, delta in updates:
        p -= delta


def make_optimizer(config: ModelConfig):
    if config.optimizer == "sgd":
        return SGD(config.learning_rate)
    return Adam(config.learning_rate)


def optimizer_step(params: ModelParams, grads: ModelParams, optimizer) -> ModelParams:
    """Apply one update in place and return ``params``."""
    optimizer.step(params, grads)
    return params


def _split_validation(pairs: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    n = len(pairs)
    n_val = int(round(VALIDATION_FRACTION * n)) if n >= 2 else 0
    perm = np.random.default_rng([seed, _VAL_STREAM]).permutation(n)
    val_idx = np.sort(perm[:n_val])
    fit_idx = np.sort(perm[n_val:])
    return pairs[fit_idx], pairs[val_idx]


def _expand(pairs: np.ndarray, sampler: NegativeSampler, neg_ratio: int, seed: int, step0: int):
    """One positive plus ``neg_ratio`` negatives per pair, interleaved."""
    k = neg_ratio + 1
    users = np.repeat(pairs[:, 0], k)
    items = np.empty(len(pairs) * k, dtype=np.int64)
    labels = np.zeros(len(pairs) * k)
    for p, (u, i) in enumerate(pairs.tolist()):
        items[p * k] = i
        labels[p * k] = 1.0
        items[p * k + 1 : (p + 1) * k] = sampler.sample(u, neg_ratio, seed, step0 + p)
    return users, items, labels


def mean_loss(graph, params, config, users, items, labels, batch_size=4096) -> float:
    final = forward(graph, params, config).final
    total = 0.0
    for lo in range(0, len(users), batch_size):
        b = TrainingBatch(users[lo : lo + batch_size], items[lo : lo + batch_size], labels[lo : lo + batch_size])
        total += bce_loss(batch_predictions(final, graph, b), b.labels) * len(b)
    return total / len(users)


def train(
    dataset: Dataset,
    graph: UnifiedGraph,
    config: ModelConfig,
    params: ModelParams | None = None,
) -> tuple[ModelParams, LossCurve]:
    """Fit the model with mini-batch updates and full-graph propagation.

    ``graph`` is the full unified graph; it is capped to
    ``config.neighbor_cap`` once, and the capped view is used throughout.
    """
    if not dataset.train_positives:
        raise DataError("empty training split")
    view = graph.capped(config.neighbor_cap, config.seed)
    if params is None:
        params = init_params(config, graph.num_nodes, config.seed)
    curve = LossCurve()
    if config.epochs == 0:
        return params, curve

    sampler = NegativeSampler(dataset)
    pairs = np.asarray(dataset.train_positives, dtype=np.int64)
    fit_pairs, val_pairs = _split_validation(pairs, config.seed)
    if len(val_pairs) == 0:
        val_pairs = fit_pairs
    val_users, val_items, val_labels = _expand(
        val_pairs, sampler, config.neg_ratio, config.seed + _VAL_STREAM, 0
    )
    opt = make_optimizer(config)
    n_fit = len(fit_pairs)

    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(n_fit)
        users, items, labels = _expand(
            fit_pairs[order], sampler, config.neg_ratio, config.seed, epoch * n_fit
        )
        total = 0.0
        for lo in range(0, len(users), config.batch_size):
            hi = lo + config.batch_size
            batch = TrainingBatch(users[lo:hi], items[lo:hi], labels[lo:hi])
            state = forward(view, params, config)
            total += bce_loss(batch_predictions(state.final, view, batch), batch.labels) * len(batch)
            grads = backward(view, params, state, batch, config)
            opt.step(params, grads)
        train_loss = total / len(users)
        val_loss = mean_loss(view, params, config, val_users, val_items, val_labels)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise NonFiniteError(f"non-finite loss at epoch {epoch + 1}")
        curve.append(train_loss, val_loss)
        logger.debug("epoch %d train=%.5f val=%.5f", epoch + 1, train_loss, val_loss)
    return params, curve


def random_instance(seed: int, batch_size: int = 8, sizes: tuple[int, int, int] | None = None):
    """Small random graph plus a mixed-label batch, for gradient checks.

    ``sizes`` fixes (users, items, aux entities); by default at most 27 nodes.
    """
    from .graph import _from_edges

    rng = np.random.default_rng(seed)
    if sizes is None:
        U = int(rng.integers(2, 8))
        I = int(rng.integers(3, 12))
        A = int(rng.integers(0, 9))
    else:
        U, I, A = sizes
    R = int(rng.integers(1, 4))
    n = U + I + A
    pos = {(int(rng.integers(U)), int(rng.integers(I))) for _ in range(2 * U + I)}
    pos = sorted(pos)
    src = [u for u, _ in pos]
    dst = [U + i for _, i in pos]
    rel = [R] * len(pos)
    for _ in range(int(rng.integers(0, 3 * (A + 1)))):
        h = int(rng.integers(U, n))
        t = int(rng.integers(U, n))
        if h != t:
            src.append(h)
            dst.append(t)
            rel.append(int(rng.integers(R)))
    src_a, dst_a, rel_a = (np.asarray(x, dtype=np.int64) for x in (src, dst, rel))
    loops = np.arange(n, dtype=np.int64)
    graph = _from_edges(
        U, I, A,
        np.concatenate([src_a, dst_a, loops]),
        np.concatenate([dst_a, src_a, loops]),
        np.concatenate([rel_a, rel_a, np.full(n, R + 1)]),
        R + 2,
    )
    batch = TrainingBatch(
        rng.integers(0, U, size=batch_size),
        rng.integers(0, I, size=batch_size),
        rng.integers(0, 2, size=batch_size).astype(np.float64),
    )
    return graph, batch


def loss_at(graph, params, batch, config):
    """Batch loss in the floating type of ``params``."""
    final = forward(graph, params, config).final
    return _bce(batch_predictions(final, graph, batch), batch.labels)


def finite_difference_gradients(
    graph, params, batch, config, step: float = 1e-5, dtype=np.longdouble
) -> ModelParams:
    """Central differences of the batch loss, one coordinate at a time.

    Evaluated in extended precision by default so that cancellation in
    ``f(x+h) - f(x-h)`` does not swamp gradients of order 1e-9.
    """
    work = params.astype(dtype)
    out = params.zeros_like()
    for (_, p), (_, g) in zip(work.blocks(), out.blocks()):
        flat_p, flat_g = p.reshape(-1), g.reshape(-1)
        for k in range(flat_p.size):
            orig = flat_p[k]
            flat_p[k] = orig + step
            up = loss_at(graph, work, batch, config)
            flat_p[k] = orig - step
            down = loss_at(graph, work, batch, config)
            flat_p[k] = orig
            flat_g[k] = (up - down) / (2 * step)
    return out


def max_relative_error(a: ModelParams, b: ModelParams) -> float:
    worst = 0.0
    for (_, x), (_, y) in zip(a.blocks(), b.blocks()):
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), 1e-8)
        worst = max(worst, float(np.max(np.abs(x - y) / denom, initial=0.0)))
    return worst


DESK_CONFIG = ModelConfig(embed_dim=4, num_hops=2)


def grad_check(config: ModelConfig | None = None, seed: int = 0, zero_params: bool = False) -> float:
    """Max relative error between backward and central finite differences."""
    config = config or DESK_CONFIG
    if config.embed_dim > 8:
        raise ValueError("grad_check is meant for desk scale (embed_dim <= 8)")
    graph, batch = random_instance(seed)
    params = init_params(config, graph.num_nodes, seed)
    if zero_params:
        params = params.zeros_like()
    else:
        # widen the attention vectors so softmax weights are far from uniform
        params.attention = [a * 4.0 for a in params.attention]
    state = forward(graph, params, config)
    analytic = backward(graph, params, state, batch, config)
    numeric = finite_difference_gradients(graph, params, batch, config)
    return max_relative_error(analytic, numeric)
