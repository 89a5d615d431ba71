"""Top-K ranking metrics, full-ranking evaluation and the learning-rate sweep."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DataError
from .graph import UnifiedGraph
from .ingest import Dataset
from .model import ModelConfig, forward

# Returned by metrics that are undefined for an empty relevant set.
SKIP = None


@dataclass(frozen=True)
class MetricsReport:
    k: int
    precision_at_k: float
    recall_at_k: float
    ndcg_at_k: float
    map: float
    num_users: int = 0

    def as_row(self) -> list[float]:
        return [self.precision_at_k, self.recall_at_k, self.ndcg_at_k, self.map]

    def headers(self) -> list[str]:
        k = self.k
        return [f"Precision@{k}", f"Recall@{k}", f"NDCG@{k}", "MAP"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        k = self.k
        for name, v in zip(
            [f"precision@{k}", f"recall@{k}", f"ndcg@{k}", "map"], self.as_row()
        ):
            w.writerow([name, f"{v:.6f}"])
        return buf.getvalue()

    def to_table(self, label: str = "Ours") -> str:
        return format_table(["Method", *self.headers()], [[label, *self.as_row()]])


def format_table(headers: Sequence[str], rows: Iterable[Sequence]) -> str:
    cells = [list(headers)] + [
        [c if isinstance(c, str) else f"{c:.3f}" if isinstance(c, float) else str(c) for c in r]
        for r in rows
    ]
    widths = [max(len(r[j]) for r in cells) for j in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(lines) + "\n"


def rank_items(final: np.ndarray, graph: UnifiedGraph, user: int, candidates) -> np.ndarray:
    """Candidates by descending score, ties broken by ascending item index."""
    cand = np.asarray(candidates, dtype=np.int64)
    if cand.size == 0:
        raise ValueError("empty candidate set")
    scores = final[graph.item_offset + cand] @ final[user]
    return cand[np.lexsort((cand, -scores))]


def _hits(ranked, relevant, k):
    return sum(1 for i in ranked[:k] if i in relevant)


def precision_at_k(ranked, relevant, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return _hits(list(ranked), set(relevant), k) / k


def recall_at_k(ranked, relevant, k: int):
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = set(relevant)
    if not relevant:
        return SKIP
    return _hits(list(ranked), relevant, k) / len(relevant)


def ndcg_at_k(ranked, relevant, k: int):
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = set(relevant)
    if not relevant:
        return SKIP
    dcg = sum(1.0 / math.log2(p + 2) for p, i in enumerate(list(ranked)[:k]) if i in relevant)
    idcg = sum(1.0 / math.log2(p + 2) for p in range(min(len(relevant), k)))
    return dcg / idcg


def average_precision(ranked, relevant):
    """AP over the full ranked list."""
    relevant = set(relevant)
    if not relevant:
        return SKIP
    hits, total = 0, 0.0
    for p, i in enumerate(ranked, start=1):
        if i in relevant:
            hits += 1
            total += hits / p
    return total / len(relevant)


def evaluate_scores(
    scores: np.ndarray, dataset: Dataset, k: int = 10
) -> MetricsReport:
    """Metrics from a dense ``num_users x num_items`` score matrix."""
    train = dataset.train_items_by_user()
    test = dataset.test_items_by_user()
    p_s, r_s, n_s, m_s = [], [], [], []
    all_items = np.arange(dataset.num_items)
    for u in range(dataset.num_users):
        if not test[u]:
            continue
        mask = np.ones(dataset.num_items, dtype=bool)
        mask[list(train[u])] = False
        cand = all_items[mask]
        ranked = cand[np.lexsort((cand, -scores[u, cand]))].tolist()
        p_s.append(precision_at_k(ranked, test[u], k))
        r_s.append(recall_at_k(ranked, test[u], k))
        n_s.append(ndcg_at_k(ranked, test[u], k))
        m_s.append(average_precision(ranked, test[u]))
    if not p_s:
        raise DataError("no test users to evaluate")
    n = len(p_s)
    return MetricsReport(
        k=k,
        precision_at_k=math.fsum(p_s) / n,
        recall_at_k=math.fsum(r_s) / n,
        ndcg_at_k=math.fsum(n_s) / n,
        map=math.fsum(m_s) / n,
        num_users=n,
    )


def score_matrix(final: np.ndarray, graph: UnifiedGraph) -> np.ndarray:
    users = final[: graph.num_users]
    items = final[graph.item_offset : graph.aux_offset]
    return users @ items.T


def evaluate(final: np.ndarray, graph: UnifiedGraph, dataset: Dataset, k: int = 10) -> MetricsReport:
    """Per-user full-ranking metrics averaged over users with test positives."""
    return evaluate_scores(score_matrix(final, graph), dataset, k)


def random_recall_expectation(dataset: Dataset, k: int = 10) -> float:
    """Expected Recall@k of a uniformly random ranking under the same protocol."""
    train = dataset.train_items_by_user()
    test = dataset.test_items_by_user()
    vals = []
    for u in range(dataset.num_users):
        if test[u]:
            c = dataset.num_items - len(train[u])
            vals.append(min(k, c) / c)
    if not vals:
        raise DataError("no test users to evaluate")
    return math.fsum(vals) / len(vals)


SWEEP_HEADER = ["lr", "precision@10", "recall@10", "ndcg@10", "map"]


@dataclass
class SweepTable:
    rows: list[tuple[float, MetricsReport]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        k = self.rows[0][1].k if self.rows else 10
        w.writerow(["lr", f"precision@{k}", f"recall@{k}", f"ndcg@{k}", "map"])
        for lr, rep in self.rows:
            w.writerow([repr(lr), *(f"{v:.6f}" for v in rep.as_row())])
        return buf.getvalue()

    def to_table(self) -> str:
        k = self.rows[0][1].k if self.rows else 10
        return format_table(
            ["LR", f"Precision@{k}", f"Recall@{k}", f"NDCG@{k}", "MAP"],
            [[repr(lr), *rep.as_row()] for lr, rep in self.rows],
        )


def lr_sweep(
    dataset: Dataset,
    graph: UnifiedGraph,
    config: ModelConfig,
    lrs: Sequence[float],
    k: int = 10,
) -> SweepTable:
    """Train and evaluate one model per learning rate, same data and seed."""
    from .train import train

    if not lrs:
        raise ValueError("lrs must be non-empty")
    rows = []
    for lr in lrs:
        cfg = config.replace(learning_rate=float(lr))
        params, _ = train(dataset, graph, cfg)
        view = graph.capped(cfg.neighbor_cap, cfg.seed)
        final = forward(view, params, cfg).final
        rows.append((float(lr), evaluate(final, graph, dataset, k)))
    return SweepTable(rows)
