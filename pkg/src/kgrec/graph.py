"""Unified user/item/entity graph stored as CSR adjacency."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .exceptions import DataError
from .ingest import Dataset, IdMaps, RawTriple

INTERACTED = "interacted"
SELF = "self"


@dataclass(frozen=True, eq=False)
class UnifiedGraph:
    """CSR adjacency over users ``[0, U)``, items ``[U, U+I)`` and aux entities.

    Relation ids ``0..R-1`` are the knowledge-graph relations; ``R`` labels
    user-item interaction edges and ``R+1`` labels self-loops.
    """

    num_users: int
    num_items: int
    num_aux: int
    offsets: np.ndarray
    neighbors: np.ndarray
    relations: np.ndarray
    num_relations: int

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items + self.num_aux

    @property
    def item_offset(self) -> int:
        return self.num_users

    @property
    def aux_offset(self) -> int:
        return self.num_users + self.num_items

    @property
    def interacted_relation(self) -> int:
        return self.num_relations - 2

    @property
    def self_relation(self) -> int:
        return self.num_relations - 1

    @property
    def num_edges(self) -> int:
        return int(self.neighbors.shape[0])

    @cached_property
    def centers(self) -> np.ndarray:
        """Center node of every stored edge (the row index of the CSR entry)."""
        return np.repeat(np.arange(self.num_nodes), np.diff(self.offsets))

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def role(self, node: int) -> str:
        if not 0 <= node < self.num_nodes:
            raise IndexError(f"node {node} out of range [0, {self.num_nodes})")
        if node < self.num_users:
            return "user"
        if node < self.aux_offset:
            return "item"
        return "aux_entity"

    def user_node(self, user: int) -> int:
        if not 0 <= user < self.num_users:
            raise IndexError(f"user index {user} out of range")
        return user

    def item_node(self, item: int) -> int:
        if not 0 <= item < self.num_items:
            raise IndexError(f"item index {item} out of range")
        return self.num_users + item

    def capped(self, cap: int, seed: int) -> "UnifiedGraph":
        """Aggregation view with every neighbor list cut to at most ``cap``.

        The view is not symmetric once any list is actually cut.
        """
        if cap < 1:
            raise ValueError("cap must be >= 1")
        if self.degrees().max(initial=0) <= cap:
            return self
        nbrs, rels, counts = [], [], []
        for node in range(self.num_nodes):
            n, r = _sample_slice(self, node, cap, seed)
            nbrs.append(n)
            rels.append(r)
            counts.append(len(n))
        offsets = np.zeros(self.num_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        return UnifiedGraph(
            self.num_users,
            self.num_items,
            self.num_aux,
            offsets,
            np.concatenate(nbrs),
            np.concatenate(rels),
            self.num_relations,
        )


def build_unified_graph(
    dataset: Dataset, triples: Sequence[RawTriple], idmaps: IdMaps
) -> UnifiedGraph:
    U, I, A = idmaps.num_users, idmaps.num_items, idmaps.num_aux
    R = idmaps.num_relations
    n = U + I + A
    interacted, self_rel = R, R + 1

    def node_of(key: str) -> int:
        if key in idmaps.item_index:
            return U + idmaps.item_index[key]
        if key in idmaps.aux_entity_index:
            return U + I + idmaps.aux_entity_index[key]
        raise DataError(f"triple references unknown key {key!r}")

    src, dst, rel = [], [], []
    for u, i in dataset.train_positives:
        if not (0 <= u < U and 0 <= i < I):
            raise DataError(f"positive ({u}, {i}) out of range")
        src.append(u)
        dst.append(U + i)
        rel.append(interacted)
    for t in triples:
        h, tl = node_of(t.head_key), node_of(t.tail_key)
        if t.relation_key not in idmaps.relation_index:
            raise DataError(f"triple references unknown relation {t.relation_key!r}")
        if h == tl:
            continue
        src.append(h)
        dst.append(tl)
        rel.append(idmaps.relation_index[t.relation_key])

    src_a = np.asarray(src, dtype=np.int64)
    dst_a = np.asarray(dst, dtype=np.int64)
    rel_a = np.asarray(rel, dtype=np.int64)
    loops = np.arange(n, dtype=np.int64)
    all_src = np.concatenate([src_a, dst_a, loops])
    all_dst = np.concatenate([dst_a, src_a, loops])
    all_rel = np.concatenate([rel_a, rel_a, np.full(n, self_rel, dtype=np.int64)])
    return _from_edges(U, I, A, all_src, all_dst, all_rel, R + 2)


def _from_edges(U, I, A, src, dst, rel, num_relations) -> UnifiedGraph:
    n = U + I + A
    edges = np.unique(np.stack([src, dst, rel], axis=1), axis=0)
    counts = np.bincount(edges[:, 0], minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return UnifiedGraph(
        U, I, A, offsets, edges[:, 1].copy(), edges[:, 2].copy(), num_relations
    )


def neighbors(graph: UnifiedGraph, node: int) -> list[tuple[int, int]]:
    """N(node) as ``(neighbor, relation)`` pairs, self-loop included."""
    if not 0 <= node < graph.num_nodes:
        raise IndexError(f"node {node} out of range [0, {graph.num_nodes})")
    lo, hi = graph.offsets[node], graph.offsets[node + 1]
    return list(zip(graph.neighbors[lo:hi].tolist(), graph.relations[lo:hi].tolist()))


def _sample_slice(graph: UnifiedGraph, node: int, cap: int, seed: int):
    lo, hi = int(graph.offsets[node]), int(graph.offsets[node + 1])
    nb, rl = graph.neighbors[lo:hi], graph.relations[lo:hi]
    if hi - lo <= cap:
        return nb, rl
    is_self = (nb == node) & (rl == graph.self_relation)
    others = np.flatnonzero(~is_self)
    rng = np.random.default_rng([seed, node])
    picked = rng.choice(others, size=cap - 1, replace=False)
    keep = np.sort(np.concatenate([np.flatnonzero(is_self), picked]))
    return nb[keep], rl[keep]


def sample_neighbors(graph: UnifiedGraph, node: int, cap: int, seed: int) -> list[tuple[int, int]]:
    """Seeded uniform sample of at most ``cap`` neighbors; the self-loop is always kept."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if not 0 <= node < graph.num_nodes:
        raise IndexError(f"node {node} out of range [0, {graph.num_nodes})")
    nb, rl = _sample_slice(graph, node, cap, seed)
    return list(zip(nb.tolist(), rl.tolist()))
