"""Reading interaction/triple files and turning them into an indexed dataset."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DataError, ParseError


@dataclass(frozen=True)
class RawInteraction:
    user_key: str
    item_key: str
    rating: float
    timestamp: int


@dataclass(frozen=True)
class RawTriple:
    head_key: str
    relation_key: str
    tail_key: str


@dataclass
class IdMaps:
    """Dense 0-based index tables for users, items, aux entities and relations."""

    user_index: dict[str, int] = field(default_factory=dict)
    item_index: dict[str, int] = field(default_factory=dict)
    aux_entity_index: dict[str, int] = field(default_factory=dict)
    relation_index: dict[str, int] = field(default_factory=dict)

    @property
    def num_users(self) -> int:
        return len(self.user_index)

    @property
    def num_items(self) -> int:
        return len(self.item_index)

    @property
    def num_aux(self) -> int:
        return len(self.aux_entity_index)

    @property
    def num_relations(self) -> int:
        return len(self.relation_index)

    def user_keys(self) -> list[str]:
        return list(self.user_index)

    def item_keys(self) -> list[str]:
        return list(self.item_index)

    def aux_keys(self) -> list[str]:
        return list(self.aux_entity_index)

    def relation_keys(self) -> list[str]:
        return list(self.relation_index)

    def entity_index(self, key: str) -> tuple[str, int]:
        """Resolve a triple endpoint to ``("item", i)`` or ``("aux", a)``."""
        if key in self.item_index:
            return "item", self.item_index[key]
        if key in self.aux_entity_index:
            return "aux", self.aux_entity_index[key]
        raise DataError(f"unknown entity key {key!r}")


@dataclass
class Dataset:
    train_positives: list[tuple[int, int]]
    test_positives: list[tuple[int, int]]
    num_users: int
    num_items: int
    num_aux: int = 0
    num_relations: int = 0

    def train_items_by_user(self) -> list[set[int]]:
        out: list[set[int]] = [set() for _ in range(self.num_users)]
        for u, i in self.train_positives:
            out[u].add(i)
        return out

    def test_items_by_user(self) -> list[set[int]]:
        out: list[set[int]] = [set() for _ in range(self.num_users)]
        for u, i in self.test_positives:
            out[u].add(i)
        return out


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


def parse_interactions(path: str | Path) -> list[RawInteraction]:
    """Parse a ``user<TAB>item<TAB>rating<TAB>timestamp`` file.

    Ratings outside [1, 5] are treated as abnormal records and rejected.
    """
    records = []
    for lineno, line in _data_lines(path):
        cols = line.split("\t")
        if len(cols) != 4:
            raise ParseError(f"expected 4 tab-separated columns, got {len(cols)}", lineno)
        user, item, rating_s, ts_s = cols
        if not user or not item:
            raise ParseError("empty user or item key", lineno)
        try:
            rating = float(rating_s)
        except ValueError:
            raise ParseError(f"non-numeric rating {rating_s!r}", lineno) from None
        try:
            ts = int(ts_s)
        except ValueError:
            raise ParseError(f"non-numeric timestamp {ts_s!r}", lineno) from None
        if not math.isfinite(rating) or not 1.0 <= rating <= 5.0:
            raise ParseError(f"rating {rating_s!r} outside [1, 5]", lineno)
        records.append(RawInteraction(user, item, rating, ts))
    return records


def parse_triples(path: str | Path) -> list[RawTriple]:
    triples = []
    for lineno, line in _data_lines(path):
        cols = line.split("\t")
        if len(cols) != 3:
            raise ParseError(f"expected 3 tab-separated columns, got {len(cols)}", lineno)
        if not all(cols):
            raise ParseError("empty key in triple", lineno)
        triples.append(RawTriple(*cols))
    return triples


def filter_positive(
    interactions: Iterable[RawInteraction], threshold: float = 4.0
) -> list[RawInteraction]:
    """Keep ratings >= threshold, one record per (user, item).

    When a pair repeats, the record with the earliest timestamp wins and sits
    at the position of the pair's first occurrence.
    """
    kept: dict[tuple[str, str], RawInteraction] = {}
    for rec in interactions:
        if rec.rating < threshold:
            continue
        key = (rec.user_key, rec.item_key)
        prev = kept.get(key)
        if prev is None:
            kept[key] = rec
        elif rec.timestamp < prev.timestamp:
            kept[key] = rec
    return list(kept.values())


def prune_low_frequency(
    triples: Sequence[RawTriple],
    positives: Sequence[RawInteraction],
    min_count: int = 5,
) -> tuple[list[RawTriple], list[RawInteraction]]:
    """Drop auxiliary entities seen in fewer than ``min_count`` triples.

    Any triple key that is not an item of ``positives`` counts as an auxiliary
    entity. Removal repeats until no auxiliary entity is under the threshold;
    the surviving set is the largest one where every aux entity has enough
    support, so the result does not depend on removal order.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    items = {p.item_key for p in positives}
    alive = list(triples)
    while True:
        degree: dict[str, int] = defaultdict(int)
        for t in alive:
            for key in {t.head_key, t.tail_key}:
                if key not in items:
                    degree[key] += 1
        weak = {k for k, c in degree.items() if c < min_count}
        if not weak:
            break
        alive = [t for t in alive if t.head_key not in weak and t.tail_key not in weak]
    # Aux pruning never removes an interaction, so every user and item keeps
    # its positives.
    return alive, list(positives)


def build_id_maps(positives: Sequence[RawInteraction], triples: Sequence[RawTriple]) -> IdMaps:
    maps = IdMaps()
    for p in positives:
        maps.user_index.setdefault(p.user_key, len(maps.user_index))
        maps.item_index.setdefault(p.item_key, len(maps.item_index))
    for t in triples:
        for key in (t.head_key, t.tail_key):
            if key not in maps.item_index:
                maps.aux_entity_index.setdefault(key, len(maps.aux_entity_index))
        maps.relation_index.setdefault(t.relation_key, len(maps.relation_index))
    return maps


def split_train_test(
    positives: Sequence[RawInteraction],
    idmaps: IdMaps,
    test_fraction: float = 0.2,
    seed: int = 0,
    min_user_positives: int = 5,
) -> Dataset:
    """Per-user random split.

    Each user with at least ``min_user_positives`` positives sends
    ``ceil(test_fraction * n)`` of them to test; smaller users stay in train.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    if not positives:
        raise DataError("empty dataset")

    by_user: dict[int, list[int]] = defaultdict(list)
    for p in positives:
        by_user[idmaps.user_index[p.user_key]].append(idmaps.item_index[p.item_key])

    rng = np.random.default_rng(seed)
    test_mask: dict[int, set[int]] = {}
    for u in sorted(by_user):
        items = by_user[u]
        n = len(items)
        if n < min_user_positives:
            test_mask[u] = set()
            continue
        n_test = math.ceil(test_fraction * n)
        test_mask[u] = set(rng.choice(n, size=n_test, replace=False).tolist())

    train, test = [], []
    for u in sorted(by_user):
        for pos, i in enumerate(by_user[u]):
            (test if pos in test_mask[u] else train).append((u, i))
    return Dataset(
        train_positives=train,
        test_positives=test,
        num_users=idmaps.num_users,
        num_items=idmaps.num_items,
        num_aux=idmaps.num_aux,
        num_relations=idmaps.num_relations,
    )
