"""End-to-end data preparation and on-disk layout of a prepared data directory.

A prepared directory holds three files:

* ``interactions.tsv``: retained positives, same format as the raw input
* ``triples.tsv``: triples that survived pruning
* ``split.tsv``: ``user_key<TAB>item_key<TAB>train|test``, the split manifest
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .exceptions import DataError, ParseError
from .graph import UnifiedGraph, build_unified_graph
from .ingest import (
    Dataset,
    IdMaps,
    RawInteraction,
    RawTriple,
    build_id_maps,
    filter_positive,
    parse_interactions,
    parse_triples,
    prune_low_frequency,
    split_train_test,
)

INTERACTIONS_FILE = "interactions.tsv"
TRIPLES_FILE = "triples.tsv"
SPLIT_FILE = "split.tsv"


@dataclass
class Prepared:
    positives: list[RawInteraction]
    triples: list[RawTriple]
    idmaps: IdMaps
    dataset: Dataset

    def graph(self) -> UnifiedGraph:
        return build_unified_graph(self.dataset, self.triples, self.idmaps)


def prepare(
    interactions: list[RawInteraction],
    triples: list[RawTriple],
    min_rating: float = 4.0,
    min_count: int = 5,
    test_fraction: float = 0.2,
    seed: int = 42,
) -> Prepared:
    positives = filter_positive(interactions, min_rating)
    triples, positives = prune_low_frequency(triples, positives, min_count)
    idmaps = build_id_maps(positives, triples)
    dataset = split_train_test(positives, idmaps, test_fraction, seed)
    return Prepared(positives, triples, idmaps, dataset)


def prepare_files(interactions_path, triples_path, **kwargs) -> Prepared:
    return prepare(parse_interactions(interactions_path), parse_triples(triples_path), **kwargs)


def write_atomic(path: str | Path, data: str | bytes):
    """Write to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _fmt_rating(r: float) -> str:
    return str(int(r)) if float(r).is_integer() else repr(r)


def save_prepared(prep: Prepared, out_dir: str | Path):
    out = Path(out_dir)
    write_atomic(
        out / INTERACTIONS_FILE,
        "".join(
            f"{p.user_key}\t{p.item_key}\t{_fmt_rating(p.rating)}\t{p.timestamp}\n"
            for p in prep.positives
        ),
    )
    write_atomic(
        out / TRIPLES_FILE,
        "".join(f"{t.head_key}\t{t.relation_key}\t{t.tail_key}\n" for t in prep.triples),
    )
    users, items = prep.idmaps.user_keys(), prep.idmaps.item_keys()
    lines = [f"{users[u]}\t{items[i]}\ttrain\n" for u, i in prep.dataset.train_positives]
    lines += [f"{users[u]}\t{items[i]}\ttest\n" for u, i in prep.dataset.test_positives]
    write_atomic(out / SPLIT_FILE, "".join(lines))


def load_prepared(data_dir: str | Path) -> Prepared:
    data = Path(data_dir)
    for name in (INTERACTIONS_FILE, TRIPLES_FILE, SPLIT_FILE):
        if not (data / name).is_file():
            raise DataError(f"{data / name} not found (run `kgrec preprocess` first)")
    positives = parse_interactions(data / INTERACTIONS_FILE)
    triples = parse_triples(data / TRIPLES_FILE)
    idmaps = build_id_maps(positives, triples)
    train, test = [], []
    with open(data / SPLIT_FILE, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 3 or cols[2] not in ("train", "test"):
                raise ParseError("expected user<TAB>item<TAB>train|test", lineno)
            try:
                pair = (idmaps.user_index[cols[0]], idmaps.item_index[cols[1]])
            except KeyError as exc:
                raise ParseError(f"unknown key {exc.args[0]!r}", lineno) from None
            (train if cols[2] == "train" else test).append(pair)
    if not train and not test:
        raise DataError("empty dataset")
    dataset = Dataset(
        train, test, idmaps.num_users, idmaps.num_items, idmaps.num_aux, idmaps.num_relations
    )
    return Prepared(positives, triples, idmaps, dataset)
