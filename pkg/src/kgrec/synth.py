"""Synthetic planted-preference data in the interaction/triple file formats."""

from __future__ import annotations

import numpy as np

from .exceptions import DataError

RELATION = "has_attr"


def generate_planted(
    num_users: int,
    num_items: int,
    num_attrs: int,
    attrs_per_item: int = 1,
    noise_frac: float = 0.3,
    seed: int = 0,
    positives_per_user: int = 10,
    low_ratings_per_user: int = 2,
) -> tuple[str, str]:
    """Return ``(interactions_text, triples_text)``.

    Every user prefers one attribute and rates 5 a sample of the items whose
    true attribute set contains it. ``noise_frac`` of the ``has_attr`` triples
    are then rewired to a different random attribute, so the published graph
    contains decoy edges. A few ratings in 1..3 are mixed in; they do not
    survive the rating filter.
    """
    for name, v in [
        ("num_users", num_users),
        ("num_items", num_items),
        ("num_attrs", num_attrs),
        ("attrs_per_item", attrs_per_item),
        ("positives_per_user", positives_per_user),
    ]:
        if v < 1:
            raise DataError(f"{name} must be >= 1")
    if not 0.0 <= noise_frac <= 1.0:
        raise DataError("noise_frac must lie in [0, 1]")
    if attrs_per_item > num_attrs:
        raise DataError("attrs_per_item exceeds num_attrs")
    if num_items < num_attrs:
        raise DataError(
            f"infeasible: {num_items} items cannot cover {num_attrs} attributes"
        )

    rng = np.random.default_rng(seed)
    # first attribute of each item round-robins so every attribute is carried
    first = rng.permutation(np.arange(num_items) % num_attrs)
    item_attrs = []
    for i in range(num_items):
        rest = [a for a in rng.permutation(num_attrs).tolist() if a != first[i]]
        item_attrs.append([int(first[i])] + rest[: attrs_per_item - 1])
    carriers: list[list[int]] = [[] for _ in range(num_attrs)]
    for i, attrs in enumerate(item_attrs):
        for a in attrs:
            carriers[a].append(i)

    inter_lines = []
    ts = 1_700_000_000
    pref = rng.integers(0, num_attrs, size=num_users)
    for u in range(num_users):
        pool = carriers[int(pref[u])]
        n_pos = min(positives_per_user, len(pool))
        liked = rng.choice(pool, size=n_pos, replace=False)
        for i in liked.tolist():
            ts += int(rng.integers(1, 1000))
            inter_lines.append(f"u{u}\tb{i}\t5\t{ts}")
        for _ in range(low_ratings_per_user):
            i = int(rng.integers(num_items))
            ts += int(rng.integers(1, 1000))
            inter_lines.append(f"u{u}\tb{i}\t{int(rng.integers(1, 4))}\t{ts}")

    triples = [(i, a) for i, attrs in enumerate(item_attrs) for a in attrs]
    n_noisy = int(round(noise_frac * len(triples)))
    if num_attrs > 1:
        for t in rng.choice(len(triples), size=n_noisy, replace=False).tolist():
            i, a = triples[t]
            choices = [b for b in range(num_attrs) if b not in item_attrs[i]]
            if not choices:
                choices = [b for b in range(num_attrs) if b != a]
            triples[t] = (i, int(rng.choice(choices)))
    triple_lines = [f"b{i}\t{RELATION}\ta{a}" for i, a in triples]
    return "\n".join(inter_lines) + "\n", "\n".join(triple_lines) + "\n"
