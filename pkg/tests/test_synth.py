import pytest

from kgrec.exceptions import DataError
from kgrec.pipeline import prepare_files
from kgrec.synth import generate_planted
from conftest import write_planted


def parse(text):
    return [line.split("\t") for line in text.splitlines()]


def attributes_by_item(triples_text):
    out = {}
    for head, rel, tail in parse(triples_text):
        assert rel == "has_attr"
        out.setdefault(head, set()).add(tail)
    return out


def test_noise_free_positives_share_user_attribute():
    inter, triples = generate_planted(30, 50, 5, noise_frac=0.0, seed=4)
    attrs = attributes_by_item(triples)
    liked = {}
    for user, item, rating, _ in parse(inter):
        if rating == "5":
            liked.setdefault(user, []).append(item)
    assert len(liked) == 30
    for items in liked.values():
        common = set.intersection(*(attrs[i] for i in items))
        assert common, items


def test_every_attribute_is_carried():
    _, triples = generate_planted(10, 20, 20, noise_frac=0.0, seed=0)
    assert {t for _, _, t in parse(triples)} == {f"a{k}" for k in range(20)}


def test_noise_rewires_fraction():
    _, clean = generate_planted(10, 100, 10, noise_frac=0.0, seed=2)
    _, noisy = generate_planted(10, 100, 10, noise_frac=0.3, seed=2)
    assert len(parse(clean)) == len(parse(noisy)) == 100
    changed = sum(a != b for a, b in zip(parse(clean), parse(noisy)))
    assert changed == 30


def test_deterministic_per_seed():
    assert generate_planted(20, 30, 4, seed=9) == generate_planted(20, 30, 4, seed=9)
    assert generate_planted(20, 30, 4, seed=9) != generate_planted(20, 30, 4, seed=10)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(num_users=5, num_items=3, num_attrs=4),
        dict(num_users=0, num_items=3, num_attrs=2),
        dict(num_users=5, num_items=10, num_attrs=2, attrs_per_item=3),
        dict(num_users=5, num_items=10, num_attrs=2, noise_frac=1.5),
    ],
)
def test_infeasible_counts(kwargs):
    with pytest.raises(DataError):
        generate_planted(**kwargs)


def test_desk_scale_round_trips_through_ingest(tmp_path):
    ip, tp = write_planted(tmp_path, num_users=200, num_items=300, num_attrs=20, noise_frac=0.3, seed=0)
    prep = prepare_files(ip, tp, seed=0)
    assert prep.idmaps.num_users == 200
    assert prep.idmaps.num_aux == 20 and prep.idmaps.num_relations == 1
    assert len(prep.dataset.test_positives) > 0
    assert prep.graph().num_nodes == 200 + prep.idmaps.num_items + 20
