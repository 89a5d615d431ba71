import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kgrec.pipeline import prepare_files
from kgrec.synth import generate_planted

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def write_planted(directory: Path, **kwargs):
    inter, triples = generate_planted(**kwargs)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "interactions.tsv").write_text(inter)
    (directory / "triples.tsv").write_text(triples)
    return directory / "interactions.tsv", directory / "triples.tsv"


@pytest.fixture(scope="session")
def small_planted(tmp_path_factory):
    """40 users / 60 items / 6 attributes, prepared and split."""
    d = tmp_path_factory.mktemp("small_planted")
    ip, tp = write_planted(
        d, num_users=40, num_items=60, num_attrs=6, noise_frac=0.2, seed=3, positives_per_user=8
    )
    return prepare_files(ip, tp, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
