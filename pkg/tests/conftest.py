from __future__ import annotations

import pytest

from propbench.dataset import GenContext, build_dataset
from propbench.surface import default_bank_path, load_sentence_bank, load_templates


@pytest.fixture(scope="session")
def templates():
    return load_templates()


@pytest.fixture(scope="session")
def bank():
    return load_sentence_bank(default_bank_path(), "plain")


@pytest.fixture(scope="session")
def small_split(bank, templates):
    """105 instances over depths 1..7: five per depth-label cell."""
    return build_dataset(105, 1, 7, seed=20240611, bank=bank, templates=templates)


@pytest.fixture()
def ctx(bank, templates):
    return GenContext(bank=bank, templates=templates, seed=99, instance_index=0)
