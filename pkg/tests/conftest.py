from pathlib import Path

import pytest

from epgf import datasets
from epgf.model import train_ngram

FIXTURES = Path(__file__).parent / "fixtures"
TAGS = ("SAM-MT", "TPHD", "Trx", "CheY")


@pytest.fixture(scope="session")
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def desk_corpus():
    return list(datasets.tagged_corpus(datasets.parse_fasta(FIXTURES / "desk_corpus.fasta")))


@pytest.fixture(scope="session")
def desk_model(desk_corpus):
    return train_ngram(desk_corpus, order=3, alpha=0.1)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
