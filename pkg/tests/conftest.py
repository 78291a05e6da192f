import shutil
from pathlib import Path

import pytest

from icvqa.config import RunConfig
from icvqa.store import ingest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def store():
    return ingest(
        FIXTURES / "train.jsonl", FIXTURES / "test.jsonl", FIXTURES / "embeddings.json"
    )


@pytest.fixture
def fixture_copy(tmp_path):
    """Mutable copy of the fixture files for tamper/rewrite tests."""
    dest = tmp_path / "fixtures"
    shutil.copytree(FIXTURES, dest)
    return dest


def make_config(**kwargs) -> RunConfig:
    defaults = dict(
        train_path=str(FIXTURES / "train.jsonl"),
        test_path=str(FIXTURES / "test.jsonl"),
        embeddings_path=str(FIXTURES / "embeddings.json"),
        strategy="avg_sim",
        n=4,
        m=2,
        k=3,
        seed=0,
    )
    defaults.update(kwargs)
    return RunConfig(**defaults)


@pytest.fixture
def config_factory():
    return make_config


def pytest_runtest_logreport(report):
    # One pass/fail line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\n[ACCEPTANCE] {name}: {report.outcome.upper()}")
