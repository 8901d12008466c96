# tests/conftest.py
from pathlib import Path

import pytest

from src.ingest import Step, TimingSeries

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURES = REPO_ROOT / "tests" / "fixtures"


def make_series(values, run_id="run", start=0, **kwargs):
    return TimingSeries(
        run_id=run_id,
        source="<test>",
        steps=tuple(Step(start + i, float(v)) for i, v in enumerate(values)),
        **kwargs,
    )


@pytest.fixture(scope="session")
def repo_root():
    return REPO_ROOT


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def bandwidth_paths():
    return [FIXTURES / "bandwidth_broadwell24.csv", FIXTURES / "bandwidth_cascade40.csv"]
