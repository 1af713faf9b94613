from pathlib import Path

import pytest

from fontadapt.datagen import CouplingConfig, GroupRow, read_fixture

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "fixtures"
FIXTURE_PATH = FIXTURE_DIR / "group_data.jsonl"
COUPLING_PATH = FIXTURE_DIR / "coupling.json"


@pytest.fixture(scope="session")
def group_rows() -> list[GroupRow]:
    return read_fixture(FIXTURE_PATH)


@pytest.fixture(scope="session")
def coupling() -> CouplingConfig:
    return CouplingConfig.load(COUPLING_PATH)
