import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from relpara.corpus import load_dataset
from relpara.fixtures import fixture20_path


@pytest.fixture(scope="session")
def fixture_path() -> Path:
    return fixture20_path()


@pytest.fixture(scope="session")
def fixture_dataset(fixture_path):
    return load_dataset(fixture_path, name="fixture20")
