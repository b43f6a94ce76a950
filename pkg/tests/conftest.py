import json
import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
if str(TESTS_DIR) not in sys.path:
    sys.path.insert(0, str(TESTS_DIR))


@pytest.fixture(scope="session")
def oracle_fixtures():
    with open(TESTS_DIR / "fixtures" / "oracle_fixtures.json") as fh:
        return json.load(fh)
