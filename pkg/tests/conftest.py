import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from opinionsteer.certify import certify
from opinionsteer.scenario_io import bundled_scenario_path, parse_scenario


@pytest.fixture(scope="session")
def fixture_scenario():
    return parse_scenario(bundled_scenario_path())


@pytest.fixture(scope="session")
def fixture_report(fixture_scenario):
    """One full certification of the bundled scenario, shared by everything
    that only needs to read its trajectories and reports."""
    return certify(fixture_scenario)
