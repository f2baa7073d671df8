import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from functions.scenario_schema import build_scenario, parse_scenario  # noqa: E402
from functions.simfunc import Simulator  # noqa: E402

SCENARIO_DIR = ROOT / "scenarios"


@pytest.fixture
def sim():
    return Simulator(seed=1)


@pytest.fixture
def nr_scenario():
    return build_scenario({"stack": "ntn5g"})


@pytest.fixture
def dvb_scenario():
    return build_scenario({"stack": "dvbs2rcs2"})


@pytest.fixture
def nr_paper():
    return parse_scenario(SCENARIO_DIR / "ntn_paper.cfg")


@pytest.fixture
def dvb_paper():
    return parse_scenario(SCENARIO_DIR / "dvb_paper.cfg")


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
