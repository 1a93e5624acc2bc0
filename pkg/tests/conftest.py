import sys
from dataclasses import replace
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from exoctl.domain import Condition, ControllerConfig  # noqa: E402
from exoctl.gait_sim import paper_path, run_scenario  # noqa: E402


@pytest.fixture(scope="session")
def paper_run():
    """Full paper-path run, Vision On, default seed."""
    return run_scenario(paper_path(Condition.VISION_ON), ControllerConfig())


@pytest.fixture(scope="session")
def exo_off_run():
    return run_scenario(paper_path(Condition.EXO_OFF), ControllerConfig())
