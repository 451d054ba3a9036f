import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scene_dsa.core import SessionConfig, UserModelParams  # noqa: E402


@pytest.fixture
def config():
    return SessionConfig(duration_ms=60_000, seed=7)


@pytest.fixture
def quiet_params():
    return UserModelParams(red_noise_sd=0.0, blue_noise_sd=0.0)
