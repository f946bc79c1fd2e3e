import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ncslqg import uav_model


@pytest.fixture
def uav():
    return uav_model()


@pytest.fixture
def uav_p(request):
    return uav_model(request.param)
