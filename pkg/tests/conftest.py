import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

MODELS = Path(__file__).resolve().parents[1] / "models"


@pytest.fixture
def models_dir():
    return MODELS
