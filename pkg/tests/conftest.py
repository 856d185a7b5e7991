from collections.abc import Generator
import sys
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))


from photoba.api.dependencies import get_app_settings
from photoba.core.config import Settings
from photoba.main import create_app


@pytest.fixture
def test_settings() -> Settings:
    """Ustawienia testowe z małym limitem pikseli."""
    return Settings(
        app_name="Test Photoba",
        environment="test",
        max_api_pixels=48 * 48,
        api_cors_origins=["*"],
    )


@pytest.fixture
def client(test_settings: Settings) -> Generator[TestClient, None, None]:
    """Udostępnia klienta API z nadpisanymi ustawieniami."""
    app = create_app()
    app.dependency_overrides[get_app_settings] = lambda: test_settings

    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture
def rng() -> np.random.Generator:
    """Deterministyczny generator liczb losowych."""
    return np.random.default_rng(1234)
