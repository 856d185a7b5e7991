from datetime import datetime, timezone

import torch
from fastapi import APIRouter, Depends

from photoba import __version__
from photoba.api.dependencies import get_app_settings
from photoba.core.config import Settings

router = APIRouter(tags=["zdrowie"])


@router.get("/healthz")
def healthcheck(settings: Settings = Depends(get_app_settings)) -> dict[str, str | int]:
    """Stan usługi, wersja silnika i limity obliczeń."""
    return {
        "status": "działa",
        "aplikacja": settings.app_name,
        "wersja": __version__,
        "czas": datetime.now(tz=timezone.utc).isoformat(),
        "środowisko": settings.environment,
        "wątki": torch.get_num_threads(),
        "limit_pikseli": settings.max_api_pixels,
    }
