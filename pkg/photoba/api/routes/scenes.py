from dataclasses import asdict

from fastapi import APIRouter

from photoba.schemas.api import PresetResponse
from photoba.services.scene_presets import SCENE_PRESETS, ScenePresetParams


router = APIRouter(prefix="/scenes", tags=["sceny"])


@router.get("/presets", response_model=list[PresetResponse])
def list_presets() -> list[PresetResponse]:
    """Zwraca dostępne sceny syntetyczne wraz z parametrami domyślnymi."""
    defaults = {key: value for key, value in asdict(ScenePresetParams()).items() if key != "texture"}
    presets = []
    for preset in SCENE_PRESETS.values():
        presets.append(
            PresetResponse(
                slug=preset.slug,
                name=preset.name,
                description=preset.description,
                defaults=defaults,
            )
        )
    return presets
