"""Named synthetic scenes and the camera motion they are filmed with."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List

from photoba.core.errors import UsageError
from photoba.schemas.scene import BoxSurface, MotionSpec, PlaneSurface, SceneSpec, Surface, TextureSpec

SurfaceBuilder = Callable[["ScenePresetParams"], List[Surface]]


@dataclass(frozen=True)
class ScenePresetParams:
    width: int = 64
    height: int = 64
    channels: int = 3
    n_frames: int = 3
    depth: float = 4.0
    baseline_fraction: float = 0.02
    rotation_deg: float = 0.0
    texture: TextureSpec = field(default_factory=TextureSpec)


@dataclass(frozen=True)
class ScenePreset:
    slug: str
    name: str
    description: str
    builder: SurfaceBuilder

    def build(self, params: ScenePresetParams) -> tuple[SceneSpec, MotionSpec]:
        scene = SceneSpec(
            width=params.width,
            height=params.height,
            channels=params.channels,
            fx=float(params.width),
            fy=float(params.width),
            surfaces=self.builder(params),
        )
        return scene, lateral_motion(params)


def lateral_motion(params: ScenePresetParams) -> MotionSpec:
    """Kamera przesuwa się w prawo o baseline_fraction * depth na klatkę i obraca wokół osi y."""
    baseline = params.baseline_fraction * params.depth
    angle = math.radians(params.rotation_deg)
    return MotionSpec.constant((0.0, angle, 0.0, -baseline, 0.0, 0.0), params.n_frames)


def _texture(params: ScenePresetParams, offset: int) -> TextureSpec:
    return params.texture.model_copy(update={"seed": params.texture.seed + offset})


def _fronto_plane(params: ScenePresetParams) -> list[Surface]:
    return [PlaneSurface(point=(0.0, 0.0, params.depth), normal=(0.0, 0.0, 1.0), texture=_texture(params, 0))]


def _slanted_plane(params: ScenePresetParams) -> list[Surface]:
    slant = math.radians(30.0)
    return [
        PlaneSurface(
            point=(0.0, 0.0, params.depth),
            normal=(math.sin(slant), 0.0, math.cos(slant)),
            texture=_texture(params, 0),
        )
    ]


def _box_on_plane(params: ScenePresetParams) -> list[Surface]:
    near = 0.75 * params.depth
    half = 0.12 * params.depth
    return [
        PlaneSurface(point=(0.0, 0.0, params.depth * 1.25), normal=(0.0, 0.0, 1.0), texture=_texture(params, 0)),
        BoxSurface(
            min_corner=(-half, -half, near),
            max_corner=(half, half, near + 2 * half),
            texture=_texture(params, 1),
        ),
    ]


def _step_edge(params: ScenePresetParams) -> list[Surface]:
    big = 10.0 * params.depth
    return [
        PlaneSurface(point=(0.0, 0.0, params.depth * 2.0), normal=(0.0, 0.0, 1.0), texture=_texture(params, 0)),
        BoxSurface(
            min_corner=(-big, -big, params.depth),
            max_corner=(0.0, big, params.depth + 0.5),
            texture=_texture(params, 1),
        ),
    ]


SCENE_PRESETS: Dict[str, ScenePreset] = {
    "fronto_plane": ScenePreset(
        slug="fronto_plane",
        name="Fronto-parallel plane",
        description="Single textured plane facing the camera at the configured depth.",
        builder=_fronto_plane,
    ),
    "slanted_plane": ScenePreset(
        slug="slanted_plane",
        name="Slanted plane",
        description="Textured plane tilted by 30 degrees about the vertical axis.",
        builder=_slanted_plane,
    ),
    "box_on_plane": ScenePreset(
        slug="box_on_plane",
        name="Box in front of a wall",
        description="Axis-aligned textured box floating before a fronto-parallel backdrop.",
        builder=_box_on_plane,
    ),
    "step_edge": ScenePreset(
        slug="step_edge",
        name="Depth step",
        description="Left half of the view at the configured depth, right half twice as far.",
        builder=_step_edge,
    ),
}


def get_preset_or_raise(slug: str) -> ScenePreset:
    """Return the scene preset or raise UsageError."""
    try:
        return SCENE_PRESETS[slug]
    except KeyError as exc:
        known = ", ".join(sorted(SCENE_PRESETS))
        raise UsageError(f"Nieznana scena: {slug} (dostępne: {known})") from exc
