import numpy as np

from photoba.schemas.scene import TextureSpec
from photoba.services.geometry import DepthMap, ImageGrid, Intrinsics, RigidPose, Snippet
from photoba.services.scene_presets import ScenePresetParams, get_preset_or_raise
from photoba.services.scenes import render_snippet


def render_preset(
    slug: str = "slanted_plane",
    size: int = 32,
    n_frames: int = 3,
    baseline_fraction: float = 0.02,
    frequency: float = 0.5,
    seed: int = 0,
    channels: int = 3,
) -> tuple[Snippet, list[DepthMap], list[RigidPose]]:
    """Renderuje scenę syntetyczną o podanych parametrach."""
    params = ScenePresetParams(
        width=size,
        height=size,
        channels=channels,
        n_frames=n_frames,
        baseline_fraction=baseline_fraction,
        texture=TextureSpec(frequency=frequency, seed=seed),
    )
    scene, motion = get_preset_or_raise(slug).build(params)
    return render_snippet(scene, motion)


def static_snippet(size: int = 16, frames: int = 3) -> Snippet:
    """Sekwencja złożona z powtórzonej pierwszej klatki sceny."""
    snippet, _, _ = render_preset("fronto_plane", size=size, n_frames=2)
    return Snippet(tuple([snippet.frames[0]] * frames), snippet.intrinsics)


def random_image(rng: np.random.Generator, height: int, width: int, channels: int = 1) -> ImageGrid:
    return ImageGrid(rng.uniform(0.0, 1.0, (height, width, channels)))


def unit_intrinsics() -> Intrinsics:
    return Intrinsics(1.0, 1.0, 0.0, 0.0)
