"""Ray-cast renderer for textured synthetic scenes with exact depth and poses.

The world frame is the camera frame of frame 0. `MotionSpec.steps[t]` maps points
from camera t to camera t + 1, so the camera of frame t sees the world through the
composition of the first t steps.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from photoba.core.errors import InvalidSceneError
from photoba.schemas.scene import BoxSurface, Corruption, MotionSpec, PlaneSurface, SceneSpec, TextureSpec
from photoba.services.geometry import (
    Z_MIN,
    DepthMap,
    ImageGrid,
    Intrinsics,
    RigidPose,
    Snippet,
    ValidityMask,
    compose_poses,
)
from photoba.services.logging_service import EngineLogger, EventStatus

logger = logging.getLogger(__name__)


def scene_intrinsics(scene: SceneSpec) -> Intrinsics:
    cx, cy = scene.principal_point
    return Intrinsics(scene.fx, scene.fy, cx, cy)


def camera_extrinsics(motion: MotionSpec) -> list[RigidPose]:
    """World-to-camera transform of every frame."""
    steps = [RigidPose.from_vector(step) for step in motion.steps]
    extrinsics = [RigidPose.identity()]
    for step in steps:
        extrinsics.append(compose_poses([extrinsics[-1], step]))
    return extrinsics


def texture_values(texture: TextureSpec, a: np.ndarray, b: np.ndarray, channels: int) -> np.ndarray:
    """Band-limited sinusoid texture at plane coordinates (a, b); output (..., channels) in [0, 1]."""
    rng = np.random.default_rng(texture.seed)
    count = texture.components
    frequencies = texture.frequency * rng.uniform(0.6, 1.4, count)
    angles = rng.uniform(0.0, math.pi, count)
    phases = rng.uniform(0.0, 2.0 * math.pi, (count, channels))
    amplitudes = rng.uniform(0.5, 1.0, count)
    amplitudes /= amplitudes.sum()
    out = np.full(a.shape + (channels,), 0.5)
    for k in range(count):
        along = np.cos(angles[k]) * a + np.sin(angles[k]) * b
        argument = 2.0 * math.pi * frequencies[k] * along
        out += texture.contrast * amplitudes[k] * np.sin(argument[..., None] + phases[k])
    return np.clip(out, 0.0, 1.0)


def _plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[1]) > 0.9 else np.array([0.0, 1.0, 0.0])
    first = np.cross(normal, helper)
    first /= np.linalg.norm(first)
    return first, np.cross(normal, first)


def _intersect_plane(
    surface: PlaneSurface,
    origin: np.ndarray,
    directions: np.ndarray,
    channels: int,
) -> tuple[np.ndarray, np.ndarray]:
    normal = np.asarray(surface.normal, dtype=np.float64)
    normal /= np.linalg.norm(normal)
    point = np.asarray(surface.point, dtype=np.float64)
    denominator = directions @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        distance = (point - origin) @ normal / denominator
    hit = np.isfinite(distance) & (np.abs(denominator) > 1e-12) & (distance > Z_MIN)
    distance = np.where(hit, distance, np.inf)
    safe = np.where(hit, distance, 0.0)
    local = origin + safe[..., None] * directions - point
    first, second = _plane_basis(normal)
    a = local @ first
    b = local @ second
    if surface.half_extent is not None:
        inside = (np.abs(a) <= surface.half_extent) & (np.abs(b) <= surface.half_extent)
        distance = np.where(inside, distance, np.inf)
    return distance, texture_values(surface.texture, a, b, channels)


def _intersect_box(
    surface: BoxSurface,
    origin: np.ndarray,
    directions: np.ndarray,
    channels: int,
) -> tuple[np.ndarray, np.ndarray]:
    low = np.asarray(surface.min_corner, dtype=np.float64)
    high = np.asarray(surface.max_corner, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = (low - origin) / directions
        second = (high - origin) / directions
    parallel = np.abs(directions) < 1e-12
    inside_slab = (origin >= low) & (origin <= high)
    entry = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), np.minimum(first, second))
    exit_ = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), np.maximum(first, second))
    near = entry.max(axis=-1)
    far = exit_.min(axis=-1)
    hit = (near <= far) & (near > Z_MIN) & np.isfinite(near)
    distance = np.where(hit, near, np.inf)
    axis = entry.argmax(axis=-1)
    point = origin + np.where(hit, near, 0.0)[..., None] * directions
    # Face texture coordinates are the two world axes spanning the entered face.
    a = np.where(axis == 0, point[..., 1], point[..., 0])
    b = np.where(axis == 2, point[..., 1], point[..., 2])
    return distance, texture_values(surface.texture, a, b, channels)


def _check_in_front(scene: SceneSpec, extrinsics: list[RigidPose]) -> None:
    for index, surface in enumerate(scene.surfaces):
        if isinstance(surface, PlaneSurface):
            anchor = np.asarray(surface.point, dtype=np.float64)
        else:
            anchor = 0.5 * (np.asarray(surface.min_corner) + np.asarray(surface.max_corner))
        for frame, pose in enumerate(extrinsics):
            depth = float((pose.rotation_matrix() @ anchor + pose.translation)[2])
            if depth <= Z_MIN:
                raise InvalidSceneError(
                    f"Powierzchnia {index} leży za kamerą w klatce {frame} (z = {depth:.4f})."
                )


def _render_frame(scene: SceneSpec, intrinsics: Intrinsics, pose: RigidPose) -> tuple[np.ndarray, DepthMap]:
    v, u = np.meshgrid(np.arange(scene.height, dtype=np.float64), np.arange(scene.width, dtype=np.float64), indexing="ij")
    rays = np.stack([(u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy, np.ones_like(u)], axis=-1)
    rotation_t = pose.rotation_matrix().T
    origin = -rotation_t @ pose.translation
    directions = rays @ rotation_t.T

    best = np.full(u.shape, np.inf)
    image = np.full(u.shape + (scene.channels,), scene.background)
    for surface in scene.surfaces:
        if isinstance(surface, PlaneSurface):
            distance, colour = _intersect_plane(surface, origin, directions, scene.channels)
        else:
            distance, colour = _intersect_box(surface, origin, directions, scene.channels)
        closer = distance < best
        best = np.where(closer, distance, best)
        image = np.where(closer[..., None], colour, image)
    valid = np.isfinite(best)
    # Ray z component is 1, so the ray parameter equals camera depth.
    return image, DepthMap(np.where(valid, best, 0.0), valid)


def render_snippet(scene: SceneSpec, motion: MotionSpec) -> tuple[Snippet, list[DepthMap], list[RigidPose]]:
    """Renderuje N klatek, ich głębie oraz pozy kolejnych par."""
    intrinsics = scene_intrinsics(scene)
    extrinsics = camera_extrinsics(motion)
    _check_in_front(scene, extrinsics)
    images: list[ImageGrid] = []
    depths: list[DepthMap] = []
    for pose in extrinsics:
        image, depth = _render_frame(scene, intrinsics, pose)
        images.append(ImageGrid(image))
        depths.append(depth)
    poses = [RigidPose.from_vector(step) for step in motion.steps]
    logger.debug("rendered %d frames of %dx%d", len(images), scene.width, scene.height)
    return Snippet(tuple(images), intrinsics, {"synthetic": True}), depths, poses


def apply_corruption(snippet: Snippet, corruption: Corruption, events: EngineLogger | None = None) -> Snippet:
    """Dokleja poruszający się fragment klatki 0 i zmienia jasność wybranych klatek."""
    height, width = snippet.shape
    frames = [np.array(frame.data) for frame in snippet.frames]
    masks = [np.zeros((height, width), dtype=bool) for _ in frames]

    if corruption.patch is not None:
        x, y, patch_w, patch_h = corruption.patch
        fraction = patch_w * patch_h / float(width * height)
        if fraction > corruption.max_fraction:
            raise InvalidSceneError(
                f"Fragment zajmuje {fraction:.3f} obrazu, dopuszczalne {corruption.max_fraction:.3f}."
            )
        dx, dy = corruption.displacement
        content = np.array(snippet.frames[0].data[y : y + patch_h, x : x + patch_w])
        for frame in range(snippet.size):
            shift_x, shift_y = round(frame * dx), round(frame * dy)
            left, top = x + shift_x, y + shift_y
            if left < 0 or top < 0 or left + patch_w > width or top + patch_h > height:
                raise InvalidSceneError(f"Fragment wychodzi poza obraz w klatce {frame}.")
            if shift_x == 0 and shift_y == 0:
                continue
            frames[frame][top : top + patch_h, left : left + patch_w] = content
            masks[frame][top : top + patch_h, left : left + patch_w] = True

    offsets = list(corruption.brightness)[: snippet.size]
    for frame, offset in enumerate(offsets):
        if offset:
            frames[frame] = np.clip(frames[frame] + offset, 0.0, 1.0)

    metadata = dict(snippet.metadata)
    metadata["corruption_masks"] = [ValidityMask(mask) for mask in masks]
    metadata["brightness_offsets"] = offsets + [0.0] * (snippet.size - len(offsets))
    if events is not None:
        events.log(
            component="scenes",
            event_type="corruption",
            status=EventStatus.success,
            detail=f"moving pixels per frame {[int(mask.sum()) for mask in masks]}, brightness {offsets}",
        )
    return Snippet(tuple(ImageGrid(frame) for frame in frames), snippet.intrinsics, metadata)


def render_depth_edge_pair(
    width: int = 64,
    height: int = 64,
    factor: int = 2,
    near: float = 2.0,
    far: float = 6.0,
    channels: int = 1,
) -> tuple[DepthMap, ImageGrid, DepthMap]:
    """Step-edge depth with an aligned guide image and its block-averaged low-resolution copy.

    Returns (high-resolution depth, high-resolution guide, low-resolution depth).
    """
    if width % factor or height % factor:
        raise InvalidSceneError("Rozmiar obrazu musi być wielokrotnością współczynnika.")
    low_width = width // factor
    edge = (low_width // 2) * factor
    columns = np.arange(width)
    high = np.where(columns < edge, near, far)[None, :].repeat(height, axis=0).astype(np.float64)
    guide = np.where(columns < edge, 0.2, 0.8)[None, :, None].repeat(height, axis=0).repeat(channels, axis=2)
    low = high.reshape(height // factor, factor, low_width, factor).mean(axis=(1, 3))
    return DepthMap(high), ImageGrid(guide), DepthMap(low)
