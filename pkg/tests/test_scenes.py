import math

import numpy as np
import pytest

from photoba.core.errors import InvalidSceneError, UsageError
from photoba.schemas.scene import Corruption, MotionSpec, PlaneSurface, SceneSpec, TextureSpec
from photoba.services.scene_presets import SCENE_PRESETS, ScenePresetParams, get_preset_or_raise
from photoba.services.scenes import (
    apply_corruption,
    camera_extrinsics,
    render_depth_edge_pair,
    render_snippet,
    texture_values,
)

from .utils import render_preset


def _plane_scene(size: int = 32, depth: float = 4.0) -> SceneSpec:
    return SceneSpec(
        width=size,
        height=size,
        fx=float(size),
        fy=float(size),
        surfaces=[PlaneSurface(point=(0.0, 0.0, depth), normal=(0.0, 0.0, 1.0))],
    )


def test_zero_motion_renders_identical_frames() -> None:
    snippet, depths, poses = render_snippet(_plane_scene(), MotionSpec.constant((0.0,) * 6, 3))
    for frame in snippet.frames[1:]:
        np.testing.assert_array_equal(frame.data, snippet.frames[0].data)
    for depth in depths:
        np.testing.assert_array_equal(depth.data, np.full((32, 32), 4.0))
    for pose in poses:
        np.testing.assert_array_equal(pose.as_vector(), np.zeros(6))


def test_fronto_plane_shifts_by_focal_times_baseline_over_depth() -> None:
    # fx = 32, b = 0.5, z = 4, so the image moves by 4 pixels.
    snippet, _, poses = render_preset("fronto_plane", size=32, n_frames=2, baseline_fraction=0.125)
    assert poses[0].translation[0] == pytest.approx(-0.5)
    first, second = snippet.frames[0].data, snippet.frames[1].data
    np.testing.assert_allclose(second[:, :28], first[:, 4:], atol=1e-12)


def test_slanted_plane_depth_matches_closed_form() -> None:
    snippet, depths, _ = render_preset("slanted_plane", size=32, n_frames=2)
    intrinsics = snippet.intrinsics
    slant = math.radians(30.0)
    columns = (np.arange(32) - intrinsics.cx) / intrinsics.fx
    expected = 4.0 * math.cos(slant) / (math.sin(slant) * columns + math.cos(slant))
    np.testing.assert_allclose(depths[0].data, np.broadcast_to(expected, (32, 32)), atol=1e-10)
    assert depths[0].valid.all()


def test_box_on_plane_centre_sees_box_front() -> None:
    _, depths, _ = render_preset("box_on_plane", size=64, n_frames=2)
    assert depths[0].data[32, 32] == pytest.approx(3.0, abs=1e-12)
    assert depths[0].data[0, 0] == pytest.approx(5.0, abs=1e-12)


def test_rendering_is_deterministic() -> None:
    first, first_depths, _ = render_preset("box_on_plane", size=32, seed=5)
    second, second_depths, _ = render_preset("box_on_plane", size=32, seed=5)
    for ours, theirs in zip(first.frames, second.frames):
        np.testing.assert_array_equal(ours.data, theirs.data)
    np.testing.assert_array_equal(first_depths[2].data, second_depths[2].data)
    assert first.metadata == {"synthetic": True}


def test_texture_values_stay_in_unit_range() -> None:
    a, b = np.meshgrid(np.linspace(-5, 5, 40), np.linspace(-5, 5, 40))
    values = texture_values(TextureSpec(frequency=2.0, contrast=0.5), a, b, 3)
    assert values.shape == (40, 40, 3)
    assert values.min() >= 0.0 and values.max() <= 1.0
    assert values.std() > 0.01


def test_camera_extrinsics_accumulate_steps() -> None:
    extrinsics = camera_extrinsics(MotionSpec.constant((0.0, 0.0, 0.0, -0.1, 0.0, 0.0), 4))
    assert len(extrinsics) == 4
    np.testing.assert_allclose(extrinsics[3].translation, [-0.3, 0.0, 0.0], atol=1e-15)


def test_surface_behind_camera_is_rejected() -> None:
    scene = _plane_scene(depth=0.05)
    with pytest.raises(InvalidSceneError):
        render_snippet(scene, MotionSpec.constant((0.0, 0.0, 0.0, 0.0, 0.0, -0.1), 2))


def test_empty_corruption_leaves_frames_unchanged() -> None:
    snippet, _, _ = render_preset("slanted_plane", size=32)
    corrupted = apply_corruption(snippet, Corruption(patch=(4, 4, 6, 6), displacement=(0.0, 0.0), brightness=[0.0, 0.0]))
    for ours, theirs in zip(corrupted.frames, snippet.frames):
        np.testing.assert_array_equal(ours.data, theirs.data)
    assert all(not mask.flags.any() for mask in corrupted.metadata["corruption_masks"])


def test_moving_patch_changes_only_masked_pixels() -> None:
    snippet, _, _ = render_preset("slanted_plane", size=64)
    patch = (10, 20, 14, 14)
    assert 14 * 14 / (64 * 64) < 0.05
    corrupted = apply_corruption(snippet, Corruption(patch=patch, displacement=(3.0, 0.0)))
    masks = corrupted.metadata["corruption_masks"]
    content = snippet.frames[0].data[20:34, 10:24]
    assert not masks[0].flags.any()
    for frame in (1, 2):
        flags = masks[frame].flags
        assert int(flags.sum()) == 14 * 14
        np.testing.assert_array_equal(corrupted.frames[frame].data[~flags], snippet.frames[frame].data[~flags])
        left = 10 + 3 * frame
        np.testing.assert_array_equal(corrupted.frames[frame].data[20:34, left : left + 14], content)


def test_brightness_offset_raises_mean_by_at_most_offset() -> None:
    snippet, _, _ = render_preset("fronto_plane", size=32, n_frames=2)
    corrupted = apply_corruption(snippet, Corruption(brightness=[0.0, 0.1]))
    np.testing.assert_array_equal(corrupted.frames[0].data, snippet.frames[0].data)
    increase = corrupted.frames[1].data.mean() - snippet.frames[1].data.mean()
    assert 0.0 < increase <= 0.1 + 1e-12
    assert corrupted.metadata["brightness_offsets"] == [0.0, 0.1]


def test_corruption_errors() -> None:
    snippet, _, _ = render_preset("fronto_plane", size=32)
    with pytest.raises(InvalidSceneError):
        apply_corruption(snippet, Corruption(patch=(0, 0, 16, 16)))
    with pytest.raises(InvalidSceneError):
        apply_corruption(snippet, Corruption(patch=(26, 0, 4, 4), displacement=(3.0, 0.0)))
    with pytest.raises(ValueError):
        Corruption(patch=(0, 0, 0, 4))


def test_depth_edge_pair_layout() -> None:
    high, guide, low = render_depth_edge_pair(width=64, height=32, factor=2, near=2.0, far=6.0)
    assert high.data.shape == (32, 64) and guide.data.shape == (32, 64, 1) and low.data.shape == (16, 32)
    np.testing.assert_array_equal(high.data[:, 31], np.full(32, 2.0))
    np.testing.assert_array_equal(high.data[:, 32], np.full(32, 6.0))
    assert set(np.unique(low.data).tolist()) == {2.0, 6.0}
    assert set(np.unique(guide.data).tolist()) == {0.2, 0.8}
    with pytest.raises(InvalidSceneError):
        render_depth_edge_pair(width=64, height=64, factor=3)


def test_presets_build_valid_scenes() -> None:
    params = ScenePresetParams(width=16, height=16, n_frames=2)
    for slug in SCENE_PRESETS:
        scene, motion = get_preset_or_raise(slug).build(params)
        assert scene.width == 16 and motion.n_frames == 2
    with pytest.raises(UsageError):
        get_preset_or_raise("no_such_scene")
