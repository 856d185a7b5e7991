import math

import numpy as np
import pytest

from photoba.core.errors import InvalidInputError
from photoba.services.evaluation import boundary_error
from photoba.services.geometry import DepthMap, ImageGrid
from photoba.services.scenes import render_depth_edge_pair
from photoba.services.upsampling import bilinear_upsample_depth, build_pyramid, guided_upsample_depth


def test_pyramid_of_constant_image_is_constant() -> None:
    pyramid = build_pyramid(ImageGrid(np.full((16, 16, 3), 0.3)), levels=4)
    assert len(pyramid) == 4
    assert pyramid.level(4).shape == (2, 2)
    for level in pyramid.levels:
        np.testing.assert_allclose(level.data, 0.3, atol=1e-15)


def test_pyramid_of_checkerboard_is_flat_gray() -> None:
    board = (np.indices((4, 4)).sum(axis=0) % 2).astype(np.float64)
    pyramid = build_pyramid(ImageGrid(board), levels=2)
    np.testing.assert_array_equal(pyramid.level(2).data, np.full((2, 2, 1), 0.5))


def test_pyramid_preserves_mean(rng) -> None:
    image = ImageGrid(rng.uniform(0.0, 1.0, (16, 16, 1)))
    pyramid = build_pyramid(image, levels=4)
    for level in pyramid.levels:
        assert level.data.mean() == pytest.approx(image.data.mean(), abs=1e-12)


def test_pyramid_pools_depth_over_valid_pixels() -> None:
    valid = np.ones((4, 4), dtype=bool)
    valid[0, 0] = False
    depth = DepthMap(np.where(valid, 2.0, 0.0), valid)
    pyramid = build_pyramid(ImageGrid(np.full((4, 4), 0.5)), levels=2, depth=depth)
    np.testing.assert_array_equal(pyramid.depths[1].data, np.full((2, 2), 2.0))
    assert pyramid.depths[1].valid.all()


def test_pyramid_rejects_too_small_image() -> None:
    with pytest.raises(InvalidInputError):
        build_pyramid(ImageGrid(np.zeros((4, 4))), levels=4)


def test_bilinear_preserves_constants() -> None:
    upsampled = bilinear_upsample_depth(DepthMap(np.full((5, 7), 3.5)), 3)
    assert upsampled.shape == (15, 21)
    np.testing.assert_allclose(upsampled.data, 3.5, atol=1e-12)
    assert upsampled.valid.all()


def test_bilinear_step_blends_across_the_edge() -> None:
    upsampled = bilinear_upsample_depth(DepthMap(np.array([[1.0, 1.0, 5.0, 5.0]])), 2)
    row = upsampled.data[0]
    np.testing.assert_allclose(row, [1.0, 1.0, 1.0, 2.0, 4.0, 5.0, 5.0, 5.0], atol=1e-12)
    assert np.all((row[3:5] > 1.0) & (row[3:5] < 5.0))
    # The two samples flanking the step are symmetric about the midpoint.
    assert (row[3] + row[4]) / 2 == pytest.approx(3.0)


def test_upsampling_rejects_bad_factor() -> None:
    with pytest.raises(InvalidInputError):
        bilinear_upsample_depth(DepthMap(np.ones((2, 2))), 1)


def test_guided_preserves_constants(rng) -> None:
    guide = ImageGrid(rng.uniform(0.0, 1.0, (12, 12, 3)))
    result, fallback = guided_upsample_depth(DepthMap(np.full((6, 6), 4.2)), guide, 2)
    np.testing.assert_allclose(result.data, 4.2, atol=1e-12)
    assert not fallback.flags.any()


def test_guided_with_constant_guide_is_pure_spatial_filter(rng) -> None:
    low = DepthMap(rng.uniform(1.0, 5.0, (6, 6)))
    guide = ImageGrid(np.full((12, 12), 0.4))
    ranged, _ = guided_upsample_depth(low, guide, 2, range_sigma=0.1)
    spatial, _ = guided_upsample_depth(low, guide, 2, range_sigma=math.inf)
    np.testing.assert_allclose(ranged.data, spatial.data, atol=1e-12)


def test_guided_converges_to_spatial_filter_for_wide_range_sigma(rng) -> None:
    low = DepthMap(rng.uniform(1.0, 5.0, (6, 6)))
    guide = ImageGrid(rng.uniform(0.0, 1.0, (12, 12)))
    wide, _ = guided_upsample_depth(low, guide, 2, range_sigma=1e4)
    spatial, _ = guided_upsample_depth(low, guide, 2, range_sigma=math.inf)
    np.testing.assert_allclose(wide.data, spatial.data, atol=1e-6)


@pytest.mark.parametrize("factor", [2, 4])
def test_guided_beats_bilinear_at_depth_edges(factor: int) -> None:
    high, guide, low = render_depth_edge_pair(width=64, height=32, factor=factor)
    guided, _ = guided_upsample_depth(low, guide, factor)
    bilinear = bilinear_upsample_depth(low, factor)
    assert boundary_error(guided, high) < boundary_error(bilinear, high)


def test_guided_rejects_bad_inputs() -> None:
    low = DepthMap(np.ones((4, 4)))
    with pytest.raises(InvalidInputError):
        guided_upsample_depth(low, ImageGrid(np.ones((6, 8))), 2)
    with pytest.raises(InvalidInputError):
        guided_upsample_depth(low, ImageGrid(np.ones((8, 8))), 2, range_sigma=0.0)


def test_guided_output_stays_within_input_range(rng) -> None:
    low = DepthMap(rng.uniform(1.0, 5.0, (8, 8)))
    guide = ImageGrid(rng.uniform(0.0, 1.0, (32, 32, 3)))
    result, _ = guided_upsample_depth(low, guide, 4, range_sigma=0.05)
    assert result.data.min() >= low.data.min() - 1e-12
    assert result.data.max() <= low.data.max() + 1e-12
