import math

import numpy as np
import pytest

from photoba.core.errors import EmptyCostError, InvalidInputError
from photoba.services.evaluation import (
    boundary_error,
    boundary_mask,
    compute_metrics,
    evaluate_prediction,
    median_scale,
    median_scale_factor,
    pose_errors,
    rotation_error_deg,
    translation_direction_error_deg,
)
from photoba.services.geometry import DepthMap, RigidPose
from photoba.services.scenes import render_depth_edge_pair
from photoba.services.upsampling import bilinear_upsample_depth


def _depth(values) -> DepthMap:
    return DepthMap(np.asarray(values, dtype=np.float64))


def test_perfect_prediction(rng) -> None:
    gt = _depth(rng.uniform(1.0, 10.0, (8, 8)))
    metrics = compute_metrics(gt, gt)
    assert metrics.abs_rel == 0.0 and metrics.rmse == 0.0 and metrics.rmse_log == 0.0
    assert metrics.delta1 == metrics.delta2 == metrics.delta3 == 1.0
    assert metrics.count == 64


def test_doubled_prediction_misses_every_threshold(rng) -> None:
    gt = _depth(rng.uniform(1.0, 10.0, (8, 8)))
    metrics = compute_metrics(gt.scaled(2.0), gt)
    assert metrics.abs_rel == pytest.approx(1.0, abs=1e-12)
    assert metrics.delta1 == metrics.delta2 == metrics.delta3 == 0.0


def test_constant_offset_prediction() -> None:
    metrics = compute_metrics(_depth(np.full((3, 3), 5.0)), _depth(np.full((3, 3), 4.0)))
    assert metrics.rmse == pytest.approx(1.0, abs=1e-12)
    assert metrics.rmse_log == pytest.approx(math.log(1.25), abs=1e-12)
    assert metrics.abs_rel == pytest.approx(0.25, abs=1e-12)
    assert metrics.sq_rel == pytest.approx(0.25, abs=1e-12)
    # A ratio of exactly 1.25 still counts as within the first threshold.
    assert metrics.delta1 == 1.0


def test_metrics_ignore_invalid_and_capped_pixels() -> None:
    gt_values = np.array([[4.0, 4.0, 100.0]])
    gt = DepthMap(gt_values, np.array([[True, False, True]]))
    pred = _depth([[4.0, 50.0, 1.0]])
    metrics = compute_metrics(pred, gt, cap=80.0)
    assert metrics.count == 1 and metrics.abs_rel == 0.0
    with pytest.raises(EmptyCostError):
        compute_metrics(pred, DepthMap(gt_values, np.zeros((1, 3), dtype=bool)))
    with pytest.raises(InvalidInputError):
        compute_metrics(pred, gt, cap=0.0)


def test_metrics_are_invariant_under_pixel_permutation(rng) -> None:
    gt = rng.uniform(1.0, 10.0, 64)
    pred = gt * rng.uniform(0.7, 1.4, 64)
    order = rng.permutation(64)
    first = compute_metrics(_depth(pred.reshape(8, 8)), _depth(gt.reshape(8, 8)))
    second = compute_metrics(_depth(pred[order].reshape(4, 16)), _depth(gt[order].reshape(4, 16)))
    for name in ("abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3"):
        assert getattr(first, name) == pytest.approx(getattr(second, name), rel=1e-12)


def test_median_scaling(rng) -> None:
    gt = _depth(rng.uniform(1.0, 10.0, (6, 6)))
    assert median_scale_factor(gt.scaled(0.5), gt) == pytest.approx(2.0)
    np.testing.assert_allclose(median_scale(gt.scaled(0.5), gt).data, gt.data, rtol=1e-12)
    assert median_scale_factor(gt, gt) == 1.0
    with pytest.raises(InvalidInputError):
        median_scale_factor(_depth(np.zeros((6, 6))), gt)


def test_evaluate_prediction_reports_both_variants(rng) -> None:
    gt = _depth(rng.uniform(1.0, 10.0, (6, 6)))
    report = evaluate_prediction(gt.scaled(2.0), gt)
    assert report.scale_factor == pytest.approx(0.5)
    assert report.unscaled.abs_rel == pytest.approx(1.0)
    assert report.scaled.abs_rel == pytest.approx(0.0, abs=1e-12)
    assert "abs_rel" in report.as_table()


def test_boundary_mask_marks_both_sides_of_a_jump() -> None:
    gt = _depth([[1.0, 1.0, 5.0, 5.0]] * 3)
    mask = boundary_mask(gt, 0.5)
    np.testing.assert_array_equal(mask, np.array([[False, True, True, False]] * 3))


def test_boundary_error_needs_edges() -> None:
    smooth = _depth(np.linspace(1.0, 2.0, 64).reshape(8, 8))
    with pytest.raises(EmptyCostError):
        boundary_error(smooth, smooth)


def test_boundary_error_of_bilinear_step_edge() -> None:
    high, _, low = render_depth_edge_pair(width=32, height=16, factor=2, near=2.0, far=6.0)
    upsampled = bilinear_upsample_depth(low, 2)
    # Both edge columns sit a quarter of a low-resolution pixel into the blend.
    assert upsampled.data[0, 15] == pytest.approx(3.0)
    assert upsampled.data[0, 16] == pytest.approx(5.0)
    error = boundary_error(upsampled, high)
    assert error > 0.0
    assert error == pytest.approx(0.25 * (6.0 - 2.0), abs=1e-12)


def test_pose_errors() -> None:
    truth = RigidPose.from_vector([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    rotated = RigidPose.from_vector([0.0, 0.0, 0.1, 3.0, 0.0, 0.0])
    assert rotation_error_deg(rotated, truth) == pytest.approx(math.degrees(0.1), abs=1e-9)
    assert translation_direction_error_deg(rotated, truth) == pytest.approx(0.0, abs=1e-6)
    sideways = RigidPose.from_vector([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    assert translation_direction_error_deg(sideways, truth) == pytest.approx(90.0)
    errors = pose_errors([rotated, sideways], [truth, truth])
    assert errors["rotation_deg"] == pytest.approx(math.degrees(0.1), abs=1e-9)
    assert errors["translation_direction_deg"] == pytest.approx(90.0)
    with pytest.raises(InvalidInputError):
        translation_direction_error_deg(RigidPose.identity(), truth)
    with pytest.raises(InvalidInputError):
        pose_errors([truth], [])
