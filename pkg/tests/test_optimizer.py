import math
from dataclasses import replace

import numpy as np
import pytest

from photoba.core.errors import InvalidInputError, NumericalError, UsageError
from photoba.schemas.config import LossWeights, OptimizeConfig
from photoba.schemas.scene import Corruption
from photoba.services.evaluation import compute_metrics, median_scale, pose_errors
from photoba.services.geometry import DepthMap, RigidPose, Snippet, compose_poses, sample_depth, transform_depth, warp_grid
from photoba.services.logging_service import EngineLogger
from photoba.services.losses import depth_consistency_cost, snippet_objective
from photoba.services.optimizer import (
    AdamState,
    adam_step,
    disparity_from_logits,
    initial_disparity,
    logits_from_disparity,
    normalize_disparity,
    run_ablation,
    solve_snippet,
    variant_settings,
)
from photoba.services.scenes import apply_corruption

from .utils import render_preset


def test_adam_zero_gradient_keeps_params() -> None:
    params = np.array([0.5, -1.0, 2.0])
    updated, state = adam_step(params, np.zeros(3), AdamState.zeros(3))
    np.testing.assert_array_equal(updated, params)
    assert state.step == 1


def test_adam_first_update_is_hand_evaluated() -> None:
    state = AdamState.zeros(1, OptimizeConfig(lr=0.1))
    updated, _ = adam_step(np.zeros(1), np.ones(1), state)
    assert updated[0] == pytest.approx(-0.1 / (1.0 + 1e-8), abs=1e-15)
    assert updated[0] == pytest.approx(-0.0999999, abs=1e-7)


def test_adam_constant_gradient_steps_approach_lr() -> None:
    state = AdamState.zeros(2, OptimizeConfig(lr=0.01))
    params = np.zeros(2)
    for _ in range(500):
        previous = params
        params, state = adam_step(params, np.array([3.0, -0.2]), state)
    np.testing.assert_allclose(params - previous, [-0.01, 0.01], rtol=1e-6)


def test_adam_step_scale_applies_per_coordinate() -> None:
    state = replace(AdamState.zeros(2, OptimizeConfig(lr=0.1)), lr_scale=np.array([1.0, 0.1]))
    updated, _ = adam_step(np.zeros(2), np.ones(2), state)
    np.testing.assert_allclose(updated, [-0.1, -0.01], rtol=1e-7)
    with pytest.raises(InvalidInputError):
        adam_step(np.zeros(2), np.ones(2), replace(state, lr_scale=np.ones(3)))


def test_adam_rejects_non_finite_gradient() -> None:
    with pytest.raises(NumericalError) as exc:
        adam_step(np.zeros(3), np.array([0.0, np.nan, 0.0]), AdamState.zeros(3))
    assert "1" in exc.value.message
    with pytest.raises(InvalidInputError):
        adam_step(np.zeros(3), np.zeros(2), AdamState.zeros(3))


def test_normalize_disparity_examples() -> None:
    np.testing.assert_array_equal(normalize_disparity(np.full((3, 3), 0.7)), np.ones((3, 3)))
    np.testing.assert_allclose(normalize_disparity(np.array([1.0, 3.0])), [0.5, 1.5])
    values = np.random.default_rng(0).uniform(0.1, 2.0, 50)
    np.testing.assert_allclose(normalize_disparity(values * 7.5), normalize_disparity(values), rtol=1e-14)
    with pytest.raises(InvalidInputError):
        normalize_disparity(np.zeros(4))


def test_logistic_disparity_map_stays_in_bounds() -> None:
    logits = np.array([-50.0, -1.0, 0.0, 3.0, 50.0])
    disparity = disparity_from_logits(logits, 0.01, 10.0)
    assert np.all(disparity >= 0.01) and np.all(disparity <= 10.0)
    middle = initial_disparity(OptimizeConfig())
    assert middle == pytest.approx(math.sqrt(0.1))
    assert disparity_from_logits(logits_from_disparity(np.array([middle]), 0.01, 10.0), 0.01, 10.0)[0] == pytest.approx(middle)


def test_optimize_config_schedule() -> None:
    config = OptimizeConfig()
    assert config.stage_lengths() == [200, 200, 200, 1400]
    assert config.lr_at(0) == 1e-2
    assert config.lr_at(1499) == 1e-2
    assert config.lr_at(1500) == pytest.approx(1e-3)
    assert config.pose_lr_scale == 0.1
    assert OptimizeConfig(coarse_to_fine=False).stage_lengths() == [2000]
    with pytest.raises(ValueError):
        OptimizeConfig(d_min=1.0, d_max=0.5)


def test_identical_frames_return_to_identity_from_perturbed_start() -> None:
    snippet, _, _ = render_preset("fronto_plane", size=16, n_frames=2)
    static = Snippet((snippet.frames[0], snippet.frames[0]), snippet.intrinsics)
    start = [RigidPose(np.zeros(3), np.array([0.01, -0.005, 0.005]))]
    events = EngineLogger()
    result = solve_snippet(static, OptimizeConfig(iterations=300, scales=2), init_poses=start, events=events)
    assert result.iterations > 0
    assert not any(event.event_type == "degenerate_texture" for event in events.events)
    assert result.objective < result.initial_objective
    assert float(np.linalg.norm(result.poses[0].translation)) < 1e-3


def test_identical_frames_at_identity_stop_immediately() -> None:
    snippet, _, _ = render_preset("fronto_plane", size=16, n_frames=2)
    static = Snippet((snippet.frames[0], snippet.frames[0]), snippet.intrinsics)
    events = EngineLogger()
    result = solve_snippet(static, OptimizeConfig(iterations=50, scales=2), events=events)
    assert result.converged and result.iterations == 0
    assert any(event.event_type == "degenerate_texture" for event in events.events)


def test_solution_never_worse_than_start() -> None:
    snippet, _, _ = render_preset("slanted_plane", size=16, n_frames=3, baseline_fraction=0.04)
    events = EngineLogger()
    result = solve_snippet(snippet, OptimizeConfig(iterations=40, scales=2), events=events)
    assert result.objective <= result.initial_objective
    assert all(math.isfinite(value) for value in result.trace)
    assert len(result.depths) == 3 and len(result.poses) == 2
    assert result.report.total == pytest.approx(result.report.recompute_total(), rel=1e-12)
    assert np.all(result.depths[0].data >= 0.1 - 1e-12)
    stages = [event for event in events.events if event.event_type == "stage"]
    assert len(stages) == 2
    absolute = result.absolute_poses()
    assert len(absolute) == 3
    np.testing.assert_array_equal(absolute[0].as_vector(), np.zeros(6))


def test_solve_is_deterministic() -> None:
    snippet, _, _ = render_preset("slanted_plane", size=16, n_frames=2)
    config = OptimizeConfig(iterations=15, scales=2)
    first = solve_snippet(snippet, config)
    second = solve_snippet(snippet, config)
    assert first.trace == second.trace
    np.testing.assert_array_equal(first.depths[1].data, second.depths[1].data)


def test_variant_settings() -> None:
    weights = LossWeights()
    assert variant_settings("no_clip", weights)[0].clip_percentile == 100.0
    assert variant_settings("no_consistency", weights)[0].dc_weight == 0.0
    assert variant_settings("no_backward", weights) == (weights, False)
    with pytest.raises(UsageError):
        variant_settings("no_such_variant", weights)


def test_run_ablation_returns_every_variant() -> None:
    snippet, _, _ = render_preset("slanted_plane", size=16, n_frames=2)
    results = run_ablation(snippet, OptimizeConfig(iterations=5, scales=1), variants=("full", "no_backward"))
    assert set(results) == {"full", "no_backward"}


def _static_abs_rel(result, depth: DepthMap, moving: np.ndarray) -> float:
    static_gt = DepthMap(np.where(moving, 0.0, depth.data), ~moving & depth.valid)
    return compute_metrics(median_scale(result.depths[0], static_gt), static_gt).abs_rel


@pytest.mark.slow
def test_clean_slanted_plane_recovery() -> None:
    snippet, depths, poses = render_preset("slanted_plane", size=64, n_frames=3, frequency=1.0)
    result = solve_snippet(snippet)
    metrics = compute_metrics(median_scale(result.depths[0], depths[0]), depths[0])
    errors = pose_errors(result.poses, poses)
    assert metrics.abs_rel < 0.05
    assert errors["rotation_deg"] < 0.5
    assert errors["translation_direction_deg"] < 2.0


@pytest.mark.slow
def test_clip_loss_is_robust_to_moving_patch() -> None:
    snippet, depths, _ = render_preset("slanted_plane", size=64, n_frames=3, frequency=1.0)
    clean = solve_snippet(snippet)
    clean_abs_rel = compute_metrics(median_scale(clean.depths[0], depths[0]), depths[0]).abs_rel

    patch = (16, 26, 14, 14)
    corrupted = apply_corruption(snippet, Corruption(patch=patch, displacement=(3.0, 0.0)))
    moving = np.zeros((64, 64), dtype=bool)
    for mask in corrupted.metadata["corruption_masks"]:
        moving |= mask.flags
    moving[26:40, 16:30] = True

    clipped = solve_snippet(corrupted, weights=LossWeights(clip_percentile=95.0))
    unclipped = solve_snippet(corrupted, weights=LossWeights(clip_percentile=100.0))
    clipped_abs_rel = _static_abs_rel(clipped, depths[0], moving)
    assert clipped_abs_rel < _static_abs_rel(unclipped, depths[0], moving)
    assert clipped_abs_rel <= 1.5 * max(clean_abs_rel, 1e-3)


@pytest.mark.slow
def test_clip_percentile_barely_matters_on_clean_scene() -> None:
    snippet, _, _ = render_preset("slanted_plane", size=32, n_frames=3, frequency=0.5)
    clipped = solve_snippet(snippet, weights=LossWeights(clip_percentile=95.0))
    unclipped = solve_snippet(snippet, weights=LossWeights(clip_percentile=100.0))
    # Oba rozwiązania oceniane tą samą, nieobciętą funkcją celu.
    plain = LossWeights(clip_percentile=100.0)
    clipped_value = snippet_objective(snippet, clipped.poses, clipped.depths, plain).total
    unclipped_value = snippet_objective(snippet, unclipped.poses, unclipped.depths, plain).total
    assert clipped_value == pytest.approx(unclipped_value, rel=0.02)


@pytest.mark.slow
def test_depth_consistency_term_improves_geometry() -> None:
    snippet, depths, _ = render_preset("slanted_plane", size=32, n_frames=3, frequency=0.5)
    config = OptimizeConfig(iterations=800)
    with_dc = solve_snippet(snippet, config, LossWeights(dc_weight=1.0))
    without_dc = solve_snippet(snippet, config, LossWeights(dc_weight=0.0))

    def long_range_residual(result) -> float:
        pose = compose_poses(result.poses)
        coords, valid = warp_grid(result.depths[0], snippet.intrinsics, pose)
        transformed = transform_depth(result.depths[0], snippet.intrinsics, pose)
        sampled = sample_depth(result.depths[2], coords, valid)
        return depth_consistency_cost(transformed, sampled).mean()

    def abs_rel(result) -> float:
        return compute_metrics(median_scale(result.depths[0], depths[0]), depths[0]).abs_rel

    assert long_range_residual(with_dc) <= long_range_residual(without_dc)
    assert abs_rel(with_dc) <= abs_rel(without_dc)


def test_warm_start_from_ground_truth_starts_lower() -> None:
    snippet, depths, poses = render_preset("slanted_plane", size=16, n_frames=2, baseline_fraction=0.04)
    config = OptimizeConfig(iterations=2, scales=2)
    cold = solve_snippet(snippet, config)
    warm = solve_snippet(
        snippet,
        config,
        init_disparity=np.stack([depth.disparity() for depth in depths]),
        init_poses=poses,
    )
    assert warm.initial_objective < cold.initial_objective
    assert warm.objective <= warm.initial_objective
