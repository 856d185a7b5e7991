from fastapi import APIRouter, Depends

from photoba.api.dependencies import engine_errors, enforce_pixel_limit, get_app_settings
from photoba.core.config import Settings
from photoba.schemas.api import SolveRequest, SolveResponse
from photoba.schemas.config import LossWeights, OptimizeConfig
from photoba.schemas.scene import TextureSpec
from photoba.services.evaluation import evaluate_prediction
from photoba.services.optimizer import solve_snippet
from photoba.services.scene_presets import ScenePresetParams, get_preset_or_raise
from photoba.services.scenes import render_snippet


router = APIRouter(prefix="/solve", tags=["optymalizacja"])


@router.post("", response_model=SolveResponse)
def solve(payload: SolveRequest, settings: Settings = Depends(get_app_settings)) -> SolveResponse:
    """Renderuje scenę syntetyczną i rozwiązuje ją od zera; zwraca metryki klatki 0."""
    enforce_pixel_limit(payload.width, payload.height, settings)
    with engine_errors():
        preset = get_preset_or_raise(payload.scene)
        scene, motion = preset.build(
            ScenePresetParams(
                width=payload.width,
                height=payload.height,
                n_frames=payload.n_frames,
                baseline_fraction=payload.baseline_fraction,
                texture=TextureSpec(frequency=payload.texture_frequency, seed=payload.seed),
            )
        )
        snippet, depths, _ = render_snippet(scene, motion)
        config = OptimizeConfig(iterations=payload.iterations, scales=payload.scales, seed=payload.seed)
        weights = LossWeights(
            ssim_mix=payload.ssim_mix,
            dc_weight=payload.dc_weight,
            smooth_weight=payload.smooth_weight,
            clip_percentile=payload.clip_q,
        )
        result = solve_snippet(snippet, config, weights)
        metrics = evaluate_prediction(result.depths[0], depths[0])
    return SolveResponse(
        metrics=metrics,
        poses=[pose.as_vector().tolist() for pose in result.poses],
        loss=result.report,
        iterations=result.iterations,
        converged=result.converged,
    )
