import numpy as np
from fastapi import APIRouter, Depends

from photoba.api.dependencies import engine_errors, enforce_pixel_limit, get_app_settings
from photoba.api.routes.evaluation import depth_from_rows, rows_from_depth
from photoba.core.config import Settings
from photoba.core.errors import InvalidInputError
from photoba.schemas.api import UpsampleRequest, UpsampleResponse
from photoba.services.geometry import ImageGrid
from photoba.services.upsampling import bilinear_upsample_depth, guided_upsample_depth

router = APIRouter(tags=["głębia"])


@router.post("/upsample", response_model=UpsampleResponse)
def upsample(payload: UpsampleRequest, settings: Settings = Depends(get_app_settings)) -> UpsampleResponse:
    """Interpolacja dwuliniowa albo prowadzona obrazem w wysokiej rozdzielczości."""
    enforce_pixel_limit(len(payload.depth[0]) * payload.factor, len(payload.depth) * payload.factor, settings)
    with engine_errors():
        low = depth_from_rows(payload.depth)
        if payload.method == "guided":
            if payload.guide is None:
                raise InvalidInputError("Metoda guided wymaga obrazu guide.")
            high, fallback = guided_upsample_depth(
                low,
                ImageGrid(np.array(payload.guide, dtype=np.float64)),
                payload.factor,
                payload.range_sigma,
                payload.spatial_sigma,
            )
            fallback_pixels = fallback.count()
        else:
            high = bilinear_upsample_depth(low, payload.factor)
            fallback_pixels = 0
    return UpsampleResponse(width=high.width, height=high.height, depth=rows_from_depth(high), fallback_pixels=fallback_pixels)
