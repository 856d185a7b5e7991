import numpy as np
from fastapi import APIRouter, Depends

from photoba.api.dependencies import engine_errors, enforce_pixel_limit, get_app_settings
from photoba.core.config import Settings
from photoba.schemas.api import DepthRows, EvaluateRequest
from photoba.schemas.report import EvaluationReport
from photoba.services.evaluation import evaluate_prediction
from photoba.services.geometry import DepthMap

router = APIRouter(tags=["głębia"])


def depth_from_rows(rows: DepthRows) -> DepthMap:
    data = np.array(rows, dtype=np.float64)
    valid = np.isfinite(data) & (data > 0)
    return DepthMap(np.where(valid, data, 0.0), valid)


def rows_from_depth(depth: DepthMap) -> DepthRows:
    return [[None if np.isnan(value) else float(value) for value in row] for row in depth.masked()]


@router.post("/evaluate", response_model=EvaluationReport)
def evaluate(payload: EvaluateRequest, settings: Settings = Depends(get_app_settings)) -> EvaluationReport:
    """Metryki głębi bez skalowania i po skalowaniu medianą."""
    enforce_pixel_limit(len(payload.gt[0]), len(payload.gt), settings)
    with engine_errors():
        return evaluate_prediction(depth_from_rows(payload.pred), depth_from_rows(payload.gt), payload.cap)
