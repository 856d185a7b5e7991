"""Depth and pose error metrics."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from photoba.core.errors import EmptyCostError, InvalidInputError
from photoba.schemas.report import DepthMetrics, EvaluationReport
from photoba.services.geometry import DepthMap, RigidPose, ensure_same_shape

MIN_DEPTH = 1e-3


def _joint_mask(pred: DepthMap, gt: DepthMap, cap: float | None = None) -> np.ndarray:
    ensure_same_shape(pred, gt, "Rozmiary predykcji i ground truth")
    mask = pred.valid & gt.valid
    if cap is not None:
        mask &= gt.data <= cap
    if not mask.any():
        raise EmptyCostError("Predykcja i ground truth nie mają wspólnych poprawnych pikseli.")
    return mask


def compute_metrics(pred: DepthMap, gt: DepthMap, cap: float = 80.0) -> DepthMetrics:
    if not cap > 0:
        raise InvalidInputError("Próg głębokości musi być dodatni.")
    mask = _joint_mask(pred, gt, cap)
    p = np.clip(pred.data[mask], MIN_DEPTH, cap)
    g = gt.data[mask]
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff * diff / g)),
        rmse=float(np.sqrt(np.mean(diff * diff))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio <= 1.25)),
        delta2=float(np.mean(ratio <= 1.25**2)),
        delta3=float(np.mean(ratio <= 1.25**3)),
        count=int(mask.sum()),
    )


def median_scale_factor(pred: DepthMap, gt: DepthMap) -> float:
    mask = _joint_mask(pred, gt)
    pred_median = float(np.median(pred.data[mask]))
    gt_median = float(np.median(gt.data[mask]))
    if pred_median == 0 or gt_median == 0:
        raise InvalidInputError("Mediana głębokości jest zerowa.")
    return gt_median / pred_median


def median_scale(pred: DepthMap, gt: DepthMap) -> DepthMap:
    """pred * median(gt) / median(pred) po pikselach poprawnych w obu mapach."""
    return pred.scaled(median_scale_factor(pred, gt))


def boundary_mask(gt: DepthMap, edge_threshold: float) -> np.ndarray:
    """Piksele sąsiadujące z nieciągłością głębi |skok| > edge_threshold."""
    data = gt.data
    valid = gt.valid
    mask = np.zeros(gt.shape, dtype=bool)
    jump_x = (np.abs(data[:, 1:] - data[:, :-1]) > edge_threshold) & valid[:, 1:] & valid[:, :-1]
    jump_y = (np.abs(data[1:, :] - data[:-1, :]) > edge_threshold) & valid[1:, :] & valid[:-1, :]
    mask[:, 1:] |= jump_x
    mask[:, :-1] |= jump_x
    mask[1:, :] |= jump_y
    mask[:-1, :] |= jump_y
    return mask


def boundary_error(pred: DepthMap, gt: DepthMap, edge_threshold: float = 0.5) -> float:
    """RMSE na pikselach leżących przy nieciągłościach głębi ground truth."""
    mask = _joint_mask(pred, gt) & boundary_mask(gt, edge_threshold)
    if not mask.any():
        raise EmptyCostError(f"Brak nieciągłości głębi większych niż {edge_threshold}.")
    diff = pred.data[mask] - gt.data[mask]
    return float(np.sqrt(np.mean(diff * diff)))


def evaluate_prediction(pred: DepthMap, gt: DepthMap, cap: float = 80.0) -> EvaluationReport:
    factor = median_scale_factor(pred, gt)
    return EvaluationReport(
        unscaled=compute_metrics(pred, gt, cap),
        scaled=compute_metrics(pred.scaled(factor), gt, cap),
        scale_factor=factor,
        cap=cap,
    )


def rotation_error_deg(estimate: RigidPose, truth: RigidPose) -> float:
    relative = truth.as_rotation().inv() * estimate.as_rotation()
    return float(np.degrees(relative.magnitude()))


def translation_direction_error_deg(estimate: RigidPose, truth: RigidPose) -> float:
    """Kąt między kierunkami translacji; skala monokularna nie ma znaczenia."""
    a = estimate.translation
    b = truth.translation
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0 and norm_b == 0:
        return 0.0
    if norm_a == 0 or norm_b == 0:
        raise InvalidInputError("Kierunek translacji jest nieokreślony dla zerowego przesunięcia.")
    cosine = float(np.clip(a @ b / (norm_a * norm_b), -1.0, 1.0))
    return math.degrees(math.acos(cosine))


def pose_errors(estimates: Sequence[RigidPose], truths: Sequence[RigidPose]) -> dict[str, float]:
    """Maksymalne błędy obrotu i kierunku translacji w stopniach."""
    if len(estimates) != len(truths) or not estimates:
        raise InvalidInputError("Listy póz muszą być niepuste i równej długości.")
    rotation = max(rotation_error_deg(a, b) for a, b in zip(estimates, truths))
    direction = max(translation_direction_error_deg(a, b) for a, b in zip(estimates, truths))
    return {"rotation_deg": rotation, "translation_direction_deg": direction}
