"""Request and response bodies of the HTTP surface."""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, Field, field_validator

from photoba.schemas.report import EvaluationReport, LossReport

DepthRows = list[list[float | None]]


def _finite_rows(rows: DepthRows) -> list[list[float]]:
    width = {len(row) for row in rows}
    if not rows or len(width) != 1 or 0 in width:
        raise ValueError("Mapa musi być niepustą prostokątną tablicą wierszy.")
    return [[math.nan if value is None else float(value) for value in row] for row in rows]


class PresetResponse(BaseModel):
    slug: str
    name: str
    description: str
    defaults: dict[str, float | int]


class EvaluateRequest(BaseModel):
    pred: DepthRows
    gt: DepthRows
    cap: float = Field(default=80.0, gt=0.0)

    @field_validator("pred", "gt")
    @classmethod
    def _rectangular(cls, rows: DepthRows) -> list[list[float]]:
        return _finite_rows(rows)


class UpsampleRequest(BaseModel):
    depth: DepthRows
    guide: list[list[float]] | None = Field(default=None, description="Grayscale guide in [0, 1] at output size.")
    factor: int = Field(default=2, ge=2, le=8)
    method: Literal["bilinear", "guided"] = "guided"
    range_sigma: float = Field(default=0.1, gt=0.0)
    spatial_sigma: float | None = Field(default=None, gt=0.0)

    @field_validator("depth")
    @classmethod
    def _rectangular(cls, rows: DepthRows) -> list[list[float]]:
        return _finite_rows(rows)


class UpsampleResponse(BaseModel):
    width: int
    height: int
    depth: DepthRows
    fallback_pixels: int


class SolveRequest(BaseModel):
    scene: str = "fronto_plane"
    width: int = Field(default=32, ge=8)
    height: int = Field(default=32, ge=8)
    n_frames: int = Field(default=3, ge=2, le=5)
    iterations: int = Field(default=200, gt=0, le=2000)
    scales: int = Field(default=3, ge=1, le=4)
    seed: int = 0
    clip_q: float = Field(default=95.0, gt=0.0, le=100.0)
    ssim_mix: float = Field(default=0.85, ge=0.0, le=1.0)
    dc_weight: float = Field(default=1.0, ge=0.0)
    smooth_weight: float = Field(default=0.01, ge=0.0)
    baseline_fraction: float = Field(default=0.02, ge=0.0)
    texture_frequency: float = Field(default=0.5, gt=0.0)


class SolveResponse(BaseModel):
    metrics: EvaluationReport
    poses: list[list[float]]
    loss: LossReport
    iterations: int
    converged: bool
