"""Raporty zwracane przez silnik: funkcja celu, metryki głębi, test gradientu."""

from __future__ import annotations

from pydantic import BaseModel, Field

TERM_KEYS = (
    "reconstruction_fwd",
    "reconstruction_bwd",
    "consistency_fwd",
    "consistency_bwd",
)


class ScaleReport(BaseModel):
    """Składniki funkcji celu na jednej skali piramidy."""

    scale: int = Field(ge=1)
    weight: float
    reconstruction_fwd: float = 0.0
    reconstruction_bwd: float = 0.0
    consistency_fwd: float = 0.0
    consistency_bwd: float = 0.0
    smoothness: float = 0.0
    thresholds: dict[str, float | None] = Field(default_factory=dict)
    valid_counts: dict[str, int] = Field(default_factory=dict)
    empty_terms: list[str] = Field(default_factory=list)

    def combined(self, dc_weight: float, smooth_weight: float) -> float:
        reconstruction = self.reconstruction_fwd + self.reconstruction_bwd
        consistency = self.consistency_fwd + self.consistency_bwd
        return reconstruction + dc_weight * consistency + smooth_weight * self.smoothness


class LossReport(BaseModel):
    scales: list[ScaleReport] = Field(default_factory=list)
    dc_weight: float
    smooth_weight: float
    total: float

    def recompute_total(self) -> float:
        """Suma ważona składników liczona od nowa z wartości w raporcie."""
        total = 0.0
        for scale in self.scales:
            total += scale.weight * scale.combined(self.dc_weight, self.smooth_weight)
        return total

    def threshold_map(self) -> dict[str, float]:
        """Progi obcinania w postaci przyjmowanej przez `ObjectiveOptions.frozen_thresholds`."""
        return {
            f"s{scale.scale}.{key}": value
            for scale in self.scales
            for key, value in scale.thresholds.items()
            if value is not None
        }

    def smoothness_total(self) -> float:
        return sum(scale.weight * scale.smoothness for scale in self.scales)


class DepthMetrics(BaseModel):
    abs_rel: float = Field(ge=0.0)
    sq_rel: float = Field(ge=0.0)
    rmse: float = Field(ge=0.0)
    rmse_log: float = Field(ge=0.0)
    delta1: float = Field(ge=0.0, le=1.0)
    delta2: float = Field(ge=0.0, le=1.0)
    delta3: float = Field(ge=0.0, le=1.0)
    count: int = Field(ge=1, description="Number of pixels that entered the metrics.")

    def as_table(self, prefix: str = "") -> str:
        """Płaska tabela `klucz = wartość`, po jednym wierszu na metrykę."""
        rows = []
        for key in ("abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3"):
            rows.append(f"{prefix}{key} = {getattr(self, key):.3f}")
        rows.append(f"{prefix}count = {self.count}")
        return "\n".join(rows)


class EvaluationReport(BaseModel):
    unscaled: DepthMetrics
    scaled: DepthMetrics
    scale_factor: float
    cap: float

    def as_table(self) -> str:
        return "\n".join(
            [
                self.unscaled.as_table(),
                f"scale_factor = {self.scale_factor:.6f}",
                self.scaled.as_table(prefix="scaled_"),
            ]
        )


class GradCheckReport(BaseModel):
    seed: int
    step: float
    tolerance: float
    samples: int
    max_rel_error: float
    per_class: dict[str, float]
    worst_index: int | None = None

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance
