"""Schematy parametrów przebiegu: wagi funkcji celu, optymalizator, plik konfiguracyjny."""

from __future__ import annotations

import math
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from photoba.schemas.scene import Corruption, MotionSpec, SceneSpec, TextureSpec


class LossWeights(BaseModel):
    """Wagi składników funkcji celu."""

    model_config = ConfigDict(frozen=True)

    ssim_mix: float = Field(default=0.85, ge=0.0, le=1.0, description="Udział SSIM w koszcie fotometrycznym.")
    dc_weight: float = Field(default=1.0, ge=0.0, description="Waga spójności głębi między klatkami.")
    smooth_weight: float = Field(default=0.01, ge=0.0, description="Waga gładkości dysparycji.")
    clip_percentile: float = Field(default=95.0, gt=0.0, le=100.0, description="Percentyl obcinania kosztów.")


class OptimizeConfig(BaseModel):
    """Ustawienia optymalizacji pojedynczej sekwencji."""

    model_config = ConfigDict(frozen=True)

    iterations: int = Field(default=2000, gt=0)
    lr: float = Field(default=1e-2, gt=0.0)
    lr_drop_factor: float = Field(default=0.1, gt=0.0, le=1.0)
    lr_drop_at: float = Field(default=0.75, gt=0.0, le=1.0, description="Ułamek iteracji, po którym lr spada.")
    pose_lr_scale: float = Field(default=0.1, gt=0.0, le=1.0, description="Mnożnik kroku dla współrzędnych póz.")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    tolerance: float = Field(default=1e-7, ge=0.0, description="Próg względnego spadku funkcji celu.")
    patience: int = Field(default=50, ge=1)
    coarse_to_fine: bool = True
    warmup_fraction: float = Field(default=0.3, ge=0.0, lt=1.0, description="Część iteracji na etapy zgrubne.")
    scales: int = Field(default=4, ge=1, le=8)
    d_min: float = Field(default=0.01, gt=0.0)
    d_max: float = Field(default=10.0, gt=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_bounds(self) -> "OptimizeConfig":
        if not self.d_min < self.d_max:
            raise ValueError("Wymagane 0 < d_min < d_max.")
        return self

    def lr_at(self, iteration: int) -> float:
        """Learning rate for a zero-based iteration."""
        if iteration >= math.floor(self.lr_drop_at * self.iterations):
            return self.lr * self.lr_drop_factor
        return self.lr

    def stage_lengths(self) -> list[int]:
        """Długości etapów: etap k włącza k najgrubszych skal, ostatni wszystkie."""
        if not self.coarse_to_fine or self.scales == 1:
            return [self.iterations]
        warm_total = int(self.warmup_fraction * self.iterations)
        per_stage = warm_total // (self.scales - 1)
        lengths = [per_stage] * (self.scales - 1)
        lengths.append(self.iterations - per_stage * (self.scales - 1))
        return lengths


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class RunConfig(BaseModel):
    """Płaska konfiguracja `klucz = wartość` wspólna dla wszystkich poleceń."""

    model_config = ConfigDict(extra="forbid")

    # wspólne
    seed: int = 0
    out: str | None = None
    # funkcja celu
    scales: int = Field(default=4, ge=1, le=8)
    clip_q: float = Field(default=95.0, gt=0.0, le=100.0)
    ssim_mix: float = Field(default=0.85, ge=0.0, le=1.0)
    dc_weight: float = Field(default=1.0, ge=0.0)
    smooth_weight: float = Field(default=0.01, ge=0.0)
    use_backward: bool = True
    # optymalizator
    iterations: int = Field(default=2000, gt=0)
    lr: float = Field(default=1e-2, gt=0.0)
    lr_drop_factor: float = Field(default=0.1, gt=0.0, le=1.0)
    lr_drop_at: float = Field(default=0.75, gt=0.0, le=1.0)
    pose_lr_scale: float = Field(default=0.1, gt=0.0, le=1.0)
    tolerance: float = Field(default=1e-7, ge=0.0)
    patience: int = Field(default=50, ge=1)
    coarse_to_fine: bool = True
    warmup_fraction: float = Field(default=0.3, ge=0.0, lt=1.0)
    d_min: float = Field(default=0.01, gt=0.0)
    d_max: float = Field(default=10.0, gt=0.0)
    # wejście/wyjście
    frames: list[str] = Field(default_factory=list)
    intrinsics: str | None = None
    pred: str | None = None
    gt: str | None = None
    cap: float = Field(default=80.0, gt=0.0)
    # scena syntetyczna
    scene: str = "slanted_plane"
    width: int = Field(default=64, ge=8)
    height: int = Field(default=64, ge=8)
    channels: int = 3
    n_frames: int = Field(default=3, ge=2)
    scene_depth: float = Field(default=4.0, gt=0.0)
    baseline_fraction: float = Field(default=0.02, ge=0.0)
    rotation_deg: float = 0.0
    texture_frequency: float = Field(default=1.0, gt=0.0)
    texture_contrast: float = Field(default=0.4, ge=0.0, le=0.5)
    texture_seed: int = 0
    # zaburzenia
    patch: list[int] = Field(default_factory=list, description="x, y, szerokość, wysokość")
    patch_fraction: float = Field(default=0.0, ge=0.0, le=1.0, description="Alternatywa dla patch: pole względne.")
    patch_displacement: list[float] = Field(default_factory=lambda: [0.0, 0.0])
    brightness: list[float] = Field(default_factory=list)
    max_patch_fraction: float = Field(default=0.1, gt=0.0, le=1.0)
    # powiększanie
    input: str | None = None
    guide: str | None = None
    factor: int = Field(default=2, ge=2)
    method: Literal["bilinear", "guided"] = "guided"
    range_sigma: float = Field(default=0.1, gt=0.0)
    spatial_sigma: float | None = Field(default=None, gt=0.0)
    # test gradientu
    samples: int | None = Field(default=None, ge=1, le=512)
    snippets: int | None = Field(default=None, ge=1)
    # ablacja
    variants: list[str] = Field(default_factory=lambda: ["full", "no_clip", "no_consistency", "no_backward"])

    @field_validator("frames", "variants", "patch", "patch_displacement", "brightness", mode="before")
    @classmethod
    def _comma_lists(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("channels")
    @classmethod
    def _channel_count(cls, value: int) -> int:
        if value not in (1, 3):
            raise ValueError("channels musi wynosić 1 lub 3.")
        return value

    @model_validator(mode="after")
    def _check_ranges(self) -> "RunConfig":
        if not self.d_min < self.d_max:
            raise ValueError("Wymagane 0 < d_min < d_max.")
        if self.patch and len(self.patch) != 4:
            raise ValueError("patch wymaga czterech liczb: x, y, szerokość, wysokość.")
        if len(self.patch_displacement) != 2:
            raise ValueError("patch_displacement wymaga dwóch liczb.")
        return self

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            ssim_mix=self.ssim_mix,
            dc_weight=self.dc_weight,
            smooth_weight=self.smooth_weight,
            clip_percentile=self.clip_q,
        )

    def optimize_config(self) -> OptimizeConfig:
        return OptimizeConfig(
            iterations=self.iterations,
            lr=self.lr,
            lr_drop_factor=self.lr_drop_factor,
            lr_drop_at=self.lr_drop_at,
            pose_lr_scale=self.pose_lr_scale,
            tolerance=self.tolerance,
            patience=self.patience,
            coarse_to_fine=self.coarse_to_fine,
            warmup_fraction=self.warmup_fraction,
            scales=self.scales,
            d_min=self.d_min,
            d_max=self.d_max,
            seed=self.seed,
        )

    def scene_spec(self) -> SceneSpec:
        return self._preset_pair()[0]

    def motion_spec(self) -> MotionSpec:
        return self._preset_pair()[1]

    def _preset_pair(self) -> tuple[SceneSpec, MotionSpec]:
        from photoba.services.scene_presets import ScenePresetParams, get_preset_or_raise

        preset = get_preset_or_raise(self.scene)
        params = ScenePresetParams(
            width=self.width,
            height=self.height,
            channels=self.channels,
            n_frames=self.n_frames,
            depth=self.scene_depth,
            baseline_fraction=self.baseline_fraction,
            rotation_deg=self.rotation_deg,
            texture=TextureSpec(
                frequency=self.texture_frequency,
                contrast=self.texture_contrast,
                seed=self.texture_seed,
            ),
        )
        return preset.build(params)

    def corruption(self) -> Corruption | None:
        """Zaburzenie opisane w konfiguracji albo None, gdy go brak."""
        patch = tuple(self.patch) if self.patch else None
        if patch is None and self.patch_fraction > 0:
            side_w = max(1, round(self.width * math.sqrt(self.patch_fraction)))
            side_h = max(1, round(self.height * math.sqrt(self.patch_fraction)))
            patch = (self.width // 4, (self.height - side_h) // 2, side_w, side_h)
        if patch is None and not any(self.brightness):
            return None
        return Corruption(
            patch=patch,
            displacement=(self.patch_displacement[0], self.patch_displacement[1]),
            brightness=list(self.brightness),
            max_fraction=self.max_patch_fraction,
        )
