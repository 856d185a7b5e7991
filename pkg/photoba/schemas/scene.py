"""Opis scen syntetycznych: powierzchnie, tekstury, ruch kamery i zaburzenia."""

from __future__ import annotations

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

Vector3 = tuple[float, float, float]
PoseVector = tuple[float, float, float, float, float, float]


class TextureSpec(BaseModel):
    """Tekstura pasmowo ograniczona: suma kilku sinusoid na płaszczyźnie powierzchni."""

    model_config = ConfigDict(frozen=True)

    frequency: float = Field(default=1.0, gt=0.0, description="Cycles per scene unit.")
    contrast: float = Field(default=0.4, ge=0.0, le=0.5)
    seed: int = 0
    components: int = Field(default=4, ge=1, le=16)


class PlaneSurface(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["plane"] = "plane"
    point: Vector3
    normal: Vector3
    texture: TextureSpec = Field(default_factory=TextureSpec)
    half_extent: float | None = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check_normal(self) -> "PlaneSurface":
        if sum(component * component for component in self.normal) == 0:
            raise ValueError("Wektor normalny płaszczyzny nie może być zerowy.")
        return self


class BoxSurface(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["box"] = "box"
    min_corner: Vector3
    max_corner: Vector3
    texture: TextureSpec = Field(default_factory=TextureSpec)

    @model_validator(mode="after")
    def _check_corners(self) -> "BoxSurface":
        if any(low >= high for low, high in zip(self.min_corner, self.max_corner)):
            raise ValueError("min_corner musi być ściśle mniejszy od max_corner w każdej osi.")
        return self


Surface = Annotated[PlaneSurface | BoxSurface, Field(discriminator="kind")]


class SceneSpec(BaseModel):
    """Scena w układzie kamery klatki 0."""

    model_config = ConfigDict(frozen=True)

    width: int = Field(ge=8)
    height: int = Field(ge=8)
    channels: Literal[1, 3] = 3
    fx: float = Field(gt=0.0)
    fy: float = Field(gt=0.0)
    cx: float | None = None
    cy: float | None = None
    surfaces: list[Surface] = Field(min_length=1)
    background: float = Field(default=0.5, ge=0.0, le=1.0)

    @property
    def principal_point(self) -> tuple[float, float]:
        cx = (self.width - 1) / 2.0 if self.cx is None else self.cx
        cy = (self.height - 1) / 2.0 if self.cy is None else self.cy
        return cx, cy


class MotionSpec(BaseModel):
    """Ruch kamery jako transformacje punktów T_{t->t+1} (obrót osiowy, potem translacja)."""

    model_config = ConfigDict(frozen=True)

    steps: list[PoseVector] = Field(min_length=1)

    @property
    def n_frames(self) -> int:
        return len(self.steps) + 1

    @classmethod
    def constant(cls, step: PoseVector, n_frames: int) -> "MotionSpec":
        if n_frames < 2:
            raise ValueError("Ruch wymaga co najmniej dwóch klatek.")
        return cls(steps=[tuple(step)] * (n_frames - 1))


class Corruption(BaseModel):
    """Niezależnie poruszający się fragment obrazu oraz zmiany jasności klatek."""

    model_config = ConfigDict(frozen=True)

    patch: tuple[int, int, int, int] | None = Field(default=None, description="x, y, width, height")
    displacement: tuple[float, float] = (0.0, 0.0)
    brightness: list[float] = Field(default_factory=list)
    max_fraction: float = Field(default=0.1, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_patch(self) -> "Corruption":
        if self.patch is not None:
            x, y, width, height = self.patch
            if width <= 0 or height <= 0 or x < 0 or y < 0:
                raise ValueError("Fragment musi mieć dodatnie wymiary i nieujemne położenie.")
        return self
