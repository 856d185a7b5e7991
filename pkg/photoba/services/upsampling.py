"""Piramidy obrazów oraz powiększanie map głębi (dwuliniowe i sterowane obrazem)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from photoba.core.errors import InvalidInputError
from photoba.services.geometry import DTYPE, DepthMap, ImageGrid, ValidityMask, bilinear_gather

logger = logging.getLogger(__name__)


def pool_half(values: torch.Tensor) -> torch.Tensor:
    """Średnia z bloków 2x2 po dwóch ostatnich osiach; nieparzysty brzeg jest powielany."""
    if values.shape[-2] % 2:
        values = torch.cat([values, values[..., -1:, :]], dim=-2)
    if values.shape[-1] % 2:
        values = torch.cat([values, values[..., :, -1:]], dim=-1)
    lead = values.shape[:-2]
    height, width = values.shape[-2:]
    pooled = F.avg_pool2d(values.reshape(-1, 1, height, width), 2)
    return pooled.reshape(*lead, height // 2, width // 2)


def _pool_depth(depth: DepthMap) -> DepthMap:
    valid = torch.from_numpy(depth.valid.astype(np.float64))
    values = torch.from_numpy(np.where(depth.valid, depth.data, 0.0))
    weight = pool_half(valid)
    total = pool_half(values * valid)
    flags = (weight > 0).numpy()
    pooled = torch.where(weight > 0, total / torch.clamp(weight, min=1e-12), torch.zeros_like(total))
    return DepthMap(np.where(flags, pooled.numpy(), 0.0), flags)


@dataclass(frozen=True)
class Pyramid:
    """Poziom 1 to obraz źródłowy, każdy kolejny ma połowę rozdzielczości."""

    levels: list[ImageGrid]
    depths: list[DepthMap] | None = None

    def __len__(self) -> int:
        return len(self.levels)

    def level(self, scale: int) -> ImageGrid:
        """Scale numbered from 1 (full resolution)."""
        return self.levels[scale - 1]


def build_pyramid(image: ImageGrid, levels: int = 4, depth: DepthMap | None = None) -> Pyramid:
    """Buduje łańcuch uśrednień 2x2."""
    if levels < 1:
        raise InvalidInputError("Piramida musi mieć co najmniej jeden poziom.")
    minimum = 2 ** (levels - 1)
    if image.height < minimum or image.width < minimum:
        raise InvalidInputError(
            f"Obraz {image.width}x{image.height} jest za mały dla {levels} poziomów (minimum {minimum})."
        )
    current = image.to_tensor()
    images = [image]
    for _ in range(levels - 1):
        current = pool_half(current)
        images.append(ImageGrid(np.clip(current.numpy().transpose(1, 2, 0), 0.0, 1.0)))
    depths = None
    if depth is not None:
        if depth.shape != image.shape:
            raise InvalidInputError("Rozmiar mapy głębi nie zgadza się z obrazem.")
        depths = [depth]
        for _ in range(levels - 1):
            depths.append(_pool_depth(depths[-1]))
    return Pyramid(levels=images, depths=depths)


def _check_factor(factor: int) -> None:
    if int(factor) != factor or factor < 2:
        raise InvalidInputError(f"Współczynnik powiększenia musi być liczbą całkowitą >= 2, otrzymano {factor}.")


def _source_coordinates(size: int, factor: int, limit: int) -> np.ndarray:
    coords = (np.arange(size * factor, dtype=np.float64) + 0.5) / factor - 0.5
    return np.clip(coords, 0.0, limit - 1)


def bilinear_upsample_depth(low: DepthMap, factor: int = 2) -> DepthMap:
    """Klasyczne powiększenie dwuliniowe, mieszające głębie tła i pierwszego planu."""
    _check_factor(factor)
    xs = _source_coordinates(low.width, factor, low.width)
    ys = _source_coordinates(low.height, factor, low.height)
    grid_u, grid_v = np.meshgrid(xs, ys)
    values = torch.from_numpy(np.where(low.valid, low.data, 1.0))
    with torch.no_grad():
        sampled, valid = bilinear_gather(
            values[None, None].to(DTYPE),
            torch.from_numpy(grid_u)[None],
            torch.from_numpy(grid_v)[None],
            corner_valid=torch.from_numpy(np.array(low.valid))[None],
        )
    flags = valid[0].numpy()
    return DepthMap(np.where(flags, sampled[0, 0].numpy(), 0.0), flags)


def guided_upsample_depth(
    low: DepthMap,
    guide: ImageGrid,
    factor: int = 2,
    range_sigma: float = 0.1,
    spatial_sigma: float | None = None,
) -> tuple[DepthMap, ValidityMask]:
    """Joint-bilateral upsampling of `low` steered by the high-resolution `guide`.

    Each output depth is a normalised average of nearby low-resolution depths weighted
    by a spatial Gaussian (in high-resolution pixels) times a Gaussian of the guide
    intensity difference. Returns the depth map and a mask of pixels that fell back
    to bilinear interpolation because every weight vanished.
    """
    _check_factor(factor)
    if guide.shape != (low.height * factor, low.width * factor):
        raise InvalidInputError(
            f"Obraz prowadzący musi mieć rozmiar {low.width * factor}x{low.height * factor}, "
            f"otrzymano {guide.width}x{guide.height}."
        )
    if range_sigma <= 0:
        raise InvalidInputError("range_sigma musi być dodatnie.")
    sigma_s = float(factor if spatial_sigma is None else spatial_sigma)
    if sigma_s <= 0:
        raise InvalidInputError("spatial_sigma musi być dodatnie.")

    gray = guide.gray()
    guide_low = gray.reshape(low.height, factor, low.width, factor).mean(axis=(1, 3))
    qx = (np.arange(guide.width, dtype=np.float64) + 0.5) / factor - 0.5
    qy = (np.arange(guide.height, dtype=np.float64) + 0.5) / factor - 0.5
    grid_qx, grid_qy = np.meshgrid(qx, qy)
    base_x = np.floor(grid_qx).astype(int)
    base_y = np.floor(grid_qy).astype(int)
    radius = max(1, math.ceil(2.0 * sigma_s / factor))

    depth_values = np.where(low.valid, low.data, 0.0)
    centre_x = np.clip(np.rint(grid_qx).astype(int), 0, low.width - 1)
    centre_y = np.clip(np.rint(grid_qy).astype(int), 0, low.height - 1)
    reference = depth_values[centre_y, centre_x]

    weight_sum = np.zeros(guide.shape)
    offset_sum = np.zeros(guide.shape)
    value_sum = np.zeros(guide.shape)
    for dy in range(-radius + 1, radius + 1):
        for dx in range(-radius + 1, radius + 1):
            lx = base_x + dx
            ly = base_y + dy
            inside = (lx >= 0) & (lx < low.width) & (ly >= 0) & (ly < low.height)
            lxc = np.clip(lx, 0, low.width - 1)
            lyc = np.clip(ly, 0, low.height - 1)
            usable = inside & low.valid[lyc, lxc]
            dist2 = ((lx - grid_qx) ** 2 + (ly - grid_qy) ** 2) * factor**2
            spatial = np.exp(-dist2 / (2.0 * sigma_s**2))
            if math.isinf(range_sigma):
                similarity = np.ones_like(spatial)
            else:
                diff = gray - guide_low[lyc, lxc]
                similarity = np.exp(-(diff**2) / (2.0 * range_sigma**2))
            weight = np.where(usable, spatial * similarity, 0.0)
            weight_sum += weight
            # Sumowanie odchyleń od wartości referencyjnej zachowuje stałe dokładnie.
            offset_sum += weight * (depth_values[lyc, lxc] - reference)
            value_sum += weight * depth_values[lyc, lxc]

    positive = weight_sum > 0
    reference_valid = low.valid[centre_y, centre_x]
    bilinear = bilinear_upsample_depth(low, factor)
    fallback = ~positive
    safe_sum = np.where(positive, weight_sum, 1.0)
    result = np.where(reference_valid, reference + offset_sum / safe_sum, value_sum / safe_sum)
    result = np.where(fallback, bilinear.data, result)
    valid = np.where(fallback, bilinear.valid, True)
    fallback_count = int((fallback & bilinear.valid).sum())
    if fallback_count:
        logger.warning("guided upsampling fell back to bilinear at %d pixels", fallback_count)
    return DepthMap(np.where(valid, result, 0.0), valid), ValidityMask(fallback)
