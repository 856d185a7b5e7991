"""Funkcja celu: koszt fotometryczny, spójność głębi, gładkość, obcinanie percentylowe.

Operacje publiczne działają na typach z `geometry` (ImageGrid, DepthMap) i służą
do testów oraz diagnostyki. `evaluate_objective` liczy tę samą sumę na tensorach
torch, dzięki czemu gradient dostajemy z autograd.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
import torch
import torch.nn.functional as F

from photoba.core.errors import EmptyCostError, InvalidInputError, NumericalError
from photoba.schemas.config import LossWeights
from photoba.schemas.report import LossReport, ScaleReport
from photoba.services.geometry import (
    DTYPE,
    DepthMap,
    ImageGrid,
    Intrinsics,
    RigidPose,
    Snippet,
    ValidityMask,
    bilinear_gather,
    chain_poses,
    ensure_same_shape,
    gather_cells,
    invert_poses,
    pose_matrices,
    warp_coordinates,
)
from photoba.services.upsampling import pool_half

logger = logging.getLogger(__name__)

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


# region kernels ------------------------------------------------------------------


class BranchState:
    """Dyskretne decyzje funkcji celu zapamiętane w jednym punkcie.

    Maski poprawności, komórki interpolacji, znaki pod |.| i zbiory obciętych pikseli
    są zapisywane pod kluczami przy pierwszym przebiegu. Po `freeze()` kolejne
    przebiegi używają zapisanych decyzji, więc w otoczeniu punktu zapisu funkcja celu
    jest gładka i ma ten sam gradient co w punkcie zapisu.
    """

    def __init__(self) -> None:
        self._saved: dict[str, torch.Tensor] = {}
        self.replaying = False

    def decide(self, key: str, value: torch.Tensor) -> torch.Tensor:
        if self.replaying:
            saved = self._saved.get(key)
            if saved is None:
                raise InvalidInputError(f"Brak zapisanej decyzji '{key}'.")
            return saved
        self._saved[key] = value.detach().clone()
        return value

    def freeze(self) -> "BranchState":
        self.replaying = True
        return self

    def __len__(self) -> int:
        return len(self._saved)


def _abs(values: torch.Tensor, branches: BranchState | None, key: str) -> torch.Tensor:
    if branches is None:
        return values.abs()
    return branches.decide(key, torch.sign(values.detach())) * values


def _box3(values: torch.Tensor) -> torch.Tensor:
    mode = "reflect" if min(values.shape[-2:]) >= 2 else "replicate"
    return F.avg_pool2d(F.pad(values, (1, 1, 1, 1), mode=mode), 3, stride=1)


def ssim_map(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Per-pixel SSIM of (B, C, H, W) tensors over a 3x3 box window."""
    mu_x = _box3(x)
    mu_y = _box3(y)
    sigma_x = _box3(x * x) - mu_x * mu_x
    sigma_y = _box3(y * y) - mu_y * mu_y
    sigma_xy = _box3(x * y) - mu_x * mu_y
    numerator = (2 * mu_x * mu_y + SSIM_C1) * (2 * sigma_xy + SSIM_C2)
    denominator = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sigma_x + sigma_y + SSIM_C2)
    return numerator / denominator


def photometric_map(
    real: torch.Tensor,
    synth: torch.Tensor,
    ssim_mix: float,
    branches: BranchState | None = None,
    key: str = "photometric",
) -> torch.Tensor:
    """(B, C, H, W) -> (B, H, W): alpha (1 - SSIM) / 2 + (1 - alpha) |synth - real|, średnia po kanałach."""
    dssim = torch.clamp((1 - ssim_map(real, synth)) / 2, 0.0, 1.0)
    l1 = _abs(synth - real, branches, f"{key}.l1")
    return (ssim_mix * dssim + (1 - ssim_mix) * l1).mean(dim=1)


def smoothness_sums(
    disparity: torch.Tensor,
    gray: torch.Tensor,
    branches: BranchState | None = None,
    key: str = "smoothness",
) -> torch.Tensor:
    """Suma |dx d| exp(-|dx I|) + |dy d| exp(-|dy I|) dla każdej klatki (B, H, W) -> (B,)."""
    grad_dx = _abs(disparity[..., :, 1:] - disparity[..., :, :-1], branches, f"{key}.dx")
    grad_dy = _abs(disparity[..., 1:, :] - disparity[..., :-1, :], branches, f"{key}.dy")
    image_dx = (gray[..., :, 1:] - gray[..., :, :-1]).abs()
    image_dy = (gray[..., 1:, :] - gray[..., :-1, :]).abs()
    return (grad_dx * torch.exp(-image_dx)).sum(dim=(-2, -1)) + (grad_dy * torch.exp(-image_dy)).sum(dim=(-2, -1))


def nearest_rank(count: int, q: float) -> int:
    """Pozycja (od 1) percentyla q w posortowanym zbiorze o liczności count."""
    # Arytmetyka dokładna: 2.2 * 1500 / 100 to 33, nie 33.000000000000004.
    return min(count, max(1, math.ceil(Fraction(str(q)) * count / 100)))


def _check_percentile(q: float) -> None:
    if not 0 < q <= 100:
        raise InvalidInputError(f"Percentyl musi należeć do (0, 100], otrzymano {q}.")


# endregion -----------------------------------------------------------------------


# region reference operations -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class CostField:
    """Koszt per piksel z flagami poprawności."""

    cost: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        cost = np.array(self.cost, dtype=np.float64)
        valid = np.array(self.valid, dtype=bool)
        if cost.ndim != 2 or cost.shape != valid.shape:
            raise InvalidInputError("Koszt i flagi poprawności muszą być tablicami (H, W) tego samego kształtu.")
        picked = cost[valid]
        if not np.all(np.isfinite(picked)):
            raise NumericalError("Koszt zawiera wartości nieskończone na poprawnych pikselach.")
        if np.any(picked < 0):
            raise InvalidInputError("Koszt nie może być ujemny.")
        cost = np.where(valid, cost, 0.0)
        cost.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape

    def values(self) -> np.ndarray:
        return self.cost[self.valid]

    def mean(self) -> float:
        values = self.values()
        if values.size == 0:
            raise EmptyCostError("Brak poprawnych pikseli w polu kosztu.")
        return float(values.mean())


def _image_pair(x: ImageGrid, y: ImageGrid) -> tuple[torch.Tensor, torch.Tensor]:
    if x.shape != y.shape or x.channels != y.channels:
        raise InvalidInputError(
            f"Obrazy mają różne wymiary: {x.width}x{x.height}x{x.channels} i {y.width}x{y.height}x{y.channels}."
        )
    return x.to_tensor()[None], y.to_tensor()[None]


def ssim(x: ImageGrid, y: ImageGrid) -> np.ndarray:
    """Mapa SSIM (H, W), średnia po kanałach."""
    tx, ty = _image_pair(x, y)
    with torch.no_grad():
        return ssim_map(tx, ty)[0].mean(dim=0).numpy()


def photometric_cost(
    real: ImageGrid,
    synth: ImageGrid,
    mask: ValidityMask | None = None,
    ssim_mix: float = 0.85,
) -> CostField:
    if not 0 <= ssim_mix <= 1:
        raise InvalidInputError("ssim_mix musi należeć do [0, 1].")
    tr, ts = _image_pair(real, synth)
    with torch.no_grad():
        cost = photometric_map(tr, ts, ssim_mix)[0].numpy()
    valid = np.ones(real.shape, dtype=bool)
    if mask is not None:
        ensure_same_shape(real, mask, "Rozmiary obrazu i maski")
        valid = np.array(mask.flags)
    return CostField(cost, valid)


def depth_consistency_cost(
    transformed: DepthMap,
    sampled: DepthMap,
    mask: ValidityMask | None = None,
) -> CostField:
    """|D_{t->t+n} - D^_{t->t+n}| na pikselach poprawnych w obu mapach i w masce."""
    ensure_same_shape(transformed, sampled, "Rozmiary map głębi")
    valid = transformed.valid & sampled.valid
    if mask is not None:
        ensure_same_shape(transformed, mask, "Rozmiary mapy głębi i maski")
        valid = valid & mask.flags
    cost = np.abs(np.where(valid, transformed.data - sampled.data, 0.0))
    return CostField(cost, valid)


def smoothness_cost(disparity: np.ndarray | DepthMap, image: ImageGrid) -> float:
    values = disparity.data if isinstance(disparity, DepthMap) else np.asarray(disparity, dtype=np.float64)
    if values.shape != image.shape:
        raise InvalidInputError("Rozmiary dysparycji i obrazu muszą być równe.")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("Dysparycja musi być skończona.")
    with torch.no_grad():
        total = smoothness_sums(torch.from_numpy(values)[None], torch.from_numpy(image.gray())[None])
    return float(total[0])


def _pooled_values(costs: CostField | Sequence[CostField] | np.ndarray) -> np.ndarray:
    if isinstance(costs, CostField):
        return costs.values()
    if isinstance(costs, np.ndarray):
        return costs.ravel().astype(np.float64)
    fields = list(costs)
    if fields and all(isinstance(item, CostField) for item in fields):
        return np.concatenate([item.values() for item in fields])
    return np.asarray(fields, dtype=np.float64).ravel()


def percentile(costs: CostField | Sequence[CostField] | np.ndarray, q: float) -> float:
    """Percentyl metodą najbliższej rangi po poprawnych wpisach całego zbioru."""
    _check_percentile(q)
    values = _pooled_values(costs)
    if values.size == 0:
        raise EmptyCostError("Zbiór kosztów nie zawiera poprawnych wpisów.")
    rank = nearest_rank(values.size, q)
    return float(np.partition(values, rank - 1)[rank - 1])


def clip_costs(costs: CostField, threshold: float) -> CostField:
    """min(s, threshold) dla każdego poprawnego piksela."""
    if not threshold >= 0:
        raise InvalidInputError(f"Próg obcinania musi być nieujemny, otrzymano {threshold}.")
    clipped = np.where(costs.cost <= threshold, costs.cost, threshold)
    return CostField(clipped, costs.valid)


# endregion -----------------------------------------------------------------------


# region objective ----------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveOptions:
    """Przełączniki sumy wieloskalowej.

    `frozen_thresholds` maps keys like ``s1.reconstruction_fwd`` to clip thresholds
    that replace the percentile computed from the current costs. `branches` records
    the discrete decisions of an evaluation, or replays them once frozen.
    """

    scales: int = 4
    active_scales: tuple[int, ...] | None = None
    use_backward: bool = True
    frozen_thresholds: Mapping[str, float] | None = None
    branches: BranchState | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.scales < 1:
            raise InvalidInputError("Liczba skal musi być dodatnia.")
        if self.active_scales is not None:
            active = tuple(sorted(set(self.active_scales)))
            if not active or active[0] < 1 or active[-1] > self.scales:
                raise InvalidInputError(f"Aktywne skale muszą należeć do 1..{self.scales}.")
            object.__setattr__(self, "active_scales", active)

    def is_active(self, scale: int) -> bool:
        return self.active_scales is None or scale in self.active_scales

    def with_branches(self, branches: BranchState, thresholds: Mapping[str, float] | None = None) -> "ObjectiveOptions":
        return replace(
            self,
            branches=branches,
            frozen_thresholds=self.frozen_thresholds if thresholds is None else thresholds,
        )


@dataclass
class _Term:
    value: torch.Tensor
    threshold: float | None
    count: int


def _raise_non_finite(term: str, cost: torch.Tensor, mask: torch.Tensor) -> None:
    bad = (mask & ~torch.isfinite(cost)).nonzero()
    pair, row, col = (int(item) for item in bad[0])
    raise NumericalError(
        f"Wartość nieskończona w składniku {term}: para {pair}, piksel (x={col}, y={row}).",
        detail=f"{term}[{pair}, {row}, {col}] = {float(cost[pair, row, col])}",
    )


def _clipped_mean(
    cost: torch.Tensor,
    mask: torch.Tensor,
    key: str,
    q: float,
    frozen: Mapping[str, float] | None,
    branches: BranchState | None = None,
) -> _Term:
    values = cost[mask]
    if not bool(torch.isfinite(values).all()):
        _raise_non_finite(key, cost, mask)
    count = int(values.numel())
    if count == 0:
        return _Term(torch.zeros((), dtype=DTYPE), None, 0)
    if frozen is not None and key in frozen:
        threshold = torch.tensor(frozen[key], dtype=DTYPE)
    else:
        threshold = torch.kthvalue(values.detach(), nearest_rank(count, q)).values
    keep = values.detach() <= threshold
    if branches is not None:
        keep = branches.decide(f"{key}.keep", keep)
    clipped = torch.where(keep, values, threshold)
    return _Term(clipped.mean(), float(threshold), count)


def _sample(
    values: torch.Tensor,
    target_u: torch.Tensor,
    target_v: torch.Tensor,
    in_front: torch.Tensor,
    key: str,
    branches: BranchState | None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Próbkowanie dwuliniowe z maską (wewnątrz obrazu i przed kamerą); poza maską 0."""
    cells = None
    if branches is not None:
        x0, y0 = gather_cells(target_u, target_v, values.shape[-2], values.shape[-1])
        cells = (branches.decide(f"{key}.x0", x0), branches.decide(f"{key}.y0", y0))
    sampled, inside = bilinear_gather(values, target_u, target_v, cells=cells, fill_invalid=False)
    mask = inside & in_front
    if branches is not None:
        mask = branches.decide(f"{key}.mask", mask)
    return torch.where(mask[:, None], sampled, torch.zeros_like(sampled)), mask


def _direction_terms(
    frames: torch.Tensor,
    depth: torch.Tensor,
    rotations: torch.Tensor,
    translations: torch.Tensor,
    intrinsics: tuple[float, float, float, float],
    weights: LossWeights,
    prefix: str,
    suffix: str,
    frozen: Mapping[str, float] | None,
    branches: BranchState | None = None,
) -> tuple[_Term, _Term]:
    count = frames.shape[0]
    q = weights.clip_percentile

    key = f"{prefix}reconstruction_{suffix}"
    target_u, target_v, _, in_front = warp_coordinates(depth[:-1], intrinsics, rotations, translations)
    synth, mask = _sample(frames[1:], target_u, target_v, in_front, key, branches)
    cost = photometric_map(frames[:-1], synth, weights.ssim_mix, branches, key)
    reconstruction = _clipped_mean(cost, mask, key, q, frozen, branches)

    key = f"{prefix}consistency_{suffix}"
    pairs = [(start, end) for start in range(count) for end in range(start + 1, count)]
    pair_rot, pair_trans = chain_poses(rotations, translations, pairs)
    sources = [start for start, _ in pairs]
    targets = [end for _, end in pairs]
    target_u, target_v, z, in_front = warp_coordinates(depth[sources], intrinsics, pair_rot, pair_trans)
    sampled, mask = _sample(depth[targets][:, None], target_u, target_v, in_front, key, branches)
    cost = _abs(z - sampled[:, 0], branches, f"{key}.l1")
    consistency = _clipped_mean(cost, mask, key, q, frozen, branches)
    return reconstruction, consistency


def evaluate_objective(
    frames: torch.Tensor,
    disparity: torch.Tensor,
    pose_params: torch.Tensor,
    intrinsics: Intrinsics,
    weights: LossWeights,
    options: ObjectiveOptions | None = None,
) -> tuple[torch.Tensor, LossReport]:
    """Wieloskalowa suma L = sum_s L_s / 2^(s-1) na tensorach.

    frames (N, C, H, W), disparity (N, H, W) at full resolution, pose_params (N-1, 6)
    for consecutive pairs. Returns the differentiable total and its report.
    """
    options = options or ObjectiveOptions()
    count, _, height, width = frames.shape
    if count < 2:
        raise InvalidInputError("Sekwencja musi mieć co najmniej dwie klatki.")
    if disparity.shape != (count, height, width) or pose_params.shape != (count - 1, 6):
        raise InvalidInputError(
            f"Niezgodne rozmiary: klatki {tuple(frames.shape)}, dysparycje {tuple(disparity.shape)}, "
            f"pozy {tuple(pose_params.shape)}."
        )
    minimum = 2 ** (options.scales - 1)
    if height < minimum or width < minimum:
        raise InvalidInputError(f"Obraz {width}x{height} jest za mały dla {options.scales} skal.")
    if not bool((disparity.detach() > 0).all()):
        raise InvalidInputError("Dysparycja musi być dodatnia.")

    rotations, translations = pose_matrices(pose_params)
    back_rot, back_trans = invert_poses(rotations.flip(0), translations.flip(0))

    total = torch.zeros((), dtype=DTYPE)
    reports: list[ScaleReport] = []
    frames_s, disparity_s = frames, disparity
    for scale in range(1, options.scales + 1):
        if scale > 1:
            frames_s = pool_half(frames_s)
            disparity_s = pool_half(disparity_s)
        if not options.is_active(scale):
            continue
        scale_intrinsics = intrinsics.scaled(scale - 1).as_tuple()
        depth_s = 1.0 / disparity_s
        prefix = f"s{scale}."
        rec_f, dc_f = _direction_terms(
            frames_s, depth_s, rotations, translations, scale_intrinsics, weights, prefix, "fwd",
            options.frozen_thresholds, options.branches,
        )
        if options.use_backward:
            rec_b, dc_b = _direction_terms(
                frames_s.flip(0), depth_s.flip(0), back_rot, back_trans, scale_intrinsics, weights, prefix, "bwd",
                options.frozen_thresholds, options.branches,
            )
        else:
            rec_b = dc_b = _Term(torch.zeros((), dtype=DTYPE), None, 0)

        normalized = disparity_s / disparity_s.mean(dim=(-2, -1), keepdim=True)
        smooth = smoothness_sums(normalized, frames_s.mean(dim=1), options.branches, f"{prefix}smoothness").sum()
        smooth = smooth / (frames_s.shape[-2] * frames_s.shape[-1])

        weight = 0.5 ** (scale - 1)
        scale_loss = (
            rec_f.value
            + rec_b.value
            + weights.dc_weight * (dc_f.value + dc_b.value)
            + weights.smooth_weight * smooth
        )
        total = total + weight * scale_loss

        terms = {
            "reconstruction_fwd": rec_f,
            "reconstruction_bwd": rec_b,
            "consistency_fwd": dc_f,
            "consistency_bwd": dc_b,
        }
        if not options.use_backward:
            del terms["reconstruction_bwd"], terms["consistency_bwd"]
        empty = [key for key, term in terms.items() if term.count == 0]
        if empty:
            logger.debug("scale %d has empty cost sets: %s", scale, ", ".join(empty))
        reports.append(
            ScaleReport(
                scale=scale,
                weight=weight,
                reconstruction_fwd=float(rec_f.value),
                reconstruction_bwd=float(rec_b.value),
                consistency_fwd=float(dc_f.value),
                consistency_bwd=float(dc_b.value),
                smoothness=float(smooth),
                thresholds={key: term.threshold for key, term in terms.items()},
                valid_counts={key: term.count for key, term in terms.items()},
                empty_terms=empty,
            )
        )

    if not bool(torch.isfinite(total)):
        raise NumericalError("Funkcja celu przyjęła wartość nieskończoną.", detail=f"total = {float(total)}")
    report = LossReport(
        scales=reports,
        dc_weight=weights.dc_weight,
        smooth_weight=weights.smooth_weight,
        total=float(total),
    )
    return total, report


def snippet_tensors(
    snippet: Snippet,
    poses: Sequence[RigidPose],
    depths: Sequence[DepthMap],
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Klatki, dysparycje i parametry póz w postaci przyjmowanej przez `evaluate_objective`."""
    if len(poses) != snippet.size - 1:
        raise InvalidInputError(f"Oczekiwano {snippet.size - 1} póz, otrzymano {len(poses)}.")
    if len(depths) != snippet.size:
        raise InvalidInputError(f"Oczekiwano {snippet.size} map głębi, otrzymano {len(depths)}.")
    for depth in depths:
        ensure_same_shape(snippet.frames[0], depth, "Rozmiary klatki i mapy głębi")
        if not depth.valid.all():
            raise InvalidInputError("Funkcja celu wymaga gęstych map głębi (wszystkie piksele poprawne).")
    disparity = torch.from_numpy(np.stack([1.0 / depth.data for depth in depths]))
    pose_params = torch.from_numpy(np.stack([pose.as_vector() for pose in poses]))
    return snippet.to_tensor(), disparity, pose_params


def snippet_objective(
    snippet: Snippet,
    poses: Sequence[RigidPose],
    depths: Sequence[DepthMap],
    weights: LossWeights | None = None,
    scales: int = 4,
    options: ObjectiveOptions | None = None,
) -> LossReport:
    """Raport funkcji celu dla sekwencji, póz kolejnych par i map głębi."""
    frames, disparity, pose_params = snippet_tensors(snippet, poses, depths)
    with torch.no_grad():
        _, report = evaluate_objective(
            frames,
            disparity,
            pose_params,
            snippet.intrinsics,
            weights or LossWeights(),
            options or ObjectiveOptions(scales=scales),
        )
    return report


# endregion -----------------------------------------------------------------------
