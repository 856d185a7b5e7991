"""Dokładny gradient funkcji celu (autograd) i wyrocznia różnic centralnych."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import torch

from photoba.core.errors import InvalidInputError, NumericalError
from photoba.schemas.config import LossWeights
from photoba.schemas.report import GradCheckReport, LossReport
from photoba.schemas.scene import TextureSpec
from photoba.services.geometry import DTYPE, RigidPose, Snippet
from photoba.services.logging_service import EngineLogger, EventStatus
from photoba.services.losses import BranchState, ObjectiveOptions, evaluate_objective
from photoba.services.scene_presets import ScenePresetParams, get_preset_or_raise
from photoba.services.scenes import render_snippet

logger = logging.getLogger(__name__)

MAX_CHECK_SAMPLES = 512


@dataclass(frozen=True)
class ParamLayout:
    """Disparities of all frames (row-major), then six pose parameters per consecutive pair."""

    frames: int
    height: int
    width: int

    @classmethod
    def for_snippet(cls, snippet: Snippet) -> "ParamLayout":
        height, width = snippet.shape
        return cls(snippet.size, height, width)

    @property
    def disparity_count(self) -> int:
        return self.frames * self.height * self.width

    @property
    def size(self) -> int:
        return self.disparity_count + 6 * (self.frames - 1)

    @property
    def disparity_slice(self) -> slice:
        return slice(0, self.disparity_count)

    def rotation_indices(self) -> np.ndarray:
        base = self.disparity_count + 6 * np.arange(self.frames - 1)
        return (base[:, None] + np.arange(3)).ravel()

    def translation_indices(self) -> np.ndarray:
        return self.rotation_indices() + 3

    def param_class(self, index: int) -> str:
        if index < self.disparity_count:
            return "disparity"
        return "rotation" if (index - self.disparity_count) % 6 < 3 else "translation"

    def describe(self, index: int) -> str:
        """Czytelna nazwa współrzędnej wektora parametrów."""
        if index < self.disparity_count:
            frame, rest = divmod(index, self.height * self.width)
            row, col = divmod(rest, self.width)
            return f"disparity[frame={frame}, x={col}, y={row}]"
        pair, component = divmod(index - self.disparity_count, 6)
        names = ("rx", "ry", "rz", "tx", "ty", "tz")
        return f"pose[{pair}].{names[component]}"

    def pack(self, disparities: np.ndarray, poses: Sequence[RigidPose] | np.ndarray) -> np.ndarray:
        disparities = np.asarray(disparities, dtype=np.float64)
        if disparities.shape != (self.frames, self.height, self.width):
            raise InvalidInputError(f"Dysparycje mają kształt {disparities.shape}, oczekiwano {(self.frames, self.height, self.width)}.")
        if isinstance(poses, np.ndarray):
            pose_params = np.asarray(poses, dtype=np.float64)
        else:
            pose_params = np.array([pose.as_vector() for pose in poses], dtype=np.float64)
        pose_params = pose_params.reshape(-1, 6) if pose_params.size else np.zeros((0, 6))
        if pose_params.shape != (self.frames - 1, 6):
            raise InvalidInputError(f"Oczekiwano {self.frames - 1} póz, otrzymano {pose_params.shape[0]}.")
        return np.concatenate([disparities.ravel(), pose_params.ravel()])

    def unpack(self, vector: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vector -> (disparities (N, H, W), pose parameters (N-1, 6))."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.size,):
            raise InvalidInputError(f"Wektor parametrów ma długość {vector.size}, oczekiwano {self.size}.")
        disparities = vector[self.disparity_slice].reshape(self.frames, self.height, self.width)
        return disparities, vector[self.disparity_count :].reshape(self.frames - 1, 6)

    def poses(self, vector: np.ndarray) -> list[RigidPose]:
        _, pose_params = self.unpack(vector)
        return [RigidPose.from_vector(row) for row in pose_params]


@dataclass(frozen=True)
class ObjectiveEvaluation:
    value: float
    gradient: np.ndarray
    report: LossReport


def _split(layout: ParamLayout, vector: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    disparity = vector[: layout.disparity_count].reshape(layout.frames, layout.height, layout.width)
    return disparity, vector[layout.disparity_count :].reshape(layout.frames - 1, 6)


def evaluate_with_gradient(
    snippet: Snippet,
    params: np.ndarray,
    weights: LossWeights,
    options: ObjectiveOptions | None = None,
    frames: torch.Tensor | None = None,
) -> ObjectiveEvaluation:
    """Wartość, gradient i raport funkcji celu w punkcie params."""
    layout = ParamLayout.for_snippet(snippet)
    if np.shape(params) != (layout.size,):
        raise InvalidInputError(f"Wektor parametrów ma długość {np.size(params)}, oczekiwano {layout.size}.")
    frames = snippet.to_tensor() if frames is None else frames
    vector = torch.tensor(np.asarray(params, dtype=np.float64), dtype=DTYPE, requires_grad=True)
    disparity, pose_params = _split(layout, vector)
    total, report = evaluate_objective(frames, disparity, pose_params, snippet.intrinsics, weights, options)
    (gradient,) = torch.autograd.grad(total, vector)
    gradient = gradient.numpy()
    bad = np.flatnonzero(~np.isfinite(gradient))
    if bad.size:
        raise NumericalError(
            f"Gradient nieskończony we współrzędnej {layout.describe(int(bad[0]))}.",
            detail=f"{bad.size} non-finite entries, first index {int(bad[0])}",
        )
    return ObjectiveEvaluation(float(total), gradient, report)


def objective_and_gradient(
    snippet: Snippet,
    params: np.ndarray,
    weights: LossWeights,
    options: ObjectiveOptions | None = None,
) -> tuple[float, np.ndarray]:
    evaluation = evaluate_with_gradient(snippet, params, weights, options)
    return evaluation.value, evaluation.gradient


def objective_value(
    snippet: Snippet,
    params: np.ndarray,
    weights: LossWeights,
    options: ObjectiveOptions | None = None,
    frames: torch.Tensor | None = None,
) -> float:
    layout = ParamLayout.for_snippet(snippet)
    frames = snippet.to_tensor() if frames is None else frames
    with torch.no_grad():
        disparity, pose_params = _split(layout, torch.from_numpy(np.asarray(params, dtype=np.float64)))
        total, _ = evaluate_objective(frames, disparity, pose_params, snippet.intrinsics, weights, options)
    return float(total)


def central_differences(
    fn: Callable[[np.ndarray], float],
    x: np.ndarray,
    step: float,
    indices: Sequence[int] | np.ndarray | None = None,
) -> np.ndarray:
    """(f(x + h e_i) - f(x - h e_i)) / 2h for each requested coordinate, in request order."""
    if not step > 0:
        raise InvalidInputError(f"Krok różnicowy musi być dodatni, otrzymano {step}.")
    x = np.array(x, dtype=np.float64).ravel()
    chosen = np.arange(x.size) if indices is None else np.asarray(indices, dtype=int)
    out = np.empty(chosen.size)
    for position, index in enumerate(chosen):
        original = x[index]
        x[index] = original + step
        forward = fn(x)
        x[index] = original - step
        backward = fn(x)
        x[index] = original
        out[position] = (forward - backward) / (2.0 * step)
    return out


def _frozen_options(
    snippet: Snippet,
    params: np.ndarray,
    weights: LossWeights,
    options: ObjectiveOptions,
    frames: torch.Tensor,
) -> tuple[ObjectiveEvaluation, ObjectiveOptions]:
    """Ewaluacja w punkcie params i opcje odtwarzające jej progi oraz decyzje dyskretne."""
    branches = BranchState()
    base = evaluate_with_gradient(snippet, params, weights, options.with_branches(branches), frames)
    return base, options.with_branches(branches.freeze(), base.report.threshold_map())


def finite_difference_gradient(
    snippet: Snippet,
    params: np.ndarray,
    weights: LossWeights,
    step: float,
    indices: Sequence[int] | np.ndarray | None = None,
    options: ObjectiveOptions | None = None,
) -> np.ndarray:
    """Central differences of the objective around `params`.

    Clip thresholds, validity masks, interpolation cells, the signs under |.| and
    the clipped sets stay as they are at `params`, so a step never jumps between
    pieces of the objective. With `indices` the result holds only those coordinates,
    in the given order.
    """
    options = options or ObjectiveOptions()
    frames = snippet.to_tensor()
    if options.branches is None or not options.branches.replaying:
        _, options = _frozen_options(snippet, params, weights, options, frames)
    return central_differences(
        lambda x: objective_value(snippet, x, weights, options, frames),
        params,
        step,
        indices,
    )


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
    return np.abs(analytic - numeric) / scale


def sample_indices(layout: ParamLayout, samples: int, seed: int) -> np.ndarray:
    """Wszystkie współrzędne póz i losowy podzbiór dysparycji, razem co najwyżej `samples`."""
    if not 1 <= samples <= MAX_CHECK_SAMPLES:
        raise InvalidInputError(f"Liczba próbek musi należeć do 1..{MAX_CHECK_SAMPLES}.")
    pose_indices = np.arange(layout.disparity_count, layout.size)
    room = max(0, samples - pose_indices.size)
    rng = np.random.default_rng(seed)
    disparity_indices = rng.choice(layout.disparity_count, size=min(room, layout.disparity_count), replace=False)
    return np.concatenate([np.sort(disparity_indices), pose_indices])


def gradient_check(
    snippet: Snippet,
    params: np.ndarray,
    weights: LossWeights,
    *,
    step: float = 1e-6,
    samples: int = 160,
    seed: int = 0,
    tolerance: float = 1e-5,
    options: ObjectiveOptions | None = None,
    events: EngineLogger | None = None,
) -> GradCheckReport:
    """Porównuje gradient analityczny z różnicami centralnymi na wylosowanych współrzędnych."""
    layout = ParamLayout.for_snippet(snippet)
    options = options or ObjectiveOptions()
    frames = snippet.to_tensor()
    indices = sample_indices(layout, samples, seed)
    if events is not None:
        events.log(
            component="gradcheck",
            event_type="sampling",
            status=EventStatus.success,
            detail=f"seed={seed} samples={indices.size} step={step}",
        )

    base, frozen = _frozen_options(snippet, params, weights, options, frames)
    analytic = base.gradient[indices]
    numeric = finite_difference_gradient(snippet, params, weights, step, indices, frozen)
    errors = relative_errors(analytic, numeric)

    per_class: dict[str, float] = {}
    for index, error in zip(indices, errors):
        name = layout.param_class(int(index))
        per_class[name] = max(per_class.get(name, 0.0), float(error))
    worst = int(indices[int(np.argmax(errors))])
    report = GradCheckReport(
        seed=seed,
        step=step,
        tolerance=tolerance,
        samples=int(indices.size),
        max_rel_error=float(errors.max()),
        per_class=per_class,
        worst_index=worst,
    )
    logger.debug("gradient check seed=%d worst=%s error=%.3e", seed, layout.describe(worst), report.max_rel_error)
    if events is not None and not report.passed:
        events.log(
            component="gradcheck",
            event_type="mismatch",
            status=EventStatus.warning,
            detail=f"{layout.describe(worst)} relative error {report.max_rel_error:.3e}",
        )
    return report


def random_check_snippet(seed: int, size: int = 16, frames: int = 3) -> tuple[Snippet, np.ndarray]:
    """Losowa scena syntetyczna i zaburzony punkt startowy do testu gradientu."""
    rng = np.random.default_rng(seed)
    params = ScenePresetParams(
        width=size,
        height=size,
        channels=3,
        n_frames=frames,
        depth=float(rng.uniform(3.0, 5.0)),
        baseline_fraction=float(rng.uniform(0.02, 0.05)),
        rotation_deg=float(rng.uniform(-1.0, 1.0)),
        texture=TextureSpec(frequency=0.5, contrast=0.4, seed=int(rng.integers(0, 2**31 - 1))),
    )
    scene, motion = get_preset_or_raise("slanted_plane").build(params)
    snippet, depths, poses = render_snippet(scene, motion)
    layout = ParamLayout.for_snippet(snippet)
    disparities = np.stack([depth.disparity() for depth in depths])
    disparities = disparities * rng.uniform(0.9, 1.1, disparities.shape)
    pose_params = np.array([pose.as_vector() for pose in poses])
    pose_params = pose_params + rng.normal(0.0, 2e-3, pose_params.shape)
    return snippet, layout.pack(disparities, pose_params)
