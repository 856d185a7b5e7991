"""Bundle adjustment loop: Adam over disparities and poses, coarse-to-fine."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, logit

from photoba.core.errors import InvalidInputError, NumericalError, UsageError
from photoba.schemas.config import LossWeights, OptimizeConfig
from photoba.schemas.report import LossReport
from photoba.services.differentiation import ParamLayout, evaluate_with_gradient
from photoba.services.geometry import DepthMap, RigidPose, Snippet, compose_poses
from photoba.services.logging_service import EngineLogger, EventStatus
from photoba.services.losses import ObjectiveOptions

logger = logging.getLogger(__name__)

ABLATION_VARIANTS = ("full", "no_clip", "no_consistency", "no_backward")
DEGENERATE_GRADIENT = 1e-12


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    # Mnożnik kroku dla każdej współrzędnej; None oznacza jednakowy krok.
    lr_scale: np.ndarray | None = None

    @classmethod
    def zeros(cls, size: int, config: OptimizeConfig | None = None) -> "AdamState":
        config = config or OptimizeConfig()
        return cls(
            first_moment=np.zeros(size),
            second_moment=np.zeros(size),
            lr=config.lr,
            beta1=config.beta1,
            beta2=config.beta2,
            epsilon=config.epsilon,
        )


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """Jeden krok Adama z korekcją obciążenia momentów."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.first_moment.shape:
        raise InvalidInputError("Parametry, gradient i stan Adama muszą mieć ten sam rozmiar.")
    if state.lr_scale is not None and state.lr_scale.shape != params.shape:
        raise InvalidInputError("Mnożniki kroku muszą mieć rozmiar parametrów.")
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise NumericalError(f"Gradient nieskończony we współrzędnej {int(bad[0])}.")
    step = state.step + 1
    first = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    second = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    first_hat = first / (1.0 - state.beta1**step)
    second_hat = second / (1.0 - state.beta2**step)
    lr = state.lr if state.lr_scale is None else state.lr * state.lr_scale
    updated = params - lr * first_hat / (np.sqrt(second_hat) + state.epsilon)
    return updated, replace(state, first_moment=first, second_moment=second, step=step)


def disparity_from_logits(logits: np.ndarray, d_min: float, d_max: float) -> np.ndarray:
    return d_min + (d_max - d_min) * expit(logits)


def logits_from_disparity(disparity: np.ndarray, d_min: float, d_max: float) -> np.ndarray:
    fraction = (np.asarray(disparity, dtype=np.float64) - d_min) / (d_max - d_min)
    return logit(np.clip(fraction, 1e-9, 1.0 - 1e-9))


def _logistic_slope(logits: np.ndarray, d_min: float, d_max: float) -> np.ndarray:
    sigma = expit(logits)
    return (d_max - d_min) * sigma * (1.0 - sigma)


def initial_disparity(config: OptimizeConfig) -> float:
    """Środek przedziału dysparycji w skali logarytmicznej."""
    return math.sqrt(config.d_min * config.d_max)


def normalize_disparity(disparity: np.ndarray, valid: np.ndarray | None = None) -> np.ndarray:
    """Dzieli poprawne wpisy przez ich średnią; niepoprawne pozostają zerami."""
    values = np.asarray(disparity, dtype=np.float64)
    mask = np.isfinite(values) if valid is None else np.asarray(valid, dtype=bool) & np.isfinite(values)
    if not mask.any():
        raise InvalidInputError("Mapa dysparycji nie ma poprawnych wpisów.")
    mean = float(values[mask].mean())
    if not mean > 0:
        raise InvalidInputError(f"Średnia dysparycja musi być dodatnia, otrzymano {mean}.")
    return np.where(mask, values / mean, 0.0)


@dataclass
class SolveResult:
    depths: list[DepthMap]
    poses: list[RigidPose]
    report: LossReport
    trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    initial_objective: float = math.nan

    def absolute_poses(self) -> list[RigidPose]:
        """Pozy klatek względem klatki 0 (pierwsza to identyczność)."""
        absolute = [RigidPose.identity()]
        for pose in self.poses:
            absolute.append(compose_poses([absolute[-1], pose]))
        return absolute

    @property
    def objective(self) -> float:
        return self.report.total


class _Problem:
    """Funkcja celu w zmiennych nieograniczonych (logity dysparycji, pozy)."""

    def __init__(self, snippet: Snippet, config: OptimizeConfig, weights: LossWeights) -> None:
        self.snippet = snippet
        self.config = config
        self.weights = weights
        self.layout = ParamLayout.for_snippet(snippet)
        self.frames = snippet.to_tensor()

    def disparity(self, x: np.ndarray) -> np.ndarray:
        return disparity_from_logits(x[self.layout.disparity_slice], self.config.d_min, self.config.d_max)

    def evaluate(self, x: np.ndarray, options: ObjectiveOptions) -> tuple[float, np.ndarray, LossReport]:
        count = self.layout.disparity_count
        params = np.concatenate([self.disparity(x), x[count:]])
        evaluation = evaluate_with_gradient(self.snippet, params, self.weights, options, self.frames)
        gradient = evaluation.gradient.copy()
        gradient[:count] *= _logistic_slope(x[:count], self.config.d_min, self.config.d_max)
        return evaluation.value, gradient, evaluation.report

    def result(self, x: np.ndarray, report: LossReport, **kwargs) -> SolveResult:
        disparity = self.disparity(x).reshape(self.layout.frames, self.layout.height, self.layout.width)
        return SolveResult(
            depths=[DepthMap(1.0 / frame) for frame in disparity],
            poses=self.layout.poses(np.concatenate([disparity.ravel(), x[self.layout.disparity_count :]])),
            report=report,
            **kwargs,
        )


def _stage_options(stage: int, stages: int, scales: int, use_backward: bool) -> ObjectiveOptions:
    if stage == stages - 1:
        return ObjectiveOptions(scales=scales, use_backward=use_backward)
    # Etap k (od zera) włącza k + 1 najgrubszych skal.
    active = tuple(range(scales - stage, scales + 1))
    return ObjectiveOptions(scales=scales, active_scales=active, use_backward=use_backward)


def solve_snippet(
    snippet: Snippet,
    config: OptimizeConfig | None = None,
    weights: LossWeights | None = None,
    *,
    use_backward: bool = True,
    init_disparity: np.ndarray | None = None,
    init_poses: Sequence[RigidPose] | None = None,
    events: EngineLogger | None = None,
) -> SolveResult:
    """Jointly optimises per-frame disparities and consecutive poses of a snippet.

    Poses start at identity and disparities at the logarithmic middle of
    [d_min, d_max] unless warm-start values are given. Pose coordinates take Adam
    steps scaled by `pose_lr_scale`, so a rotation step stays small next to the
    parallax. The returned solution is the best full-objective iterate of the final
    stage, never worse than the start.
    """
    config = config or OptimizeConfig()
    weights = weights or LossWeights()
    events = events or EngineLogger()
    problem = _Problem(snippet, config, weights)
    layout = problem.layout

    if init_disparity is None:
        disparity0 = np.full((layout.frames, layout.height, layout.width), initial_disparity(config))
    else:
        disparity0 = np.asarray(init_disparity, dtype=np.float64).reshape(layout.frames, layout.height, layout.width)
    if init_poses is None:
        poses0 = np.zeros((layout.frames - 1, 6))
    else:
        poses0 = np.array([pose.as_vector() for pose in init_poses]).reshape(layout.frames - 1, 6)
    x = np.concatenate([logits_from_disparity(disparity0, config.d_min, config.d_max).ravel(), poses0.ravel()])

    step_scale = np.ones(x.size)
    step_scale[layout.disparity_count :] = config.pose_lr_scale
    full_options = ObjectiveOptions(scales=config.scales, use_backward=use_backward)
    trace: list[float] = []
    try:
        initial_value, initial_gradient, initial_report = problem.evaluate(x, full_options)
    except NumericalError as exc:
        raise NumericalError(exc.message, exc.detail, trace) from exc

    if float(np.max(np.abs(initial_gradient))) < DEGENERATE_GRADIENT:
        events.log(
            component="optimizer",
            event_type="degenerate_texture",
            status=EventStatus.warning,
            detail="objective gradient vanishes at the initial point",
        )
        return problem.result(x, initial_report, trace=[initial_value], converged=True, initial_objective=initial_value)

    best_value, best_x, best_report = initial_value, x.copy(), initial_report
    stages = config.stage_lengths()
    iteration = 0
    converged = False
    for stage, length in enumerate(stages):
        options = _stage_options(stage, len(stages), config.scales, use_backward)
        final = stage == len(stages) - 1
        events.log(
            component="optimizer",
            event_type="stage",
            status=EventStatus.success,
            detail=f"stage {stage + 1}/{len(stages)} scales={options.active_scales or 'all'} iterations={length}",
        )
        state = replace(AdamState.zeros(x.size, config), lr_scale=step_scale)
        previous: float | None = None
        stall = 0
        for _ in range(length):
            try:
                value, gradient, report = problem.evaluate(x, options)
            except NumericalError as exc:
                events.log(component="optimizer", event_type="divergence", status=EventStatus.error, detail=exc.message)
                raise NumericalError(exc.message, exc.detail, trace) from exc
            trace.append(value)
            if final and value < best_value:
                best_value, best_x, best_report = value, x.copy(), report
            if previous is not None:
                decrease = (previous - value) / max(abs(previous), 1e-12)
                stall = stall + 1 if decrease < config.tolerance else 0
            previous = value
            if final and stall >= config.patience:
                converged = True
                break
            x, state = adam_step(x, gradient, replace(state, lr=config.lr_at(iteration)))
            iteration += 1
        events.debug(
            component="optimizer",
            event_type="thresholds",
            detail=str(report.threshold_map()) if length else "{}",
        )

    if not converged:
        try:
            value, _, report = problem.evaluate(x, full_options)
        except NumericalError as exc:
            raise NumericalError(exc.message, exc.detail, trace) from exc
        trace.append(value)
        if value < best_value:
            best_value, best_x, best_report = value, x.copy(), report

    events.log(
        component="optimizer",
        event_type="converged" if converged else "finished",
        status=EventStatus.success,
        detail=f"iterations={iteration} objective={best_value:.6g} initial={initial_value:.6g}",
    )
    return problem.result(
        best_x,
        best_report,
        trace=trace,
        iterations=iteration,
        converged=converged,
        initial_objective=initial_value,
    )


def variant_settings(
    variant: str,
    weights: LossWeights,
) -> tuple[LossWeights, bool]:
    """Wagi i przełącznik sekwencji wstecznej dla nazwanego wariantu ablacji."""
    if variant == "full":
        return weights, True
    if variant == "no_clip":
        return weights.model_copy(update={"clip_percentile": 100.0}), True
    if variant == "no_consistency":
        return weights.model_copy(update={"dc_weight": 0.0}), True
    if variant == "no_backward":
        return weights, False
    raise UsageError(f"Nieznany wariant ablacji: {variant} (dostępne: {', '.join(ABLATION_VARIANTS)})")


def run_ablation(
    snippet: Snippet,
    config: OptimizeConfig | None = None,
    weights: LossWeights | None = None,
    variants: Sequence[str] = ABLATION_VARIANTS,
    events: EngineLogger | None = None,
) -> dict[str, SolveResult]:
    """Rozwiązuje tę samą sekwencję dla każdego wariantu funkcji celu."""
    config = config or OptimizeConfig()
    weights = weights or LossWeights()
    settings = {variant: variant_settings(variant, weights) for variant in variants}
    results: dict[str, SolveResult] = {}
    for variant, (variant_weights, use_backward) in settings.items():
        logger.info("ablation variant %s", variant)
        results[variant] = solve_snippet(
            snippet,
            config,
            variant_weights,
            use_backward=use_backward,
            events=events,
        )
    return results
