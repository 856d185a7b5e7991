"""Interfejs wiersza poleceń: synth, optimize, eval, gradcheck, upsample, ablate."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from photoba.core.config import Settings, get_settings
from photoba.core.errors import EngineError, UsageError
from photoba.schemas.config import RunConfig
from photoba.services.differentiation import gradient_check, random_check_snippet
from photoba.services.evaluation import evaluate_prediction
from photoba.services.geometry import RigidPose, Snippet, compose_poses
from photoba.services.io_service import (
    build_run_config,
    load_config,
    load_depth,
    load_image,
    load_intrinsics,
    save_depth,
    save_image,
    save_intrinsics,
    save_mask,
    save_poses,
    write_json,
)
from photoba.services.logging_service import EngineLogger, EventStatus
from photoba.services.losses import ObjectiveOptions
from photoba.services.optimizer import run_ablation, solve_snippet
from photoba.services.scenes import apply_corruption, render_snippet
from photoba.services.upsampling import bilinear_upsample_depth, guided_upsample_depth

logger = logging.getLogger(__name__)

Command = Callable[[RunConfig, Settings, EngineLogger], int]


class _Parser(argparse.ArgumentParser):
    """ArgumentParser zgłaszający błąd użycia wyjątkiem zamiast kończyć proces."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{message}\n{self.format_help()}")


def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    group = common.add_argument_group("wspólne")
    group.add_argument("--config", help="Plik konfiguracji `klucz = wartość`; flagi mają pierwszeństwo.")
    group.add_argument("--seed", type=int, help="Ziarno generatora losowego.")
    group.add_argument("--scales", type=int, help="Liczba skal piramidy w funkcji celu.")
    group.add_argument("--clip-q", dest="clip_q", type=float, help="Percentyl obcinania kosztów (100 wyłącza).")
    group.add_argument("--ssim-mix", dest="ssim_mix", type=float, help="Udział SSIM w koszcie fotometrycznym.")
    group.add_argument("--dc-weight", dest="dc_weight", type=float, help="Waga spójności głębi.")
    group.add_argument("--smooth-weight", dest="smooth_weight", type=float, help="Waga gładkości dysparycji.")
    group.add_argument("--cap", type=float, help="Maksymalna głębokość uwzględniana w metrykach.")
    group.add_argument("--out", help="Katalog wyjściowy.")
    group.add_argument("--iterations", type=int, help="Liczba iteracji optymalizatora.")
    return common


def _scene_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scene", help="Nazwa sceny syntetycznej.")
    parser.add_argument("--width", type=int, help="Szerokość obrazu w pikselach.")
    parser.add_argument("--height", type=int, help="Wysokość obrazu w pikselach.")
    parser.add_argument("--channels", type=int, choices=(1, 3), help="Liczba kanałów obrazu.")
    parser.add_argument("--n-frames", dest="n_frames", type=int, help="Liczba klatek sekwencji.")
    parser.add_argument("--patch", help="Poruszający się fragment: x,y,szerokość,wysokość.")
    parser.add_argument("--patch-fraction", dest="patch_fraction", type=float, help="Pole fragmentu względem obrazu.")
    parser.add_argument("--patch-displacement", dest="patch_displacement", help="Przesunięcie fragmentu na klatkę: dx,dy.")
    parser.add_argument("--brightness", help="Przesunięcia jasności kolejnych klatek, rozdzielone przecinkami.")


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = _Parser(prog="photoba", description="Fotometryczne dopasowanie wiązki dla sekwencji monokularnych.")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    synth = commands.add_parser("synth", parents=[common], help="Renderuje scenę syntetyczną do plików.")
    _scene_flags(synth)

    optimize = commands.add_parser("optimize", parents=[common], help="Optymalizuje głębie i pozy sekwencji.")
    optimize.add_argument("--frames", help="Ścieżki klatek PGM/PPM rozdzielone przecinkami.")
    optimize.add_argument("--intrinsics", help="Plik `fx fy cx cy`.")

    evaluate = commands.add_parser("eval", parents=[common], help="Metryki głębi względem ground truth.")
    evaluate.add_argument("--pred", help="Predykcja w formacie PFM.")
    evaluate.add_argument("--gt", help="Ground truth w formacie PFM.")

    check = commands.add_parser("gradcheck", parents=[common], help="Porównanie gradientu z różnicami skończonymi.")
    check.add_argument("--samples", type=int, help="Liczba sprawdzanych współrzędnych na sekwencję.")
    check.add_argument("--snippets", type=int, help="Liczba losowych sekwencji.")

    upsample = commands.add_parser("upsample", parents=[common], help="Zwiększa rozdzielczość mapy głębi.")
    upsample.add_argument("--input", help="Mapa głębi PFM w niskiej rozdzielczości.")
    upsample.add_argument("--guide", help="Obraz prowadzący PGM/PPM (wymagany dla metody guided).")
    upsample.add_argument("--factor", type=int, help="Całkowity współczynnik powiększenia.")
    upsample.add_argument("--method", choices=("bilinear", "guided"), help="Metoda interpolacji.")
    upsample.add_argument("--range-sigma", dest="range_sigma", type=float, help="Szerokość jądra intensywności.")
    upsample.add_argument("--spatial-sigma", dest="spatial_sigma", type=float, help="Szerokość jądra przestrzennego.")

    ablate = commands.add_parser("ablate", parents=[common], help="Porównuje warianty funkcji celu na scenie syntetycznej.")
    _scene_flags(ablate)
    ablate.add_argument("--variants", help="Warianty rozdzielone przecinkami.")
    return parser


def _output_dir(config: RunConfig, required: bool = True) -> Path | None:
    if config.out is None:
        if required:
            raise UsageError("Wymagana flaga --out (albo klucz `out`).")
        return None
    target = Path(config.out)
    target.mkdir(parents=True, exist_ok=True)
    return target


def _require(value: str | None, flag: str) -> str:
    if not value:
        raise UsageError(f"Wymagana flaga {flag}.")
    return value


def _synthesize(config: RunConfig, events: EngineLogger):
    snippet, depths, poses = render_snippet(config.scene_spec(), config.motion_spec())
    corruption = config.corruption()
    if corruption is not None:
        snippet = apply_corruption(snippet, corruption, events)
    return snippet, depths, poses


def cmd_synth(config: RunConfig, settings: Settings, events: EngineLogger) -> int:
    out = _output_dir(config)
    snippet, depths, poses = _synthesize(config, events)
    extension = "pgm" if snippet.channels == 1 else "ppm"
    for index, frame in enumerate(snippet.frames):
        save_image(out / f"frame_{index:02d}.{extension}", frame)
    for index, depth in enumerate(depths):
        save_depth(out / f"depth_gt_{index:02d}.pfm", depth)
    save_intrinsics(out / "intrinsics.txt", snippet.intrinsics)
    absolute = [RigidPose.identity()]
    for pose in poses:
        absolute.append(compose_poses([absolute[-1], pose]))
    save_poses(out / "poses_gt.txt", poses, absolute)
    for index, mask in enumerate(snippet.metadata.get("corruption_masks", [])):
        save_mask(out / f"corruption_mask_{index:02d}.pgm", mask)
    print(f"frames = {snippet.size}")
    print(f"size = {snippet.shape[1]}x{snippet.shape[0]}")
    print(f"out = {out}")
    return 0


def cmd_optimize(config: RunConfig, settings: Settings, events: EngineLogger) -> int:
    if not config.frames:
        raise UsageError("Wymagana flaga --frames (albo klucz `frames`).")
    intrinsics = load_intrinsics(_require(config.intrinsics, "--intrinsics"))
    out = _output_dir(config)
    snippet = Snippet(tuple(load_image(path) for path in config.frames), intrinsics)
    result = solve_snippet(
        snippet,
        config.optimize_config(),
        config.loss_weights(),
        use_backward=config.use_backward,
        events=events,
    )
    for index, depth in enumerate(result.depths):
        save_depth(out / f"depth_{index:02d}.pfm", depth)
    save_poses(out / "poses.txt", result.poses, result.absolute_poses())
    write_json(
        out / "report.json",
        {
            "loss": result.report.model_dump(mode="json"),
            "iterations": result.iterations,
            "converged": result.converged,
            "initial_objective": result.initial_objective,
        },
    )
    (out / "trace.txt").write_text("".join(f"{value!r}\n" for value in result.trace), encoding="utf-8")
    print(f"objective = {result.objective:.6g}")
    print(f"initial_objective = {result.initial_objective:.6g}")
    print(f"iterations = {result.iterations}")
    print(f"converged = {str(result.converged).lower()}")
    return 0


def cmd_eval(config: RunConfig, settings: Settings, events: EngineLogger) -> int:
    pred = load_depth(_require(config.pred, "--pred"), events)
    gt = load_depth(_require(config.gt, "--gt"), events)
    report = evaluate_prediction(pred, gt, config.cap)
    print(report.as_table())
    out = _output_dir(config, required=False)
    if out is not None:
        write_json(out / "metrics.json", report)
    return 0


def cmd_gradcheck(config: RunConfig, settings: Settings, events: EngineLogger) -> int:
    samples = config.samples or settings.gradcheck_samples
    snippets = config.snippets or settings.gradcheck_snippets
    weights = config.loss_weights()
    options = ObjectiveOptions(scales=config.scales, use_backward=config.use_backward)
    reports = []
    for offset in range(snippets):
        seed = config.seed + offset
        snippet, params = random_check_snippet(seed, settings.gradcheck_size, settings.gradcheck_frames)
        report = gradient_check(
            snippet,
            params,
            weights,
            step=settings.gradcheck_step,
            samples=samples,
            seed=seed,
            tolerance=settings.gradcheck_tolerance,
            options=options,
            events=events,
        )
        reports.append(report)
        classes = " ".join(f"{name}={error:.3e}" for name, error in sorted(report.per_class.items()))
        print(f"snippet {seed}: {classes}")
    worst = max(report.max_rel_error for report in reports)
    passed = all(report.passed for report in reports)
    print(f"max relative error: {worst:.3e}")
    print(f"passed = {str(passed).lower()}")
    out = _output_dir(config, required=False)
    if out is not None:
        write_json(out / "gradcheck.json", [report.model_dump(mode="json") for report in reports])
    return 0 if passed else 2


def cmd_upsample(config: RunConfig, settings: Settings, events: EngineLogger) -> int:
    low = load_depth(_require(config.input, "--input"), events)
    out = _output_dir(config)
    if config.method == "guided":
        guide = load_image(_require(config.guide, "--guide"))
        high, fallback = guided_upsample_depth(low, guide, config.factor, config.range_sigma, config.spatial_sigma)
        fallback_count = fallback.count()
    else:
        high = bilinear_upsample_depth(low, config.factor)
        fallback_count = 0
    save_depth(out / "depth_upsampled.pfm", high)
    print(f"size = {high.width}x{high.height}")
    print(f"fallback_pixels = {fallback_count}")
    return 0


def cmd_ablate(config: RunConfig, settings: Settings, events: EngineLogger) -> int:
    snippet, depths, _ = _synthesize(config, events)
    results = run_ablation(snippet, config.optimize_config(), config.loss_weights(), config.variants, events)
    rows = {}
    for variant, result in results.items():
        report = evaluate_prediction(result.depths[0], depths[0], config.cap)
        rows[variant] = {
            "objective": result.objective,
            "iterations": result.iterations,
            "metrics": report.model_dump(mode="json"),
        }
        print(
            f"{variant}: abs_rel = {report.scaled.abs_rel:.3f} rmse = {report.scaled.rmse:.3f} "
            f"delta1 = {report.scaled.delta1:.3f} objective = {result.objective:.6g}"
        )
    out = _output_dir(config, required=False)
    if out is not None:
        write_json(out / "ablation.json", rows)
    return 0


COMMANDS: dict[str, Command] = {
    "synth": cmd_synth,
    "optimize": cmd_optimize,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "upsample": cmd_upsample,
    "ablate": cmd_ablate,
}


def _overrides(args: argparse.Namespace) -> dict[str, object]:
    return {key: value for key, value in vars(args).items() if key not in ("command", "config") and value is not None}


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Uruchamia podkomendę i zwraca kod wyjścia (0, 1 użycie, 2 numeryka, 3 wejście/wyjście)."""
    settings = get_settings()
    logging.basicConfig(level=settings.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    settings.apply_thread_limit()

    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc.message, file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:
        # --help
        return int(exc.code or 0)

    events = EngineLogger()
    config: RunConfig | None = None
    try:
        file_values = load_config(args.config) if args.config else {}
        config = build_run_config(file_values, _overrides(args))
        code = COMMANDS[args.command](config, settings, events)
    except EngineError as exc:
        events.log(component="cli", event_type=args.command, status=EventStatus.error, detail=exc.message)
        print(f"błąd: {exc.message}", file=sys.stderr)
        code = exc.exit_code
    except OSError as exc:
        events.log(component="cli", event_type=args.command, status=EventStatus.error, detail=str(exc))
        print(f"błąd wejścia/wyjścia: {exc}", file=sys.stderr)
        code = 3

    if config is not None and config.out is not None and Path(config.out).is_dir():
        write_json(Path(config.out) / "events.json", events.dump())
    return code
