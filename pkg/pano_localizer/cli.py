"""
CLI - Pano Localizer
Punto de entrada único: gen-scene, validate, render, gen-queries, localize, evaluate
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

from .adapters.storage.image_adapter import colorize, load_semantic, save_bundle, save_color
from .adapters.storage.query_adapter import load_query_set, write_query_set
from .adapters.storage.scene_adapter import JsonSceneRepository, parse_scene
from .adapters.tracking.mlflow_adapter import MLflowTracker
from .config import RunConfig, config, resolve_run_config
from .domain.entities import CameraIntrinsics, Pose
from .domain.evaluation import sample_query_poses
from .domain.geometry import rotation_from_ypr
from .domain.renderer import render_panorama, render_perspective
from .domain.scene_model import (
    generate_synthetic_scene,
    reachable_rooms,
    room_polygon,
    scene_to_primitives,
    validate_scene,
)
from .pipeline.evaluate import EvaluationPipeline, generate_suite, load_case
from .pipeline.localize import LocalizationPipeline

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def parse_range(text: str, cast=float) -> Tuple[Any, Any]:
    """'4..8' -> (4, 8); un valor suelto fija ambos extremos"""
    lo, sep, hi = text.partition("..")
    try:
        low = cast(lo)
        high = cast(hi) if sep else low
    except ValueError:
        raise argparse.ArgumentTypeError(f"Rango inválido: {text!r} (formato a..b)")
    if high < low:
        raise argparse.ArgumentTypeError(f"Rango vacío: {text!r}")
    return low, high


def parse_vector(text: str) -> Tuple[float, float, float]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        values = ()
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"Se esperaba x,y,z: {text!r}")
    return values


# ---------------------------------------------------------------------------
# Overrides: flags -> documento parcial de RunConfig
# ---------------------------------------------------------------------------


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    rooms = get("rooms")
    room_size = get("room_size")
    return {
        "scene": str(get("scene")) if get("scene") else None,
        "cache_dir": get("cache_dir"),
        "seed": get("seed"),
        "threads": get("threads"),
        "top_n": get("top_n"),
        "refine_rounds": get("refine_rounds"),
        "metrics_mode": get("metrics_mode"),
        "grid": {
            "spacing": get("spacing"),
            "mode": get("grid_mode"),
            "h_pano": get("h_pano"),
            "pano_width": get("pano_width"),
            "pano_height": get("pano_width") // 2 if get("pano_width") else None,
        },
        "hypotheses": {"yaw_step_deg": get("yaw_step")},
        "refine": {"max_evaluations": get("max_evals")},
        "query": {
            "hfov_deg": get("fov"),
            "tilt_max_deg": get("tilt"),
            "resolution": get("resolution"),
        },
        "scene_gen": {
            "min_rooms": rooms[0] if rooms else None,
            "max_rooms": rooms[1] if rooms else None,
            "min_room_size": room_size[0] if room_size else None,
            "max_room_size": room_size[1] if room_size else None,
            "door_density": get("door_density"),
            "window_density": get("window_density"),
            "extra_connection_density": get("extra_connection_density"),
        },
    }


def build_run_config(args: argparse.Namespace) -> RunConfig:
    return resolve_run_config(args.config, _overrides(args))


# ---------------------------------------------------------------------------
# Subcomandos
# ---------------------------------------------------------------------------


def cmd_gen_scene(args: argparse.Namespace) -> int:
    run_config = build_run_config(args)
    scene = generate_synthetic_scene(run_config.seed, run_config.scene_gen.to_domain())
    problems = validate_scene(scene)
    if problems:
        raise ValueError(f"Escena generada inválida: {'; '.join(problems)}")
    reached = reachable_rooms(scene, scene.rooms[0].id)
    JsonSceneRepository().save(scene, args.output)
    run_config.write(Path(args.output).parent)
    logger.info(
        f"✅ Escena seed={run_config.seed}: {len(scene.rooms)} habitaciones, "
        f"{len(scene.wall_items)} items, {len(reached)}/{len(scene.rooms)} alcanzables"
    )
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    scene = parse_scene(Path(args.scene).read_bytes())
    problems = validate_scene(scene)
    if problems:
        for problem in problems:
            logger.error(f"❌ {problem}")
        logger.error(f"❌ {args.scene}: {len(problems)} violaciones")
        return 1
    logger.info(f"✅ {args.scene}: escena válida ({len(scene.rooms)} habitaciones)")
    return 0


def _default_position(scene, h_pano: float) -> Tuple[float, float, float]:
    room = scene.rooms[0]
    point = room_polygon(room).representative_point()
    return (point.x, point.y, room.floor_z + h_pano)


def cmd_render(args: argparse.Namespace) -> int:
    run_config = build_run_config(args)
    scene = JsonSceneRepository().load(args.scene)
    prims = scene_to_primitives(scene)
    position = args.position or _default_position(scene, run_config.grid.h_pano)

    if args.mode == "pano":
        bundle = render_panorama(prims, position, run_config.grid.pano_width, run_config.grid.pano_height)
    else:
        pose = Pose(tuple(rotation_from_ypr(args.yaw, args.pitch, args.roll)), position)
        size = run_config.query.resolution
        bundle = render_perspective(prims, pose, CameraIntrinsics(run_config.hfov, size, size))

    prefix = save_bundle(bundle, args.output)
    save_color(colorize(bundle.semantic), prefix.with_name(prefix.name + ".color.png"))
    run_config.write(prefix.parent)
    h, w = bundle.semantic.shape
    logger.info(f"✅ Render {args.mode} {w}x{h} en {position} -> {prefix}.*.png")
    return 0


def cmd_gen_queries(args: argparse.Namespace) -> int:
    run_config = build_run_config(args)
    repo = JsonSceneRepository()
    scene = repo.load(args.scene)
    queries = sample_query_poses(
        scene,
        scene_to_primitives(scene),
        args.count,
        run_config.query.to_domain(),
        seed=run_config.seed,
        scene_id=Path(args.scene).stem,
    )
    write_query_set(queries, args.output, repo.scene_hash(scene))
    run_config.write(args.output)
    return 0


def cmd_localize(args: argparse.Namespace) -> int:
    run_config = build_run_config(args)
    gt_pose: Optional[Pose] = None
    if args.queries is not None:
        _, queries = load_query_set(args.queries)
        matches = [q for q in queries if q.index == args.query_id]
        if not matches:
            raise ValueError(f"Query {args.query_id} no encontrada en {args.queries}")
        query_sem, hfov, gt_pose = matches[0].semantic, matches[0].hfov, matches[0].pose
    else:
        query_sem, hfov = load_semantic(args.query), run_config.hfov

    pipeline = LocalizationPipeline(run_config)
    output = pipeline.run(args.scene, query_sem, hfov, args.output, gt_pose=gt_pose, debug=args.debug)
    logger.info(f"📊 {len(output['result'].candidates)} candidatos en {output['path']}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    run_config = build_run_config(args)
    if args.scene is not None:
        if args.queries is None:
            raise ValueError("--scene requiere --queries")
        cases = [load_case(args.scene, args.queries)]
    else:
        cases = generate_suite(run_config, args.num_scenes, args.queries_per_scene)

    tracker = None
    if args.track:
        tracker = MLflowTracker(config.mlflow_tracking_uri, config.mlflow_experiment_name)

    pipeline = EvaluationPipeline(run_config, tracker=tracker, debug_queries=args.debug)
    metrics, paths = pipeline.run_complete_pipeline(cases, args.output)
    for name, value in metrics.recall.items():
        logger.info(f"   recall@{name}: {value:.2f}%")
    logger.info(f"   inliers: {metrics.inlier_pct:.2f}%, top-k@1m: {metrics.topk_recall_pct:.2f}%")
    logger.info(f"💾 Reporte en {paths['metrics'].parent}")
    return 0


COMMANDS = {
    "gen-scene": cmd_gen_scene,
    "validate": cmd_validate,
    "render": cmd_render,
    "gen-queries": cmd_gen_queries,
    "localize": cmd_localize,
    "evaluate": cmd_evaluate,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_grid_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("rejilla de referencias")
    group.add_argument("--spacing", type=float, help="Separación de la rejilla en metros (1.2)")
    group.add_argument("--grid-mode", choices=["global", "local"], help="Rejilla global o por habitación (local)")
    group.add_argument("--h-pano", type=float, help="Altura de los panoramas sobre el suelo (1.5)")
    group.add_argument("--pano-width", type=int, help="Ancho de los panoramas; alto = ancho / 2 (256)")
    group.add_argument("--cache-dir", help="Caché de referencias (PANO_LOCALIZER_CACHE_DIR)")


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    _add_grid_flags(parser)
    group = parser.add_argument_group("matching y refinamiento")
    group.add_argument("--top-n", type=int, help="Candidatos a refinar (3)")
    group.add_argument("--refine-rounds", type=int, help="Rondas de re-render + matching (1)")
    group.add_argument("--yaw-step", type=float, help="Paso de yaw de las hipótesis en grados (5)")
    group.add_argument("--max-evals", type=int, help="Presupuesto de evaluaciones del refinamiento (400)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Documento JSON de configuración (los flags lo sobreescriben)")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING... (LOG_LEVEL)")
    common.add_argument("--threads", type=int, help="Hilos de trabajo, 0 = automático (1)")
    common.add_argument("--seed", type=int, help="Semilla de toda la aleatoriedad (0)")

    parser = argparse.ArgumentParser(
        prog="pano-localizer",
        description="Localización 6D de imágenes semánticas contra panoramas renderizados",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Ejemplos:
  pano-localizer gen-scene --seed 1 --rooms 4..8 -o s.json
  pano-localizer gen-queries s.json --fov 90 --count 50 -o queries/
  pano-localizer localize s.json --queries queries/ --query-id 0 --top-n 3 -o out/
  pano-localizer evaluate --num-scenes 20 --queries-per-scene 50 -o report/
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", parents=[common], help="Genera un apartamento sintético")
    p.add_argument("--rooms", type=lambda s: parse_range(s, int), help="Rango de habitaciones (4..8)")
    p.add_argument("--room-size", type=parse_range, help="Lado de habitación en metros (3..6)")
    p.add_argument("--door-density", type=float)
    p.add_argument("--window-density", type=float)
    p.add_argument("--extra-connection-density", type=float)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("validate", parents=[common], help="Valida un documento de escena")
    p.add_argument("scene", type=Path)

    p = sub.add_parser("render", parents=[common], help="Renderiza panorama o vista perspectiva")
    p.add_argument("scene", type=Path)
    p.add_argument("--mode", choices=["pano", "persp"], default="pano")
    p.add_argument("--position", type=parse_vector, help="x,y,z (por defecto: primera habitación a h_pano)")
    p.add_argument("--yaw", type=float, default=0.0)
    p.add_argument("--pitch", type=float, default=0.0)
    p.add_argument("--roll", type=float, default=0.0)
    p.add_argument("--fov", type=float, help="hfov de la vista perspectiva en grados (90)")
    p.add_argument("--resolution", type=int, help="Lado de la vista perspectiva en píxeles (128)")
    p.add_argument("--pano-width", type=int, help="Ancho del panorama; alto = ancho / 2 (256)")
    p.add_argument("--h-pano", type=float)
    p.add_argument("-o", "--output", type=Path, required=True, help="Prefijo de los PNG")

    p = sub.add_parser("gen-queries", parents=[common], help="Muestrea queries de test con pose conocida")
    p.add_argument("scene", type=Path)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--fov", type=float, help="hfov en grados: 60, 90, 120 (90)")
    p.add_argument("--tilt", type=float, help="Pitch/roll máximos en grados (10)")
    p.add_argument("--resolution", type=int, help="Lado de las queries en píxeles (128)")
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("localize", parents=[common], help="Localiza una query en una escena")
    p.add_argument("scene", type=Path)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--query", type=Path, help="PNG semántico de la query (con --fov)")
    source.add_argument("--queries", type=Path, help="Directorio de gen-queries (con --query-id)")
    p.add_argument("--query-id", type=int, default=0)
    p.add_argument("--fov", type=float, help="hfov de --query en grados (90)")
    p.add_argument("--debug", action="store_true", help="Escribe debug.png")
    p.add_argument("-o", "--output", type=Path, required=True)
    _add_pipeline_flags(p)

    p = sub.add_parser("evaluate", parents=[common], help="Evaluación por lotes y métricas")
    p.add_argument("--scene", type=Path, help="Escena a evaluar (con --queries); sin ella se genera la suite")
    p.add_argument("--queries", type=Path)
    p.add_argument("--num-scenes", type=int, default=20)
    p.add_argument("--queries-per-scene", type=int, default=50)
    p.add_argument("--fov", type=float, help="hfov de las queries generadas en grados (90)")
    p.add_argument("--tilt", type=float)
    p.add_argument("--metrics-mode", choices=["2d", "3d"])
    p.add_argument("--debug", type=int, default=0, metavar="N", help="Paneles de debug para las N primeras queries")
    p.add_argument("--track", action="store_true", help="Registra el run en MLflow")
    p.add_argument("-o", "--output", type=Path, required=True)
    _add_pipeline_flags(p)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=(args.log_level or config.log_level).upper(), format=LOG_FORMAT, force=True)

    try:
        return COMMANDS[args.command](args)
    except Exception as e:
        logger.error(f"❌ {args.command} falló: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
