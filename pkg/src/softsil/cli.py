"""Command-line interface.

Subcommands: render, shape-opt, pose-opt, grid-search, enumerate,
check-grads, selftest.  Exit codes: 0 success, 1 configuration error,
2 runtime/numeric error.  All outputs land in the --out directory;
randomized commands print the seed they used.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import imageio
from .distributions import parse_distribution
from .errors import ConfigurationError, SoftsilError
from .experiments import (PoseTaskConfig, ShapeTaskConfig, benchmark_distributions,
                          benchmark_tconorms, enumerate_renderers, grid_search,
                          heatmap_csv, run_pose_optimization,
                          run_shape_optimization, write_csv)
from .geometry import Camera, cube, icosphere, lblock, load_obj, \
    normalize_unit_sphere, transform_project
from .gradients import CheckScene, finite_difference_check
from .raster import RenderConfig, hard_render, render_silhouette
from .tconorms import parse_tconorm

log = logging.getLogger("softsil")

DISTRIBUTION_GRAMMAR = (
    "distribution spec grammar: FAMILY[(ARGS)] with FAMILY one of "
    "heaviside, uniform, cubic-hermite, wigner-semicircle, gaussian, "
    "laplace, logistic, hyperbolic-secant, cauchy, reciprocal, gumbel-max, "
    "gumbel-min, exponential, levy, gamma; ARGS from p=VALUE (gamma shape), "
    "shift=VALUE, rev, sq.  Examples: logistic | gamma(p=0.5,rev,sq) | "
    "exponential(rev)")
TCONORM_GRAMMAR = (
    "T-conorm spec grammar: FAMILY[(p=VALUE)] with FAMILY one of max, "
    "probabilistic, einstein, hamacher, frank, yager, aczel-alsina, dombi, "
    "schweizer-sklar, average.  Examples: probabilistic | yager(p=2) | "
    "schweizer-sklar(p=-2)")

BUILTIN_MESHES = {"cube": cube, "lblock": lblock,
                  "icosphere": lambda: icosphere(2)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_mesh(text):
    if text in BUILTIN_MESHES:
        return BUILTIN_MESHES[text]()
    return load_obj(text)


def _seed(args):
    if args.seed is None:
        seed = int.from_bytes(os.urandom(4), "little")
        print(f"seed (auto-chosen): {seed}")
        return seed
    return args.seed


def _ensure_out(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def build_parser():
    parser = _Parser(prog="softsil",
                     description="Differentiable triangle-mesh silhouette "
                                 "rasterizer and experiment harness.",
                     epilog=DISTRIBUTION_GRAMMAR + "\n\n" + TCONORM_GRAMMAR,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_renderer_flags(p, tau_default=0.5):
        p.add_argument("--dist", default="logistic",
                       help=f"distribution spec (default logistic). {DISTRIBUTION_GRAMMAR}")
        p.add_argument("--tconorm", default="probabilistic",
                       help=f"T-conorm spec (default probabilistic). {TCONORM_GRAMMAR}")
        p.add_argument("--tau", type=float, default=tau_default,
                       help=f"temperature in pixels (default {tau_default})")
        p.add_argument("--size", type=int, default=64,
                       help="square image size in pixels (default 64)")

    p = sub.add_parser("render", help="render one soft silhouette")
    p.add_argument("--mesh", required=True,
                   help="OBJ path or builtin: cube, lblock, icosphere")
    add_renderer_flags(p)
    p.add_argument("--azimuth", type=float, default=30.0)
    p.add_argument("--elevation", type=float, default=20.0)
    p.add_argument("--distance", type=float, default=4.0)
    p.add_argument("--fov", type=float, default=40.0)
    p.add_argument("--hard", action="store_true", help="hard binary render")
    p.add_argument("--check-grads", action="store_true",
                   help="run a finite-difference gradient check after rendering")
    p.add_argument("--format", choices=("png", "pgm"), default="png")
    p.add_argument("--out", default="out")

    p = sub.add_parser("shape-opt", help="multi-view shape optimization")
    p.add_argument("--target", default="cube",
                   help="target mesh (OBJ path or builtin; default cube)")
    add_renderer_flags(p, tau_default=0.2)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--azimuths", type=int, default=24)
    p.add_argument("--elevations", type=float, nargs="+", default=[0.0])
    p.add_argument("--lr", type=float, default=10 ** -1.5)
    p.add_argument("--loss", choices=("iou", "mse"), default="iou")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out")

    p = sub.add_parser("pose-opt", help="camera pose recovery")
    p.add_argument("--target", default="lblock")
    add_renderer_flags(p)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--angle-min", type=float, default=15.0)
    p.add_argument("--angle-max", type=float, default=75.0)
    p.add_argument("--lr", type=float, nargs="+", default=[0.1, 0.3])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out")

    p = sub.add_parser("grid-search", help="renderer grid search")
    p.add_argument("--task", choices=("shape", "pose"), default="shape")
    p.add_argument("--preset", choices=("desk", "paper"), default="desk",
                   help="desk: small grids that run in minutes; paper: full grids")
    p.add_argument("--target", default=None,
                   help="target mesh (default: cube for shape, lblock for pose)")
    p.add_argument("--dists", nargs="+", default=None,
                   help="distribution specs (default: preset list)")
    p.add_argument("--tconorms", nargs="+", default=None)
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default: available parallelism)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out")

    p = sub.add_parser("enumerate",
                       help="enumerate the benchmark renderer space")

    p = sub.add_parser("check-grads", help="finite-difference gradient check")
    add_renderer_flags(p, tau_default=0.5)
    p.add_argument("--loss", choices=("iou", "mse"), default="mse")
    p.add_argument("--parameters", choices=("vertices", "camera"),
                   default="vertices")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=None)

    sub.add_parser("selftest", help="run the property suites")
    return parser


def _cmd_render(args):
    mesh = normalize_unit_sphere(_load_mesh(args.mesh))
    camera = Camera(args.azimuth, args.elevation, args.distance, args.fov,
                    args.size, args.size)
    config = RenderConfig(parse_distribution(args.dist),
                          parse_tconorm(args.tconorm), args.tau,
                          args.size, args.size)
    if args.check_grads:
        report = _gradcheck(config, args.loss if hasattr(args, "loss") else "mse",
                            "vertices", 1e-5, 0)
        print(f"gradient check: max_rel_error={report.max_rel_error:.3g} "
              f"on {report.n_checked} parameters "
              f"({len(report.excluded)} kink-excluded)")
    screen = transform_project(mesh, camera)
    image = (hard_render(screen, args.size, args.size) if args.hard
             else render_silhouette(screen, config))
    out = _ensure_out(args)
    path = os.path.join(out, f"render.{args.format}")
    (imageio.write_png if args.format == "png" else imageio.write_pgm)(image, path)
    print(f"wrote {path}")
    print(f"fingerprint: dist={config.distribution.spec_text()} "
          f"tconorm={config.tconorm.spec_text()} tau={config.tau:g}px "
          f"size={args.size}")
    return 0


def _gradcheck(config, loss, parameters, h, seed):
    rng = np.random.default_rng(seed)
    from .geometry import Mesh
    verts = rng.uniform(-0.8, 0.8, (6, 3))
    mesh = Mesh(verts, np.array([[0, 1, 2], [3, 4, 5]]))
    cam = Camera(15, -10, 4.0, 40, 24, 24)
    target = hard_render(transform_project(mesh, Camera(35, 5, 4.0, 40, 24, 24)),
                         24, 24).values
    scene = CheckScene(mesh, cam, target, loss=loss, parameters=parameters)
    return finite_difference_check(scene, config, h=h, seed=seed)


def _cmd_shape(args):
    seed = _seed(args)
    cfg = ShapeTaskConfig(target_mesh=_load_mesh(args.target),
                          n_azimuths=args.azimuths,
                          elevations=tuple(args.elevations),
                          steps=args.steps, loss=args.loss, seed=seed,
                          resolution=args.size)
    renderer = RenderConfig(parse_distribution(args.dist),
                            parse_tconorm(args.tconorm), args.tau,
                            args.size, args.size)
    record = run_shape_optimization(cfg, renderer, args.lr)
    out = _ensure_out(args)
    write_csv([record], os.path.join(out, "shape_opt.csv"))
    print(f"final loss: {record.metric:.6g}")
    print(f"fingerprint: {record.fingerprint}")
    print(f"wrote {os.path.join(out, 'shape_opt.csv')}")
    return 0


def _cmd_pose(args):
    seed = _seed(args)
    cfg = PoseTaskConfig(target_mesh=_load_mesh(args.target),
                         n_trials=args.trials, steps=args.steps,
                         angle_range=(args.angle_min, args.angle_max),
                         lr_grid=tuple(args.lr), seed=seed,
                         resolution=args.size)
    renderer = RenderConfig(parse_distribution(args.dist),
                            parse_tconorm(args.tconorm), args.tau,
                            args.size, args.size)
    record = run_pose_optimization(cfg, renderer)
    out = _ensure_out(args)
    write_csv([record], os.path.join(out, "pose_opt.csv"))
    print(f"success fraction: {record.metric:.3f}")
    print(f"fingerprint: {record.fingerprint}")
    print(f"wrote {os.path.join(out, 'pose_opt.csv')}")
    return 0


DESK_DISTS = ("logistic", "uniform", "gaussian", "gamma(p=0.5,rev)")
DESK_TCONORMS = ("probabilistic", "einstein", "yager(p=2)")
DESK_SHAPE = dict(n_azimuths=8, elevations=(0.0,), steps=30, resolution=32,
                  lr_grid=(10 ** -1.5,),
                  tau_grid=(1.0, 10 ** -0.5, 0.1, 10 ** -1.5))
DESK_POSE = dict(n_trials=5, steps=300, resolution=32, lr_grid=(0.3,))


def _cmd_grid(args):
    seed = _seed(args)
    if args.dists is not None:
        dists = [parse_distribution(t) for t in args.dists]
    elif args.preset == "desk":
        dists = [parse_distribution(t) for t in DESK_DISTS]
    else:
        dists = benchmark_distributions()
    if args.tconorms is not None:
        tcs = [parse_tconorm(t) for t in args.tconorms]
    elif args.preset == "desk":
        tcs = [parse_tconorm(t) for t in DESK_TCONORMS]
    else:
        tcs = benchmark_tconorms()

    target = args.target
    if target is None:
        target = "cube" if args.task == "shape" else "lblock"
    mesh = _load_mesh(target)
    if args.task == "shape":
        extra = DESK_SHAPE if args.preset == "desk" else {}
        cfg = ShapeTaskConfig(target_mesh=mesh, seed=seed, **extra)
    else:
        extra = DESK_POSE if args.preset == "desk" else {}
        cfg = PoseTaskConfig(target_mesh=mesh, seed=seed, **extra)

    records, summary = grid_search(args.task, cfg, dists, tcs, jobs=args.jobs)
    out = _ensure_out(args)
    runs_path = os.path.join(out, f"grid_{args.task}.csv")
    write_csv(records, runs_path)
    heat_path = os.path.join(out, f"grid_{args.task}_cells.csv")
    with open(heat_path, "w", newline="") as fh:
        fh.write(heatmap_csv(summary))
    print(f"{len(records)} runs, {len(summary)} cells")
    if records:
        print(f"fingerprint: {records[0].fingerprint}")
    print(f"wrote {runs_path} and {heat_path}")
    for rec in sorted(summary.values(), key=lambda r: r.metric)[:5]:
        print(f"  {rec.distribution} + {rec.tconorm}: {rec.metric:.6g}")
    return 0


def _cmd_enumerate(_args):
    pairs, report = enumerate_renderers()
    for dist, tc in pairs:
        print(f"{dist.spec_text()} + {tc.spec_text()}")
    print(report)
    return 0


def _cmd_check_grads(args):
    seed = args.seed if args.seed is not None else 0
    config = RenderConfig(parse_distribution(args.dist),
                          parse_tconorm(args.tconorm), args.tau, 24, 24)
    report = _gradcheck(config, args.loss, args.parameters, args.h, seed)
    print(f"max_rel_error={report.max_rel_error:.6g} "
          f"argmax_parameter={report.argmax_parameter} h={report.h:g} "
          f"checked={report.n_checked} kink-excluded={len(report.excluded)}")
    return 0 if report.passed else 2


def _cmd_selftest(_args):
    from .selftest import run_all
    failures = 0
    for name, ok, detail in run_all():
        status = "PASS" if ok else "FAIL"
        print(f"{status} {name}  {detail}")
        failures += 0 if ok else 1
    print(f"{failures} failure(s)")
    return 0 if failures == 0 else 2


def main(argv=None):
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    handlers = {
        "render": _cmd_render,
        "shape-opt": _cmd_shape,
        "pose-opt": _cmd_pose,
        "grid-search": _cmd_grid,
        "enumerate": _cmd_enumerate,
        "check-grads": _cmd_check_grads,
        "selftest": _cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except SoftsilError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
