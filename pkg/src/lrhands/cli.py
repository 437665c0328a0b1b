"""Command-line interface.

Subcommands: train (build an illumination-model pool), run (process a frame
directory to L/R masks), fit-id-model (fit the identification model from
labeled masks), eval (score predictions against truth), synth (render a
synthetic scene).  Exit codes: 0 success, 1 usage error, 2 data error,
3 internal error.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import synth
from .errors import LRHandsError
from .evaluate import evaluate_directories, save_report
from .forest import ForestParams
from .geometry import extract_contours, extract_features, fit_ellipse
from .identify import (DEFAULT_MODEL, HandLabel, fit_model, load_lr_model,
                       save_lr_model)
from .imaging import (load_binary_mask, load_frames, list_image_files,
                      load_lrmask_dir, resample, resample_mask, save_lrmask)
from .pipeline import PipelineConfig, process_video
from .pool import build_pool, load_pool, save_pool

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; spec wants 1
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser():
    parser = _Parser(prog="lrhands",
                     description="Left/right hand segmentation for egocentric video")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[], help="train an illumination-model pool")
    p.add_argument("--frames", required=True, help="directory of training frames")
    p.add_argument("--masks", required=True, help="directory of binary hand masks")
    p.add_argument("--out", required=True, help="output pool file (.npz)")
    p.add_argument("--trees", type=int, default=10)
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--bootstrap", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=600,
                   help="working width; frames and masks are resampled to it")
    p.add_argument("--cap", type=int, default=50000,
                   help="per-class pixel cap per training pair")

    p = sub.add_parser("run", help="segment and identify a frame directory")
    p.add_argument("--pool", required=True)
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True, help="output directory for mask files")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--k", type=int, default=None, help="models to fuse")
    p.add_argument("--lambda", dest="fuse_lambda", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--width", type=int, default=None, help="working width")
    p.add_argument("--sp-target", type=int, default=None)
    p.add_argument("--sp-m", type=float, default=None)
    p.add_argument("--no-split", action="store_true",
                   help="disable occlusion detection and splitting")
    p.add_argument("--lr-model", help="identification model file (default: built-in)")

    p = sub.add_parser("fit-id-model", help="fit the L/R model from labeled masks")
    p.add_argument("--masks", required=True,
                   help="3-class masks or left/right subdirectories")
    p.add_argument("--out", required=True)
    p.add_argument("--min-per-class", type=int, default=30)

    p = sub.add_parser("eval", help="score predicted masks against truth masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report", required=True, help="report JSON path")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("synth", help="render a synthetic scene with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=["drift", "merge", "regimes"], default="merge")
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--speed", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_train(args):
    frames = load_frames(args.frames)
    mask_files = list_image_files(args.masks)
    if len(mask_files) != len(frames):
        raise LRHandsError(
            f"{len(frames)} frames but {len(mask_files)} masks; counts must match")
    pairs = []
    for frame, mask_file in zip(frames, mask_files):
        mask = load_binary_mask(mask_file)
        pairs.append((resample(frame, args.width),
                      resample_mask(mask, args.width).astype(bool)))
    params = ForestParams(n_trees=args.trees, max_depth=args.depth,
                          min_leaf_samples=args.min_leaf,
                          bootstrap_fraction=args.bootstrap, rng_seed=args.seed)
    pool = build_pool(pairs, params, cap_per_class=args.cap)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_pool(pool, args.out)
    print(f"pool: {len(pool)} illumination models -> {args.out}")
    return 0


def _cmd_run(args):
    overrides = {
        "sample_stride": args.stride,
        "k_fuse": args.k,
        "fuse_lambda": args.fuse_lambda,
        "threshold": args.threshold,
        "working_width": args.width,
        "sp_target_count": args.sp_target,
        "sp_m": args.sp_m,
    }
    if args.config:
        config = PipelineConfig.from_file(args.config, **overrides)
    else:
        config = PipelineConfig(**{k: v for k, v in overrides.items() if v is not None})
    if args.no_split:
        config.split_enabled = False

    pool = load_pool(args.pool)
    if config.k_fuse > len(pool):
        config.k_fuse = len(pool)
        log.warning("k_fuse reduced to pool size %d", len(pool))
    lr_model = load_lr_model(args.lr_model) if args.lr_model else DEFAULT_MODEL
    frames = load_frames(args.frames)
    results = process_video(frames, config, pool, lr_model)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = {f.index: f.name for f in frames}
    flags, segments = {}, {}
    for result in results:
        name = names[result.frame_index]
        save_lrmask(result.lr_mask, out / f"{name}.png")
        flags[name] = bool(result.occlusion_flag)
        segments[name] = [
            {"label": rec.label.value, "x": round(rec.features.x, 6),
             "theta": round(rec.features.theta, 6),
             "ratio": None if np.isinf(rec.ratio) else round(rec.ratio, 6)}
            for rec in result.segments
        ]
    (out / "results.json").write_text(json.dumps(
        {"occlusion_flags": flags, "segments": segments, "config": asdict(config)},
        indent=2, sort_keys=True))
    print(f"processed {len(results)} frames -> {out}")
    return 0


def _cmd_fit_id_model(args):
    _, masks = load_lrmask_dir(args.masks)
    samples = []
    for mask in masks:
        h, w = mask.shape
        for value, label in ((1, HandLabel.LEFT), (2, HandLabel.RIGHT)):
            contours = extract_contours(mask == value)
            if not contours:
                continue
            largest = max(contours, key=lambda c: c.area)
            try:
                feats = extract_features(fit_ellipse(largest), (w, h))
            except LRHandsError:
                continue
            samples.append((feats, label))
    model = fit_model(samples, min_per_class=args.min_per_class)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_lr_model(model, args.out)
    print(f"fitted identification model from {len(samples)} segments -> {args.out}")
    return 0


def _cmd_eval(args):
    report = evaluate_directories(args.pred, args.truth)
    save_report(report, args.report, figures=not args.no_figures)
    agg = report["aggregate"]
    print(f"frames: {agg['frames']}  binary F1: {agg['binary_f1']['mean']:.4f}")
    diag = np.array(agg["confusion_3class"]["normalized"]).diagonal()
    print("3-class diagonal:", " ".join(f"{v:.4f}" for v in diag))
    print(f"report -> {args.report}")
    return 0


def _cmd_synth(args):
    kwargs = {}
    if args.frames:
        kwargs["n_frames"] = args.frames
    if args.speed:
        kwargs["speed"] = args.speed
    if args.preset == "merge":
        params = synth.merge_scene(seed=args.seed, **kwargs)
    elif args.preset == "drift":
        params = synth.drift_scene(seed=args.seed, **kwargs)
    else:
        kwargs.pop("speed", None)
        base = synth.drift_scene(seed=args.seed, left_color=(180, 130, 100),
                                 right_color=(180, 130, 100),
                                 background=(110, 170, 190), **kwargs)
        params = synth.two_regime_params(base=base)
    scene = synth.generate_scene(params)
    frames_dir, masks_dir = synth.write_scene(scene, args.out, params)
    occluded = sum(1 for _, _, flag in scene if flag)
    print(f"{len(scene)} frames ({occluded} occluded) -> {frames_dir} / {masks_dir}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "run": _cmd_run,
    "fit-id-model": _cmd_fit_id_model,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (LRHandsError, FileNotFoundError, NotADirectoryError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal error
        log.exception("internal error: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
