#!/usr/bin/python3
# -----------------------------------------------------------
# run the radiance feature field renderer
# -----------------------------------------------------------

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np
import torch

from app.config import config_from_dict, config_to_dict, load_config, tiny_config
from app.diff import finite_diff_check, parameter_set
from app.encoding import envelope_map
from app.exceptions import DatasetError, InvalidConfig, NrffError
from app.io import load_checkpoint, load_dataset, load_nerf_synthetic, load_pose, save_depth, save_image
from app.log import logger, set_verbose
from app.model import build_model
from app.plot import plot_curve, plot_envelopes
from app.render import RayBatch, render_image, render_rays
from app.train import (METRICS_FILE, build_train_state, evaluate_views, loss_terms, resume_state,
                       state_from_checkpoint, train_loop)


def _point(value):
    try:
        coords = [float(item) for item in value.split(",")]
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"{value!r} is not a comma separated point") from error
    if len(coords) != 3:
        raise argparse.ArgumentTypeError(f"{value!r} must have three coordinates")
    return coords


def _existing_file(value):
    if not os.path.isfile(value):
        raise argparse.ArgumentTypeError(f"{value!r} does not exist")
    return value


# pylint: disable=too-many-statements
def load_arguments(args):
    """
    Loads arguments from user input through command line
    """
    parser = argparse.ArgumentParser(description="radiance feature field renderer")
    parser.add_argument(
        "--threads",
        dest="threads",
        type=int,
        default=0,
        help="cap on the number of CPU threads used by torch, 0 keeps the torch default")
    parser.add_argument(
        "--verbose",
        dest="verbose",
        default=False,
        action="store_true",
        help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train a model on the dataset of a config")
    train.add_argument("--config", dest="config", type=_existing_file, required=True,
                       help="JSON run configuration")
    train.add_argument("--out", dest="out", type=str, default="output/run",
                       help="folder receiving checkpoints, metrics.jsonl and curves")
    train.add_argument("--seed", dest="seed", type=int, default=None,
                       help="overrides train.seed of the config")
    train.add_argument("--deterministic", dest="deterministic", default=False, action="store_true",
                       help="use deterministic torch algorithms only")
    train.add_argument("--resume", dest="resume", type=_existing_file, default=None,
                       help="checkpoint to continue training from")

    render = commands.add_parser("render", help="render one view of a checkpoint")
    render.add_argument("--checkpoint", dest="checkpoint", type=_existing_file, required=True)
    view = render.add_mutually_exclusive_group(required=True)
    view.add_argument("--camera-index", dest="camera_index", type=int,
                      help="index of a view of the checkpoint dataset within --split")
    view.add_argument("--pose", dest="pose", type=_existing_file,
                      help="JSON file with transform_matrix, camera_angle_x, width and height")
    render.add_argument("--split", dest="split", type=str, default="test", choices=["train", "val", "test"])
    render.add_argument("--out", dest="out", type=str, required=True, help="output PNG")
    render.add_argument("--depth", dest="depth", type=str, default=None, help="optional 16-bit depth PNG")
    render.add_argument("--deterministic", dest="deterministic", default=False, action="store_true")

    evaluate = commands.add_parser("eval", help="PSNR and SSIM of a checkpoint over a split")
    evaluate.add_argument("--checkpoint", dest="checkpoint", type=_existing_file, required=True)
    evaluate.add_argument("--dataset", dest="dataset", type=str, default=None,
                          help="NeRF-synthetic folder, the checkpoint config dataset when omitted")
    evaluate.add_argument("--split", dest="split", type=str, default="test", choices=["train", "val", "test"])
    evaluate.add_argument("--max-views", dest="max_views", type=int, default=0)

    probe = commands.add_parser("probe-asg", help="export the ASG envelopes learnt at a point")
    probe.add_argument("--checkpoint", dest="checkpoint", type=_existing_file, required=True)
    probe.add_argument("--point", dest="point", type=_point, required=True, help="X,Y,Z inside the scene bbox")
    probe.add_argument("--out", dest="out", type=str, required=True, help="output folder")
    probe.add_argument("--height", dest="height", type=int, default=32, help="map height, width is twice")

    gradcheck = commands.add_parser("gradcheck", help="compare gradients with finite differences")
    gradcheck.add_argument("--scale", dest="scale", type=str, default="tiny", choices=["tiny"])
    gradcheck.add_argument("--threshold", dest="threshold", type=float, default=1e-4)
    gradcheck.add_argument("--eps", dest="eps", type=float, default=1e-5)
    gradcheck.add_argument("--seed", dest="seed", type=int, default=0)
    gradcheck.add_argument("--max-coords", dest="max_coords", type=int, default=None,
                           help="random coordinates checked per tensor, all when omitted")

    bench = commands.add_parser("bench", help="time training steps and image rendering")
    bench.add_argument("--config", dest="config", type=_existing_file, required=True)
    bench.add_argument("--steps", dest="steps", type=int, default=10)

    return parser.parse_args(args)


def emit(record):
    """
    machine-readable output: one JSON object per line on stdout
    """
    print(json.dumps(record), flush=True)


def set_deterministic(flag):
    if flag:
        torch.use_deterministic_algorithms(True)


def load_trained_model(checkpoint_path):
    """
    run configuration and model stored in a checkpoint
    """
    checkpoint = load_checkpoint(checkpoint_path)
    config = config_from_dict(checkpoint.config)
    model = state_from_checkpoint(checkpoint, config).model
    model.eval()
    return config, model


def run_train(args):
    config = load_config(args.config)
    train_cfg = config.train
    if args.seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=args.seed)
    if args.deterministic:
        train_cfg = dataclasses.replace(train_cfg, deterministic=True)
    config = dataclasses.replace(config, train=train_cfg)
    set_deterministic(config.train.deterministic)

    dataset = load_dataset(config)
    state = resume_state(args.resume, config) if args.resume else None
    state = train_loop(dataset, config, config_to_dict(config), out_dir=args.out, state=state)

    metrics_path = os.path.join(args.out, METRICS_FILE)
    if os.path.exists(metrics_path) and os.path.getsize(metrics_path) > 0:
        plot_curve(metrics_path, os.path.join(args.out, "figs"))
    emit({"command": "train", "step": state.step, "out": args.out})


def run_render(args):
    set_deterministic(args.deterministic)
    config, model = load_trained_model(args.checkpoint)
    if args.pose:
        camera = load_pose(args.pose)
    else:
        dataset = load_dataset(config)
        views = dataset.view_indices(args.split)
        if not 0 <= args.camera_index < len(views):
            raise DatasetError(f"camera index {args.camera_index} outside the {len(views)} {args.split} views")
        camera = dataset.cameras[views[args.camera_index]]
    image, depth = render_image(model, camera, config.render)
    save_image(args.out, image)
    if args.depth:
        save_depth(args.depth, depth)
    emit({"command": "render", "image": args.out, "depth": args.depth})


def run_eval(args):
    config, model = load_trained_model(args.checkpoint)
    if args.dataset:
        dataset = load_nerf_synthetic(args.dataset, args.split, background=config.render.background,
                                      resolution=config.dataset.resolution, bbox=config.bbox)
    else:
        dataset = load_dataset(config)
    records = evaluate_views(model, dataset, config.render, args.split, args.max_views)
    if not records:
        raise DatasetError(f"no {args.split} views to evaluate")
    for record in records:
        emit({"command": "eval", "split": args.split, **record})
    emit({"command": "eval", "split": args.split, "views": len(records),
          "psnr": float(np.mean([record["psnr"] for record in records])),
          "ssim": float(np.nanmean([record["ssim"] for record in records]))})


def run_probe_asg(args):
    config, model = load_trained_model(args.checkpoint)
    bbox_min, bbox_max = config.bbox
    if any(not low <= value <= high for value, low, high in zip(args.point, bbox_min, bbox_max)):
        raise InvalidConfig(f"point {args.point} lies outside the scene bbox {bbox_min} - {bbox_max}")
    if model.n_lobes == 0:
        raise InvalidConfig("the positional-encoding variant has no ASG lobes to probe")
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        bundle = model.point_params(torch.tensor([args.point], dtype=dtype))
        maps = envelope_map(model.frames, bundle.lambdas[0], bundle.mus[0], args.height).double().numpy()
    written = plot_envelopes(maps, args.out)
    variances = maps.reshape(maps.shape[0], -1).var(axis=1)
    emit({"command": "probe-asg", "point": args.point, "lobes": int(maps.shape[0]), "files": len(written),
          "mean_variance": float(variances.mean()), "max_variance": float(variances.max())})


def gradcheck_problem(seed=0):
    """
    tiny double-precision model and a loss over 4 rays x 8 samples crossing the scene
    """
    config = tiny_config()
    model = build_model(config, seed=seed)
    generator = torch.Generator().manual_seed(seed)
    eye = np.array([2.5, 1.5, 1.0])
    origins = torch.tensor(np.tile(eye, (4, 1)), dtype=torch.float64)
    targets = 0.5 * torch.rand((4, 3), generator=generator, dtype=torch.float64) - 0.25
    directions = targets - origins
    directions = directions / directions.norm(dim=-1, keepdim=True)
    rays = RayBatch(origins, directions, torch.rand((4, 3), generator=generator, dtype=torch.float64))

    def loss_fn(_params):
        output = render_rays(model, rays, config.render)
        terms = loss_terms(output.color, rays.gt_colors, output.weights, output.normals, rays.directions,
                           model.density.features(), config.train.alpha, config.train.beta)
        return terms["total"]

    return model, loss_fn


def run_gradcheck(args):
    model, loss_fn = gradcheck_problem(args.seed)
    started = time.time()
    report = finite_diff_check(loss_fn, parameter_set(model), eps=args.eps, threshold=args.threshold,
                               max_coords=args.max_coords, seed=args.seed)
    emit({"command": "gradcheck", "scale": args.scale, "threshold": args.threshold,
          "seconds": time.time() - started, **report.to_dict()})
    if not report.passed():
        logger.error("gradient check failed: worst relative error %s at %s[%s]",
                     report.worst_relative_error, report.worst_name, report.worst_index)
        return 1
    return 0


def run_bench(args):
    config = load_config(args.config)
    config = dataclasses.replace(config, train=dataclasses.replace(
        config.train, eval_every=0, log_every=0, checkpoint_every=0))
    dataset = load_dataset(config)
    state = build_train_state(config)

    started = time.time()
    state = train_loop(dataset, config, config_to_dict(config), out_dir=None, state=state, stop_at=args.steps)
    train_seconds = max(time.time() - started, 1e-9)

    camera = dataset.cameras[0]
    started = time.time()
    render_image(state.model, camera, config.render)
    render_seconds = max(time.time() - started, 1e-9)
    n_pixels = camera.width * camera.height
    emit({"command": "bench",
          "train_steps": state.step,
          "train_steps_per_second": state.step / train_seconds,
          "train_rays_per_second": state.step * config.train.batch_rays / train_seconds,
          "render_rays_per_second": n_pixels / render_seconds,
          "render_seconds": render_seconds})


COMMANDS = {
    "train": run_train,
    "render": run_render,
    "eval": run_eval,
    "probe-asg": run_probe_asg,
    "gradcheck": run_gradcheck,
    "bench": run_bench,
}


def run(args):
    """
    run the selected sub-command, returns its exit code
    """
    set_verbose(args.verbose)
    if args.threads:
        torch.set_num_threads(args.threads)
    logger.info("------------- %s ----------------", args.command)
    code = COMMANDS[args.command](args)
    logger.info("------------- %s finished ----------------", args.command)
    return code or 0


def main(argv=None):
    """
    run the renderer cli: 0 on success, 1 on runtime failure, 2 on usage error (raised by argparse)
    """
    args = load_arguments(sys.argv[1:] if argv is None else argv)
    try:
        return run(args)
    except NrffError as error:
        logger.error("%s", error)
        return 1


if __name__ == "__main__":
    sys.exit(main())
