#!/usr/bin/python3
# -----------------------------------------------------------
# Train model: loss, learning-rate schedule, Adam and the training loop
# -----------------------------------------------------------
import json
import os
import time
from dataclasses import dataclass

import numpy as np
import torch

from app.diff import grad, parameter_set
from app.exceptions import CorruptCheckpoint, EmptyDataset, LengthMismatch, NonFiniteLoss, NonFiniteValue
from app.io import Checkpoint, dataset_rays, load_checkpoint, save_checkpoint
from app.log import logger
from app.metrics import psnr, ssim
from app.model import build_model, torch_dtype
from app.render import render_image, render_rays


BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
METRICS_FILE = "metrics.jsonl"
LATEST_CHECKPOINT = "checkpoint.nrff"


def loss_terms(pred, gt, weights, normals, directions, density_features, alpha, beta):
    """
    the three training terms and their weighted total:
    - mse: mean over rays and channels of (ĉ - c_gt)^2
    - orientation: mean over the B x S sample slots of w_i max(0, d·n_i)^2
    - density_l1: mean of |F_σ| over the given density features
    """
    mse = ((pred - gt) ** 2).mean()
    facing = torch.relu((directions.unsqueeze(1) * normals).sum(dim=-1))
    orientation = (weights * facing ** 2).mean()
    density_l1 = density_features.abs().mean()
    total = mse + alpha * orientation + beta * density_l1
    return {"mse": mse, "orientation": orientation, "density_l1": density_l1, "total": total}


# pylint: disable=too-many-arguments
def loss(pred, gt, weights, normals, directions, density_features, alpha, beta):
    """
    scalar training loss, see loss_terms
    """
    return loss_terms(pred, gt, weights, normals, directions, density_features, alpha, beta)["total"]


def lr_at(step, total_steps, lr0, final_factor=0.1):
    """
    log-linear decay from lr0 at step 0 to final_factor * lr0 at total_steps
    """
    if total_steps <= 0:
        return lr0
    return lr0 * final_factor ** (step / total_steps)


@dataclass
class TrainState:
    """
    model parameters, Adam moments (inside the optimizer), step counter and the sampling RNG
    """
    model: torch.nn.Module
    optimizer: torch.optim.Optimizer
    step: int
    generator: torch.Generator


def build_train_state(config, model=None):
    """
    fresh state for `config`: field tensors and MLP tensors go to separate Adam groups
    """
    model = build_model(config) if model is None else model
    optimizer = torch.optim.Adam(
        [
            {"params": model.field_parameters(), "lr": config.train.lr_field, "group": "field"},
            {"params": model.mlp_parameters(), "lr": config.train.lr_mlp, "group": "mlp"},
        ],
        betas=BETAS,
        eps=ADAM_EPS,
        foreach=False)
    generator = torch.Generator().manual_seed(config.train.seed)
    return TrainState(model=model, optimizer=optimizer, step=0, generator=generator)


def adam_step(state, gradients, lr_field, lr_mlp):
    """
    bias-corrected Adam update of every parameter: field tensors use lr_field, MLP tensors lr_mlp
    """
    params = parameter_set(state.model)
    for name, param in params.items():
        gradient = gradients[name]
        if gradient.shape != param.shape:
            raise LengthMismatch(f"gradient of {name} has shape {tuple(gradient.shape)}, expected {tuple(param.shape)}")
        if not torch.isfinite(gradient).all():
            raise NonFiniteValue("adam step", f"gradient of {name}")
        param.grad = gradient.detach().clone()
    for group in state.optimizer.param_groups:
        group["lr"] = lr_field if group["group"] == "field" else lr_mlp
    state.optimizer.step()
    state.optimizer.zero_grad(set_to_none=True)
    state.step += 1
    return state


def checkpoint_from_state(state, config_document):
    """
    packs parameters, Adam moments and the RNG state into a Checkpoint
    """
    tensors = {}
    for name, param in parameter_set(state.model).items():
        tensors[f"param/{name}"] = param.detach().numpy().copy()
        moments = state.optimizer.state.get(param, {})
        if "exp_avg" in moments:
            tensors[f"adam.exp_avg/{name}"] = moments["exp_avg"].numpy().copy()
            tensors[f"adam.exp_avg_sq/{name}"] = moments["exp_avg_sq"].numpy().copy()
    tensors["rng/state"] = state.generator.get_state().numpy().copy()
    return Checkpoint(config=config_document, step=state.step, tensors=tensors)


def state_from_checkpoint(checkpoint, config):
    """
    rebuilds a TrainState equal to the one the checkpoint was written from
    """
    state = build_train_state(config)
    with torch.no_grad():
        for name, param in parameter_set(state.model).items():
            key = f"param/{name}"
            if key not in checkpoint.tensors:
                raise CorruptCheckpoint("checkpoint", f"missing tensor {key}")
            if tuple(checkpoint.tensors[key].shape) != tuple(param.shape):
                raise CorruptCheckpoint("checkpoint", f"{key} has shape {checkpoint.tensors[key].shape}, "
                                                      f"the configuration expects {tuple(param.shape)}")
            param.copy_(torch.from_numpy(checkpoint.tensors[key]))
            if f"adam.exp_avg/{name}" in checkpoint.tensors:
                state.optimizer.state[param] = {
                    "step": torch.tensor(float(checkpoint.step)),
                    "exp_avg": torch.from_numpy(checkpoint.tensors[f"adam.exp_avg/{name}"].copy()),
                    "exp_avg_sq": torch.from_numpy(checkpoint.tensors[f"adam.exp_avg_sq/{name}"].copy()),
                }
    if "rng/state" in checkpoint.tensors:
        state.generator.set_state(torch.from_numpy(checkpoint.tensors["rng/state"].copy()))
    state.step = checkpoint.step
    return state


def evaluate_views(model, dataset, render_config, split="test", max_views=0):
    """
    renders the views of `split` and returns one record per view with PSNR and SSIM
    """
    records = []
    views = dataset.view_indices(split)
    if max_views:
        views = views[:max_views]
    for view in views:
        image, _ = render_image(model, dataset.cameras[view], render_config)
        records.append({
            "view": int(view),
            "psnr": psnr(image, dataset.images[view]),
            "ssim": ssim(image, dataset.images[view]) if min(image.shape[:2]) >= 11 else float("nan"),
        })
    return records


def _append_record(out_dir, record):
    if out_dir is None:
        return
    with open(os.path.join(out_dir, METRICS_FILE), "a") as f_out:
        f_out.write(json.dumps(record) + "\n")


def _write_checkpoint(state, config_document, out_dir):
    if out_dir is None:
        return
    checkpoint = checkpoint_from_state(state, config_document)
    save_checkpoint(os.path.join(out_dir, f"checkpoint_{state.step:06d}.nrff"), checkpoint)
    save_checkpoint(os.path.join(out_dir, LATEST_CHECKPOINT), checkpoint)


def resume_state(path, config):
    """
    loads a checkpoint written by train_loop and rebuilds its TrainState
    """
    checkpoint = load_checkpoint(path)
    logger.info("resuming from %s at step %s", path, checkpoint.step)
    return state_from_checkpoint(checkpoint, config)


# pylint: disable=too-many-locals,too-many-statements
def train_loop(dataset, config, config_document, out_dir=None, state=None, stop_at=None):
    """
    optimizes the model on random training rays until `config.train.steps` (or `stop_at`)

    dataset: Dataset, training views are the ones tagged "train"
    config: RunConfig
    config_document: dict snapshot of the config stored in checkpoints
    out_dir: str, where metrics.jsonl and checkpoints go, nothing is written when None
    state: TrainState to continue from, a fresh one is built when None
    stop_at: int, stops early at this step (used to interrupt and resume)
    """
    train_cfg = config.train
    dtype = torch_dtype(train_cfg.dtype)
    state = build_train_state(config) if state is None else state
    last_step = train_cfg.steps if stop_at is None else min(stop_at, train_cfg.steps)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    if state.step >= last_step:
        _write_checkpoint(state, config_document, out_dir)
        return state

    rays = dataset_rays(dataset, "train", dtype=dtype)
    if len(rays) == 0:
        raise EmptyDataset("no training rays")

    logger.info("----------- training from step %s to %s on %s rays -------------", state.step, last_step, len(rays))
    started = time.time()
    model = state.model
    while state.step < last_step:
        lr_field = lr_at(state.step, train_cfg.steps, train_cfg.lr_field, train_cfg.lr_final_factor)
        lr_mlp = lr_at(state.step, train_cfg.steps, train_cfg.lr_mlp, train_cfg.lr_final_factor)
        index = torch.randint(len(rays), (train_cfg.batch_rays,), generator=state.generator)
        batch = rays.subset(index)
        terms = {}

        def _loss_fn(_params, batch=batch, terms=terms):
            output = render_rays(model, batch, config.render, generator=state.generator)
            features = model.density.features()
            if train_cfg.density_l1_samples:
                picked = torch.randint(features.numel(), (train_cfg.density_l1_samples,), generator=state.generator)
                features = features[picked]
            terms.update(loss_terms(output.color, batch.gt_colors, output.weights, output.normals,
                                    batch.directions, features, train_cfg.alpha, train_cfg.beta))
            return terms["total"]

        try:
            gradients = grad(_loss_fn, parameter_set(model))
        except NonFiniteValue as error:
            raise NonFiniteLoss(state.step, error) from error
        adam_step(state, gradients, lr_field, lr_mlp)

        record = None
        if train_cfg.log_every and state.step % train_cfg.log_every == 0:
            record = {key: float(value) for key, value in terms.items()}
            record["train_psnr"] = float(-10.0 * np.log10(max(record["mse"], 1e-10)))
        if train_cfg.eval_every and state.step % train_cfg.eval_every == 0 and dataset.view_indices("test"):
            evaluations = evaluate_views(model, dataset, config.render, "test", train_cfg.eval_views)
            record = record or {key: float(value) for key, value in terms.items()}
            record["eval_psnr"] = float(np.mean([item["psnr"] for item in evaluations]))
            record["eval_ssim"] = float(np.nanmean([item["ssim"] for item in evaluations]))
            logger.info("step %s: eval PSNR %.2f dB, SSIM %.4f", state.step, record["eval_psnr"], record["eval_ssim"])
        if record is not None:
            record.update({"step": state.step, "lr_field": lr_field, "lr_mlp": lr_mlp,
                           "wall_time": time.time() - started})
            _append_record(out_dir, record)
            logger.info("step %s: loss %.6f (mse %.6f)", state.step, record["total"], record["mse"])
        if train_cfg.checkpoint_every and state.step % train_cfg.checkpoint_every == 0:
            _write_checkpoint(state, config_document, out_dir)

    _write_checkpoint(state, config_document, out_dir)
    logger.info("----------- training stopped at step %s after %.1f s -------------", state.step, time.time() - started)
    return state
