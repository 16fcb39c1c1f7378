#!/usr/bin/python3
# -----------------------------------------------------------
# Plot training curves and ASG envelope maps
# -----------------------------------------------------------
import os

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
from matplotlib import pyplot  # pylint: disable=wrong-import-position


LOSS_COLUMNS = ["total", "mse", "orientation", "density_l1"]
PSNR_COLUMNS = ["train_psnr", "eval_psnr"]


def read_metrics(metrics_path):
    """
    metrics log (line-delimited JSON) as a dataframe sorted by step
    """
    metrics = pd.read_json(metrics_path, lines=True)
    if metrics.empty:
        return metrics
    return metrics.sort_values("step").reset_index(drop=True)


def plot_curve(metrics_path, out_dir):
    """
    Plot loss terms and PSNR against the training step, returns the written file paths
    """
    metrics = read_metrics(metrics_path)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, columns, log_scale in (("loss", LOSS_COLUMNS, True), ("psnr", PSNR_COLUMNS, False)):
        columns = [column for column in columns if column in metrics.columns]
        if not columns:
            continue
        _, a_x = pyplot.subplots()
        for column in columns:
            curve = metrics[["step", column]].dropna()
            a_x.plot(curve["step"], curve[column], label=column)
        if log_scale:
            a_x.set_yscale("log")
        a_x.legend()
        pyplot.xlabel("step")
        pyplot.ylabel(name)
        pyplot.title(f"training {name}")
        path = os.path.join(out_dir, f"{name}.png")
        pyplot.savefig(path)
        pyplot.close()
        written.append(path)
    return written


def plot_envelopes(maps, out_dir, prefix="lobe"):
    """
    Save per-lobe envelope maps (N, H, 2H) with values in [0, 1] and their sum as equirectangular PNGs
    """
    maps = np.asarray(maps, dtype=np.float64)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for index, lobe_map in enumerate(maps):
        path = os.path.join(out_dir, f"{prefix}_{index:03d}.png")
        pyplot.imsave(path, lobe_map, cmap="inferno", vmin=0.0, vmax=1.0)
        written.append(path)
    path = os.path.join(out_dir, f"{prefix}_sum.png")
    pyplot.imsave(path, maps.sum(axis=0), cmap="inferno")
    written.append(path)
    return written
