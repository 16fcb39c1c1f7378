#!/usr/bin/python3
# -----------------------------------------------------------
# Build the dataset a run configuration asks for
# -----------------------------------------------------------
import dataclasses

from app.io.nerf_synthetic import load_nerf_synthetic_scene
from app.io.procedural import load_scene, procedural_scene
from app.log import logger


def load_dataset(config):
    """
    procedural or NeRF-synthetic dataset of a RunConfig, composited over the render background
    and bounded by the field bbox
    """
    dataset_cfg = config.dataset
    logger.info("----------- loading %s dataset -------------", dataset_cfg.kind)
    if dataset_cfg.kind == "nerf_synthetic":
        return load_nerf_synthetic_scene(dataset_cfg.path, background=config.render.background,
                                         resolution=dataset_cfg.resolution, bbox=config.bbox)
    spec = dataclasses.replace(load_scene(dataset_cfg.scene), background=config.render.background)
    return procedural_scene(spec, dataset_cfg.n_train, dataset_cfg.resolution, dataset_cfg.seed,
                            n_test=dataset_cfg.n_test, radius=dataset_cfg.camera_radius,
                            fov_x=dataset_cfg.fov_x, bbox=config.bbox)
