#!/usr/bin/python3
# -----------------------------------------------------------
# Dataset container shared by the loaders and the training loop
# -----------------------------------------------------------
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import torch

from app.exceptions import DatasetError
from app.render import RayBatch, generate_rays


SPLITS = ("train", "val", "test")


@dataclass
class Dataset:
    """
    posed views of one scene

    cameras: list of Camera
    images: list of (H, W, 3) float64 arrays in [0, 1]
    splits: one tag per view, in SPLITS
    bbox: (bbox_min, bbox_max) of the scene
    """
    cameras: List = field(default_factory=list)
    images: List[np.ndarray] = field(default_factory=list)
    splits: List[str] = field(default_factory=list)
    bbox: Tuple = ((-1.5, -1.5, -1.5), (1.5, 1.5, 1.5))

    def __post_init__(self):
        if not len(self.cameras) == len(self.images) == len(self.splits):
            raise DatasetError(f"{len(self.cameras)} cameras, {len(self.images)} images "
                               f"and {len(self.splits)} split tags")
        unknown = set(self.splits) - set(SPLITS)
        if unknown:
            raise DatasetError(f"unknown split tags {sorted(unknown)}")
        shapes = {image.shape for image in self.images}
        if len(shapes) > 1:
            raise DatasetError(f"images have different dimensions: {sorted(shapes)}")
        for camera, image in zip(self.cameras, self.images):
            if image.shape != (camera.height, camera.width, 3):
                raise DatasetError(f"image of shape {image.shape} does not match a "
                                   f"{camera.width}x{camera.height} camera")

    def __len__(self):
        return len(self.images)

    def view_indices(self, split):
        return [index for index, tag in enumerate(self.splits) if tag == split]


def merge_datasets(datasets):
    """
    concatenates datasets of the same scene, e.g. the train and test splits of one directory
    """
    merged = Dataset(bbox=datasets[0].bbox)
    for dataset in datasets:
        merged.cameras.extend(dataset.cameras)
        merged.images.extend(dataset.images)
        merged.splits.extend(dataset.splits)
    merged.__post_init__()
    return merged


def dataset_rays(dataset, split="train", dtype=torch.float32):
    """
    every pixel ray of the views tagged `split`, with the pixel colors as ground truth
    """
    origins, directions, colors = [], [], []
    for view in dataset.view_indices(split):
        rays = generate_rays(dataset.cameras[view], dtype=dtype)
        origins.append(rays.origins)
        directions.append(rays.directions)
        colors.append(torch.as_tensor(dataset.images[view].reshape(-1, 3), dtype=dtype))
    if not origins:
        empty = torch.zeros((0, 3), dtype=dtype)
        return RayBatch(empty, empty.clone(), empty.clone())
    return RayBatch(torch.cat(origins), torch.cat(directions), torch.cat(colors))
