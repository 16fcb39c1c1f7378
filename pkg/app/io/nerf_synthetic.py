#!/usr/bin/python3
# -----------------------------------------------------------
# Load NeRF-synthetic scenes: transforms_{split}.json + RGBA PNGs
# -----------------------------------------------------------
import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from app.exceptions import DatasetError
from app.io.dataset import Dataset, merge_datasets
from app.io.images import load_image
from app.log import logger
from app.render import Camera


def _read_transforms(directory, split):
    path = os.path.join(directory, f"transforms_{split}.json")
    if not os.path.exists(path):
        raise DatasetError(f"missing {path}")
    try:
        with open(path) as f_in:
            meta = json.load(f_in)
    except json.JSONDecodeError as error:
        raise DatasetError(f"{path} is not valid JSON: {error}") from error
    if "camera_angle_x" not in meta or "frames" not in meta:
        raise DatasetError(f"{path} needs 'camera_angle_x' and 'frames'")
    return meta


def _frame_pose(frame, index):
    try:
        pose = np.asarray(frame["transform_matrix"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as error:
        raise DatasetError(f"frame {index} has no usable transform_matrix: {error}") from error
    if pose.shape != (4, 4):
        raise DatasetError(f"frame {index} transform_matrix has shape {pose.shape}, expected 4x4")
    return pose


def downsample(image, factor):
    """
    box-filters an (H, W, 3) image by an integer factor
    """
    if factor == 1:
        return image
    height, width = image.shape[0] // factor, image.shape[1] // factor
    blocks = image[:height * factor, :width * factor].reshape(height, factor, width, factor, 3)
    return blocks.mean(axis=(1, 3))


# pylint: disable=too-many-arguments,too-many-locals
def load_nerf_synthetic(directory, split="train", background=(1.0, 1.0, 1.0), resolution=None,
                        bbox=((-1.5, -1.5, -1.5), (1.5, 1.5, 1.5)), workers=4):
    """
    loads one split of a NeRF-synthetic scene directory

    directory: folder holding transforms_{split}.json and the frames it references
    background: RGB the RGBA frames are composited over
    resolution: target width, frames are box-downsampled by width // resolution, which must divide their width
    workers: number of threads decoding PNGs
    """
    meta = _read_transforms(directory, split)
    fov_x = float(meta["camera_angle_x"])
    frames = meta["frames"]
    poses = [_frame_pose(frame, index) for index, frame in enumerate(frames)]
    paths = []
    for index, frame in enumerate(frames):
        if "file_path" not in frame:
            raise DatasetError(f"frame {index} of {split} has no file_path")
        path = os.path.normpath(os.path.join(directory, frame["file_path"]))
        paths.append(path if path.endswith(".png") else f"{path}.png")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        images = list(pool.map(lambda path: load_image(path, background), paths))

    cameras = []
    for index, (pose, image) in enumerate(zip(poses, images)):
        width = image.shape[1]
        if resolution and resolution != width:
            if resolution > width or width % resolution:
                raise DatasetError(f"resolution {resolution} does not divide the {width}px width of {paths[index]}")
            images[index] = image = downsample(image, width // resolution)
        cameras.append(Camera(width=image.shape[1], height=image.shape[0], fov_x=fov_x, pose=pose))
    logger.info("loaded %s %s frames from %s", len(images), split, directory)
    return Dataset(cameras=cameras, images=images, splits=[split] * len(images), bbox=bbox)


def load_nerf_synthetic_scene(directory, background=(1.0, 1.0, 1.0), resolution=None,
                              bbox=((-1.5, -1.5, -1.5), (1.5, 1.5, 1.5))):
    """
    the train split plus whichever of val and test exist, as one dataset
    """
    datasets = [load_nerf_synthetic(directory, "train", background, resolution, bbox)]
    for split in ("val", "test"):
        if os.path.exists(os.path.join(directory, f"transforms_{split}.json")):
            datasets.append(load_nerf_synthetic(directory, split, background, resolution, bbox))
    return merge_datasets(datasets)
