#!/usr/bin/python3
# -----------------------------------------------------------
# PNG images, depth maps and pose files
# -----------------------------------------------------------
import json
import os

import imageio.v2 as imageio
import numpy as np

from app.exceptions import DatasetError
from app.render import Camera


def _make_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def to_uint8(image):
    """
    [0, 1] floats to 8-bit values, rounding to nearest
    """
    return np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(path, image):
    """
    writes an (H, W, 3) image in [0, 1] as an 8-bit RGB PNG
    """
    _make_parent(path)
    imageio.imwrite(path, to_uint8(image))


def save_depth(path, depth, max_depth=None):
    """
    writes an (H, W) expected-depth map as a 16-bit grayscale PNG, 65535 standing for `max_depth`
    (the largest depth of the map when None)
    """
    depth = np.asarray(depth, dtype=np.float64)
    max_depth = float(depth.max()) if max_depth is None else float(max_depth)
    scaled = depth / max_depth if max_depth > 0 else np.zeros_like(depth)
    _make_parent(path)
    imageio.imwrite(path, np.round(np.clip(scaled, 0.0, 1.0) * 65535.0).astype(np.uint16))


def load_image(path, background=(1.0, 1.0, 1.0)):
    """
    reads an 8 or 16-bit PNG as (H, W, 3) float64 in [0, 1], RGBA images composited over `background`
    """
    if not os.path.exists(path):
        raise DatasetError(f"missing image {path}")
    raw = imageio.imread(path)
    scale = 255.0 if raw.dtype == np.uint8 else 65535.0
    image = np.asarray(raw, dtype=np.float64) / scale
    if image.ndim == 2:
        image = np.repeat(image[..., None], 3, axis=-1)
    if image.shape[-1] == 4:
        alpha = image[..., 3:]
        image = image[..., :3] * alpha + (1.0 - alpha) * np.asarray(background, dtype=np.float64)
    return np.clip(image[..., :3], 0.0, 1.0)


def load_pose(path):
    """
    reads a camera from a JSON file with keys transform_matrix, camera_angle_x, width and height
    """
    try:
        with open(path) as f_in:
            document = json.load(f_in)
        return Camera(width=int(document["width"]), height=int(document["height"]),
                      fov_x=float(document["camera_angle_x"]),
                      pose=np.asarray(document["transform_matrix"], dtype=np.float64))
    except OSError as error:
        raise DatasetError(f"cannot read pose file {path}: {error}") from error
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as error:
        raise DatasetError(f"malformed pose file {path}: {error}") from error
