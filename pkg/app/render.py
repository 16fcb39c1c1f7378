#!/usr/bin/python3
# -----------------------------------------------------------
# Camera rays, ray sampling and volume compositing
# -----------------------------------------------------------
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from app.exceptions import InvalidConfig


@dataclass(frozen=True)
class Camera:
    """
    pinhole camera: image size in pixels, horizontal field of view in radians and a 4x4 camera-to-world pose
    looking down its local -z axis with +y up
    """
    width: int
    height: int
    fov_x: float
    pose: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.fov_x < math.pi:
            raise InvalidConfig(f"fov_x must lie in (0, pi), got {self.fov_x}")
        pose = np.asarray(self.pose, dtype=np.float64)
        if pose.shape != (4, 4):
            raise InvalidConfig(f"camera pose must be 4x4, got {pose.shape}")
        rotation = pose[:3, :3]
        if np.abs(rotation.T @ rotation - np.eye(3)).max() > 1e-4:
            raise InvalidConfig("camera pose rotation block is not orthonormal")
        object.__setattr__(self, "pose", pose)

    @property
    def focal(self):
        return 0.5 * self.width / math.tan(0.5 * self.fov_x)


@dataclass
class RayBatch:
    """
    origins (B, 3), unit directions (B, 3) and optional ground-truth colors (B, 3)
    """
    origins: torch.Tensor
    directions: torch.Tensor
    gt_colors: Optional[torch.Tensor] = None

    def __len__(self):
        return self.origins.shape[0]

    def subset(self, index):
        gt_colors = None if self.gt_colors is None else self.gt_colors[index]
        return RayBatch(self.origins[index], self.directions[index], gt_colors)


@dataclass
class SampleBatch:
    """
    depths t (B, S), sample positions (B, S, 3), intervals Δ (B, S) and the valid mask (B, S)
    """
    t: torch.Tensor
    positions: torch.Tensor
    deltas: torch.Tensor
    valid: torch.Tensor


@dataclass
class RenderOutput:
    """
    per-ray color, expected depth and accumulated weight plus per-sample weights and normals
    """
    color: torch.Tensor
    depth: torch.Tensor
    opacity: torch.Tensor
    weights: torch.Tensor
    normals: torch.Tensor
    samples: SampleBatch


def look_at(eye, target=(0.0, 0.0, 0.0), up=(0.0, 0.0, 1.0)):
    """
    camera-to-world pose placed at `eye` looking at `target`
    """
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    true_up = np.cross(right, forward)
    pose = np.eye(4)
    pose[:3, 0] = right
    pose[:3, 1] = true_up
    pose[:3, 2] = -forward
    pose[:3, 3] = eye
    return pose


def generate_rays(camera, pixel_indices=None, dtype=torch.float32):
    """
    rays through the centres of row-major `pixel_indices` (all pixels when None)
    """
    if pixel_indices is None:
        pixel_indices = np.arange(camera.width * camera.height)
    pixel_indices = np.asarray(pixel_indices)
    rows, cols = np.divmod(pixel_indices, camera.width)
    focal = camera.focal
    local = np.stack([(cols + 0.5 - 0.5 * camera.width) / focal,
                      -(rows + 0.5 - 0.5 * camera.height) / focal,
                      -np.ones(len(pixel_indices))], axis=-1)
    directions = local @ camera.pose[:3, :3].T
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    origins = np.broadcast_to(camera.pose[:3, 3], directions.shape)
    return RayBatch(torch.as_tensor(np.ascontiguousarray(origins), dtype=dtype),
                    torch.as_tensor(directions, dtype=dtype))


def clip_to_bbox(origins, directions, bbox_min, bbox_max):
    """
    slab intersection of rays with an axis-aligned box, returns (t_near, t_far, hit) each of shape (B,)
    t_near is clamped at 0 and a ray misses when t_far <= t_near
    """
    bbox_min = torch.as_tensor(bbox_min, dtype=origins.dtype)
    bbox_max = torch.as_tensor(bbox_max, dtype=origins.dtype)
    tiny = torch.full_like(directions, 1e-12)
    safe = torch.where(directions.abs() < 1e-12, torch.where(directions < 0, -tiny, tiny), directions)
    t_low = (bbox_min - origins) / safe
    t_high = (bbox_max - origins) / safe
    t_enter = torch.minimum(t_low, t_high).amax(dim=-1)
    t_exit = torch.maximum(t_low, t_high).amin(dim=-1)
    t_near = torch.clamp(t_enter, min=0.0)
    hit = t_exit > t_near
    return t_near, t_exit, hit


def sample_points(t_near, t_far, n_samples, jitter=False, generator=None):
    """
    stratified depths in `n_samples` equal bins over [t_near, t_far], bin centres without jitter;
    returns (t, deltas) of shape (B, S) with Δ_i = t_{i+1} - t_i and the last Δ the bin width
    """
    width = (t_far - t_near) / n_samples
    offsets = torch.arange(n_samples, dtype=t_near.dtype)
    if jitter:
        offsets = offsets + torch.rand((t_near.shape[0], n_samples), generator=generator, dtype=t_near.dtype)
    else:
        offsets = (offsets + 0.5).expand(t_near.shape[0], n_samples)
    t = t_near.unsqueeze(-1) + offsets * width.unsqueeze(-1)
    deltas = torch.cat([t[:, 1:] - t[:, :-1], width.unsqueeze(-1)], dim=-1)
    return t, deltas


def sample_rays(rays, bbox_min, bbox_max, n_samples, jitter=False, generator=None):
    """
    clips `rays` to the bbox and samples them; missed rays get zero intervals and a false mask
    """
    t_near, t_far, hit = clip_to_bbox(rays.origins, rays.directions, bbox_min, bbox_max)
    t_far = torch.where(hit, t_far, t_near + 1.0)
    t, deltas = sample_points(t_near, t_far, n_samples, jitter=jitter, generator=generator)
    valid = hit.unsqueeze(-1).expand_as(t)
    deltas = torch.where(valid, deltas, torch.zeros_like(deltas))
    positions = rays.origins.unsqueeze(1) + t.unsqueeze(-1) * rays.directions.unsqueeze(1)
    return SampleBatch(t=t, positions=positions, deltas=deltas, valid=valid)


def composite_weights(sigmas, deltas):
    """
    w_i = exp(-Σ_{j<i} σ_j Δ_j) (1 - exp(-σ_i Δ_i)) along the last axis, returns (weights, final transmittance)
    """
    optical = sigmas * deltas
    accumulated = torch.cumsum(optical, dim=-1)
    transmittance = torch.exp(-(accumulated - optical))
    weights = transmittance * -torch.expm1(-optical)
    return weights, torch.exp(-accumulated[..., -1])


def render_rays(model, rays, render_config, generator=None, weight_threshold=None):
    """
    renders a batch of rays: densities everywhere, appearance only where w > threshold;
    weight of skipped samples goes to the background together with the final transmittance
    """
    threshold = render_config.weight_threshold if weight_threshold is None else weight_threshold
    bbox_min, bbox_max = model.appearance.config.bbox_min, model.appearance.config.bbox_max
    samples = sample_rays(rays, bbox_min, bbox_max, render_config.samples,
                          jitter=render_config.jitter and generator is not None, generator=generator)
    n_rays, n_samples = samples.t.shape
    dtype = samples.positions.dtype

    sigmas = model.density_at(samples.positions.reshape(-1, 3)).reshape(n_rays, n_samples)
    sigmas = torch.where(samples.valid, sigmas, torch.zeros_like(sigmas))
    weights, _ = composite_weights(sigmas, samples.deltas)

    keep = (weights > threshold).detach()
    ray_index, sample_index = torch.nonzero(keep, as_tuple=True)
    colors = torch.zeros((n_rays, n_samples, 3), dtype=dtype)
    normals = torch.zeros((n_rays, n_samples, 3), dtype=dtype)
    if ray_index.numel() > 0:
        point_colors, point_normals = model.shade(samples.positions[ray_index, sample_index],
                                                  rays.directions[ray_index])
        colors = colors.index_put((ray_index, sample_index), point_colors)
        normals = normals.index_put((ray_index, sample_index), point_normals)

    kept_weights = torch.where(keep, weights, torch.zeros_like(weights))
    opacity = kept_weights.sum(dim=-1)
    background = torch.tensor(render_config.background, dtype=dtype)
    color = (kept_weights.unsqueeze(-1) * colors).sum(dim=1) + (1.0 - opacity).unsqueeze(-1) * background
    depth = (weights * samples.t).sum(dim=-1)
    return RenderOutput(color=color, depth=depth, opacity=weights.sum(dim=-1), weights=weights,
                        normals=normals, samples=samples)


def render_image(model, camera, render_config, chunk=None):
    """
    renders a full image without gradients, returns (H, W, 3) colors and (H, W) expected depth as numpy arrays
    """
    chunk = render_config.chunk if chunk is None else chunk
    dtype = next(model.parameters()).dtype
    rays = generate_rays(camera, dtype=dtype)
    colors, depths = [], []
    with torch.no_grad():
        for start in range(0, len(rays), chunk):
            output = render_rays(model, rays.subset(slice(start, start + chunk)), render_config)
            colors.append(output.color)
            depths.append(output.depth)
    color = torch.cat(colors).clamp(0.0, 1.0).reshape(camera.height, camera.width, 3)
    depth = torch.cat(depths).reshape(camera.height, camera.width)
    return color.double().numpy(), depth.double().numpy()
