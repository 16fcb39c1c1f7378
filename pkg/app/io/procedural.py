#!/usr/bin/python3
# -----------------------------------------------------------
# Procedural scenes rendered by an analytic ray tracer
# (Lambertian + Phong specular, no shadows), used as ground truth at desk scale
# -----------------------------------------------------------
import json
import math
import os
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import torch

from app.exceptions import DatasetError
from app.io.dataset import Dataset
from app.log import logger
from app.render import Camera, generate_rays, look_at


HIT_EPS = 1e-6
DEFAULT_FOV_X = 0.6911112070083618


@dataclass(frozen=True)
class Sphere:
    center: Tuple[float, float, float]
    radius: float
    albedo: Tuple[float, float, float] = (0.5, 0.5, 0.5)
    specular: float = 0.0
    shininess: float = 32.0


@dataclass(frozen=True)
class Patch:
    """
    square of half-size `extent` centred at `center` and orthogonal to `normal`, lit from both sides
    """
    center: Tuple[float, float, float]
    normal: Tuple[float, float, float]
    extent: float
    albedo: Tuple[float, float, float] = (0.5, 0.5, 0.5)
    specular: float = 0.0
    shininess: float = 32.0


@dataclass(frozen=True)
class Light:
    """
    kind "point": `vector` is the light position
    kind "directional": `vector` points from the surface toward the light
    """
    kind: str
    vector: Tuple[float, float, float]
    intensity: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("point", "directional"):
            raise DatasetError(f"light kind must be 'point' or 'directional', got {self.kind}")


@dataclass(frozen=True)
class SceneSpec:
    spheres: List[Sphere] = field(default_factory=list)
    patches: List[Patch] = field(default_factory=list)
    lights: List[Light] = field(default_factory=list)
    ambient: float = 0.1
    background: Tuple[float, float, float] = (1.0, 1.0, 1.0)


def default_scene():
    """
    diffuse gray sphere standing on a diffuse floor, lit from above
    """
    return SceneSpec(
        spheres=[Sphere(center=(0.0, 0.0, 0.0), radius=0.8, albedo=(0.6, 0.6, 0.6))],
        patches=[Patch(center=(0.0, 0.0, -0.8), normal=(0.0, 0.0, 1.0), extent=1.2, albedo=(0.7, 0.5, 0.3))],
        lights=[Light(kind="directional", vector=(0.3, 0.2, 1.0), intensity=(0.9, 0.9, 0.9))])


def specular_scene():
    """
    glossy red sphere with a strong specular lobe next to a small diffuse one, point-lit
    """
    return SceneSpec(
        spheres=[
            Sphere(center=(0.0, 0.0, 0.0), radius=0.7, albedo=(0.7, 0.15, 0.1), specular=0.8, shininess=40.0),
            Sphere(center=(0.75, -0.75, -0.5), radius=0.3, albedo=(0.2, 0.4, 0.8)),
        ],
        patches=[Patch(center=(0.0, 0.0, -0.8), normal=(0.0, 0.0, 1.0), extent=1.2, albedo=(0.8, 0.8, 0.75))],
        lights=[
            Light(kind="point", vector=(2.0, 1.5, 3.0), intensity=(0.8, 0.8, 0.8)),
            Light(kind="directional", vector=(-1.0, 0.5, 0.6), intensity=(0.3, 0.3, 0.3)),
        ])


PRESETS = {"default": default_scene, "specular": specular_scene}


def scene_from_dict(document):
    """
    SceneSpec from a dict with lists "spheres", "patches" and "lights" plus optional "ambient" and "background"
    """
    def _items(cls, key):
        try:
            return [cls(**{name: tuple(value) if isinstance(value, list) else value
                           for name, value in item.items()}) for item in document.get(key, [])]
        except TypeError as error:
            raise DatasetError(f"bad '{key}' entry in scene description: {error}") from error

    return SceneSpec(spheres=_items(Sphere, "spheres"), patches=_items(Patch, "patches"),
                     lights=_items(Light, "lights"), ambient=float(document.get("ambient", 0.1)),
                     background=tuple(document.get("background", (1.0, 1.0, 1.0))))


def load_scene(name):
    """
    a preset name ("default", "specular") or the path of a JSON scene description
    """
    if name in PRESETS:
        return PRESETS[name]()
    if not os.path.exists(name):
        raise DatasetError(f"unknown scene '{name}': neither a preset {sorted(PRESETS)} nor a file")
    with open(name) as f_in:
        try:
            return scene_from_dict(json.load(f_in))
        except json.JSONDecodeError as error:
            raise DatasetError(f"{name} is not valid JSON: {error}") from error


def _unit(vector):
    vector = np.asarray(vector, dtype=np.float64)
    return vector / np.linalg.norm(vector)


def _intersect_sphere(origins, directions, sphere):
    offset = origins - np.asarray(sphere.center, dtype=np.float64)
    half_b = np.sum(offset * directions, axis=-1)
    c_term = np.sum(offset * offset, axis=-1) - sphere.radius ** 2
    disc = half_b ** 2 - c_term
    root = np.sqrt(np.maximum(disc, 0.0))
    t_near, t_far = -half_b - root, -half_b + root
    t = np.where(t_near > HIT_EPS, t_near, t_far)
    t = np.where((disc >= 0.0) & (t > HIT_EPS), t, np.inf)
    points = origins + np.where(np.isfinite(t), t, 0.0)[:, None] * directions
    normals = (points - np.asarray(sphere.center)) / sphere.radius
    return t, normals


def _intersect_patch(origins, directions, patch):
    normal = _unit(patch.normal)
    center = np.asarray(patch.center, dtype=np.float64)
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    axis_u = _unit(np.cross(normal, helper))
    axis_v = np.cross(normal, axis_u)
    denom = directions @ normal
    safe = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
    t = ((center - origins) @ normal) / safe
    local = origins + t[:, None] * directions - center
    inside = (np.abs(local @ axis_u) <= patch.extent) & (np.abs(local @ axis_v) <= patch.extent)
    t = np.where((np.abs(denom) >= 1e-12) & inside & (t > HIT_EPS), t, np.inf)
    return t, np.broadcast_to(normal, directions.shape)


def shade_point(spec, point, normal, view_dir, material):
    """
    Phong radiance leaving `point` toward the viewer, `view_dir` being the unit ray direction
    that reached it; rows are independent, arrays are (P, 3)

    albedo * (ambient + Σ I max(0, n·l)) + specular * Σ I max(0, r·v)^shininess with r = 2(n·l)n - l
    and v = -view_dir; specular terms only where n·l > 0
    """
    albedo, specular, shininess = material
    to_viewer = -view_dir
    # two-sided surfaces: the normal faces the viewer
    facing = np.sign(np.sum(normal * to_viewer, axis=-1, keepdims=True))
    normal = normal * np.where(facing == 0.0, 1.0, facing)
    diffuse = np.full(point.shape, spec.ambient)
    highlight = np.zeros(point.shape)
    for light in spec.lights:
        if light.kind == "point":
            to_light = np.asarray(light.vector, dtype=np.float64) - point
            to_light /= np.linalg.norm(to_light, axis=-1, keepdims=True)
        else:
            to_light = np.broadcast_to(_unit(light.vector), point.shape)
        intensity = np.asarray(light.intensity, dtype=np.float64)
        cosine = np.sum(normal * to_light, axis=-1, keepdims=True)
        lit = np.maximum(cosine, 0.0)
        diffuse = diffuse + lit * intensity
        mirror = 2.0 * cosine * normal - to_light
        alignment = np.maximum(np.sum(mirror * to_viewer, axis=-1, keepdims=True), 0.0)
        highlight = highlight + np.where(cosine > 0.0, alignment ** shininess[..., None], 0.0) * intensity
    return albedo * diffuse + specular[..., None] * highlight


def trace(spec, origins, directions):
    """
    colors (P, 3) in [0, 1] of rays (P, 3) through the scene, background where nothing is hit
    """
    origins = np.asarray(origins, dtype=np.float64)
    directions = np.asarray(directions, dtype=np.float64)
    n_rays = origins.shape[0]
    best_t = np.full(n_rays, np.inf)
    normals = np.zeros((n_rays, 3))
    albedo = np.zeros((n_rays, 3))
    specular = np.zeros(n_rays)
    shininess = np.ones(n_rays)
    for surface in list(spec.spheres) + list(spec.patches):
        if isinstance(surface, Sphere):
            t, surface_normals = _intersect_sphere(origins, directions, surface)
        else:
            t, surface_normals = _intersect_patch(origins, directions, surface)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        normals[closer] = surface_normals[closer]
        albedo[closer] = surface.albedo
        specular[closer] = surface.specular
        shininess[closer] = surface.shininess

    colors = np.broadcast_to(np.asarray(spec.background, dtype=np.float64), (n_rays, 3)).copy()
    hit = np.isfinite(best_t)
    if hit.any():
        points = origins[hit] + best_t[hit, None] * directions[hit]
        colors[hit] = shade_point(spec, points, normals[hit], directions[hit],
                                  (albedo[hit], specular[hit], shininess[hit]))
    return np.clip(colors, 0.0, 1.0)


def render_scene(spec, camera):
    """
    ground-truth (H, W, 3) image of the scene seen from `camera`
    """
    rays = generate_rays(camera, dtype=torch.float64)
    return trace(spec, rays.origins.numpy(), rays.directions.numpy()).reshape(camera.height, camera.width, 3)


def sphere_cameras(n_views, resolution, seed, radius=4.0, fov_x=DEFAULT_FOV_X):
    """
    cameras on a sphere of `radius` looking at the origin, azimuths uniform and heights
    uniform in [-0.3, 0.9] radius
    """
    rng = np.random.default_rng(seed)
    cameras = []
    for _ in range(n_views):
        azimuth = rng.uniform(0.0, 2.0 * math.pi)
        height = rng.uniform(-0.3, 0.9)
        ring = math.sqrt(1.0 - height ** 2)
        eye = radius * np.array([ring * math.cos(azimuth), ring * math.sin(azimuth), height])
        cameras.append(Camera(width=resolution, height=resolution, fov_x=fov_x, pose=look_at(eye)))
    return cameras


# pylint: disable=too-many-arguments
def procedural_scene(spec, n_views, resolution, seed, n_test=0, radius=4.0, fov_x=DEFAULT_FOV_X,
                     bbox=((-1.5, -1.5, -1.5), (1.5, 1.5, 1.5))):
    """
    renders `n_views` training views and `n_test` test views of the scene; bitwise reproducible per seed
    """
    cameras = sphere_cameras(n_views + n_test, resolution, seed, radius, fov_x)
    images = [render_scene(spec, camera) for camera in cameras]
    logger.info("rendered %s procedural views at %sx%s", len(images), resolution, resolution)
    return Dataset(cameras=cameras, images=images, splits=["train"] * n_views + ["test"] * n_test, bbox=bbox)
