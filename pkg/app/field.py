#!/usr/bin/python3
# -----------------------------------------------------------
# Multiscale tensor-decomposed feature fields
# -----------------------------------------------------------
import math

import torch
import torch.nn.functional as F

from app.exceptions import NonFiniteValue


# (plane axes, line axis) for the three factor pairs: (xy, z), (xz, y), (yz, x)
PAIRS = (((0, 1), 2), ((0, 2), 1), ((1, 2), 0))


def level_resolutions(config):
    """
    returns the grid resolution of every level, growing geometrically from n_min to n_max
    a single level sits at n_max
    """
    if config.levels == 1:
        return [config.n_max]
    growth = math.exp((math.log(config.n_max) - math.log(config.n_min)) / (config.levels - 1))
    # the epsilon keeps exact powers (e.g. 16 * 2) from flooring one below
    return [int(math.floor(config.n_min * growth ** level + 1e-6)) for level in range(config.levels)]


def parameter_count(config):
    """
    number of learnable features of a field: sum over levels of 3 planes and 3 lines
    """
    return sum(3 * res * res * config.channels + 3 * res * config.channels for res in level_resolutions(config))


def _to_grid(coords):
    # [0, 1] -> [-1, 1], node i of N sits at i / (N - 1) with align_corners=True
    return coords * 2.0 - 1.0


def _clamp_unit(coords):
    return torch.clamp(coords, 0.0, 1.0)


def _sample_planes(planes, uv):
    # planes (B, C, N, N) at uv (B, P, 2) -> (B, C, P)
    grid = _to_grid(uv.to(planes.dtype)).unsqueeze(2)
    values = F.grid_sample(planes, grid, mode="bilinear", padding_mode="border", align_corners=True)
    return values.squeeze(-1)


def _sample_lines(lines, t):
    # lines (B, C, N, 1) at t (B, P) -> (B, C, P)
    t = t.to(lines.dtype)
    grid = torch.stack((torch.zeros_like(t), _to_grid(t)), dim=-1).unsqueeze(2)
    values = F.grid_sample(lines, grid, mode="bilinear", padding_mode="border", align_corners=True)
    return values.squeeze(-1)


def interp2d(plane, uv):
    """
    bilinear interpolation of `plane` (C, N, N) at `uv` (P, 2) in [0, 1]^2, returns (P, C)
    plane[c, j, i] is the node at u = i / (N - 1), v = j / (N - 1)
    """
    return _sample_planes(plane.unsqueeze(0), _clamp_unit(uv).unsqueeze(0))[0].t()


def interp1d(line, t):
    """
    linear interpolation of `line` (C, N) at `t` (P,) in [0, 1], returns (P, C)
    """
    return _sample_lines(line.unsqueeze(0).unsqueeze(-1), _clamp_unit(t).unsqueeze(0))[0].t()


class FeatureField(torch.nn.Module):
    """
    one multiscale tensor decomposition: per level, three plane maps stacked as (3, C, N, N)
    in the order xy, xz, yz and three line vectors stacked as (3, C, N, 1) in the order z, y, x
    """

    def __init__(self, config, generator=None, dtype=torch.float32):
        super().__init__()
        self.config = config
        self.resolutions = level_resolutions(config)
        self.planes = torch.nn.ParameterList()
        self.lines = torch.nn.ParameterList()
        for res in self.resolutions:
            plane = torch.randn((3, config.channels, res, res), generator=generator, dtype=dtype)
            line = torch.randn((3, config.channels, res, 1), generator=generator, dtype=dtype)
            self.planes.append(torch.nn.Parameter(plane * config.init_std))
            self.lines.append(torch.nn.Parameter(line * config.init_std))
        self.register_buffer("bbox_min", torch.tensor(config.bbox_min, dtype=dtype))
        self.register_buffer("bbox_max", torch.tensor(config.bbox_max, dtype=dtype))

    def normalize(self, points):
        """
        maps world points into the unit cube spanned by the bbox, clamped to [0, 1]^3
        """
        if not torch.isfinite(points).all():
            raise NonFiniteValue("feature field sampling", "query points contain NaN or inf")
        return _clamp_unit((points - self.bbox_min) / (self.bbox_max - self.bbox_min))

    def factor_products(self, points):
        """
        per level (3, C, P) tensors of plane ⊙ line features for the (xy,z), (xz,y), (yz,x) pairs
        """
        unit = self.normalize(points).to(self.bbox_min.dtype)
        plane_coords = torch.stack([unit[:, list(axes)] for axes, _ in PAIRS])
        line_coords = torch.stack([unit[:, axis] for _, axis in PAIRS])
        return [_sample_planes(plane, plane_coords) * _sample_lines(line, line_coords)
                for plane, line in zip(self.planes, self.lines)]

    def features(self):
        """
        every learnable feature of the field as one flat vector
        """
        return torch.cat([tensor.reshape(-1) for tensor in list(self.planes) + list(self.lines)])

    def extra_repr(self):
        return f"resolutions={self.resolutions}, channels={self.config.channels}"


def init_field(config, seed, dtype=torch.float32):
    """
    builds a field whose features are i.i.d. N(0, init_std^2), deterministic for a given seed
    """
    generator = torch.Generator().manual_seed(seed)
    return FeatureField(config, generator=generator, dtype=dtype)


def sample_appearance(field, points):
    """
    concatenated appearance features of `points` (P, 3): level-major, then (xy,z), (xz,y), (yz,x),
    then channels; returns (P, 3 * C * L)
    """
    products = field.factor_products(points)
    per_level = [prod.permute(2, 0, 1).reshape(prod.shape[2], -1) for prod in products]
    return torch.cat(per_level, dim=1)


def sample_density(field, points, shift=0.0):
    """
    σ = softplus(shift + sum of every level, pair and channel product) for `points` (P, 3), returns (P,)
    """
    total = sum(prod.sum(dim=(0, 1)) for prod in field.factor_products(points))
    return F.softplus(total + shift)
