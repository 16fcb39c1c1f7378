#!/usr/bin/python3
# -----------------------------------------------------------
# Rendering equation encoding with anisotropic spherical Gaussians
# -----------------------------------------------------------
import math
from dataclasses import dataclass

import torch

from app.exceptions import DegenerateDirection, InvalidBandwidth, LengthMismatch


@dataclass(frozen=True)
class AsgFrameSet:
    """
    predefined orthonormal (lobe, tangent, bitangent) triads, each stored as (N, 3), row-major over the lobe grid
    """
    lobes: torch.Tensor
    tangents: torch.Tensor
    bitangents: torch.Tensor

    def __len__(self):
        return self.lobes.shape[0]

    def frame(self, index):
        """
        returns the (lobe, tangent, bitangent) triad of frame `index`
        """
        return self.lobes[index], self.tangents[index], self.bitangents[index]


def _spherical_to_cartesian(theta, phi):
    # z-up convention, theta measured from +z
    return torch.stack((torch.sin(theta) * torch.cos(phi),
                        torch.sin(theta) * torch.sin(phi),
                        torch.cos(theta)), dim=-1)


def build_lobe_frames(rows, cols, dtype=torch.float64):
    """
    lobes on a pole-avoiding rows x cols grid: theta_r = pi (r + 0.5) / rows, phi_c = 2 pi c / cols;
    the tangent is the lobe moved by +pi/2 in theta and the bitangent is lobe x tangent
    """
    rows_idx = torch.arange(rows, dtype=torch.float64)
    cols_idx = torch.arange(cols, dtype=torch.float64)
    theta = (math.pi * (rows_idx + 0.5) / rows).repeat_interleave(cols)
    phi = (2.0 * math.pi * cols_idx / cols).repeat(rows)
    lobes = _spherical_to_cartesian(theta, phi)
    tangents = _spherical_to_cartesian(theta + math.pi / 2.0, phi)
    bitangents = torch.cross(lobes, tangents, dim=-1)
    return AsgFrameSet(lobes.to(dtype), tangents.to(dtype), bitangents.to(dtype))


def reparameterize(directions, normals):
    """
    reflects view directions about the normals: ω_o = 2 (d·n) n - d, inputs (..., 3)
    """
    if (torch.linalg.vector_norm(directions, dim=-1) < 1e-12).any():
        raise DegenerateDirection("view direction has zero length")
    if (torch.linalg.vector_norm(normals, dim=-1) < 1e-12).any():
        raise DegenerateDirection("normal has zero length")
    cosine = (directions * normals).sum(dim=-1, keepdim=True)
    return 2.0 * cosine * normals - directions


def envelope(frames, omega, lambdas, mus):
    """
    scalar ASG envelopes max(ω·lobe, 0) exp(-λ (ω·tangent)^2 - μ (ω·bitangent)^2)
    for `omega` (P, 3) and bandwidths (P, N), returns (P, N) in [0, 1]
    """
    smooth = torch.relu(omega @ frames.lobes.t())
    along_tangent = omega @ frames.tangents.t()
    along_bitangent = omega @ frames.bitangents.t()
    return smooth * torch.exp(-lambdas * along_tangent ** 2 - mus * along_bitangent ** 2)


def asg_response(frame, omega, features, lam, mu):
    """
    single-lobe response g_i = a · envelope for one (lobe, tangent, bitangent) `frame`
    """
    lam = torch.as_tensor(lam, dtype=omega.dtype)
    mu = torch.as_tensor(mu, dtype=omega.dtype)
    if (lam <= 0).any() or (mu <= 0).any():
        raise InvalidBandwidth(f"lambda={lam.tolist()}, mu={mu.tolist()}")
    lobe, tangent, bitangent = frame
    smooth = torch.relu(torch.dot(omega, lobe))
    return features * smooth * torch.exp(-lam * torch.dot(omega, tangent) ** 2 - mu * torch.dot(omega, bitangent) ** 2)


def encode(frames, omega, features, lambdas, mus):
    """
    concatenated responses of every frame: `omega` (P, 3), `features` (P, N, K), bandwidths (P, N);
    returns (P, N * K) in frame order
    """
    n_frames = len(frames)
    if features.shape[-2] != n_frames or lambdas.shape[-1] != n_frames or mus.shape[-1] != n_frames:
        raise LengthMismatch(
            f"{n_frames} frames but features {tuple(features.shape)}, "
            f"lambdas {tuple(lambdas.shape)}, mus {tuple(mus.shape)}")
    weights = envelope(frames, omega, lambdas, mus)
    encoded = features * weights.unsqueeze(-1)
    return encoded.reshape(encoded.shape[0], -1)


def equirect_directions(height, dtype=torch.float64):
    """
    unit directions at the pixel centres of a height x 2 height equirectangular map, (height, 2 height, 3)
    """
    width = 2 * height
    theta = math.pi * (torch.arange(height, dtype=torch.float64) + 0.5) / height
    phi = 2.0 * math.pi * (torch.arange(width, dtype=torch.float64) + 0.5) / width
    theta_grid, phi_grid = torch.meshgrid(theta, phi, indexing="ij")
    return _spherical_to_cartesian(theta_grid, phi_grid).to(dtype)


def envelope_map(frames, lambdas, mus, height):
    """
    per-lobe envelope values over an equirectangular direction grid for one point's
    bandwidths (N,), returns (N, height, 2 height)
    """
    directions = equirect_directions(height, dtype=frames.lobes.dtype).reshape(-1, 3)
    count = directions.shape[0]
    values = envelope(frames, directions, lambdas.expand(count, -1), mus.expand(count, -1))
    return values.t().reshape(len(frames), height, 2 * height)
