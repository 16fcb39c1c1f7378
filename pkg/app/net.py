#!/usr/bin/python3
# -----------------------------------------------------------
# Spatial and directional MLPs, parameter bundle decoding and final color
# -----------------------------------------------------------
import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from app.exceptions import WidthMismatch


DEFAULT_NORMAL = (0.0, 0.0, 1.0)
NORMAL_EPS = 1e-8


class Mlp(torch.nn.Module):
    """
    affine layers with rectifiers in between; the last layer stays affine
    """

    def __init__(self, widths, generator=None, dtype=torch.float32):
        super().__init__()
        self.widths = tuple(widths)
        self.layers = torch.nn.ModuleList()
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            layer = torch.nn.Linear(fan_in, fan_out, dtype=dtype)
            # uniform Kaiming init for rectifiers: bound = sqrt(6 / fan_in)
            bound = math.sqrt(6.0 / fan_in)
            with torch.no_grad():
                layer.weight.copy_((torch.rand((fan_out, fan_in), generator=generator, dtype=dtype) * 2.0 - 1.0) * bound)
                layer.bias.zero_()
            self.layers.append(layer)

    @property
    def in_width(self):
        return self.widths[0]

    @property
    def out_width(self):
        return self.widths[-1]


def build_mlp(in_width, hidden, out_width, n_layers, generator=None, dtype=torch.float32):
    """
    `n_layers` affine layers: in_width -> hidden -> ... -> out_width
    """
    widths = [in_width] + [hidden] * (n_layers - 1) + [out_width]
    return Mlp(widths, generator=generator, dtype=dtype)


def mlp_forward(mlp, inputs):
    """
    evaluates `mlp` on a batch `inputs` (P, in_width)
    """
    if inputs.shape[-1] != mlp.in_width:
        raise WidthMismatch(mlp.in_width, inputs.shape[-1])
    hidden = inputs
    last = len(mlp.layers) - 1
    for index, layer in enumerate(mlp.layers):
        hidden = layer(hidden)
        if index < last:
            hidden = torch.relu(hidden)
    return hidden


@dataclass
class ParamBundle:
    """
    per-point decoded spatial MLP output
    c_d, s: raw (P, 3); n: unit (P, 3); b: (P, bottleneck); a: (P, N, K); lambdas, mus: positive (P, N)
    """
    c_d: torch.Tensor
    s: torch.Tensor
    n: torch.Tensor
    b: torch.Tensor
    a: torch.Tensor
    lambdas: torch.Tensor
    mus: torch.Tensor


def raw_width(n_lobes, bottleneck=128, asg_channels=2):
    """
    width of the spatial MLP output: c_d, s, n, b, then a, λ, μ for every lobe
    """
    return 9 + bottleneck + n_lobes * (asg_channels + 2)


def _normalize_normals(raw_normals):
    norms = torch.linalg.vector_norm(raw_normals, dim=-1, keepdim=True)
    degenerate = norms < NORMAL_EPS
    safe = torch.where(degenerate, torch.ones_like(norms), norms)
    fallback = torch.tensor(DEFAULT_NORMAL, dtype=raw_normals.dtype).expand_as(raw_normals)
    return torch.where(degenerate, fallback, raw_normals / safe)


def decode_params(raw, n_lobes, bottleneck=128, asg_channels=2):
    """
    slices `raw` (P, 9 + bottleneck + n_lobes (asg_channels + 2)) in the order c_d, s, n, b, a, λ, μ;
    normals are normalized (zero-length falls back to +z), bandwidths go through softplus
    """
    expected = raw_width(n_lobes, bottleneck, asg_channels)
    if raw.shape[-1] != expected:
        raise WidthMismatch(expected, raw.shape[-1])
    sizes = [3, 3, 3, bottleneck, n_lobes * asg_channels, n_lobes, n_lobes]
    c_d, s, n, b, a, lambdas, mus = torch.split(raw, sizes, dim=-1)
    return ParamBundle(
        c_d=c_d,
        s=s,
        n=_normalize_normals(n),
        b=b,
        a=a.reshape(raw.shape[0], n_lobes, asg_channels),
        lambdas=F.softplus(lambdas),
        mus=F.softplus(mus),
    )


def flatten_unactivated(bundle):
    """
    concatenation of the slices decode_params leaves untouched: c_d, s, b, a
    """
    return torch.cat([bundle.c_d, bundle.s, bundle.b, bundle.a.reshape(bundle.a.shape[0], -1)], dim=-1)


def positional_encoding(directions, n_frequencies):
    """
    [d, sin(2^k d), cos(2^k d)] for k < n_frequencies
    """
    encoded = [directions]
    for k in range(n_frequencies):
        encoded.append(torch.sin(directions * 2.0 ** k))
        encoded.append(torch.cos(directions * 2.0 ** k))
    return torch.cat(encoded, dim=-1)


def specular_color(dir_mlp, encoding, bottleneck):
    """
    raw specular color predicted by the directional MLP from [encoding, bottleneck]
    """
    return mlp_forward(dir_mlp, torch.cat([encoding, bottleneck], dim=-1))


def final_color(c_d, s, c_s):
    """
    c = sigmoid(c_d + s ⊙ c_s)
    """
    return torch.sigmoid(c_d + s * c_s)
