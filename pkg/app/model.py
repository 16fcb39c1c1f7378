#!/usr/bin/python3
# -----------------------------------------------------------
# Radiance feature field model: two fields, two MLPs and the lobe frames
# -----------------------------------------------------------
import torch

from app.encoding import AsgFrameSet, build_lobe_frames, encode, reparameterize
from app.field import FeatureField, sample_appearance, sample_density
from app.log import logger
from app.net import (build_mlp, decode_params, final_color, mlp_forward, positional_encoding, raw_width,
                     specular_color)


def torch_dtype(name):
    """
    maps a config dtype name to the torch dtype
    """
    return {"float32": torch.float32, "float64": torch.float64}[name]


class NrffModel(torch.nn.Module):
    """
    appearance and density fields, spatial and directional MLPs and the fixed ASG frames

    parameter names are stable and used by checkpoints and gradient reports:
    appearance.planes.<l>, appearance.lines.<l>, density.planes.<l>, density.lines.<l>,
    density_shift (when learnable), spatial.layers.<i>.weight|bias, directional.layers.<i>.weight|bias
    """

    def __init__(self, appearance_config, density_config, model_config, seed=0, dtype=torch.float32):
        super().__init__()
        self.model_config = model_config
        generator = torch.Generator().manual_seed(seed)
        self.appearance = FeatureField(appearance_config, generator=generator, dtype=dtype)
        self.density = FeatureField(density_config, generator=generator, dtype=dtype)

        n_lobes = self.n_lobes
        feature_width = 3 * appearance_config.channels * appearance_config.levels
        self.spatial = build_mlp(
            feature_width,
            model_config.hidden,
            raw_width(n_lobes, model_config.bottleneck, model_config.asg_channels),
            model_config.spatial_layers,
            generator=generator,
            dtype=dtype)
        self.directional = build_mlp(
            self.directional_in_width,
            model_config.hidden,
            3,
            model_config.directional_layers,
            generator=generator,
            dtype=dtype)

        shift = torch.tensor(model_config.density_shift, dtype=dtype)
        if model_config.learn_density_shift:
            self.density_shift = torch.nn.Parameter(shift)
        else:
            self.register_buffer("density_shift", shift)

        frames = build_lobe_frames(model_config.lobe_rows, model_config.lobe_cols, dtype=dtype)
        self.register_buffer("lobes", frames.lobes)
        self.register_buffer("tangents", frames.tangents)
        self.register_buffer("bitangents", frames.bitangents)
        logger.debug("model built: %s parameters", sum(p.numel() for p in self.parameters()))

    @property
    def n_lobes(self):
        # the positional-encoding variant decodes no ASG parameters
        return 0 if self.model_config.view_encoding == "pe" else self.model_config.n_lobes

    @property
    def directional_in_width(self):
        config = self.model_config
        if config.view_encoding == "pe":
            return 3 * (1 + 2 * config.pe_frequencies) + config.bottleneck
        return self.n_lobes * config.asg_channels + config.bottleneck

    def field_parameters(self):
        """
        tensors optimized with the field learning rate
        """
        params = list(self.appearance.parameters()) + list(self.density.parameters())
        if isinstance(self.density_shift, torch.nn.Parameter):
            params.append(self.density_shift)
        return params

    def mlp_parameters(self):
        """
        tensors optimized with the MLP learning rate
        """
        return list(self.spatial.parameters()) + list(self.directional.parameters())

    def density_at(self, points):
        return sample_density(self.density, points, self.density_shift)

    def point_params(self, points):
        """
        decoded parameter bundle at `points` (P, 3)
        """
        raw = mlp_forward(self.spatial, sample_appearance(self.appearance, points))
        return decode_params(raw, self.n_lobes, self.model_config.bottleneck, self.model_config.asg_channels)

    def shade(self, points, directions):
        """
        colors (P, 3) in (0, 1) and unit normals (P, 3) for points seen along unit ray `directions`
        """
        config = self.model_config
        bundle = self.point_params(points)
        view = -directions if config.negate_view_dir else directions
        if config.view_encoding == "pe":
            c_s = specular_color(self.directional, positional_encoding(view, config.pe_frequencies), bundle.b)
        else:
            omega = reparameterize(view, bundle.n)
            encoded = encode(self.frames, omega, bundle.a, bundle.lambdas, bundle.mus)
            if config.view_encoding == "ree_color":
                c_s = encoded.reshape(-1, self.n_lobes, 3).sum(dim=1)
            else:
                c_s = specular_color(self.directional, encoded, bundle.b)
        return final_color(bundle.c_d, bundle.s, c_s), bundle.n

    @property
    def frames(self):
        return AsgFrameSet(self.lobes, self.tangents, self.bitangents)


def build_model(config, seed=None):
    """
    builds a model from a RunConfig, seeded with `seed` or the train seed
    """
    seed = config.train.seed if seed is None else seed
    return NrffModel(config.appearance, config.density, config.model, seed=seed,
                     dtype=torch_dtype(config.train.dtype))
