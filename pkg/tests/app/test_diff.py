#!/usr/bin/python3
import dataclasses
import unittest
from collections import OrderedDict

import numpy as np
import torch

from app.config import tiny_config
from app.diff import finite_diff_check, grad, parameter_set
from app.exceptions import NonFiniteValue
from app.model import build_model
from app.render import RayBatch, render_rays
from app.train import loss_terms


def tiny_problem(config, seed=0):
    model = build_model(config, seed=seed)
    generator = torch.Generator().manual_seed(seed + 100)
    origins = torch.tensor([[2.5, 1.5, 1.0]] * 4, dtype=torch.float64)
    targets = 0.5 * torch.rand((4, 3), generator=generator, dtype=torch.float64) - 0.25
    directions = targets - origins
    directions = directions / directions.norm(dim=-1, keepdim=True)
    rays = RayBatch(origins, directions, torch.rand((4, 3), generator=generator, dtype=torch.float64))

    def loss_fn(_params):
        output = render_rays(model, rays, config.render)
        return loss_terms(output.color, rays.gt_colors, output.weights, output.normals, rays.directions,
                          model.density.features(), config.train.alpha, config.train.beta)["total"]

    return model, loss_fn


class TestGrad(unittest.TestCase):

    def test_quadratic(self):
        param = torch.randn(5, dtype=torch.float64, requires_grad=True)
        gradients = grad(lambda params: (params["p"] ** 2).sum(), OrderedDict(p=param))
        self.assertTrue(torch.equal(gradients["p"], 2.0 * param.detach()))

    def test_unused_parameter_gets_zeros(self):
        used = torch.ones(3, dtype=torch.float64, requires_grad=True)
        unused = torch.ones((2, 2), dtype=torch.float64, requires_grad=True)
        gradients = grad(lambda params: params["used"].sum(), OrderedDict(used=used, unused=unused))
        self.assertTrue(torch.equal(gradients["unused"], torch.zeros((2, 2), dtype=torch.float64)))

    def test_linearity(self):
        generator = torch.Generator().manual_seed(0)
        param = torch.randn(6, generator=generator, dtype=torch.float64, requires_grad=True)
        params = OrderedDict(p=param)
        first = lambda ps: torch.sin(ps["p"]).sum()  # noqa: E731
        second = lambda ps: (ps["p"] ** 3).sum()  # noqa: E731
        combined = grad(lambda ps: first(ps) + second(ps), params)["p"]
        separate = grad(first, params)["p"] + grad(second, params)["p"]
        np.testing.assert_allclose(combined.numpy(), separate.numpy(), atol=1e-14)

    def test_non_finite_loss(self):
        param = torch.ones(2, dtype=torch.float64, requires_grad=True)
        with self.assertRaises(NonFiniteValue) as context:
            grad(lambda params: (params["p"] / 0.0).sum(), OrderedDict(p=param))
        self.assertEqual(context.exception.operation, "loss evaluation")

    def test_parameter_names_are_stable(self):
        names = list(parameter_set(build_model(tiny_config())))
        self.assertEqual(names, list(parameter_set(build_model(tiny_config()))))
        self.assertEqual(names[0], "appearance.planes.0")
        self.assertIn("density.lines.1", names)
        self.assertIn("directional.layers.1.bias", names)

    def test_color_space_encoding_leaves_directional_mlp_unused(self):
        config = tiny_config()
        config = dataclasses.replace(config, model=dataclasses.replace(config.model, view_encoding="ree_color",
                                                                       asg_channels=3))
        model, loss_fn = tiny_problem(config)
        gradients = grad(loss_fn, parameter_set(model))
        for name, gradient in gradients.items():
            if name.startswith("directional."):
                self.assertEqual(gradient.abs().max().item(), 0.0)
        self.assertGreater(gradients["spatial.layers.0.weight"].abs().max().item(), 0.0)


class TestFiniteDiffCheck(unittest.TestCase):

    def test_quadratic_loss(self):
        param = torch.randn((3, 4), dtype=torch.float64, requires_grad=True)
        report = finite_diff_check(lambda params: (params["p"] ** 2).sum() * 0.5, OrderedDict(p=param))
        self.assertTrue(report.passed())
        self.assertLess(report.max_relative_error["p"], 1e-9)
        self.assertEqual(report.checked["p"], 12)

    def test_kink_is_flagged_and_excluded(self):
        param = torch.tensor([0.0, 1.5], dtype=torch.float64, requires_grad=True)
        report = finite_diff_check(lambda params: torch.relu(params["p"]).sum(), OrderedDict(p=param))
        self.assertEqual(report.kinks, [("p", 0)])
        self.assertTrue(report.passed())

    def test_wrong_gradient_fails(self):
        class WrongSquare(torch.autograd.Function):
            # pylint: disable=arguments-differ
            @staticmethod
            def forward(ctx, values):
                ctx.save_for_backward(values)
                return values ** 2

            @staticmethod
            def backward(ctx, grad_output):
                (values,) = ctx.saved_tensors
                return 3.0 * values * grad_output

        param = torch.tensor([0.7, -1.2], dtype=torch.float64, requires_grad=True)
        report = finite_diff_check(lambda params: WrongSquare.apply(params["p"]).sum(), OrderedDict(p=param))
        self.assertFalse(report.passed())
        self.assertEqual(report.failures, 2)
        self.assertAlmostEqual(report.worst_relative_error, 1.0 / 3.0, places=6)

    def test_round_off_floor_is_excluded(self):
        class TinyWrongSlope(torch.autograd.Function):
            # pylint: disable=arguments-differ
            @staticmethod
            def forward(ctx, values):
                return 1e-12 * values

            @staticmethod
            def backward(ctx, grad_output):
                return 2e-12 * grad_output

        param = torch.tensor([0.4, -0.9], dtype=torch.float64, requires_grad=True)
        report = finite_diff_check(lambda params: TinyWrongSlope.apply(params["p"]).sum(), OrderedDict(p=param))
        self.assertTrue(report.passed())
        self.assertEqual(report.below_noise, [("p", 0), ("p", 1)])
        self.assertEqual(report.kinks, [])
        self.assertEqual(report.worst_relative_error, 0.0)
        self.assertIsNone(report.worst_name)
        self.assertEqual(report.max_relative_error["p"], 0.0)
        self.assertEqual(report.to_dict()["below_noise"], 2)

    def test_restores_parameters(self):
        param = torch.randn(4, dtype=torch.float64, requires_grad=True)
        before = param.detach().clone()
        finite_diff_check(lambda params: torch.exp(params["p"]).sum(), OrderedDict(p=param))
        self.assertTrue(torch.equal(param.detach(), before))

    def test_tiny_model_passes(self):
        model, loss_fn = tiny_problem(tiny_config())
        report = finite_diff_check(loss_fn, parameter_set(model), eps=1e-5, threshold=1e-4, max_coords=24, seed=3)
        self.assertTrue(report.passed(), report.to_dict())
        self.assertEqual(set(report.checked), set(parameter_set(model)))


if __name__ == '__main__':
    unittest.main()
