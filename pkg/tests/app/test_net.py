#!/usr/bin/python3
import math
import unittest

import numpy as np
import torch

from app.exceptions import WidthMismatch
from app.net import (build_mlp, decode_params, final_color, flatten_unactivated, mlp_forward,
                     positional_encoding, raw_width, specular_color)


def dense_forward(mlp, inputs):
    hidden = inputs.numpy()
    for index, layer in enumerate(mlp.layers):
        hidden = hidden @ layer.weight.detach().numpy().T + layer.bias.detach().numpy()
        if index < len(mlp.layers) - 1:
            hidden = np.maximum(hidden, 0.0)
    return hidden


class TestMlp(unittest.TestCase):

    def setUp(self):
        self.generator = torch.Generator().manual_seed(0)

    def test_zero_weights_output_bias(self):
        mlp = build_mlp(4, 8, 3, 2, dtype=torch.float64)
        with torch.no_grad():
            for layer in mlp.layers:
                layer.weight.zero_()
            mlp.layers[-1].bias.copy_(torch.tensor([0.1, -0.2, 0.3]))
        output = mlp_forward(mlp, torch.randn((5, 4), generator=self.generator, dtype=torch.float64))
        np.testing.assert_allclose(output.detach().numpy(), np.tile([0.1, -0.2, 0.3], (5, 1)), atol=1e-15)

    def test_identity_layer(self):
        mlp = build_mlp(3, 3, 3, 1, dtype=torch.float64)
        with torch.no_grad():
            mlp.layers[0].weight.copy_(torch.eye(3))
        inputs = torch.randn((6, 3), generator=self.generator, dtype=torch.float64)
        np.testing.assert_array_equal(mlp_forward(mlp, inputs).detach().numpy(), inputs.numpy())

    def test_matches_dense_matmul(self):
        mlp = build_mlp(5, 7, 2, 2, generator=self.generator, dtype=torch.float64)
        inputs = torch.randn((10, 5), generator=self.generator, dtype=torch.float64)
        np.testing.assert_allclose(mlp_forward(mlp, inputs).detach().numpy(), dense_forward(mlp, inputs),
                                   rtol=1e-12, atol=1e-12)

    def test_kaiming_uniform_init(self):
        mlp = build_mlp(64, 32, 3, 3, generator=self.generator)
        for layer in mlp.layers:
            bound = math.sqrt(6.0 / layer.in_features)
            self.assertLessEqual(layer.weight.abs().max().item(), bound)
            self.assertEqual(layer.bias.abs().max().item(), 0.0)
        self.assertEqual([layer.out_features for layer in mlp.layers], [32, 32, 3])

    def test_width_mismatch(self):
        mlp = build_mlp(4, 8, 3, 2)
        with self.assertRaises(WidthMismatch):
            mlp_forward(mlp, torch.zeros((2, 5)))

    def test_piecewise_linear(self):
        mlp = build_mlp(3, 16, 2, 3, generator=self.generator, dtype=torch.float64)
        inputs = torch.randn((1, 3), generator=self.generator, dtype=torch.float64)
        # positive homogeneity: scaling every input scales the output of a bias-free rectifier net
        np.testing.assert_allclose(mlp_forward(mlp, 2.5 * inputs).detach().numpy(),
                                   2.5 * mlp_forward(mlp, inputs).detach().numpy(), rtol=1e-12, atol=1e-12)


class TestDecodeParams(unittest.TestCase):

    def test_default_width(self):
        self.assertEqual(raw_width(128), 649)

    def test_zero_raw(self):
        bundle = decode_params(torch.zeros((2, raw_width(4, 8, 2)), dtype=torch.float64), 4, 8, 2)
        np.testing.assert_allclose(bundle.lambdas.numpy(), math.log(2.0), atol=1e-15)
        np.testing.assert_allclose(bundle.mus.numpy(), math.log(2.0), atol=1e-15)
        np.testing.assert_array_equal(bundle.n.numpy(), np.tile([0.0, 0.0, 1.0], (2, 1)))
        self.assertEqual(tuple(bundle.a.shape), (2, 4, 2))
        self.assertEqual(tuple(bundle.b.shape), (2, 8))

    def test_normalizes_normal(self):
        raw = torch.zeros((1, raw_width(4, 8, 2)), dtype=torch.float64)
        raw[0, 6:9] = torch.tensor([0.0, 0.0, 5.0])
        np.testing.assert_allclose(decode_params(raw, 4, 8, 2).n.numpy(), [[0.0, 0.0, 1.0]], atol=1e-15)

    def test_unactivated_slices_round_trip(self):
        generator = torch.Generator().manual_seed(1)
        raw = torch.randn((6, raw_width(128)), generator=generator, dtype=torch.float64)
        bundle = decode_params(raw, 128)
        expected = torch.cat([raw[:, :6], raw[:, 9:9 + 128 + 256]], dim=-1)
        self.assertTrue(torch.equal(flatten_unactivated(bundle), expected))
        self.assertTrue((bundle.lambdas > 0).all() and (bundle.mus > 0).all())
        self.assertLess((bundle.n.norm(dim=-1) - 1.0).abs().max().item(), 1e-6)

    def test_degenerate_normal_has_finite_gradient(self):
        raw = torch.zeros((1, raw_width(1, 2, 2)), dtype=torch.float64, requires_grad=True)
        decode_params(raw, 1, 2, 2).n.sum().backward()
        self.assertTrue(torch.isfinite(raw.grad).all())

    def test_width_mismatch(self):
        with self.assertRaises(WidthMismatch):
            decode_params(torch.zeros((1, 100)), 128)


class TestColor(unittest.TestCase):

    def test_specular_color_zero_net(self):
        mlp = build_mlp(6, 4, 3, 2, dtype=torch.float64)
        with torch.no_grad():
            for layer in mlp.layers:
                layer.weight.zero_()
        c_s = specular_color(mlp, torch.ones((2, 4), dtype=torch.float64), torch.ones((2, 2), dtype=torch.float64))
        np.testing.assert_array_equal(c_s.detach().numpy(), 0.0)
        with torch.no_grad():
            mlp.layers[-1].bias.copy_(torch.tensor([1.0, 2.0, 3.0]))
        c_s = specular_color(mlp, torch.zeros((1, 4), dtype=torch.float64), torch.zeros((1, 2), dtype=torch.float64))
        np.testing.assert_array_equal(c_s.detach().numpy(), [[1.0, 2.0, 3.0]])

    def test_specular_color_matches_dense_matmul(self):
        generator = torch.Generator().manual_seed(2)
        mlp = build_mlp(10, 12, 3, 3, generator=generator, dtype=torch.float64)
        encoding = torch.randn((4, 6), generator=generator, dtype=torch.float64)
        bottleneck = torch.randn((4, 4), generator=generator, dtype=torch.float64)
        expected = dense_forward(mlp, torch.cat([encoding, bottleneck], dim=-1))
        np.testing.assert_allclose(specular_color(mlp, encoding, bottleneck).detach().numpy(), expected,
                                   rtol=1e-12, atol=1e-12)

    def test_final_color(self):
        zeros = torch.zeros((1, 3), dtype=torch.float64)
        np.testing.assert_allclose(final_color(zeros, zeros, zeros).numpy(), 0.5)
        color = final_color(torch.tensor([[1.0, 0.0, -1.0]], dtype=torch.float64),
                            torch.ones((1, 3), dtype=torch.float64), zeros)
        np.testing.assert_allclose(color.numpy(), [[0.731059, 0.5, 0.268941]], atol=1e-6)
        saturated = final_color(torch.full((1, 3), 40.0, dtype=torch.float64), zeros, zeros)
        self.assertGreater(saturated.min().item(), 1.0 - 1e-15)

    def test_positional_encoding_width(self):
        directions = torch.tensor([[0.0, 0.0, 1.0]], dtype=torch.float64)
        encoded = positional_encoding(directions, 4)
        self.assertEqual(tuple(encoded.shape), (1, 3 * (1 + 2 * 4)))
        np.testing.assert_array_equal(encoded[0, :3].numpy(), [0.0, 0.0, 1.0])
        self.assertAlmostEqual(encoded[0, 5].item(), math.sin(1.0), places=15)


if __name__ == '__main__':
    unittest.main()
