#!/usr/bin/python3
import json
import os
import tempfile
import unittest

import imageio.v2 as imageio
import numpy as np

from app.exceptions import DatasetError
from app.io import load_image, load_pose, save_depth, save_image
from app.io.images import to_uint8


class TestImages(unittest.TestCase):

    def setUp(self):
        self.tmp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp_dir.cleanup()

    def _path(self, name):
        return os.path.join(self.tmp_dir.name, name)

    def test_to_uint8_rounds_and_clips(self):
        np.testing.assert_array_equal(to_uint8(np.array([-0.5, 0.0, 0.5, 1.0, 2.0])), [0, 0, 128, 255, 255])

    def test_png_round_trip(self):
        image = np.random.default_rng(0).integers(0, 256, size=(5, 7, 3)) / 255.0
        save_image(self._path("nested/render.png"), image)
        loaded = load_image(self._path("nested/render.png"))
        self.assertEqual(loaded.shape, (5, 7, 3))
        np.testing.assert_allclose(loaded, image, atol=1e-12)

    def test_depth_map_is_sixteen_bit(self):
        depth = np.array([[0.0, 1.0], [2.0, 4.0]])
        save_depth(self._path("depth.png"), depth)
        raw = np.asarray(imageio.imread(self._path("depth.png"))).astype(np.int64)
        np.testing.assert_array_equal(raw, [[0, 16384], [32768, 65535]])
        np.testing.assert_allclose(load_image(self._path("depth.png"))[..., 0], depth / 4.0, atol=1e-4)

    def test_alpha_is_composited(self):
        rgba = np.zeros((2, 2, 4), dtype=np.uint8)
        rgba[0, 0] = (0, 0, 0, 0)
        rgba[0, 1] = (255, 0, 0, 255)
        rgba[1, 0] = (0, 0, 255, 51)
        imageio.imwrite(self._path("rgba.png"), rgba)
        white = load_image(self._path("rgba.png"))
        np.testing.assert_allclose(white[0, 0], [1.0, 1.0, 1.0])
        np.testing.assert_allclose(white[0, 1], [1.0, 0.0, 0.0])
        np.testing.assert_allclose(white[1, 0], [0.8, 0.8, 1.0], atol=1e-12)
        black = load_image(self._path("rgba.png"), background=(0.0, 0.0, 0.0))
        np.testing.assert_allclose(black[0, 0], [0.0, 0.0, 0.0])

    def test_missing_image(self):
        with self.assertRaises(DatasetError):
            load_image(self._path("absent.png"))

    def test_load_pose(self):
        pose = np.eye(4)
        pose[:3, 3] = (0.0, -4.0, 1.0)
        with open(self._path("pose.json"), "w") as f_out:
            json.dump({"transform_matrix": pose.tolist(), "camera_angle_x": 0.7, "width": 40, "height": 30}, f_out)
        camera = load_pose(self._path("pose.json"))
        self.assertEqual((camera.width, camera.height), (40, 30))
        np.testing.assert_array_equal(camera.pose, pose)

    def test_malformed_pose(self):
        with open(self._path("pose.json"), "w") as f_out:
            json.dump({"transform_matrix": np.eye(4).tolist(), "width": 4, "height": 4}, f_out)
        with self.assertRaises(DatasetError):
            load_pose(self._path("pose.json"))
        with self.assertRaises(DatasetError):
            load_pose(self._path("absent.json"))


if __name__ == '__main__':
    unittest.main()
