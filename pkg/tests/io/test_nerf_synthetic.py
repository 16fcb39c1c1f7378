#!/usr/bin/python3
import json
import os
import tempfile
import unittest

import imageio.v2 as imageio
import numpy as np

from app.exceptions import DatasetError
from app.io import load_nerf_synthetic, load_nerf_synthetic_scene
from app.io.nerf_synthetic import downsample


LEGO_DIR = os.path.join("data", "nerf_synthetic", "lego")


def write_scene(directory, splits=("train",), size=4):
    """
    two RGBA frames per split: an identity pose and a translated one
    """
    translated = np.eye(4)
    translated[:3, 3] = (0.5, -1.0, 4.0)
    for split in splits:
        os.makedirs(os.path.join(directory, split), exist_ok=True)
        frames = []
        for index, pose in enumerate((np.eye(4), translated)):
            rgba = np.full((size, size, 4), 255, dtype=np.uint8)
            rgba[..., :3] = (0, 128, 255)
            rgba[0, 0] = (10, 20, 30, 0)
            imageio.imwrite(os.path.join(directory, split, f"r_{index}.png"), rgba)
            frames.append({"file_path": f"./{split}/r_{index}", "transform_matrix": pose.tolist()})
        with open(os.path.join(directory, f"transforms_{split}.json"), "w") as f_out:
            json.dump({"camera_angle_x": 0.6911112070083618, "frames": frames}, f_out)


class TestNerfSynthetic(unittest.TestCase):

    def setUp(self):
        self.tmp_dir = tempfile.TemporaryDirectory()
        self.directory = self.tmp_dir.name

    def tearDown(self):
        self.tmp_dir.cleanup()

    def test_fixture_frames(self):
        write_scene(self.directory)
        dataset = load_nerf_synthetic(self.directory, "train")
        self.assertEqual(len(dataset), 2)
        self.assertEqual(dataset.splits, ["train", "train"])
        np.testing.assert_array_equal(dataset.cameras[0].pose[:3, 3], [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(dataset.cameras[1].pose[:3, 3], [0.5, -1.0, 4.0])
        self.assertAlmostEqual(dataset.cameras[0].fov_x, 0.6911112070083618)
        self.assertEqual((dataset.cameras[0].width, dataset.cameras[0].height), (4, 4))

    def test_transparent_pixel_takes_background(self):
        write_scene(self.directory)
        image = load_nerf_synthetic(self.directory, "train").images[0]
        np.testing.assert_array_equal(image[0, 0], [1.0, 1.0, 1.0])
        np.testing.assert_allclose(image[1, 1], [0.0, 128 / 255.0, 1.0])
        self.assertTrue(((image >= 0.0) & (image <= 1.0)).all())
        black = load_nerf_synthetic(self.directory, "train", background=(0.0, 0.0, 0.0)).images[0]
        np.testing.assert_array_equal(black[0, 0], [0.0, 0.0, 0.0])

    def test_downsampled_resolution(self):
        write_scene(self.directory)
        dataset = load_nerf_synthetic(self.directory, "train", resolution=2)
        self.assertEqual(dataset.images[0].shape, (2, 2, 3))
        self.assertEqual(dataset.cameras[0].width, 2)
        np.testing.assert_allclose(dataset.images[0][0, 0], downsample(load_nerf_synthetic(
            self.directory, "train").images[0], 2)[0, 0])

    def test_resolution_must_divide_width(self):
        write_scene(self.directory)
        self.assertEqual(load_nerf_synthetic(self.directory, "train", resolution=4).images[0].shape, (4, 4, 3))
        for resolution in (3, 8):
            with self.assertRaises(DatasetError):
                load_nerf_synthetic(self.directory, "train", resolution=resolution)

    def test_scene_merges_splits(self):
        write_scene(self.directory, splits=("train", "test"))
        dataset = load_nerf_synthetic_scene(self.directory)
        self.assertEqual(dataset.view_indices("train"), [0, 1])
        self.assertEqual(dataset.view_indices("test"), [2, 3])
        self.assertEqual(dataset.view_indices("val"), [])

    def test_missing_transforms(self):
        with self.assertRaises(DatasetError):
            load_nerf_synthetic(self.directory, "train")

    def test_missing_frame(self):
        write_scene(self.directory)
        os.remove(os.path.join(self.directory, "train", "r_1.png"))
        with self.assertRaises(DatasetError):
            load_nerf_synthetic(self.directory, "train")

    def test_malformed_json(self):
        with open(os.path.join(self.directory, "transforms_train.json"), "w") as f_out:
            f_out.write("{\"camera_angle_x\": ")
        with self.assertRaises(DatasetError):
            load_nerf_synthetic(self.directory, "train")

    def test_non_square_matrix(self):
        write_scene(self.directory)
        path = os.path.join(self.directory, "transforms_train.json")
        with open(path) as f_in:
            meta = json.load(f_in)
        meta["frames"][1]["transform_matrix"] = np.eye(4)[:3].tolist()
        with open(path, "w") as f_out:
            json.dump(meta, f_out)
        with self.assertRaises(DatasetError):
            load_nerf_synthetic(self.directory, "train")

    @unittest.skipUnless(os.path.isdir(LEGO_DIR), "lego scene not downloaded")
    def test_lego_training_split(self):
        dataset = load_nerf_synthetic(LEGO_DIR, "train")
        self.assertEqual(len(dataset), 100)
        self.assertEqual(dataset.images[0].shape, (800, 800, 3))


if __name__ == '__main__':
    unittest.main()
