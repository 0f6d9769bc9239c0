"""
Module to unittest learning curves and reconstruction grids
"""

import math
import os
import tempfile

import numpy as np
from django.test import SimpleTestCase
from PIL import Image

from utils.plotting import MASK_GREY
from utils.plotting import aggregate_runs
from utils.plotting import grey_out_masked
from utils.plotting import latest_reconstruction_dump
from utils.plotting import plot_learning_curves
from utils.plotting import reconstruction_grid
from utils.plotting import save_reconstruction_grid
from utils.training.metrics import MetricsWriter


# -----------------------------------------------------------------------------
class TestAggregateRuns(SimpleTestCase):

    def test_shared_steps_only(self):
        tables = [
            {"env_step": [8.0, 16.0, 24.0], "wm/kl": [1.0, 2.0, 3.0]},
            {"env_step": [8.0, 16.0], "wm/kl": [3.0, math.nan]},
            {"env_step": [8.0, 16.0], "wm/kl": [5.0, 4.0]},
        ]
        steps, mean, std = aggregate_runs(tables, "wm/kl")
        np.testing.assert_array_equal(steps, [8.0])
        np.testing.assert_allclose(mean, [3.0])
        np.testing.assert_allclose(std, [math.sqrt(8.0 / 3.0)])

    def test_missing_metric(self):
        with self.assertRaises(ValueError):
            aggregate_runs([{"env_step": [8.0]}], "wm/kl")

    def test_no_shared_step(self):
        tables = [{"env_step": [8.0], "wm/kl": [1.0]},
                  {"env_step": [16.0], "wm/kl": [1.0]}]
        with self.assertRaises(ValueError):
            aggregate_runs(tables, "wm/kl")


class TestPlotLearningCurves(SimpleTestCase):

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tempdir.cleanup()

    def metrics_file(self, name, successes):
        path = os.path.join(self.tempdir.name, name)
        writer = MetricsWriter(path)
        for index, success in enumerate(successes):
            writer.write({"env_step": 8 * (index + 1),
                          "success_rate": success})
        return path

    def test_png_written(self):
        groups = {
            "mvmae": [self.metrics_file("a.csv", [0.0, 0.5]),
                      self.metrics_file("b.csv", [0.5, 1.0])],
            "tcn": [self.metrics_file("c.csv", [0.0, 0.0])],
        }
        path = os.path.join(self.tempdir.name, "curve.png")
        self.assertEqual(
            plot_learning_curves(groups, "success_rate", path), path)
        with Image.open(path) as image:
            self.assertEqual(image.format, "PNG")


class TestReconstructionGrid(SimpleTestCase):

    def test_grey_out_masked(self):
        frame = np.zeros((64, 64, 3))
        keep = np.ones(16, dtype=bool)
        keep[5] = False
        masked = grey_out_masked(frame, keep)
        self.assertTrue((masked[16:32, 16:32] == MASK_GREY).all())
        self.assertEqual(masked.sum(), MASK_GREY * 16 * 16 * 3)
        self.assertEqual(frame.sum(), 0.0)

    def test_layout(self):
        images = np.zeros((1, 2, 3, 64, 64, 3))
        reconstructions = np.ones((1, 2, 3, 64, 64, 3))
        keep = np.ones((1, 2, 3, 16), dtype=bool)
        grid = reconstruction_grid(images, reconstructions, keep)
        self.assertEqual(grid.shape, (256, 192, 3))
        self.assertEqual(grid.dtype, np.uint8)
        # Inputs on even rows, reconstructions on odd rows
        self.assertTrue((grid[:64] == 0).all())
        self.assertTrue((grid[64:128] == 255).all())
        self.assertTrue((grid[128:192] == 0).all())

    def test_saved_dump(self):
        with tempfile.TemporaryDirectory() as run_dir:
            directory = os.path.join(run_dir, "reconstructions")
            os.makedirs(directory)
            for step in (8, 16, 128):
                np.savez_compressed(
                    os.path.join(directory, "{}.npz".format(step)),
                    images=np.zeros((1, 1, 2, 64, 64, 3)),
                    reconstructions=np.ones((1, 1, 2, 64, 64, 3)),
                    keep=np.ones((1, 1, 2, 16), dtype=bool))
            dump = latest_reconstruction_dump(run_dir)
            self.assertEqual(os.path.basename(dump), "128.npz")

            path = os.path.join(run_dir, "grid.png")
            save_reconstruction_grid(dump, path, scale=2)
            with Image.open(path) as image:
                self.assertEqual(image.size, (256, 256))

    def test_no_dump(self):
        with tempfile.TemporaryDirectory() as run_dir:
            self.assertIsNone(latest_reconstruction_dump(run_dir))
