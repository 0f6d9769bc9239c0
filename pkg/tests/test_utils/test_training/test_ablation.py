"""
Module to unittest the ablation studies
"""

import csv
import logging
import os
import shutil
import tempfile
import unittest

import mock
import numpy as np
import torch
from django.test import SimpleTestCase

from agent.mvmae.learner import MvmaeLearner
from agent.mvmae.masking import sample_mask_plans
from agent.mvmae.network import normalize_images
from test_utils.helper import tiny_config
from utils.exceptions import ConfigError
from utils.logger_copy import copy_logger_settings
from utils.runconfig.runconfig import RunConfig
from utils.toyenv.episode import to_float
from utils.training.ablation import ABLATION_FILENAME
from utils.training.ablation import COPY_VIEW_MARGIN
from utils.training.ablation import DATASET_MEAN_MARGIN
from utils.training.ablation import AblationStudy
from utils.training.ablation import HeldOutClips
from utils.training.ablation import baseline_errors
from utils.training.ablation import masked_view_error
from utils.training.ablation import record_clips
from utils.training.ablation import summarize
from utils.training.ablation import variant_config

# -----------------------------------------------------------------------------
# Logging
# -----------------------------------------------------------------------------

logger = logging.getLogger("testing_control").getChild(__name__)
copy_logger_settings("testing_subject", "utils.training.ablation")


def held_out(images, seed=0):
    count, views, frames = images.shape[:3]
    plan = sample_mask_plans(count, views, frames, images.shape[3] // 16,
                             0.75, np.random.default_rng(seed),
                             scope="overall", view_masking=True)
    return HeldOutClips(images=images,
                        rewards=np.zeros((count, frames), dtype=np.float32),
                        plan=plan)


def read_rows(path):
    with open(path, "r", newline="", encoding="utf8") as f:
        return list(csv.DictReader(f))


# -----------------------------------------------------------------------------
class TestBaselineErrors(SimpleTestCase):

    def test_identical_views_copy_exactly(self):
        rng = np.random.default_rng(0)
        frame = rng.integers(0, 256, size=(5, 1, 2, 32, 32, 3),
                             dtype=np.uint8)
        errors = baseline_errors(held_out(np.repeat(frame, 3, axis=1)))
        self.assertEqual(errors["copy_view_mse"], 0.0)
        self.assertGreater(errors["dataset_mean_mse"], 0.0)

    def test_constant_images_match_the_mean(self):
        images = np.full((4, 2, 2, 32, 32, 3), 77, dtype=np.uint8)
        images[:, 1] = 200
        errors = baseline_errors(held_out(images))
        self.assertEqual(errors["dataset_mean_mse"], 0.0)
        self.assertGreater(errors["copy_view_mse"], 0.0)

    def test_against_direct_computation(self):
        rng = np.random.default_rng(1)
        images = rng.integers(0, 256, size=(6, 3, 2, 32, 32, 3),
                              dtype=np.uint8)
        clips = held_out(images, seed=2)
        errors = baseline_errors(clips, batch_size=4)

        x = normalize_images(torch.as_tensor(to_float(images))).numpy()
        mean = x.astype(np.float64).mean(axis=(0, 2))
        mean_error, copy_error, count = 0.0, 0.0, 0
        for n in range(6):
            for t in range(2):
                v = clips.plan.masked_view[n, t]
                hidden = x[n, v, t].astype(np.float64)
                mean_error += ((hidden - mean[v]) ** 2).sum()
                copy_error += ((hidden - x[n, (v + 1) % 3, t]) ** 2).sum()
                count += hidden.size
        self.assertAlmostEqual(errors["dataset_mean_mse"], mean_error / count,
                               places=4)
        self.assertAlmostEqual(errors["copy_view_mse"], copy_error / count,
                               places=4)


class TestHeldOutClips(SimpleTestCase):

    def test_record_clips(self):
        config = tiny_config()
        clips = record_clips(config, 4)
        self.assertEqual(clips.images.shape, (4, 2, 2, 64, 64, 3))
        self.assertTrue((clips.plan.masked_view >= 0).all())
        again = record_clips(config, 4)
        np.testing.assert_array_equal(clips.images, again.images)
        np.testing.assert_array_equal(clips.plan.keep, again.plan.keep)

    def test_single_view_rejected(self):
        with self.assertRaises(ConfigError):
            record_clips(tiny_config(**{"env__views": ["front"]}), 2)

    def test_single_frames(self):
        clips = record_clips(tiny_config(), 3)
        frames = clips.single_frames()
        self.assertEqual(frames.images.shape, (6, 2, 1, 64, 64, 3))
        np.testing.assert_array_equal(frames.images[3, :, 0],
                                      clips.images[1, :, 1])
        np.testing.assert_array_equal(frames.plan.keep[3, :, 0],
                                      clips.plan.keep[1, :, 1])
        self.assertEqual(frames.plan.masked_view[3, 0],
                         clips.plan.masked_view[1, 1])

    def test_masked_view_error(self):
        clips = record_clips(tiny_config(), 4)
        for config in (tiny_config(),
                       tiny_config(mvmae__video_autoencoding=False)):
            learner = MvmaeLearner(config, seed=0)
            error = masked_view_error(learner.network, clips, batch_size=3)
            self.assertTrue(np.isfinite(error))
            self.assertGreater(error, 0.0)


class TestVariants(SimpleTestCase):

    def test_variant_config(self):
        config = variant_config(tiny_config(), "uniform_masking", 5)
        self.assertFalse(config["mvmae.view_masking"])
        self.assertEqual(config.seed, 5)
        self.assertEqual(config["env.seed"], 5)
        self.assertEqual(variant_config(tiny_config(), "no_bc", 0)
                         ["behavior.bc_weight"], 0.0)

    def test_unknown_variant(self):
        with self.assertRaises(ConfigError):
            variant_config(tiny_config(), "no_encoder", 0)

    def test_summarize(self):
        rows = [
            {"variant": "baseline", "masked_view_mse": 1.0},
            {"variant": "baseline", "masked_view_mse": 3.0},
            {"variant": "no_bc", "masked_view_mse": None,
             "success_rate": 0.5},
        ]
        lines = summarize(rows)
        self.assertEqual(len(lines), 2)
        self.assertIn("baseline (2 seeds), masked_view_mse 2.0000", lines[0])
        self.assertIn("success_rate 0.5000", lines[1])
        self.assertNotIn("masked_view_mse", lines[1])


class TestStudies(SimpleTestCase):
    """
    Both studies on miniature configs
    """

    def setUp(self):
        self.tempdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def test_reconstruction(self):
        study = AblationStudy(tiny_config(), self.tempdir, seeds=[0, 1],
                              clip_count=4, device="cpu")
        rows = study.reconstruction(updates=2, eval_every=1,
                                    train_episodes=2)
        self.assertEqual([(row["variant"], row["seed"]) for row in rows],
                         [("baseline", 0), ("baseline", 1),
                          ("uniform_masking", 0), ("uniform_masking", 1)])
        self.assertTrue(all(row["updates"] == 2 for row in rows))

        written = read_rows(os.path.join(self.tempdir, ABLATION_FILENAME))
        self.assertEqual(len(written), 4)
        self.assertEqual(written[0]["study"], "reconstruction")
        for row in written:
            self.assertGreater(float(row["masked_view_mse"]), 0.0)
            self.assertGreater(float(row["dataset_mean_mse"]), 0.0)
            self.assertEqual(row["success_rate"], "")

    def test_control(self):
        study = AblationStudy(tiny_config(), self.tempdir, clip_count=4,
                              device="cpu")
        rows = study.control(("baseline", "no_bc"))
        self.assertEqual([row["variant"] for row in rows],
                         ["baseline", "no_bc"])
        for row in rows:
            self.assertEqual(row["env_steps"], 16)
            self.assertTrue(0.0 <= row["success_rate"] <= 1.0)
            self.assertTrue(np.isfinite(row["masked_view_mse"]))
        self.assertTrue(os.path.isdir(os.path.join(self.tempdir,
                                                   "no_bc-seed0")))
        written = read_rows(os.path.join(self.tempdir, ABLATION_FILENAME))
        self.assertEqual([row["study"] for row in written],
                         ["control", "control"])

    def test_unknown_variant_fails_before_training(self):
        study = AblationStudy(tiny_config(), self.tempdir, clip_count=4)
        with self.assertRaises(ConfigError):
            study.reconstruction(("baseline", "no_encoder"), updates=1)
        self.assertFalse(os.path.isfile(os.path.join(self.tempdir,
                                                     ABLATION_FILENAME)))

    def test_stop_signal(self):
        killer = mock.Mock(kill_now=True)
        study = AblationStudy(tiny_config(), self.tempdir, clip_count=4,
                              killer=killer)
        self.assertEqual(study.reconstruction(updates=1, train_episodes=1), [])


@unittest.skipUnless(os.environ.get("MVMWM_SLOW_TESTS"),
                     "set MVMWM_SLOW_TESTS=1 to train desk-scale autoencoders")
class TestDeskReconstruction(SimpleTestCase):
    """
    Desk-scale reconstruction of hidden views, three seeds per variant
    """

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tempdir = tempfile.mkdtemp()
        config = RunConfig.from_profile("desk").replace({"env.task": "reach"})
        study = AblationStudy(config, cls.tempdir, seeds=[0, 1, 2],
                              clip_count=500)
        cls.rows = study.reconstruction(("baseline", "uniform_masking"),
                                        updates=3000)
        logger.info("\n".join(summarize(cls.rows)))

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tempdir)
        super().tearDownClass()

    def mean_error(self, variant):
        return np.mean([row["masked_view_mse"] for row in self.rows
                        if row["variant"] == variant])

    def test_beats_untrained_predictors(self):
        row = self.rows[0]
        error = self.mean_error("baseline")
        self.assertLessEqual(
            error, (1.0 - DATASET_MEAN_MARGIN) * row["dataset_mean_mse"])
        self.assertLessEqual(
            error, (1.0 - COPY_VIEW_MARGIN) * row["copy_view_mse"])

    def test_view_masking_beats_uniform_masking(self):
        self.assertLess(self.mean_error("baseline"),
                        self.mean_error("uniform_masking"))
