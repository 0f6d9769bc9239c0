"""
Module to unittest the autoencoder training wrapper
"""

import numpy as np
import torch
from django.test import SimpleTestCase

from agent.mvmae.learner import MvmaeLearner
from agent.mvmae.learner import linear_warmup
from test_utils.helper import make_episode
from test_utils.helper import tiny_config
from utils.training.buffers import EpisodeBuffer


# -----------------------------------------------------------------------------
class TestLinearWarmup(SimpleTestCase):

    def test_factors(self):
        factor = linear_warmup(4)
        self.assertEqual([factor(step) for step in range(6)],
                         [0.25, 0.5, 0.75, 1.0, 1.0, 1.0])

    def test_no_warmup(self):
        self.assertEqual(linear_warmup(0)(0), 1.0)


class TestMvmaeLearner(SimpleTestCase):

    def setUp(self):
        torch.manual_seed(0)
        self.learner = MvmaeLearner(tiny_config(mvmae__warmup_steps=2))
        self.buffer = EpisodeBuffer()
        self.buffer.add(make_episode(5))

    def test_update(self):
        metrics = self.learner.update(self.buffer)
        for key in ("mvmae/loss", "mvmae/pixel_mse", "mvmae/masked_view_mse",
                    "mvmae/reward_mse", "mvmae/lr"):
            self.assertIn(key, metrics)
        self.assertEqual(self.learner.updates, 1)

    def test_warmup_reaches_base_rate(self):
        base = self.learner.optimizer.defaults["lr"]
        self.assertAlmostEqual(self.learner.scheduler.get_last_lr()[0],
                               base / 2)
        self.learner.update(self.buffer)
        self.assertAlmostEqual(self.learner.update(self.buffer)["mvmae/lr"],
                               base)

    def test_empty_buffer(self):
        self.assertEqual(self.learner.update(EpisodeBuffer()), {})
        self.assertEqual(self.learner.updates, 0)

    def test_parameters_change(self):
        before = self.learner.network.patch_head.weight.detach().clone()
        self.learner.update(self.buffer)
        self.assertFalse(torch.equal(before,
                                     self.learner.network.patch_head.weight))

    def test_represent(self):
        images = make_episode(3).images
        tokens = self.learner.represent(images, ["front", "wrist"])
        self.assertEqual(tokens.shape, (3, 32, 8))
        tokens = self.learner.represent(images[:, 1:], ["wrist"])
        self.assertEqual(tokens.shape, (3, 16, 8))
        self.assertEqual(self.learner.tokens_per_view, 16)
        self.assertEqual(self.learner.token_width, 8)

    def test_reconstruct(self):
        batch = self.buffer.sample_clips(2, 2, np.random.default_rng(0))
        dump = self.learner.reconstruct(batch.images, batch.rewards)
        self.assertEqual(dump["images"].shape, (2, 2, 2, 64, 64, 3))
        self.assertEqual(dump["reconstructions"].shape, (2, 2, 2, 64, 64, 3))
        self.assertEqual(dump["keep"].shape, (2, 2, 2, 16))
        self.assertEqual(dump["predicted_rewards"].shape, (2, 2))
        self.assertTrue((dump["reconstructions"] >= 0.0).all())
        self.assertTrue((dump["reconstructions"] <= 1.0).all())

    def test_state_dict(self):
        self.learner.update(self.buffer)
        torch.manual_seed(1)
        other = MvmaeLearner(tiny_config(mvmae__warmup_steps=2), seed=5)
        other.load_state_dict(self.learner.state_dict())
        self.assertEqual(other.updates, 1)
        self.assertTrue(torch.equal(other.network.view_embed,
                                    self.learner.network.view_embed))
        self.assertEqual(other.rng.integers(1000),
                         self.learner.rng.integers(1000))
