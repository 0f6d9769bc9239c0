"""
Module to unittest the time-contrastive baseline
"""

import numpy as np
import torch
from django.test import SimpleTestCase

from agent.baselines.tcn import TcnLearner
from agent.baselines.tcn import TcnNetwork
from agent.baselines.tcn import sample_triplet
from agent.baselines.tcn import tcn_encode
from agent.baselines.tcn import tcn_loss
from test_utils.helper import make_episode
from test_utils.helper import tiny_config
from utils.training.buffers import EpisodeBuffer


# -----------------------------------------------------------------------------
class TestSampleTriplet(SimpleTestCase):

    def test_constraints(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            triplet = sample_triplet(12, 3, rng, min_gap=5)
            self.assertNotEqual(triplet.anchor_view, triplet.positive_view)
            self.assertIn(triplet.positive_view, range(3))
            self.assertGreaterEqual(
                abs(triplet.anchor_step - triplet.negative_step), 5)
            self.assertIn(triplet.anchor_step, range(12))
            self.assertIn(triplet.negative_step, range(12))

    def test_shortest_episode(self):
        triplet = sample_triplet(4, 2, np.random.default_rng(0), min_gap=3)
        self.assertEqual({triplet.anchor_step, triplet.negative_step},
                         {0, 3})

    def test_short_episode(self):
        self.assertIsNone(
            sample_triplet(3, 2, np.random.default_rng(0), min_gap=3))

    def test_single_view(self):
        with self.assertRaises(ValueError):
            sample_triplet(10, 1, np.random.default_rng(0), min_gap=3)


class TestTcnLoss(SimpleTestCase):

    def test_hand_computed(self):
        anchor = torch.tensor([[0.0, 0.0], [0.0, 0.0]])
        positive = torch.tensor([[0.0, 0.0], [1.0, 0.0]])
        negative = torch.tensor([[0.0, 2.0], [0.0, 1.0]])
        # Hinges max(0 - 4 + 0.5, 0) = 0 and max(1 - 1 + 0.5, 0) = 0.5
        loss, active = tcn_loss(anchor, positive, negative, margin=0.5)
        self.assertAlmostEqual(float(loss), 0.25)
        self.assertAlmostEqual(float(active), 0.5)

    def test_satisfied_margin(self):
        loss, active = tcn_loss(torch.zeros(1, 2), torch.zeros(1, 2),
                                torch.ones(1, 2), margin=0.2)
        self.assertEqual(float(loss), 0.0)
        self.assertEqual(float(active), 0.0)

    def test_invalid_margin(self):
        with self.assertRaises(ValueError):
            tcn_loss(torch.zeros(1, 2), torch.zeros(1, 2), torch.zeros(1, 2),
                     margin=0.0)


class TestTcnNetwork(SimpleTestCase):

    def test_shapes(self):
        torch.manual_seed(0)
        network = TcnNetwork(64, (4, 4, 8, 8), width=8, depth=1, heads=2)
        self.assertEqual(network(torch.rand(3, 64, 64, 3)).shape,
                         (3, 17, 8))
        cls, pooled = tcn_encode(network, torch.rand(3, 64, 64, 3))
        self.assertEqual(cls.shape, (3, 8))
        self.assertEqual(pooled.shape, (3, 8))


class TestTcnLearner(SimpleTestCase):

    def setUp(self):
        torch.manual_seed(0)
        self.learner = TcnLearner(tiny_config(representation__kind="tcn"))

    def test_update(self):
        buffer = EpisodeBuffer()
        buffer.add(make_episode(8))
        buffer.add(make_episode(6, seed=1))
        metrics = self.learner.update(buffer)
        self.assertIn("tcn/loss", metrics)
        self.assertGreaterEqual(metrics["tcn/loss"], 0.0)
        self.assertTrue(0.0 <= metrics["tcn/active_fraction"] <= 1.0)
        self.assertEqual(self.learner.updates, 1)

    def test_only_short_episodes(self):
        buffer = EpisodeBuffer()
        buffer.add(make_episode(3))
        metrics = self.learner.update(buffer)
        self.assertEqual(metrics, {"tcn/skipped": 2.0})
        self.assertEqual(self.learner.updates, 0)

    def test_represent(self):
        images = make_episode(4).images
        tokens = self.learner.represent(images, ["front", "wrist"])
        self.assertEqual(tokens.shape, (4, 2, 8))
        self.assertFalse(tokens.requires_grad)
        self.assertEqual(self.learner.tokens_per_view, 1)
