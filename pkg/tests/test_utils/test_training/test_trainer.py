"""
Module to unittest the training loop on a miniature run
"""

import logging
import os
import shutil
import tempfile

import mock
import numpy as np
import torch
from django.test import SimpleTestCase

from test_utils.helper import assert_same_state
from test_utils.helper import make_episode
from test_utils.helper import tiny_config
from utils.exceptions import DemonstrationFormatError
from utils.exceptions import NonFiniteLossError
from utils.exceptions import TrainingAborted
from utils.logger_copy import copy_logger_settings
from utils.runconfig.runconfig import RunConfig
from utils.toyenv.demos import export_episodes
from utils.training.checkpoint import BUFFER_FILENAME
from utils.training.checkpoint import CONFIG_FILENAME as CHECKPOINT_CONFIG
from utils.training.checkpoint import NORMALIZER_FILENAME
from utils.training.checkpoint import STEP_FILENAME
from utils.training.checkpoint import find_checkpoint
from utils.training.checkpoint import load_checkpoint
from utils.training.metrics import EVAL_FILENAME
from utils.training.metrics import METRICS_FILENAME
from utils.training.metrics import read_metrics
from utils.training.trainer import CONFIG_FILENAME
from utils.training.trainer import RECONSTRUCTION_DIRNAME
from utils.training.trainer import Trainer
from utils.training.trainer import load_agent
from utils.training.trainer import match_views

# -----------------------------------------------------------------------------
# Logging
# -----------------------------------------------------------------------------

logger = logging.getLogger("testing_control").getChild(__name__)
copy_logger_settings("testing_subject", "utils.training.trainer")


# -----------------------------------------------------------------------------
class TestTrainingRun(SimpleTestCase):
    """
    One complete run of 16 environment steps, shared by the tests
    """

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tempdir = tempfile.mkdtemp()
        cls.run_dir = os.path.join(cls.tempdir, "run")
        cls.config = tiny_config()
        trainer = Trainer(cls.config, cls.run_dir, device="cpu")
        trainer.prefill_from_config()
        cls.expert_steps = trainer.expert.num_steps
        cls.result = trainer.train()
        cls.trainer = trainer

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tempdir)
        super().tearDownClass()

    # -------------------------------------------------------------------------
    def test_counters(self):
        self.assertEqual(self.result["env_steps"], 16)
        self.assertEqual(self.result["updates"], 4)
        self.assertEqual(self.trainer.ae_updates, 2)
        self.assertGreater(self.expert_steps, 0)

    def test_run_directory(self):
        self.assertEqual(RunConfig.load(
            os.path.join(self.run_dir, CONFIG_FILENAME)), self.config)
        metrics = read_metrics(os.path.join(self.run_dir, METRICS_FILENAME))
        self.assertEqual(metrics["env_step"], [8.0, 16.0])
        self.assertEqual(metrics["update"], [2.0, 4.0])
        self.assertTrue(np.isfinite(metrics["wm/kl"]).all())
        self.assertTrue(np.isfinite(metrics["actor/bc_nll"]).all())
        evaluations = read_metrics(os.path.join(self.run_dir, EVAL_FILENAME))
        self.assertEqual(evaluations["env_step"], [16.0])
        self.assertTrue(0.0 <= evaluations["success_rate"][0] <= 1.0)
        self.assertTrue(os.path.isfile(os.path.join(
            self.run_dir, RECONSTRUCTION_DIRNAME, "16.npz")))

    def test_checkpoint(self):
        directory = find_checkpoint(self.run_dir)
        self.assertEqual(directory, self.result["checkpoint"])
        self.assertEqual(os.path.basename(directory), "16")

    def test_load_agent(self):
        config, components, step = load_agent(self.run_dir, device="cpu")
        self.assertEqual(config, self.config)
        self.assertEqual(step["env_steps"], 16)
        self.assertEqual(step["updates"], 4)
        for a, b in zip(components.behavior.actor.parameters(),
                        self.trainer.components.behavior.actor.parameters()):
            self.assertTrue(torch.equal(a, b))

    def test_restore(self):
        trainer = Trainer(self.config,
                          os.path.join(self.tempdir, "resumed"),
                          device="cpu")
        trainer.restore(find_checkpoint(self.run_dir))
        self.assertEqual(trainer.env_steps, 16)
        self.assertEqual(trainer.updates, 4)
        self.assertEqual(trainer.ae_updates, 2)
        self.assertEqual(trainer.normalizer.count,
                         self.trainer.normalizer.count)
        scale = trainer.normalizer.scale
        trainer.prefill_from_config()
        self.assertEqual(trainer.normalizer.scale, scale)

    def test_checkpoint_round_trip(self):
        original = find_checkpoint(self.run_dir)
        trainer = Trainer(self.config,
                          os.path.join(self.tempdir, "round_trip"),
                          device="cpu")
        trainer.restore(original)
        copy = trainer.save_checkpoint()

        for name in (NORMALIZER_FILENAME, CHECKPOINT_CONFIG, STEP_FILENAME):
            with open(os.path.join(original, name), "rb") as f:
                expected = f.read()
            with open(os.path.join(copy, name), "rb") as f:
                self.assertEqual(f.read(), expected, name)

        first, second = load_checkpoint(original), load_checkpoint(copy)
        assert_same_state(self, first["parameters"], second["parameters"],
                          "parameters")
        # Buffers are refilled on resume, only the totals carry over
        for key in ("total_episodes", "total_steps", "capacity"):
            self.assertEqual(second["buffers"]["replay"][key],
                             first["buffers"]["replay"][key], key)
        self.assertTrue(os.path.isfile(os.path.join(copy, BUFFER_FILENAME)))


class TestTrainerParts(SimpleTestCase):

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()
        self.run_dir = self.tempdir.name

    def tearDown(self):
        self.tempdir.cleanup()

    def test_stop_signal_before_first_step(self):
        config = tiny_config(trainer__expert_demos=0,
                             behavior__bc_weight=0.0)
        trainer = Trainer(config, self.run_dir, device="cpu",
                          killer=mock.Mock(kill_now=True))
        result = trainer.train()
        self.assertEqual(result["env_steps"], 0)
        self.assertEqual(trainer.ae_updates, 0)
        self.assertIsNotNone(result["checkpoint"])

    def test_non_finite_loss_aborts(self):
        trainer = Trainer(tiny_config(), self.run_dir, device="cpu")
        trainer.prefill([make_episode(6)])
        failure = NonFiniteLossError("wm", {"wm/kl": float("nan")})
        with mock.patch.object(Trainer, "update_round",
                               side_effect=failure):
            with self.assertRaises(TrainingAborted) as context:
                trainer.train()
        self.assertIsNone(context.exception.checkpoint)

    def test_world_model_update_with_expert(self):
        trainer = Trainer(tiny_config(), self.run_dir, device="cpu")
        trainer.prefill([make_episode(6), make_episode(5, seed=1)])
        metrics = trainer.world_model_update()
        self.assertIn("wm/kl", metrics)
        self.assertTrue(np.isfinite(metrics["actor/bc_nll"]))
        self.assertTrue(np.isfinite(metrics["critic/loss"]))

    def test_representation_frozen_during_world_model_update(self):
        trainer = Trainer(tiny_config(), self.run_dir, device="cpu")
        trainer.prefill([make_episode(6), make_episode(5, seed=1)])
        components = trainer.components
        frozen = {name: value.detach().clone() for name, value in
                  components.representation.network.named_parameters()}
        trained = [value.detach().clone() for value in
                   components.world_model.network.parameters()]

        trainer.world_model_update()

        for name, value in \
                components.representation.network.named_parameters():
            self.assertTrue(torch.equal(value, frozen[name]), name)
            self.assertIsNone(value.grad, name)
        self.assertFalse(all(
            torch.equal(before, after) for before, after in
            zip(trained, components.world_model.network.parameters())))

    def test_world_model_update_without_data(self):
        trainer = Trainer(tiny_config(), self.run_dir, device="cpu")
        self.assertEqual(trainer.world_model_update(), {})

    def test_prefill_normalizes_demo_rewards(self):
        trainer = Trainer(tiny_config(), self.run_dir, device="cpu")
        trainer.prefill([make_episode(6)])
        self.assertEqual(trainer.normalizer.count, 5)
        self.assertEqual(len(trainer.replay), 1)
        self.assertEqual(len(trainer.expert), 1)

    def test_demo_directory(self):
        demo_dir = os.path.join(self.run_dir, "demos")
        export_episodes([make_episode(5, side=64, seed=s)
                         for s in range(2)], demo_dir)
        trainer = Trainer(tiny_config(), os.path.join(self.run_dir, "run"),
                          device="cpu")
        trainer.prefill_from_config(demo_dir)
        self.assertEqual(len(trainer.expert), 1)

        trainer = Trainer(tiny_config(trainer__expert_demos=3),
                          os.path.join(self.run_dir, "run"), device="cpu")
        with self.assertRaises(DemonstrationFormatError):
            trainer.prefill_from_config(demo_dir)


class TestReproducibility(SimpleTestCase):
    """
    Two runs with the same seed train the same parameters
    """

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tempdir.cleanup()

    def run_once(self, name):
        run_dir = os.path.join(self.tempdir.name, name)
        trainer = Trainer(tiny_config(), run_dir, device="cpu")
        trainer.prefill_from_config()
        trainer.train()
        return trainer, read_metrics(os.path.join(run_dir, METRICS_FILENAME))

    def test_same_seed_same_run(self):
        first, first_metrics = self.run_once("first")
        second, second_metrics = self.run_once("second")
        assert_same_state(self, first.components.state_dict(),
                          second.components.state_dict(), "components")
        self.assertEqual(sorted(first_metrics), sorted(second_metrics))
        for key in first_metrics:
            if key == "fps":
                continue
            np.testing.assert_array_equal(first_metrics[key],
                                          second_metrics[key], err_msg=key)


class TestMatchViews(SimpleTestCase):

    def test_views_reordered(self):
        episode = make_episode(3, views=("wrist", "left", "front"), side=16)
        matched, = match_views([episode], ["front", "wrist"])
        self.assertEqual(matched.views, ("front", "wrist"))
        np.testing.assert_array_equal(matched.images[:, 0],
                                      episode.images[:, 2])

    def test_missing_view(self):
        episode = make_episode(3, views=("front",), side=16)
        with self.assertRaises(DemonstrationFormatError):
            match_views([episode], ["front", "wrist"])
