"""
Module to unittest the checkpoint directories
"""

import logging
import os
import tempfile

import torch
from django.test import SimpleTestCase

from test_utils.helper import tiny_config
from utils.logger_copy import copy_logger_settings
from utils.runconfig.runconfig import RunConfig
from utils.training.checkpoint import CHECKPOINT_DIRNAME
from utils.training.checkpoint import LATEST_FILENAME
from utils.training.checkpoint import find_checkpoint
from utils.training.checkpoint import latest_checkpoint
from utils.training.checkpoint import load_checkpoint
from utils.training.checkpoint import save_checkpoint

# -----------------------------------------------------------------------------
# Logging
# -----------------------------------------------------------------------------

logger = logging.getLogger("testing_control").getChild(__name__)
copy_logger_settings("testing_subject", "utils.training.checkpoint")


# -----------------------------------------------------------------------------
class TestCheckpoint(SimpleTestCase):

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()
        self.run_dir = self.tempdir.name
        self.config = tiny_config()

    def tearDown(self):
        self.tempdir.cleanup()

    def save(self, env_steps, updates=3):
        return save_checkpoint(
            self.run_dir, env_steps, updates,
            parameters={"weights": torch.arange(4.0) * env_steps},
            normalizer={"mean": 0.5, "count": env_steps},
            buffers={"replay": {"total_steps": env_steps}},
            config=self.config)

    # -------------------------------------------------------------------------
    def test_saved_parts_are_loaded(self):
        directory = self.save(16)
        self.assertEqual(directory,
                         os.path.join(self.run_dir, CHECKPOINT_DIRNAME, "16"))
        checkpoint = load_checkpoint(directory)
        self.assertTrue(torch.equal(checkpoint["parameters"]["weights"],
                                    torch.arange(4.0) * 16))
        self.assertEqual(checkpoint["normalizer"], {"mean": 0.5, "count": 16})
        self.assertEqual(checkpoint["buffers"]["replay"]["total_steps"], 16)
        self.assertEqual(checkpoint["step"], {
            "env_steps": 16, "updates": 3,
            "config_fingerprint": self.config.fingerprint()})
        self.assertEqual(RunConfig.load(checkpoint["config_path"]),
                         self.config)

    def test_latest_follows_newest_save(self):
        self.save(16)
        newest = self.save(32)
        self.assertEqual(latest_checkpoint(self.run_dir), newest)
        self.assertEqual(find_checkpoint(self.run_dir), newest)

    def test_find_accepts_checkpoint_directory(self):
        directory = self.save(8)
        self.assertEqual(find_checkpoint(directory), directory)

    def test_no_checkpoint(self):
        self.assertIsNone(latest_checkpoint(self.run_dir))
        with self.assertRaises(FileNotFoundError):
            find_checkpoint(self.run_dir)

    def test_dangling_pointer(self):
        os.makedirs(os.path.join(self.run_dir, CHECKPOINT_DIRNAME))
        with open(os.path.join(self.run_dir, CHECKPOINT_DIRNAME,
                               LATEST_FILENAME), "w") as f:
            f.write("64\n")
        self.assertIsNone(latest_checkpoint(self.run_dir))
