"""
Module to unittest the run config resolution
"""

import logging
import os
import tempfile

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase

from utils.exceptions import ConfigError
from utils.logger_copy import copy_logger_settings
from utils.runconfig.runconfig import RunConfig
from utils.runconfig.runconfig import load_run_config
from utils.runconfig.schema import SCHEMA
from utils.runconfig.schema import format_value
from utils.runconfig.schema import parse_value

# -----------------------------------------------------------------------------
# Logging
# -----------------------------------------------------------------------------

logger = logging.getLogger("testing_control").getChild(__name__)
copy_logger_settings("testing_subject", "utils.runconfig.runconfig",
                     "utils.runconfig.keyvaluefile")


# -----------------------------------------------------------------------------
class TestProfiles(SimpleTestCase):
    """
    The profiles of the settings cover the schema
    """

    def test_every_schema_key_in_both_profiles(self):
        for name, profile in settings.RUN_PROFILES.items():
            self.assertEqual(set(profile), set(SCHEMA), name)

    def test_full_scale_profile(self):
        config = RunConfig.from_profile("paper")
        self.assertEqual(config["env.image_size"], 96)
        self.assertEqual(config["mvmae.batch_size"], 1024)
        self.assertEqual(config["mvmae.mask_ratio"], 0.95)
        self.assertEqual(config["mvmae.warmup_steps"], 2500)
        self.assertEqual(config["trainer.ae_init_steps"], 10000)
        self.assertEqual(config["trainer.wm_batch_size"], 36)
        self.assertEqual(config["trainer.expert_batch_size"], 12)
        self.assertEqual(config["trainer.sequence_length"], 50)
        self.assertEqual(config["trainer.train_ratio"], 1 / 16)
        self.assertEqual(config["trainer.num_envs"], 8)
        self.assertEqual(config["behavior.horizon"], 15)
        self.assertEqual(config["behavior.return_lambda"], 0.95)

    def test_desk_values(self):
        config = RunConfig.from_profile("desk")
        self.assertEqual(config["env.image_size"], 64)
        self.assertEqual(config["mvmae.batch_size"], 64)
        self.assertEqual(config["trainer.wm_batch_size"], 16)
        self.assertEqual(config["trainer.expert_batch_size"], 4)
        self.assertEqual(config["trainer.sequence_length"], 25)
        self.assertEqual(config["trainer.ae_init_steps"], 1000)
        self.assertEqual(config["mvmae.warmup_steps"], 250)

    def test_unknown_profile(self):
        with self.assertRaises(ConfigError) as context:
            RunConfig.from_profile("huge")
        self.assertEqual(context.exception.key, "profile")


class TestValues(SimpleTestCase):
    """
    Parsing, checking and formatting of single values
    """

    def test_config_error_is_improperly_configured(self):
        self.assertTrue(issubclass(ConfigError, ImproperlyConfigured))

    def test_parse_types(self):
        self.assertIs(parse_value("mvmae.view_masking", "False"), False)
        self.assertEqual(parse_value("env.views", "front, wrist"),
                         ["front", "wrist"])
        self.assertEqual(parse_value("mvmae.conv_channels", "1,2, 3,4"),
                         [1, 2, 3, 4])
        self.assertEqual(parse_value("env.control_views", ""), [])
        self.assertEqual(parse_value("mvmae.mask_ratio", "0.5"), 0.5)

    def test_unparsable_value_names_key(self):
        with self.assertRaises(ConfigError) as context:
            parse_value("trainer.seed", "three")
        self.assertEqual(context.exception.key, "trainer.seed")

    def test_format_parse_every_default(self):
        for profile in settings.RUN_PROFILES.values():
            for key, value in profile.items():
                self.assertEqual(parse_value(key, format_value(value)), value,
                                 key)

    def test_out_of_range(self):
        config = RunConfig.from_profile("desk")
        with self.assertRaises(ConfigError) as context:
            config.set("mvmae.mask_ratio", 1.0)
        self.assertEqual(context.exception.key, "mvmae.mask_ratio")

    def test_unknown_choice(self):
        config = RunConfig.from_profile("desk")
        with self.assertRaises(ConfigError):
            config.set("env.randomization", "extreme")

    def test_unknown_key(self):
        config = RunConfig.from_profile("desk")
        with self.assertRaises(ConfigError) as context:
            config.set("mvmae.mask", 0.5)
        self.assertEqual(context.exception.key, "mvmae.mask")


class TestConsistency(SimpleTestCase):

    def test_control_view_must_be_a_view(self):
        config = RunConfig.from_profile("desk")
        with self.assertRaises(ConfigError) as context:
            config.replace({"env.control_views": ["left"]})
        self.assertEqual(context.exception.key, "env.control_views")

    def test_control_views_default_to_views(self):
        config = RunConfig.from_profile("desk")
        self.assertEqual(config.control_views, ["front", "wrist"])
        single = config.replace({"env.control_views": ["front"]})
        self.assertEqual(single.control_views, ["front"])

    def test_heads_must_divide_width(self):
        config = RunConfig.from_profile("desk")
        with self.assertRaises(ConfigError):
            config.replace({"mvmae.encoder_heads": 3})

    def test_behavior_cloning_needs_demonstrations(self):
        config = RunConfig.from_profile("desk")
        with self.assertRaises(ConfigError) as context:
            config.replace({"trainer.expert_demos": 0})
        self.assertEqual(context.exception.key, "behavior.bc_weight")
        config.replace({"trainer.expert_demos": 0, "behavior.bc_weight": 0.0})


class TestLoadRunConfig(SimpleTestCase):
    """
    Resolution order: profile, file, overrides, environment
    """

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tempdir.name, "run.txt")

    def tearDown(self):
        self.tempdir.cleanup()

    def write(self, content):
        with open(self.path, "w") as f:
            f.write(content)

    def test_file_then_overrides(self):
        self.write("# experiment\ntrainer.seed: 5\nmvmae.mask_ratio: 0.5\n")
        config = load_run_config(
            path=self.path, overrides=["mvmae.mask_ratio=0.75"], environ={})
        self.assertEqual(config["trainer.seed"], 5)
        self.assertEqual(config["mvmae.mask_ratio"], 0.75)

    def test_seed_environment_variable_wins(self):
        config = load_run_config(
            overrides=["trainer.seed=3"],
            environ={settings.SEED_ENV_VAR: "11"})
        self.assertEqual(config["trainer.seed"], 11)
        self.assertEqual(config["env.seed"], 11)

    def test_empty_seed_environment_variable_ignored(self):
        config = load_run_config(environ={settings.SEED_ENV_VAR: " "})
        self.assertEqual(config["trainer.seed"], 0)

    def test_missing_file(self):
        with self.assertRaises(ConfigError) as context:
            load_run_config(path=self.path, environ={})
        self.assertEqual(context.exception.key, "config")

    def test_line_without_separator(self):
        self.write("trainer.seed 5\n")
        with self.assertRaises(ConfigError) as context:
            load_run_config(path=self.path, environ={})
        self.assertEqual(context.exception.key, "line 1")

    def test_override_of_unknown_key(self):
        with self.assertRaises(ConfigError) as context:
            load_run_config(overrides=["trainer.speed=3"], environ={})
        self.assertEqual(context.exception.key, "trainer.speed")

    def test_dump_round_trip(self):
        config = load_run_config(
            profile="paper",
            overrides=["env.randomization=medium", "env.views=front,front2"],
            environ={})
        config.save(self.path)
        loaded = RunConfig.load(self.path)
        self.assertEqual(loaded, config)
        self.assertEqual(loaded.profile, "paper")
        self.assertEqual(loaded.dump(), config.dump())
        self.assertEqual(loaded.fingerprint(), config.fingerprint())

    def test_fingerprint_changes_with_value(self):
        config = RunConfig.from_profile("desk")
        other = config.replace({"trainer.seed": 1})
        self.assertNotEqual(config.fingerprint(), other.fingerprint())
